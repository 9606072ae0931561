#include "tracelens/gaussian_process.hpp"

#include "nelder_mead.hpp"
#include "tracelens/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace tracelens {

namespace {

constexpr double kHuge = 1e300;

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

struct GaussianProcess::Impl {
    GpOptions options;
    Eigen::MatrixXd x;
    Eigen::VectorXd y;  // standardized
    double y_mean = 0.0;
    double y_scale = 1.0;
    GpHyperparameters hp;
    double lml = -kHuge;
    Eigen::LLT<Eigen::MatrixXd> llt;
    Eigen::VectorXd alpha;

    // theta = [log signal, log length_1..d, log noise]
    std::vector<double> lower() const {
        std::vector<double> v{std::log(options.min_signal)};
        v.insert(v.end(), static_cast<std::size_t>(x.cols()), std::log(options.min_length));
        v.push_back(std::log(options.min_noise));
        return v;
    }
    std::vector<double> upper() const {
        std::vector<double> v{std::log(options.max_signal)};
        v.insert(v.end(), static_cast<std::size_t>(x.cols()), std::log(options.max_length));
        v.push_back(std::log(options.max_noise));
        return v;
    }

    Eigen::MatrixXd kernel(const std::vector<double>& theta) const {
        const Eigen::Index n = x.rows(), d = x.cols();
        const double s2 = std::exp(theta[0]);
        Eigen::ArrayXd inv_l2(d);
        for (Eigen::Index j = 0; j < d; ++j) inv_l2[j] = std::exp(-2.0 * theta[static_cast<std::size_t>(j) + 1]);
        Eigen::MatrixXd k(n, n);
        for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = a; b < n; ++b) {
                const double r2 = ((x.row(a) - x.row(b)).array().square() * inv_l2.transpose()).sum();
                k(a, b) = k(b, a) = s2 * std::exp(-0.5 * r2);
            }
        return k;
    }

    // Factorizes K + (noise + jitter) I, escalating the jitter on failure.
    bool factorize(const std::vector<double>& theta, Eigen::LLT<Eigen::MatrixXd>& out) const {
        const Eigen::MatrixXd k = kernel(theta);
        const double s2 = std::exp(theta[0]);
        const double noise = std::exp(theta.back());
        double jitter = options.relative_jitter * s2;
        for (int attempt = 0; attempt < 6; ++attempt, jitter *= 10) {
            Eigen::MatrixXd kn = k;
            kn.diagonal().array() += noise + jitter;
            out.compute(kn);
            if (out.info() == Eigen::Success) return true;
        }
        return false;
    }

    double lml_of(const std::vector<double>& theta) const {
        Eigen::LLT<Eigen::MatrixXd> f;
        if (!factorize(theta, f)) return -kHuge;
        const Eigen::VectorXd a = f.solve(y);
        const double log_det = 2.0 * f.matrixL().toDenseMatrix().diagonal().array().log().sum();
        return -0.5 * y.dot(a) - 0.5 * log_det - 0.5 * static_cast<double>(y.size()) * std::log(2 * std::numbers::pi);
    }
};

GaussianProcess::GaussianProcess(GpOptions options) : impl_(std::make_unique<Impl>()) {
    impl_->options = options;
}
GaussianProcess::~GaussianProcess() = default;
GaussianProcess::GaussianProcess(GaussianProcess&&) noexcept = default;
GaussianProcess& GaussianProcess::operator=(GaussianProcess&&) noexcept = default;

void GaussianProcess::fit(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys,
                          std::uint64_t seed) {
    detail::quiet_gsl();
    if (xs.empty() || xs.size() != ys.size()) throw InvalidArgument("gp-input", "GP needs matching non-empty x and y");
    const std::size_t d = xs.front().size();
    if (d == 0) throw InvalidArgument("gp-input", "GP inputs must have at least one dimension");
    auto& m = *impl_;
    m.x.resize(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i].size() != d) throw InvalidArgument("gp-input", "ragged GP input");
        for (std::size_t j = 0; j < d; ++j) m.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xs[i][j];
    }
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
    m.y_mean = y.mean();
    const double var = (y.array() - m.y_mean).square().mean();
    m.y_scale = var > 0 ? std::sqrt(var) : 1.0;
    m.y = (y.array() - m.y_mean) / m.y_scale;

    const auto lo = m.lower();
    const auto hi = m.upper();
    auto objective = [&](const std::vector<double>& theta) {
        std::vector<double> c(theta.size());
        double penalty = 0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            c[i] = std::clamp(theta[i], lo[i], hi[i]);
            penalty += (theta[i] - c[i]) * (theta[i] - c[i]);
        }
        return -m.lml_of(c) + 1e3 * penalty;
    };

    std::mt19937_64 rng(seed);
    std::vector<double> best_theta;
    double best = kHuge;
    for (int r = 0; r < std::max(1, m.options.restarts); ++r) {
        std::vector<double> start(lo.size());
        if (r == 0) {
            start[0] = 0.0;
            for (std::size_t j = 0; j < d; ++j) start[j + 1] = std::log(0.3);
            start.back() = std::max(lo.back(), std::log(1e-4));
        } else {
            for (std::size_t i = 0; i < start.size(); ++i) start[i] = lo[i] + (hi[i] - lo[i]) * unit_uniform(rng);
        }
        const auto res = detail::nelder_mead(objective, start, 1.0, m.options.max_iterations, 1e-4);
        if (res.value < best) {
            best = res.value;
            best_theta = res.x;
        }
    }
    for (std::size_t i = 0; i < best_theta.size(); ++i) best_theta[i] = std::clamp(best_theta[i], lo[i], hi[i]);

    m.hp.signal_variance = std::exp(best_theta[0]);
    m.hp.length_scales.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) m.hp.length_scales[j] = std::exp(best_theta[j + 1]);
    m.hp.noise_variance = std::exp(best_theta.back());
    if (!m.factorize(best_theta, m.llt)) throw InvalidArgument("gp-singular", "kernel matrix not positive definite");
    m.alpha = m.llt.solve(m.y);
    m.lml = m.lml_of(best_theta);
}

GpPrediction GaussianProcess::predict(const std::vector<double>& xq) const {
    const auto& m = *impl_;
    const Eigen::Index n = m.x.rows(), d = m.x.cols();
    if (n == 0 || static_cast<Eigen::Index>(xq.size()) != d)
        throw InvalidArgument("gp-predict", "predict needs a fitted GP and a point of matching dimension");
    Eigen::VectorXd k(n);
    for (Eigen::Index a = 0; a < n; ++a) {
        double r2 = 0;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double diff = (m.x(a, j) - xq[static_cast<std::size_t>(j)]) / m.hp.length_scales[static_cast<std::size_t>(j)];
            r2 += diff * diff;
        }
        k[a] = m.hp.signal_variance * std::exp(-0.5 * r2);
    }
    const double mean = k.dot(m.alpha);
    const Eigen::VectorXd v = m.llt.matrixL().solve(k);
    const double var = std::max(1e-12, m.hp.signal_variance - v.squaredNorm());
    return {mean * m.y_scale + m.y_mean, std::sqrt(var) * m.y_scale};
}

const GpHyperparameters& GaussianProcess::hyperparameters() const { return impl_->hp; }
double GaussianProcess::log_marginal_likelihood() const { return impl_->lml; }

double expected_improvement(double mean, double stddev, double best, double xi) {
    const double improvement = best - mean - xi;
    if (stddev <= 0) return std::max(0.0, improvement);
    const double z = improvement / stddev;
    const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi);
    return improvement * cdf + stddev * pdf;
}

}  // namespace tracelens
