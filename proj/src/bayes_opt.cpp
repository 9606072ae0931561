#include "tracelens/bayes_opt.hpp"

#include "nelder_mead.hpp"
#include "tracelens/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tracelens {

std::vector<BoDimension> dimensions_of(const KnobSpace& space) {
    std::vector<BoDimension> out;
    for (const auto& k : space.knobs) out.push_back({k.name, k.low, k.high, k.scale, k.kind});
    return out;
}

double to_transformed(const BoDimension& dim, double value) {
    return dim.scale == KnobScale::log ? std::log10(value) : value;
}

double from_transformed(const BoDimension& dim, double t) {
    double v = dim.scale == KnobScale::log ? std::pow(10.0, t) : t;
    if (dim.kind == KnobKind::integer) {
        const double lo = std::ceil(dim.low), hi = std::floor(dim.high);
        return std::clamp(std::round(v), lo, std::max(lo, hi));
    }
    return std::clamp(v, dim.low, dim.high);
}

double to_unit(const BoDimension& dim, double value) {
    const double a = to_transformed(dim, dim.low), b = to_transformed(dim, dim.high);
    return std::clamp((to_transformed(dim, value) - a) / (b - a), 0.0, 1.0);
}

double from_unit(const BoDimension& dim, double u) {
    const double a = to_transformed(dim, dim.low), b = to_transformed(dim, dim.high);
    return from_transformed(dim, a + std::clamp(u, 0.0, 1.0) * (b - a));
}

std::string_view to_string(BoPhase p) {
    switch (p) {
        case BoPhase::initial_random: return "initial_random";
        case BoPhase::model_guided: return "model_guided";
        case BoPhase::fallback_random: return "fallback_random";
    }
    return "?";
}

namespace {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<double> random_unit_point(std::size_t d, std::mt19937_64& rng) {
    std::vector<double> u(d);
    for (auto& x : u) x = unit_uniform(rng);
    return u;
}

}  // namespace

BoResult bo_optimize(const std::vector<BoDimension>& dims, const BoObjective& objective, const BoOptions& options) {
    if (dims.empty()) throw EmptySpace("empty-space", "no dimensions to optimize");
    if (options.init < 1 || options.budget < options.init)
        throw InvalidArgument("bad-budget", "bo_optimize needs budget >= init >= 1");
    for (const auto& d : dims)
        if (!(d.low < d.high) || (d.scale == KnobScale::log && !(d.low > 0)))
            throw InvalidArgument("bad-dimension", "invalid bounds for dimension '" + d.name + "'");
    detail::quiet_gsl();

    const std::size_t d = dims.size();
    std::mt19937_64 rng(options.seed);
    BoResult result;
    std::vector<std::vector<double>> units;  // unit coordinates of evaluated points

    auto evaluate = [&](const std::vector<double>& u, BoPhase phase) {
        BoObservation obs;
        std::vector<double> snapped(d);
        for (std::size_t j = 0; j < d; ++j) {
            const double v = from_unit(dims[j], u[j]);
            obs.params[dims[j].name] = v;
            snapped[j] = to_unit(dims[j], v);
        }
        const ObjectiveResult r = objective(obs.params);
        obs.status = r.status;
        if (r.status == EvalStatus::ok && r.score && std::isfinite(*r.score)) obs.score = r.score;
        else obs.status = r.status == EvalStatus::ok ? EvalStatus::error : r.status;
        obs.phase = phase;
        units.push_back(std::move(snapped));
        result.history.push_back(std::move(obs));
    };

    for (int i = 0; i < options.init; ++i) evaluate(random_unit_point(d, rng), BoPhase::initial_random);

    for (int i = options.init; i < options.budget; ++i) {
        std::vector<double> ok;
        for (const auto& o : result.history)
            if (o.score) ok.push_back(*o.score);
        if (ok.empty()) {
            evaluate(random_unit_point(d, rng), BoPhase::fallback_random);
            continue;
        }
        const auto [lo_it, hi_it] = std::minmax_element(ok.begin(), ok.end());
        const double range = *hi_it - *lo_it;
        const double penalty = *lo_it - (range > 0 ? range : std::max(1.0, std::abs(*lo_it)));

        // The surrogate minimizes the negated score.
        std::vector<double> y;
        for (const auto& o : result.history) y.push_back(-(o.score ? *o.score : penalty));
        GaussianProcess gp(options.gp);
        gp.fit(units, y, rng());
        const double y_best = *std::min_element(y.begin(), y.end());
        const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
        double y_var = 0;
        for (double v : y) y_var += (v - y_mean) * (v - y_mean);
        const double y_scale = y_var > 0 ? std::sqrt(y_var / static_cast<double>(y.size())) : 1.0;
        const double xi = options.xi * y_scale;

        auto ei_at = [&](const std::vector<double>& u) {
            const auto p = gp.predict(u);
            return expected_improvement(p.mean, p.stddev, y_best, xi);
        };

        std::vector<std::pair<double, std::vector<double>>> pool;
        pool.reserve(static_cast<std::size_t>(options.candidate_points));
        for (int c = 0; c < options.candidate_points; ++c) {
            auto u = random_unit_point(d, rng);
            const double e = ei_at(u);
            pool.emplace_back(e, std::move(u));
        }
        const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(std::max(0, options.refine_top)), pool.size());
        std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(top), pool.end(),
                          [](const auto& a, const auto& b) { return a.first > b.first; });
        double best_ei = pool.empty() ? -1 : pool.front().first;
        std::vector<double> best_u = pool.empty() ? random_unit_point(d, rng) : pool.front().second;
        for (std::size_t t = 0; t < top; ++t) {
            auto neg_ei = [&](const std::vector<double>& u) {
                std::vector<double> c(u.size());
                double outside = 0;
                for (std::size_t j = 0; j < u.size(); ++j) {
                    c[j] = std::clamp(u[j], 0.0, 1.0);
                    outside += (u[j] - c[j]) * (u[j] - c[j]);
                }
                return -ei_at(c) + 1e3 * outside;
            };
            auto res = detail::nelder_mead(neg_ei, pool[t].second, 0.05, 200, 1e-5);
            for (auto& v : res.x) v = std::clamp(v, 0.0, 1.0);
            const double e = ei_at(res.x);
            if (e > best_ei) {
                best_ei = e;
                best_u = res.x;
            }
        }
        evaluate(best_u, BoPhase::model_guided);
    }

    for (const auto& o : result.history)
        if (o.score && (!result.best_score || *o.score > *result.best_score)) {
            result.best_score = o.score;
            result.best_params = o.params;
        }
    return result;
}

json to_json(const BoObservation& o) {
    json j = {{"params", o.params}, {"status", to_string(o.status)}, {"phase", to_string(o.phase)}};
    j["score"] = o.score ? json(*o.score) : json();
    return j;
}

}  // namespace tracelens
