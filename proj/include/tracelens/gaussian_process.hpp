#pragma once

// Gaussian-process regression on the unit hypercube with a squared-
// exponential ARD kernel. Targets are standardized before fitting; the
// hyperparameters maximize the log marginal likelihood.

#include <cstdint>
#include <memory>
#include <vector>

namespace tracelens {

struct GpOptions {
    int restarts = 5;
    double relative_jitter = 1e-6;  // of the signal variance
    double min_noise = 1e-6;        // standardized units
    double max_noise = 1.0;
    double min_length = 1e-2;
    double max_length = 1e2;
    double min_signal = 1e-3;
    double max_signal = 1e3;
    int max_iterations = 400;
};

struct GpHyperparameters {
    double signal_variance = 1.0;
    std::vector<double> length_scales;
    double noise_variance = 1e-6;
};

struct GpPrediction {
    double mean = 0.0;
    double stddev = 0.0;
};

class GaussianProcess {
public:
    explicit GaussianProcess(GpOptions options = {});
    ~GaussianProcess();
    GaussianProcess(GaussianProcess&&) noexcept;
    GaussianProcess& operator=(GaussianProcess&&) noexcept;

    /// Rows of `x` are points in [0,1]^d. Throws InvalidArgument on empty
    /// or ragged input.
    void fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y, std::uint64_t seed);

    /// Latent-function posterior in the original target units.
    GpPrediction predict(const std::vector<double>& x) const;

    const GpHyperparameters& hyperparameters() const;
    double log_marginal_likelihood() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Expected improvement below `best` for a minimization problem.
double expected_improvement(double mean, double stddev, double best, double xi);

}  // namespace tracelens
