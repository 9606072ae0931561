#pragma once

// Sequential Bayesian optimization: uniform random initial points in the
// transformed space, then expected-improvement acquisitions under a GP
// surrogate. Scores are maximized; the surrogate models negated scores.

#include "tracelens/gaussian_process.hpp"
#include "tracelens/knobs.hpp"
#include "tracelens/trace.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tracelens {

struct BoDimension {
    std::string name;
    double low = 0.0;
    double high = 1.0;
    KnobScale scale = KnobScale::linear;
    KnobKind kind = KnobKind::real;
};

std::vector<BoDimension> dimensions_of(const KnobSpace& space);

/// Transformed coordinate: the value itself, or log10(value) on log scale.
double to_transformed(const BoDimension& dim, double value);
/// Inverse of to_transformed, then int rounding and clipping to bounds.
double from_transformed(const BoDimension& dim, double t);
/// [0,1] coordinate of a value within the transformed bounds.
double to_unit(const BoDimension& dim, double value);
double from_unit(const BoDimension& dim, double u);

enum class BoPhase { initial_random, model_guided, fallback_random };
std::string_view to_string(BoPhase p);

struct BoObservation {
    std::map<std::string, double> params;
    std::optional<double> score;  // present iff status is ok
    EvalStatus status = EvalStatus::ok;
    BoPhase phase = BoPhase::initial_random;
};

struct BoOptions {
    int budget = 24;
    int init = 8;
    std::uint64_t seed = 0;
    double xi = 0.01;  // in standardized target units
    int candidate_points = 1000;
    int refine_top = 5;
    GpOptions gp;
};

struct BoResult {
    std::map<std::string, double> best_params;
    std::optional<double> best_score;  // absent when no evaluation succeeded
    std::vector<BoObservation> history;
};

struct ObjectiveResult {
    std::optional<double> score;
    EvalStatus status = EvalStatus::ok;
};

using BoObjective = std::function<ObjectiveResult(const std::map<std::string, double>&)>;

/// Throws EmptySpace when there are no dimensions, InvalidArgument unless
/// budget >= init >= 1. Failed evaluations enter the surrogate as the
/// worst observed score minus the observed score range.
BoResult bo_optimize(const std::vector<BoDimension>& dims, const BoObjective& objective, const BoOptions& options = {});

json to_json(const BoObservation& o);

}  // namespace tracelens
