#pragma once

#include "tracelens/trace.hpp"

#include <optional>
#include <vector>

namespace tracelens {

struct TrajectoryPoint {
    int iteration = 0;
    double normalized_iteration = 0.0;  // iteration / budget
    double loc_ratio = 1.0;             // best-so-far LOC / seed LOC
    /// Best-so-far numeric-literal count / seed count; absent when the seed
    /// has no numeric literals.
    std::optional<double> hparam_ratio;
    std::string best_candidate_id;
};

/// One point per iteration 0..budget. LOC counts non-blank lines. Before the
/// first scored candidate the seed stands in as the current best.
/// Throws EmptySeed when the seed has no non-blank line.
std::vector<TrajectoryPoint> size_and_hparam_trajectory(const Run& run);

/// Edge count along lineage_of(final best).
int final_best_lineage_depth(const Run& run);

/// Iteration at which the final best score is first reached, over budget.
double budget_utilization(const Run& run);

struct ScaleSummary {
    std::size_t runs = 0;
    std::size_t programs = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t edits = 0;
    double median_programs = 0.0;
    double median_accepted = 0.0;
    double median_rejected = 0.0;
    double median_edits = 0.0;
    std::size_t max_programs = 0;
    std::size_t max_edits = 0;
};

ScaleSummary corpus_scale_summary(const std::vector<Run>& corpus);

}  // namespace tracelens
