#include "tracelens/static_metrics.hpp"

#include "tracelens/diff.hpp"
#include "tracelens/errors.hpp"
#include "tracelens/numeric.hpp"
#include "tracelens/trace_store.hpp"

#include <algorithm>

namespace tracelens {

std::vector<TrajectoryPoint> size_and_hparam_trajectory(const Run& run) {
    const Candidate& seed = run.seed();
    const Dialect dialect = run.environment.dialect;
    const auto seed_loc = static_cast<double>(count_loc(seed.source));
    if (seed_loc == 0)
        throw EmptySeed("empty-seed", "seed of run '" + run.run_id + "' has no non-blank line");
    const auto seed_literals = static_cast<double>(count_numeric_literals(seed.source, dialect));

    std::vector<ChainEntry> chain;
    try {
        chain = best_so_far_chain(run);
    } catch (const NoScoredCandidates&) {
    }

    std::vector<TrajectoryPoint> points;
    points.reserve(static_cast<std::size_t>(run.budget) + 1);
    std::size_t next = 0;
    const Candidate* current = &seed;
    double loc = seed_loc;
    double literals = seed_literals;
    for (int t = 0; t <= run.budget; ++t) {
        bool changed = false;
        while (next < chain.size() && chain[next].iteration <= t) {
            current = &run.candidate(chain[next].candidate_id);
            ++next;
            changed = true;
        }
        if (changed) {
            loc = static_cast<double>(count_loc(current->source));
            literals = static_cast<double>(count_numeric_literals(current->source, dialect));
        }
        TrajectoryPoint p;
        p.iteration = t;
        p.normalized_iteration = static_cast<double>(t) / static_cast<double>(run.budget);
        p.loc_ratio = loc / seed_loc;
        if (seed_literals > 0) p.hparam_ratio = literals / seed_literals;
        p.best_candidate_id = current->candidate_id;
        points.push_back(std::move(p));
    }
    return points;
}

int final_best_lineage_depth(const Run& run) {
    const Candidate& best = final_best(run);
    return static_cast<int>(lineage_of(run, best.candidate_id).size()) - 1;
}

double budget_utilization(const Run& run) {
    const auto chain = best_so_far_chain(run);
    return static_cast<double>(chain.back().iteration) / static_cast<double>(run.budget);
}

ScaleSummary corpus_scale_summary(const std::vector<Run>& corpus) {
    ScaleSummary s;
    std::vector<double> programs, accepted, rejected, edits;
    for (const auto& run : corpus) {
        const std::size_t acc = static_cast<std::size_t>(
            std::count_if(run.candidates.begin(), run.candidates.end(),
                          [](const Candidate& c) { return c.validity == Validity::accepted; }));
        const std::size_t rej = run.candidates.size() - acc;
        ++s.runs;
        s.programs += run.candidates.size();
        s.accepted += acc;
        s.rejected += rej;
        s.edits += run.edges.size();
        s.max_programs = std::max(s.max_programs, run.candidates.size());
        s.max_edits = std::max(s.max_edits, run.edges.size());
        programs.push_back(static_cast<double>(run.candidates.size()));
        accepted.push_back(static_cast<double>(acc));
        rejected.push_back(static_cast<double>(rej));
        edits.push_back(static_cast<double>(run.edges.size()));
    }
    s.median_programs = median(programs);
    s.median_accepted = median(accepted);
    s.median_rejected = median(rejected);
    s.median_edits = median(edits);
    return s;
}

}  // namespace tracelens
