#pragma once

// Tuning-gap pipeline: identify knobs in a frozen program, expose them in a
// parameter block, tune them against the run's evaluator and compare the
// tuned score with the program's own score and the run's final best.

#include "tracelens/bayes_opt.hpp"
#include "tracelens/chat_client.hpp"
#include "tracelens/evaluator.hpp"
#include "tracelens/knobs.hpp"
#include "tracelens/trace.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tracelens {

enum class TuningOutcome { improves, no_change, regresses };
std::string_view to_string(TuningOutcome o);

struct TuningReport {
    std::string run_id;
    std::string candidate_id;
    double f_p0 = 0.0;
    /// Best ok score over the history; absent when nothing was evaluated
    /// successfully.
    std::optional<double> f_star_bo;
    double f_star_evo = 0.0;
    std::optional<double> gap;  // f_star_evo - f_star_bo
    TuningOutcome outcome = TuningOutcome::no_change;
    std::map<std::string, double> best_params;
    std::vector<BoObservation> history;
    KnobSpace space;
    std::vector<DroppedKnob> dropped;
    std::string note;
};

struct TuningOptions {
    BoOptions bo;
    /// Scores within this distance of f_p0 count as no change.
    double tolerance = 0.0;
};

/// Outcome of f_star_bo against f_p0; no_change when f_star_bo is absent.
TuningOutcome classify_outcome(std::optional<double> f_star_bo, double f_p0, double tolerance);

/// Tunes an already identified knob set. `knobs` are validated against the
/// candidate source first; nothing accepted yields no_change with an empty
/// history.
TuningReport tune_knobs(const Run& run, const std::string& candidate_id, const std::vector<KnobSpec>& knobs,
                        EvaluatorRunner& evaluator, const TuningOptions& options = {});

/// request_knobs followed by tune_knobs. Throws MissingScore when the
/// candidate is unscored; client errors propagate.
TuningReport tuning_gap_report(const Run& run, const std::string& candidate_id, const std::string& model_id,
                               ChatClient& client, EvaluatorRunner& evaluator, const TuningOptions& options = {});

json to_json(const TuningReport& r);

}  // namespace tracelens
