#include "tracelens/tuning_gap.hpp"

#include "tracelens/errors.hpp"
#include "tracelens/trace_store.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace tracelens {

std::string_view to_string(TuningOutcome o) {
    switch (o) {
        case TuningOutcome::improves: return "improves";
        case TuningOutcome::no_change: return "no_change";
        case TuningOutcome::regresses: return "regresses";
    }
    return "?";
}

TuningOutcome classify_outcome(std::optional<double> f_star_bo, double f_p0, double tolerance) {
    if (!f_star_bo || std::abs(*f_star_bo - f_p0) <= tolerance) return TuningOutcome::no_change;
    return *f_star_bo > f_p0 ? TuningOutcome::improves : TuningOutcome::regresses;
}

TuningReport tune_knobs(const Run& run, const std::string& candidate_id, const std::vector<KnobSpec>& knobs,
                        EvaluatorRunner& evaluator, const TuningOptions& options) {
    const Candidate& target = run.candidate(candidate_id);
    if (!target.score) throw MissingScore("missing-score", "candidate " + candidate_id + " has no score");
    const Dialect dialect = run.environment.dialect;

    TuningReport r;
    r.run_id = run.run_id;
    r.candidate_id = candidate_id;
    r.f_p0 = *target.score;
    r.f_star_evo = *final_best(run).score;

    auto validation = validate_knobs(target.source, knobs, dialect);
    r.dropped = validation.dropped;
    r.space = {std::move(validation.accepted), candidate_id};
    if (r.space.knobs.empty()) {
        r.note = "no knobs accepted";
        r.outcome = TuningOutcome::no_change;
        return r;
    }

    const std::string rewritten = rewrite_with_param_block(target.source, r.space.knobs, dialect);
    const BoObjective objective = [&](const std::map<std::string, double>& values) {
        const std::string program = substitute_values(rewritten, r.space, values, dialect);
        const Evaluation ev = evaluator.evaluate({program, run.environment}, candidate_id);
        return ObjectiveResult{ev.score, ev.status};
    };
    BoResult bo = bo_optimize(dimensions_of(r.space), objective, options.bo);
    r.history = std::move(bo.history);
    r.best_params = std::move(bo.best_params);
    r.f_star_bo = bo.best_score;
    if (r.f_star_bo) r.gap = r.f_star_evo - *r.f_star_bo;
    else r.note = "no successful evaluation";
    r.outcome = classify_outcome(r.f_star_bo, r.f_p0, options.tolerance);
    return r;
}

TuningReport tuning_gap_report(const Run& run, const std::string& candidate_id, const std::string& model_id,
                               ChatClient& client, EvaluatorRunner& evaluator, const TuningOptions& options) {
    const Candidate& target = run.candidate(candidate_id);
    if (!target.score) throw MissingScore("missing-score", "candidate " + candidate_id + " has no score");
    KnobProposal proposal = request_knobs(target.source, run.environment.dialect, model_id, client);
    TuningReport r = tune_knobs(run, candidate_id, proposal.specs, evaluator, options);
    r.dropped.insert(r.dropped.begin(), proposal.dropped.begin(), proposal.dropped.end());
    return r;
}

json to_json(const TuningReport& r) {
    json knobs = json::array();
    for (const auto& k : r.space.knobs) knobs.push_back(to_json(k));
    json dropped = json::array();
    for (const auto& d : r.dropped) dropped.push_back({{"name", d.name}, {"reason", d.reason}});
    json history = json::array();
    for (const auto& o : r.history) history.push_back(to_json(o));
    json j = {{"run_id", r.run_id},
              {"candidate_id", r.candidate_id},
              {"f_p0", r.f_p0},
              {"f_star_evo", r.f_star_evo},
              {"outcome", to_string(r.outcome)},
              {"best_params", r.best_params},
              {"knobs", knobs},
              {"dropped", dropped},
              {"history", history},
              {"note", r.note}};
    j["f_star_bo"] = r.f_star_bo ? json(*r.f_star_bo) : json();
    j["gap"] = r.gap ? json(*r.gap) : json();
    return j;
}

}  // namespace tracelens
