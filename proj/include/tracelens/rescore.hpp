#pragma once

// Public-versus-private generalization: re-score a run's best-so-far chain
// on a held-out evaluator and classify how the two deltas relate.

#include "tracelens/evaluator.hpp"
#include "tracelens/trace.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tracelens {

enum class Verdict { aligned, mild_overfit, severe_overfit, no_movement, unscorable };
std::string_view to_string(Verdict v);

inline constexpr double kDefaultOverfitThreshold = 200.0;

/// no_movement when private_delta == 0; otherwise a public gain splits into
/// aligned / mild (-threshold <= private < 0) / severe; anything else is
/// unscorable.
Verdict classify_generalization(double public_delta, double private_delta,
                                double threshold = kDefaultOverfitThreshold);

struct RescoreEntry {
    int iteration = 0;
    std::string candidate_id;
    std::optional<double> public_score;
    std::optional<double> private_score;
    EvalStatus private_status = EvalStatus::ok;
    std::optional<double> rating_delta;  // private metrics["rating_delta"]
};

/// Evaluates every best-so-far chain candidate once on `private_env`.
/// Throws NoScoredCandidates when the chain is empty.
std::vector<RescoreEntry> rescore_chain(const Run& run, const ReplayEnvironment& private_env,
                                        EvaluatorRunner& evaluator, std::size_t jobs = 1);

struct GeneralizationVerdict {
    std::string run_id;
    std::string task;
    std::string framework;
    std::optional<double> public_delta;
    std::optional<double> private_delta;
    Verdict verdict = Verdict::unscorable;
    std::size_t chain_length = 0;
    /// Why the verdict is unscorable or degenerate; empty otherwise.
    std::string cause;
};

/// public_delta = last - first public chain score. private_delta is the
/// final entry's rating_delta when reported, else last - first private
/// score.
GeneralizationVerdict generalization_verdict(const Run& run, const std::vector<RescoreEntry>& chain,
                                             double threshold = kDefaultOverfitThreshold);

struct FrameworkCounts {
    std::string framework;
    std::size_t runs_scored = 0;
    std::size_t aligned = 0;
    std::size_t mild_overfit = 0;
    std::size_t severe_overfit = 0;
    std::size_t no_movement = 0;
};

/// Runs counted as scored are those with both deltas present.
std::vector<FrameworkCounts> framework_counts(const std::vector<GeneralizationVerdict>& verdicts);

/// Problem x framework grid of private deltas; "---" marks missing cells.
struct DeltaGrid {
    std::vector<std::string> problems;
    std::vector<std::string> frameworks;
    std::vector<std::vector<std::string>> cells;  // [problem][framework]
};

DeltaGrid private_delta_grid(const std::vector<GeneralizationVerdict>& verdicts);

json to_json(const RescoreEntry& e);
json to_json(const GeneralizationVerdict& v);

}  // namespace tracelens
