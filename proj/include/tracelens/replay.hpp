#pragma once

// Re-issues a candidate's saved generating prompt and measures how often
// the model reproduces a parseable, evaluable, identical program.

#include "tracelens/chat_client.hpp"
#include "tracelens/evaluator.hpp"
#include "tracelens/trace.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tracelens {

struct ReplaySample {
    bool parse_ok = false;
    bool eval_ok = false;
    bool exact = false;
    std::optional<double> score;
    EvalStatus eval_status = EvalStatus::error;
};

struct ReplaySummary {
    std::string run_id;
    std::string candidate_id;
    std::string model_id;
    int n = 0;
    double parse_rate = 0.0;
    double eval_rate = 0.0;
    double exact_rate = 0.0;
    std::optional<double> score_ratio_median;
    std::vector<ReplaySample> per_sample;
    /// Descriptive only: tight_reproduction, parent_revert, bimodal_failure, exceeds.
    std::vector<std::string> pattern_tags;
};

struct ReplayOptions {
    int n = 10;
    /// Defaults to the run's model_config temperature, else 1.0.
    std::optional<double> temperature;
    std::size_t jobs = 1;
};

/// Program text from a model reply: the longest fenced block, else the
/// whole reply. Nullopt when the result is blank.
std::optional<std::string> extract_program(std::string_view reply);

/// Cheap dialect-level validity check. PY_LIKE: terminated strings,
/// balanced brackets, sane indentation after block openers. C_LIKE:
/// balanced braces/brackets/parens outside strings and comments.
bool syntax_check(std::string_view source, Dialect dialect);

/// Throws MissingContext, MissingScore, InvalidArgument; Unavailable and
/// AuthError propagate from the client.
ReplaySummary replay_breakthrough(const Run& run, const std::string& candidate_id, const std::string& model_id,
                                  ChatClient& client, EvaluatorRunner& evaluator, const ReplayOptions& options = {});

std::vector<ReplaySummary> model_substitution_sweep(const Run& run, const std::string& candidate_id,
                                                    const std::vector<std::string>& model_ids, ChatClient& client,
                                                    EvaluatorRunner& evaluator, const ReplayOptions& options = {});

json to_json(const ReplaySummary& s);

}  // namespace tracelens
