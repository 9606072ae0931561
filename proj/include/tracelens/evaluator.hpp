#pragma once

// Evaluator subprocess boundary. The program is written to a private temp
// directory, the environment's command runs with `{program}` replaced by
// its path, and the score is read from a JSON object on stdout.

#include "tracelens/trace.hpp"

#include <condition_variable>
#include <filesystem>
#include <mutex>
#include <string>

namespace tracelens {

struct EvalRequest {
    std::string program_source;
    ReplayEnvironment environment;
};

struct EvaluatorOptions {
    /// Working directory of the evaluator process; empty keeps the caller's.
    std::filesystem::path working_dir;
    std::size_t max_concurrent = 4;
};

class EvaluatorRunner {
public:
    explicit EvaluatorRunner(EvaluatorOptions options = {});

    /// Never throws for evaluator failures; they become Evaluation statuses.
    /// Throws InvalidArgument when the command lacks the placeholder or the
    /// timeout is not positive.
    Evaluation evaluate(const EvalRequest& request, const std::string& candidate_id = {});

private:
    EvaluatorOptions options_;
    std::mutex mutex_;
    std::condition_variable slot_free_;
    std::size_t running_ = 0;
};

Evaluation evaluate_candidate(const EvalRequest& request);

/// Single-quotes `s` for /bin/sh.
std::string shell_quote(std::string_view s);

/// Score object from evaluator stdout: the last line that parses as a JSON
/// object with "score", else the first such object anywhere in the text.
std::optional<json> find_score_object(std::string_view stdout_text);

}  // namespace tracelens
