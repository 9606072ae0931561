#pragma once

// In-memory model of one search run in the unified trace schema: runs,
// candidates, evaluations, edges, contexts and the replay environment.

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tracelens {

using json = nlohmann::json;

enum class DomainTag { math, ale, other };
enum class Validity { accepted, rejected };
enum class EvalStatus { ok, error, timeout };
enum class EditOperator { mutation, recombination, refinement, repair, unknown };

/// Source-language family. Decides comment syntax, literal suffixes and
/// how tunable parameters are injected.
enum class Dialect { py_like, c_like };

std::string_view to_string(DomainTag v);
std::string_view to_string(Validity v);
std::string_view to_string(EvalStatus v);
std::string_view to_string(EditOperator v);
std::string_view to_string(Dialect v);

DomainTag parse_domain_tag(std::string_view s);
Validity parse_validity(std::string_view s);
EvalStatus parse_eval_status(std::string_view s);
EditOperator parse_edit_operator(std::string_view s);
Dialect parse_dialect(std::string_view s);

struct ReplayEnvironment {
    /// Shell command; `{program}` is replaced by the program path.
    std::string evaluator_command;
    double timeout = 300.0;
    Dialect dialect = Dialect::py_like;
    std::vector<std::string> artifacts;
    std::string notes;
    json extra = json::object();

    bool operator==(const ReplayEnvironment&) const = default;
};

inline constexpr std::string_view kProgramPlaceholder = "{program}";

struct Candidate {
    std::string candidate_id;
    int iteration = 0;
    std::string source;  // byte-identical program text
    std::vector<std::string> parent_ids;
    std::optional<std::string> context_id;
    Validity validity = Validity::accepted;
    std::optional<double> score;
    json extra = json::object();

    bool is_root() const { return parent_ids.empty(); }
    bool operator==(const Candidate&) const = default;
};

struct Evaluation {
    std::string candidate_id;
    EvalStatus status = EvalStatus::ok;
    std::optional<double> score;
    std::string stdout_text;
    std::string stderr_text;
    double wall_time = 0.0;
    std::map<std::string, double> metrics;
    json extra = json::object();

    bool operator==(const Evaluation&) const = default;
};

struct Edge {
    std::string parent_id;
    std::string child_id;
    EditOperator op = EditOperator::unknown;
    json extra = json::object();

    bool operator==(const Edge&) const = default;
};

struct Context {
    std::string context_id;
    std::string prompt;  // verbatim as sent to the model
    json auxiliary = json::object();
    json extra = json::object();

    bool operator==(const Context&) const = default;
};

/// (run_id, parent_id, child_id); identifies one edit across a corpus.
struct EdgeRef {
    std::string run_id;
    std::string parent_id;
    std::string child_id;

    auto operator<=>(const EdgeRef&) const = default;
    bool operator==(const EdgeRef&) const = default;
};

class Run {
public:
    std::string run_id;
    std::string task;
    std::string backend;
    json model_config = json::object();
    DomainTag domain_tag = DomainTag::other;
    int budget = 1;
    std::string seed_candidate_id;
    ReplayEnvironment environment;
    json extra = json::object();

    std::vector<Candidate> candidates;
    std::vector<Evaluation> evaluations;
    std::vector<Edge> edges;
    std::vector<Context> contexts;

    /// Rebuilds the id lookups. Must be called after mutating the tables.
    void reindex();

    const Candidate* find_candidate(std::string_view id) const;
    const Context* find_context(std::string_view id) const;
    /// First evaluation recorded for the candidate, if any.
    const Evaluation* find_evaluation(std::string_view candidate_id) const;
    const Candidate& candidate(std::string_view id) const;  // throws UnknownCandidate
    const Candidate& seed() const;

    /// Index of the candidate in `candidates`; used as a stable tie-breaker.
    std::size_t position_of(std::string_view id) const;

    EdgeRef edge_ref(const Edge& e) const { return {run_id, e.parent_id, e.child_id}; }

    bool operator==(const Run& other) const;

private:
    std::unordered_map<std::string, std::size_t> candidate_index_;
    std::unordered_map<std::string, std::size_t> context_index_;
    std::unordered_map<std::string, std::size_t> evaluation_index_;
};

}  // namespace tracelens
