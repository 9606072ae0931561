#pragma once

#include "tracelens/trace.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tracelens {

/// File names of the six per-run tables.
inline constexpr const char* kRunsFile = "runs.jsonl";
inline constexpr const char* kCandidatesFile = "candidates.jsonl";
inline constexpr const char* kEvaluationsFile = "evaluations.jsonl";
inline constexpr const char* kEdgesFile = "edges.jsonl";
inline constexpr const char* kContextsFile = "contexts.jsonl";
inline constexpr const char* kEnvironmentsFile = "environments.jsonl";

/// Reads one run directory. Every referential link is resolved; unknown
/// fields land in the `extra` member of the owning record.
///
/// Throws IoError when a table is missing or unreadable and SchemaViolation
/// (code names the problem, e.g. "dangling-parent") for malformed records.
Run ingest_run(const std::filesystem::path& dir,
               const std::optional<std::string>& backend_hint = std::nullopt);

/// Every immediate subdirectory holding a runs.jsonl, in name order.
std::vector<Run> ingest_corpus(const std::filesystem::path& corpus_dir);

/// Writes the six tables into `dir` (created if needed). Byte-stable:
/// the same Run always produces the same files.
void emit_run(const Run& run, const std::filesystem::path& dir);

// Record <-> JSON, exposed for sidecars and tests.
json to_json(const Candidate& c);
json to_json(const Evaluation& e);
json to_json(const Edge& e);
json to_json(const Context& c);
json to_json(const ReplayEnvironment& env);
json run_header_json(const Run& run);
ReplayEnvironment environment_from_json(const json& j);

struct Violation {
    std::string code;
    std::string subject;  // offending record id
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool has(std::string_view code) const;
};

ValidationReport validate_run(const Run& run);

/// Target first, seed last. Multi-parent candidates follow their
/// first-listed parent. Non-owning pointers into `run`.
std::vector<const Candidate*> lineage_of(const Run& run, std::string_view candidate_id);

/// Every ancestor reachable over all parents (not including the candidate).
std::vector<const Candidate*> all_ancestors(const Run& run, std::string_view candidate_id);

struct ChainEntry {
    int iteration = 0;
    std::string candidate_id;
    double score = 0.0;
};

/// Candidates in (iteration, file position) order.
std::vector<const Candidate*> candidates_in_order(const Run& run);

/// Entries appear only on strict improvement; the first achiever of a score
/// is kept. Rejected candidates are skipped unless `include_rejected`.
std::vector<ChainEntry> best_so_far_chain(const Run& run, bool include_rejected = false);

/// Maximum-score accepted candidate, earliest on ties.
const Candidate& final_best(const Run& run, bool include_rejected = false);

}  // namespace tracelens
