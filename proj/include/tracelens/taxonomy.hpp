#pragma once

// Nine-label edit taxonomy: judge prompt construction, response parsing,
// annotation through a chat client and human/judge agreement statistics.

#include "tracelens/chat_client.hpp"
#include "tracelens/trace.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace tracelens {

enum class EditLabel {
    hyperparameter_tuning,
    local_refinement,
    architectural_change,
    composition,
    efficiency,
    bug_fix,
    pruning,
    refactor,
    external_dependency,
};

inline constexpr std::array<EditLabel, 9> kAllLabels = {
    EditLabel::hyperparameter_tuning, EditLabel::local_refinement, EditLabel::architectural_change,
    EditLabel::composition,           EditLabel::efficiency,       EditLabel::bug_fix,
    EditLabel::pruning,               EditLabel::refactor,         EditLabel::external_dependency,
};

using LabelSet = std::set<EditLabel>;

std::string_view to_string(EditLabel l);
std::string_view label_title(EditLabel l);
std::string_view label_definition(EditLabel l);
/// Throws InvalidLabel for names outside the vocabulary.
EditLabel parse_label(std::string_view name);

struct EditAnnotation {
    EdgeRef edge_ref;
    LabelSet labels;  // non-empty
    std::vector<int> driver_lines;
    std::string judge_model;
    bool cached = false;
};

struct JudgeRequest {
    std::string system_text;
    std::string user_text;
    json response_schema;
};

/// Deterministic for a given edge.
JudgeRequest build_judge_request(const Run& run, const Edge& edge);

struct Judgment {
    LabelSet labels;
    std::vector<int> driver_lines;  // sorted, unique
};

/// Throws InvalidJson, InvalidLabel or EmptyLabels.
Judgment parse_judge_response(std::string_view raw);
std::string render_judgment(const Judgment& j);

struct AnnotateOptions {
    std::string judge_model;
    double temperature = 0.0;
    int max_format_retries = 3;
};

/// Nullopt when every attempt failed to parse; the edge stays unannotated.
std::optional<EditAnnotation> annotate_edge(const Run& run, const Edge& edge, ChatClient& client,
                                            const AnnotateOptions& options);

inline constexpr const char* kAnnotationsFile = "annotations.jsonl";

json to_json(const EditAnnotation& a);
EditAnnotation annotation_from_json(const json& j);
void write_annotations(const std::vector<EditAnnotation>& annotations, const std::filesystem::path& file);
std::vector<EditAnnotation> read_annotations(const std::filesystem::path& file);

struct AgreementReport {
    std::map<EditLabel, double> per_label_kappa;  // labels present in either rater
    double macro_kappa = 1.0;
    double mean_jaccard = 1.0;
    double micro_f1 = 1.0;
    double exact_match = 1.0;
    std::size_t n_items = 0;
};

/// Cohen's kappa of one 2x2 presence table; 1 when chance agreement is 1.
double cohen_kappa(std::size_t both, std::size_t ref_only, std::size_t judge_only, std::size_t neither);

/// Throws KeyMismatch when the item sets differ, EmptyInput when empty.
AgreementReport agreement_report(const std::map<std::string, LabelSet>& reference,
                                 const std::map<std::string, LabelSet>& judged);

/// CSV rows `item_id,label|label|...`; a header row starting with item_id
/// is skipped.
std::map<std::string, LabelSet> read_label_csv(const std::filesystem::path& file);

}  // namespace tracelens
