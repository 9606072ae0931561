#include "tracelens/taxonomy.hpp"

#include "tracelens/diff.hpp"
#include "tracelens/errors.hpp"
#include "tracelens/text_util.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>

namespace tracelens {

namespace {

struct LabelInfo {
    std::string_view name;
    std::string_view title;
    std::string_view definition;
};

constexpr std::array<LabelInfo, 9> kLabelInfo = {{
    {"hyperparameter_tuning", "Hyperparameter tuning",
     "Change to one or more numeric literals or configuration values; control flow and surrounding "
     "algorithm unchanged."},
    {"local_refinement", "Local refinement",
     "Targeted edit within an existing routine; the routine's role and structure are preserved."},
    {"architectural_change", "Architectural change",
     "A core algorithmic block is replaced by a substantively different approach."},
    {"composition", "Composition",
     "A new component (operator, phase, branch) is added alongside an existing one; existing logic is "
     "retained."},
    {"efficiency", "Efficiency",
     "Same input-output behaviour reimplemented at lower asymptotic or constant cost (e.g. batching, "
     "vectorization, partial sorts, caching)."},
    {"bug_fix", "Bug fix",
     "Correction of a latent defect such as a missing guard, wrong sign, off-by-one, or mishandled "
     "sentinel."},
    {"pruning", "Pruning", "A code path, phase, or feature is removed; the remaining program is kept intact."},
    {"refactor", "Refactor",
     "Behaviour-preserving restructuring: renaming, reordering, extracting helpers, or moving declarations."},
    {"external_dependency", "External dependency", "Introduction or removal of an import or external library."},
}};

const LabelInfo& info(EditLabel l) { return kLabelInfo[static_cast<std::size_t>(l)]; }

constexpr std::string_view kOutputInstruction =
    "Respond with only a JSON object of the form {\"labels\": [...], \"driver_lines\": [...]}. "
    "\"labels\" lists every label name that applies, spelled exactly as above; edits often carry "
    "more than one label. \"driver_lines\" lists the 1-based line numbers of the unified diff "
    "that most determine your labels.";

constexpr std::string_view kFormatReminder =
    "\n\nYour previous reply could not be used. Reply with a single JSON object "
    "{\"labels\": [...], \"driver_lines\": [...]} and nothing else, using only the label names listed.";

std::string format_score(const Candidate& c) { return c.score ? fmt::format("{}", *c.score) : std::string(); }

}  // namespace

std::string_view to_string(EditLabel l) { return info(l).name; }
std::string_view label_title(EditLabel l) { return info(l).title; }
std::string_view label_definition(EditLabel l) { return info(l).definition; }

EditLabel parse_label(std::string_view name) {
    for (std::size_t i = 0; i < kLabelInfo.size(); ++i)
        if (kLabelInfo[i].name == name) return static_cast<EditLabel>(i);
    throw InvalidLabel("unknown-label", "label not in the taxonomy: " + std::string(name));
}

JudgeRequest build_judge_request(const Run& run, const Edge& edge) {
    const Candidate& parent = run.candidate(edge.parent_id);
    const Candidate& child = run.candidate(edge.child_id);

    JudgeRequest req;
    std::string& sys = req.system_text;
    sys += "You classify edits made by an automated program-search system. Each edit turns a parent "
           "program into a child program. Assign every label from the taxonomy below that describes "
           "the edit.\n\nTaxonomy:\n";
    for (EditLabel l : kAllLabels)
        sys += fmt::format("- {} ({}): {}\n", to_string(l), label_title(l), label_definition(l));
    sys += '\n';
    sys += kOutputInstruction;

    std::string& user = req.user_text;
    user += fmt::format("Edit {} -> {} in run {}.\n", parent.candidate_id, child.candidate_id, run.run_id);
    if (parent.score) user += "Parent score: " + format_score(parent) + "\n";
    if (child.score) user += "Child score: " + format_score(child) + "\n";
    user += "\nUnified diff:\n";
    user += render_unified_diff(parent.source, child.source, parent.candidate_id, child.candidate_id);

    json names = json::array();
    for (EditLabel l : kAllLabels) names.push_back(std::string(to_string(l)));
    req.response_schema = {
        {"type", "object"},
        {"properties",
         {{"labels", {{"type", "array"}, {"minItems", 1}, {"items", {{"enum", names}}}}},
          {"driver_lines", {{"type", "array"}, {"items", {{"type", "integer"}}}}}}},
        {"required", json::array({"labels"})},
    };
    return req;
}

Judgment parse_judge_response(std::string_view raw) {
    const auto obj = extract_json_object(raw);
    if (!obj) throw InvalidJson("no-json", "judge reply contains no JSON object");
    const auto it = obj->find("labels");
    if (it == obj->end() || !it->is_array()) throw InvalidJson("no-labels", "judge reply lacks a labels array");

    Judgment j;
    for (const auto& v : *it) {
        if (!v.is_string()) throw InvalidLabel("non-string-label", "label is not a string: " + v.dump());
        j.labels.insert(parse_label(v.get<std::string>()));
    }
    if (j.labels.empty()) throw EmptyLabels("empty-labels", "judge reply has no labels");

    if (auto d = obj->find("driver_lines"); d != obj->end()) {
        if (!d->is_array()) throw InvalidJson("bad-driver-lines", "driver_lines is not an array");
        for (const auto& v : *d) {
            if (!v.is_number_integer()) throw InvalidJson("bad-driver-lines", "driver line is not an integer");
            j.driver_lines.push_back(v.get<int>());
        }
    }
    std::sort(j.driver_lines.begin(), j.driver_lines.end());
    j.driver_lines.erase(std::unique(j.driver_lines.begin(), j.driver_lines.end()), j.driver_lines.end());
    return j;
}

std::string render_judgment(const Judgment& j) {
    json labels = json::array();
    for (EditLabel l : j.labels) labels.push_back(std::string(to_string(l)));
    return json{{"labels", labels}, {"driver_lines", j.driver_lines}}.dump();
}

std::optional<EditAnnotation> annotate_edge(const Run& run, const Edge& edge, ChatClient& client,
                                            const AnnotateOptions& options) {
    const JudgeRequest jr = build_judge_request(run, edge);
    ChatRequest req;
    req.model_id = options.judge_model;
    req.system_text = jr.system_text;
    req.user_text = jr.user_text;
    req.response_format_hint = ResponseFormat::json;
    req.temperature = options.temperature;

    for (int attempt = 0; attempt <= options.max_format_retries; ++attempt) {
        if (attempt > 0) req.user_text = jr.user_text + std::string(kFormatReminder);
        if (attempt > 1) req.sample_index = attempt;
        const ChatResponse resp = client.complete(req);
        try {
            Judgment j = parse_judge_response(resp.content);
            return EditAnnotation{run.edge_ref(edge), std::move(j.labels), std::move(j.driver_lines),
                                  options.judge_model, resp.from_cache};
        } catch (const Error& e) {
            spdlog::info("judge reply for {}->{} rejected ({}): attempt {}", edge.parent_id, edge.child_id,
                         e.code(), attempt + 1);
        }
    }
    return std::nullopt;
}

json to_json(const EditAnnotation& a) {
    json labels = json::array();
    for (EditLabel l : a.labels) labels.push_back(std::string(to_string(l)));
    return {{"run_id", a.edge_ref.run_id},
            {"parent_id", a.edge_ref.parent_id},
            {"child_id", a.edge_ref.child_id},
            {"labels", labels},
            {"driver_lines", a.driver_lines},
            {"judge_model", a.judge_model},
            {"cached", a.cached}};
}

EditAnnotation annotation_from_json(const json& j) {
    try {
        EditAnnotation a;
        a.edge_ref = {j.at("run_id").get<std::string>(), j.at("parent_id").get<std::string>(),
                      j.at("child_id").get<std::string>()};
        for (const auto& l : j.at("labels")) a.labels.insert(parse_label(l.get<std::string>()));
        if (a.labels.empty()) throw EmptyLabels("empty-labels", "annotation has no labels");
        a.driver_lines = j.value("driver_lines", std::vector<int>{});
        a.judge_model = j.value("judge_model", "");
        a.cached = j.value("cached", false);
        return a;
    } catch (const json::exception& e) {
        throw SchemaViolation("bad-annotation", e.what());
    }
}

void write_annotations(const std::vector<EditAnnotation>& annotations, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("write", "cannot write " + file.string());
    for (const auto& a : annotations) out << to_json(a).dump() << '\n';
}

std::vector<EditAnnotation> read_annotations(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("missing-table", "cannot read " + file.string());
    std::vector<EditAnnotation> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        try {
            out.push_back(annotation_from_json(json::parse(line)));
        } catch (const json::parse_error& e) {
            throw SchemaViolation("invalid-json", file.string() + ": " + e.what());
        }
    }
    return out;
}

double cohen_kappa(std::size_t both, std::size_t ref_only, std::size_t judge_only, std::size_t neither) {
    const double n = static_cast<double>(both + ref_only + judge_only + neither);
    if (n == 0) return 1.0;
    const double po = static_cast<double>(both + neither) / n;
    const double ref_yes = static_cast<double>(both + ref_only) / n;
    const double judge_yes = static_cast<double>(both + judge_only) / n;
    const double pe = ref_yes * judge_yes + (1 - ref_yes) * (1 - judge_yes);
    if (pe >= 1.0) return 1.0;
    return (po - pe) / (1 - pe);
}

AgreementReport agreement_report(const std::map<std::string, LabelSet>& reference,
                                 const std::map<std::string, LabelSet>& judged) {
    if (reference.size() != judged.size() ||
        !std::equal(reference.begin(), reference.end(), judged.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; }))
        throw KeyMismatch("key-mismatch", "reference and judged label maps cover different items");
    if (reference.empty()) throw EmptyInput("empty-input", "no items to compare");

    AgreementReport r;
    r.n_items = reference.size();
    std::map<EditLabel, std::array<std::size_t, 4>> tables;  // both, ref_only, judge_only, neither
    std::size_t tp = 0, fp = 0, fn = 0, exact = 0;
    double jaccard_sum = 0;
    for (auto ri = reference.begin(), ji = judged.begin(); ri != reference.end(); ++ri, ++ji) {
        const LabelSet& a = ri->second;
        const LabelSet& b = ji->second;
        std::size_t inter = 0;
        for (EditLabel l : a) inter += b.count(l);
        const std::size_t uni = a.size() + b.size() - inter;
        jaccard_sum += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
        tp += inter;
        fn += a.size() - inter;
        fp += b.size() - inter;
        exact += a == b;
    }
    for (EditLabel l : kAllLabels) {
        std::array<std::size_t, 4> t{};
        for (auto ri = reference.begin(), ji = judged.begin(); ri != reference.end(); ++ri, ++ji) {
            const bool x = ri->second.count(l), y = ji->second.count(l);
            ++t[x && y ? 0 : x ? 1 : y ? 2 : 3];
        }
        if (t[0] + t[1] + t[2] > 0) tables[l] = t;
    }
    double kappa_sum = 0;
    for (const auto& [l, t] : tables) {
        const double k = cohen_kappa(t[0], t[1], t[2], t[3]);
        r.per_label_kappa[l] = k;
        kappa_sum += k;
    }
    r.macro_kappa = tables.empty() ? 1.0 : kappa_sum / static_cast<double>(tables.size());
    r.mean_jaccard = jaccard_sum / static_cast<double>(r.n_items);
    const std::size_t denom = 2 * tp + fp + fn;
    r.micro_f1 = denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    r.exact_match = static_cast<double>(exact) / static_cast<double>(r.n_items);
    return r;
}

std::map<std::string, LabelSet> read_label_csv(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("missing-file", "cannot read " + file.string());
    std::map<std::string, LabelSet> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        const auto row = trim(line);
        if (row.empty()) continue;
        const auto comma = row.find(',');
        std::string id(trim(row.substr(0, comma)));
        if (id.size() >= 2 && id.front() == '"' && id.back() == '"') id = id.substr(1, id.size() - 2);
        if (first && id == "item_id") {
            first = false;
            continue;
        }
        first = false;
        LabelSet labels;
        if (comma != std::string_view::npos) {
            std::string_view rest = trim(row.substr(comma + 1));
            if (rest.size() >= 2 && rest.front() == '"' && rest.back() == '"') rest = rest.substr(1, rest.size() - 2);
            while (!rest.empty()) {
                const auto bar = rest.find('|');
                const auto tok = trim(rest.substr(0, bar));
                if (!tok.empty()) labels.insert(parse_label(tok));
                if (bar == std::string_view::npos) break;
                rest = rest.substr(bar + 1);
            }
        }
        if (!out.emplace(id, std::move(labels)).second)
            throw SchemaViolation("duplicate-item", "item listed twice: " + id);
    }
    return out;
}

}  // namespace tracelens
