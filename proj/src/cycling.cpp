#include "tracelens/cycling.hpp"

#include "tracelens/errors.hpp"
#include "tracelens/numeric.hpp"
#include "tracelens/source_scan.hpp"
#include "tracelens/trace_store.hpp"

#include <algorithm>
#include <unordered_map>

namespace tracelens {

std::string_view to_string(LineCategory c) {
    switch (c) {
        case LineCategory::trivial: return "trivial";
        case LineCategory::literal: return "literal";
        case LineCategory::tuning: return "tuning";
        case LineCategory::novel: return "novel";
    }
    return "novel";
}

LineCategory parse_line_category(std::string_view s) {
    for (auto c : {LineCategory::trivial, LineCategory::literal, LineCategory::tuning, LineCategory::novel})
        if (to_string(c) == s) return c;
    throw InvalidArgument("bad-category", "unknown line category '" + std::string(s) + "'");
}

namespace {

struct DeletionSet {
    // Most recent deletion iteration per exact line and per skeleton.
    std::unordered_map<std::string, int> exact;
    std::unordered_map<std::string, int> skeleton;
};

void note(std::unordered_map<std::string, int>& m, const std::string& key, int iteration) {
    auto [it, inserted] = m.emplace(key, iteration);
    if (!inserted) it->second = std::max(it->second, iteration);
}

}  // namespace

struct CyclingAnalysis::Impl {
    const Run& run;
    Dialect dialect;
    std::map<std::pair<std::string, std::string>, DiffRecord> diffs;
    std::unordered_map<std::string, DeletionSet> deletions;  // keyed by child candidate
    std::unordered_map<std::string, std::vector<const Candidate*>> ancestors;

    explicit Impl(const Run& r) : run(r), dialect(r.environment.dialect) {}

    const DiffRecord& diff_for(const std::string& parent_id, const std::string& child_id) {
        auto key = std::make_pair(parent_id, child_id);
        auto it = diffs.find(key);
        if (it != diffs.end()) return it->second;
        const Candidate& p = run.candidate(parent_id);
        const Candidate& c = run.candidate(child_id);
        DiffRecord d = compute_diff(p.source, c.source, dialect);
        d.parent_id = parent_id;
        d.child_id = child_id;
        return diffs.emplace(std::move(key), std::move(d)).first->second;
    }

    void build() {
        for (const auto& c : run.candidates) {
            DeletionSet& set = deletions[c.candidate_id];
            for (const auto& pid : c.parent_ids) {
                for (const auto& line : diff_for(pid, c.candidate_id).removed_lines) {
                    note(set.exact, line.bytes, c.iteration);
                    if (line.kind == LineKind::code) note(set.skeleton, line.skeleton, c.iteration);
                }
            }
        }
        for (const auto& e : run.edges) diff_for(e.parent_id, e.child_id);
    }

    const std::vector<const Candidate*>& ancestors_of(const std::string& id) {
        auto it = ancestors.find(id);
        if (it != ancestors.end()) return it->second;
        return ancestors.emplace(id, all_ancestors(run, id)).first->second;
    }
};

CyclingAnalysis::CyclingAnalysis(const Run& run) : impl_(std::make_unique<Impl>(run)) {
    impl_->build();
    classified_.reserve(run.edges.size());
    for (std::size_t i = 0; i < run.edges.size(); ++i) {
        EdgeClassification ec;
        ec.edge_index = i;
        ec.iteration = run.candidate(run.edges[i].child_id).iteration;
        ec.lines = classify(run.edges[i]);
        classified_.push_back(std::move(ec));
    }
}

CyclingAnalysis::~CyclingAnalysis() = default;

const DiffRecord& CyclingAnalysis::diff(const std::string& parent_id,
                                        const std::string& child_id) const {
    return impl_->diff_for(parent_id, child_id);
}

std::vector<LineClassification> CyclingAnalysis::classify(const Edge& edge) const {
    Impl& im = *impl_;
    const Candidate& child = im.run.candidate(edge.child_id);
    const DiffRecord& d = im.diff_for(edge.parent_id, edge.child_id);
    const auto& pool_owners = im.ancestors_of(edge.child_id);

    // Deletions from the same edit never match: only iterations strictly
    // before the child's count.
    auto lookup = [&](auto member, const std::string& key) {
        std::optional<int> best;
        for (const Candidate* a : pool_owners) {
            const auto& m = im.deletions.at(a->candidate_id).*member;
            auto it = m.find(key);
            if (it == m.end() || it->second >= child.iteration) continue;
            if (!best || it->second > *best) best = it->second;
        }
        return best;
    };

    std::vector<LineClassification> out;
    out.reserve(d.added_lines.size());
    for (const auto& line : d.added_lines) {
        LineClassification lc;
        lc.line_index = line.index;
        lc.bytes = line.bytes;
        if (line.kind != LineKind::code) {
            lc.category = LineCategory::trivial;
        } else if (auto hit = lookup(&DeletionSet::exact, line.bytes)) {
            lc.category = LineCategory::literal;
            lc.matched_deletion_iteration = hit;
        } else if (!code_number_tokens(line.bytes, im.dialect).empty()) {
            if (auto skel_hit = lookup(&DeletionSet::skeleton, line.skeleton)) {
                lc.category = LineCategory::tuning;
                lc.matched_deletion_iteration = skel_hit;
            }
        }
        if (lc.matched_deletion_iteration) lc.span = child.iteration - *lc.matched_deletion_iteration;
        out.push_back(std::move(lc));
    }
    return out;
}

std::vector<LineClassification> classify_added_lines(const Run& run, const Edge& edge) {
    return CyclingAnalysis(run).classify(edge);
}

namespace {

struct IterationCounts {
    std::vector<std::size_t> code;
    std::vector<std::size_t> literal;
};

IterationCounts per_iteration_counts(const Run& run, const CyclingAnalysis& analysis) {
    int horizon = run.budget;
    for (const auto& ec : analysis.edges()) horizon = std::max(horizon, ec.iteration);
    IterationCounts counts{std::vector<std::size_t>(static_cast<std::size_t>(horizon) + 1, 0),
                           std::vector<std::size_t>(static_cast<std::size_t>(horizon) + 1, 0)};
    for (const auto& ec : analysis.edges()) {
        const auto t = static_cast<std::size_t>(std::max(ec.iteration, 0));
        for (const auto& lc : ec.lines) {
            if (lc.category == LineCategory::trivial) continue;
            ++counts.code[t];
            if (lc.category == LineCategory::literal) ++counts.literal[t];
        }
    }
    return counts;
}

}  // namespace

CyclingSeries cycling_series_from(const Run& run, const CyclingAnalysis& analysis) {
    CyclingSeries s;
    for (const auto& ec : analysis.edges()) {
        for (const auto& lc : ec.lines) {
            switch (lc.category) {
                case LineCategory::trivial: ++s.trivial_lines; break;
                case LineCategory::literal: ++s.literal_lines; break;
                case LineCategory::tuning: ++s.tuning_lines; break;
                case LineCategory::novel: ++s.novel_lines; break;
            }
        }
    }
    s.added_code_lines = s.literal_lines + s.tuning_lines + s.novel_lines;

    const auto counts = per_iteration_counts(run, analysis);
    std::size_t cum_code = 0, cum_lit = 0;
    std::vector<double> xs, ys;
    s.per_iteration_rate.reserve(counts.code.size());
    for (std::size_t t = 0; t < counts.code.size(); ++t) {
        cum_code += counts.code[t];
        cum_lit += counts.literal[t];
        if (cum_code == 0) {
            s.per_iteration_rate.push_back(std::nullopt);
            continue;
        }
        const double rate = static_cast<double>(cum_lit) / static_cast<double>(cum_code);
        s.per_iteration_rate.push_back(rate);
        xs.push_back(static_cast<double>(t));
        ys.push_back(rate);
    }
    s.slope = ols_slope(xs, ys);
    s.run_rate = s.added_code_lines
                     ? static_cast<double>(s.literal_lines) / static_cast<double>(s.added_code_lines)
                     : 0.0;
    s.tuning_share = s.added_code_lines
                         ? static_cast<double>(s.tuning_lines) / static_cast<double>(s.added_code_lines)
                         : 0.0;
    return s;
}

CyclingSeries run_cycling_series(const Run& run) {
    CyclingAnalysis analysis(run);
    return cycling_series_from(run, analysis);
}

SpanSummary summarize_spans(std::vector<int> spans) {
    SpanSummary s;
    s.count = spans.size();
    for (int v : spans) ++s.histogram[v];
    if (spans.empty()) return s;
    std::vector<double> values(spans.begin(), spans.end());
    s.median = quantile(values, 0.5);
    s.q1 = quantile(values, 0.25);
    s.q3 = quantile(values, 0.75);
    return s;
}

std::vector<int> literal_spans(const CyclingAnalysis& analysis) {
    std::vector<int> spans;
    for (const auto& ec : analysis.edges())
        for (const auto& lc : ec.lines)
            if (lc.category == LineCategory::literal && lc.span) spans.push_back(*lc.span);
    return spans;
}

SpanSummary reintroduction_spans(const Run& run) {
    CyclingAnalysis analysis(run);
    return summarize_spans(literal_spans(analysis));
}

GroupKey parse_group_key(std::string_view s) {
    if (s == "model") return GroupKey::model;
    if (s == "backend") return GroupKey::backend;
    if (s == "task") return GroupKey::task;
    if (s == "diff_mode") return GroupKey::diff_mode;
    throw UnknownGroupKey("unknown-group-key", "unknown group key '" + std::string(s) + "'");
}

std::string group_value(const Run& run, GroupKey key) {
    auto config_string = [&](const char* field) -> std::string {
        auto it = run.model_config.find(field);
        if (it == run.model_config.end() || it->is_null()) return "unknown";
        if (it->is_string()) return it->get<std::string>();
        if (it->is_boolean()) return it->get<bool>() ? "diff" : "no_diff";
        return it->dump();
    };
    switch (key) {
        case GroupKey::model: return config_string("model");
        case GroupKey::backend: return run.backend.empty() ? "unknown" : run.backend;
        case GroupKey::task: return run.task;
        case GroupKey::diff_mode: return config_string("diff_mode");
    }
    return "unknown";
}

std::vector<GroupShare> tuning_share_by_group(const std::vector<Run>& corpus, GroupKey key) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> acc;  // tuning, code
    std::map<std::string, std::size_t> run_counts;
    for (const auto& run : corpus) {
        const auto s = run_cycling_series(run);
        const auto g = group_value(run, key);
        acc[g].first += s.tuning_lines;
        acc[g].second += s.added_code_lines;
        ++run_counts[g];
    }
    std::vector<GroupShare> out;
    for (const auto& [g, counts] : acc) {
        GroupShare share;
        share.group = g;
        share.runs = run_counts[g];
        share.added_code_lines = counts.second;
        share.tuning_share =
            counts.second ? static_cast<double>(counts.first) / static_cast<double>(counts.second) : 0.0;
        out.push_back(std::move(share));
    }
    return out;
}

std::vector<double> post_breakthrough_delta(const Run& run, int window) {
    if (window < 1) throw InvalidArgument("bad-window", "window must be >= 1");
    CyclingAnalysis analysis(run);
    const auto counts = per_iteration_counts(run, analysis);
    const int horizon = static_cast<int>(counts.code.size()) - 1;

    auto window_mean = [&](int from_exclusive, int to_inclusive) -> std::optional<double> {
        double sum = 0;
        int n = 0;
        for (int s = from_exclusive + 1; s <= to_inclusive; ++s) {
            const auto idx = static_cast<std::size_t>(s);
            if (counts.code[idx] == 0) continue;
            sum += static_cast<double>(counts.literal[idx]) / static_cast<double>(counts.code[idx]);
            ++n;
        }
        if (n == 0) return std::nullopt;
        return sum / n;
    };

    std::vector<double> deltas;
    std::vector<ChainEntry> chain;
    try {
        chain = best_so_far_chain(run);
    } catch (const NoScoredCandidates&) {
        return deltas;
    }
    for (std::size_t i = 1; i < chain.size(); ++i) {
        const int t = chain[i].iteration;
        if (t - window < 0 || t + window > horizon) continue;
        auto before = window_mean(t - window, t);
        auto after = window_mean(t, t + window);
        if (!before || !after) continue;
        deltas.push_back(*after - *before);
    }
    return deltas;
}

std::vector<json> classification_audit_log(const Run& run, const CyclingAnalysis& analysis) {
    std::vector<json> rows;
    for (const auto& ec : analysis.edges()) {
        const Edge& e = run.edges[ec.edge_index];
        for (const auto& lc : ec.lines) {
            rows.push_back({{"run_id", run.run_id},
                            {"parent_id", e.parent_id},
                            {"child_id", e.child_id},
                            {"iteration", ec.iteration},
                            {"line_index", lc.line_index},
                            {"bytes", lc.bytes},
                            {"category", to_string(lc.category)},
                            {"span", lc.span ? json(*lc.span) : json(nullptr)}});
        }
    }
    return rows;
}

}  // namespace tracelens
