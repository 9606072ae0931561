#pragma once

// Deterministic recycling classifier. Each added line of an edit is
// compared against the pool of lines deleted earlier in the child's
// ancestry: exact-bytes matches are literal recycling, skeleton matches
// with changed numbers are tuning recycling, comment/blank churn is
// trivial, everything else is novel.

#include "tracelens/diff.hpp"
#include "tracelens/trace.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tracelens {

enum class LineCategory { trivial, literal, tuning, novel };

std::string_view to_string(LineCategory c);
LineCategory parse_line_category(std::string_view s);

struct LineClassification {
    LineCategory category = LineCategory::novel;
    std::optional<int> matched_deletion_iteration;  // literal / tuning only
    std::optional<int> span;                        // iteration - matched deletion
    std::size_t line_index = 0;                     // index in the child source
    std::string bytes;
};

struct EdgeClassification {
    std::size_t edge_index = 0;  // into Run::edges
    int iteration = 0;           // child iteration
    std::vector<LineClassification> lines;
};

struct CyclingSeries {
    /// Cumulative literal share of added code lines for iterations 0..budget;
    /// absent until the first added code line.
    std::vector<std::optional<double>> per_iteration_rate;
    double slope = 0.0;
    double run_rate = 0.0;
    double tuning_share = 0.0;
    std::size_t added_code_lines = 0;
    std::size_t literal_lines = 0;
    std::size_t tuning_lines = 0;
    std::size_t trivial_lines = 0;
    std::size_t novel_lines = 0;
};

/// Precomputes the diffs and per-candidate deletion sets of one run so the
/// per-edge classification is cheap. Holds a reference to `run`.
class CyclingAnalysis {
public:
    explicit CyclingAnalysis(const Run& run);
    ~CyclingAnalysis();
    CyclingAnalysis(const CyclingAnalysis&) = delete;
    CyclingAnalysis& operator=(const CyclingAnalysis&) = delete;

    std::vector<LineClassification> classify(const Edge& edge) const;

    /// Classifications for every edge in Run::edges order.
    const std::vector<EdgeClassification>& edges() const { return classified_; }

    const DiffRecord& diff(const std::string& parent_id, const std::string& child_id) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::vector<EdgeClassification> classified_;
};

std::vector<LineClassification> classify_added_lines(const Run& run, const Edge& edge);

CyclingSeries run_cycling_series(const Run& run);
CyclingSeries cycling_series_from(const Run& run, const CyclingAnalysis& analysis);

struct SpanSummary {
    std::size_t count = 0;
    std::optional<double> median;
    std::optional<double> q1;
    std::optional<double> q3;
    std::map<int, std::size_t> histogram;
};

SpanSummary summarize_spans(std::vector<int> spans);
std::vector<int> literal_spans(const CyclingAnalysis& analysis);
SpanSummary reintroduction_spans(const Run& run);

enum class GroupKey { model, backend, task, diff_mode };
GroupKey parse_group_key(std::string_view s);  // throws UnknownGroupKey
std::string group_value(const Run& run, GroupKey key);

struct GroupShare {
    std::string group;
    double tuning_share = 0.0;
    std::size_t runs = 0;
    std::size_t added_code_lines = 0;
};

/// Line-weighted tuning share per group, groups in name order.
std::vector<GroupShare> tuning_share_by_group(const std::vector<Run>& corpus, GroupKey key);

/// For each best-so-far event after the first chain entry at iteration t:
/// mean per-iteration literal rate over (t, t+window] minus the mean over
/// (t-window, t]. Events whose windows leave [0, budget] or hold no added
/// code lines are skipped.
std::vector<double> post_breakthrough_delta(const Run& run, int window);

/// One JSON object per added line: edge, iteration, bytes, category, span.
std::vector<json> classification_audit_log(const Run& run, const CyclingAnalysis& analysis);

}  // namespace tracelens
