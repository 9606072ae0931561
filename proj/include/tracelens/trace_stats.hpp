#pragma once

// Aggregates over annotated edits: label prevalence, helpfulness odds
// ratios, enrichment over event edge sets and label-count distributions.

#include "tracelens/taxonomy.hpp"
#include "tracelens/trace.hpp"

#include <map>
#include <optional>
#include <set>
#include <vector>

namespace tracelens {

enum class ScoreSign { positive, non_positive };

struct ScoreChangeSign {
    EdgeRef edge_ref;
    ScoreSign sign = ScoreSign::non_positive;
    double raw_delta = 0.0;
    double normalized_delta = 0.0;
};

struct SignTable {
    std::vector<ScoreChangeSign> signs;
    /// Edges whose parent or child has no score.
    std::size_t unscored_edges = 0;
};

/// Scores are min-max normalized over the run's accepted scores, so the
/// normalized delta has the sign of the raw delta.
SignTable score_change_signs(const Run& run);

/// Throws EmptyInput.
std::map<EditLabel, double> prevalence(const std::vector<EditAnnotation>& annotations);

struct OddsRatio {
    double odds_ratio = 1.0;
    std::size_t n = 0;  // edits carrying the label
    std::size_t a = 0, b = 0, c = 0, d = 0;
    bool corrected = false;
};

/// 2x2 odds ratio (a*d)/(b*c), with 0.5 added to every cell when any is 0.
double odds_ratio_2x2(double a, double b, double c, double d, bool* corrected = nullptr);

/// Throws MissingSign when an annotated edge has no sign.
std::map<EditLabel, OddsRatio> helpfulness_odds_ratio(const std::vector<EditAnnotation>& annotations,
                                                      const std::vector<ScoreChangeSign>& signs);

/// Absent for labels with zero base rate; 0 for labels missing from events.
std::map<EditLabel, double> enrichment(const std::vector<EditAnnotation>& annotations,
                                       const std::set<EdgeRef>& event_edges);

/// Share of edits with exactly k labels. Throws EmptyInput.
std::map<std::size_t, double> label_count_histogram(const std::vector<EditAnnotation>& annotations);

/// Edges whose child enters the best-so-far chain.
std::set<EdgeRef> best_so_far_event_edges(const Run& run);
/// Edges along lineage_of(final best).
std::set<EdgeRef> final_lineage_edges(const Run& run);

struct LabelStats {
    EditLabel label = EditLabel::hyperparameter_tuning;
    double prevalence = 0.0;
    std::optional<double> odds_ratio;
    std::size_t n = 0;
    std::optional<double> enrichment_bsf;
    std::optional<double> enrichment_final_lineage;
};

struct CorpusLabelStats {
    std::vector<LabelStats> labels;
    std::map<std::size_t, double> label_count_histogram;
    std::size_t annotated_edges = 0;
    std::size_t signed_edges = 0;
    std::size_t unscored_edges = 0;
};

/// Annotations whose run is not in `corpus` are ignored.
CorpusLabelStats corpus_label_stats(const std::vector<Run>& corpus, const std::vector<EditAnnotation>& annotations);

}  // namespace tracelens
