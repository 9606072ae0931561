#pragma once

// Tabular reports. A report renders as JSON {"meta": ..., "rows": [...]}
// or as CSV with one header row; both carry the same cell values.

#include "tracelens/cycling.hpp"
#include "tracelens/replay.hpp"
#include "tracelens/rescore.hpp"
#include "tracelens/static_metrics.hpp"
#include "tracelens/taxonomy.hpp"
#include "tracelens/trace.hpp"
#include "tracelens/trace_stats.hpp"
#include "tracelens/trace_store.hpp"
#include "tracelens/tuning_gap.hpp"

#include <string>
#include <vector>

namespace tracelens {

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;  // scalars, null, or arrays of scalars

    void add_row(std::vector<json> row);
};

struct Report {
    json meta = json::object();
    Table table;
    /// JSON-only payload for nested data that has no tabular form.
    json details;
};

enum class ReportFormat { json, csv };
ReportFormat parse_report_format(std::string_view s);  // throws InvalidArgument

std::string render_json(const Report& report);
std::string render_csv(const Table& table);
std::string render(const Report& report, ReportFormat format);

/// CSV cell text: numbers as in JSON, null as empty, arrays joined by ';',
/// quoted when needed.
std::string csv_cell(const json& value);

Table ingest_table(const std::vector<Run>& runs);
Table validation_table(const std::vector<std::pair<const Run*, ValidationReport>>& reports);
Table metrics_table(const std::vector<Run>& runs);
Table trajectory_table(const Run& run);
Table cycling_table(const std::vector<Run>& runs);
Table tuning_share_table(const std::vector<GroupShare>& shares);
Table annotation_table(const std::vector<EditAnnotation>& annotations);
Table agreement_table(const AgreementReport& report);
Table label_stats_table(const CorpusLabelStats& stats);
Table label_count_table(const CorpusLabelStats& stats);
Table replay_table(const std::vector<ReplaySummary>& summaries);
Table tuning_table(const std::vector<TuningReport>& reports);
Table rescore_table(const std::vector<GeneralizationVerdict>& verdicts);
Table framework_counts_table(const std::vector<FrameworkCounts>& counts);
Table delta_grid_table(const DeltaGrid& grid);

/// Corpus-level summary: scale totals and per-domain medians of lineage
/// depth, budget utilization and cycling statistics.
Table corpus_summary_table(const std::vector<Run>& runs);

}  // namespace tracelens
