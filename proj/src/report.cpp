#include "tracelens/report.hpp"

#include "tracelens/errors.hpp"
#include "tracelens/numeric.hpp"

#include <cmath>
#include <map>

namespace tracelens {

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(); }

json nonfinite_safe(double v) { return std::isfinite(v) ? json(v) : json(); }

}  // namespace

void Table::add_row(std::vector<json> row) {
    if (row.size() != columns.size()) throw InvalidArgument("row-width", "row width does not match the columns");
    rows.push_back(std::move(row));
}

ReportFormat parse_report_format(std::string_view s) {
    if (s == "json") return ReportFormat::json;
    if (s == "csv") return ReportFormat::csv;
    throw InvalidArgument("bad-format", "format must be json or csv");
}

std::string render_json(const Report& report) {
    json rows = json::array();
    for (const auto& r : report.table.rows) {
        json obj = json::object();
        for (std::size_t i = 0; i < r.size(); ++i) obj[report.table.columns[i]] = r[i];
        rows.push_back(std::move(obj));
    }
    json out = {{"meta", report.meta}, {"columns", report.table.columns}, {"rows", rows}};
    if (!report.details.is_null()) out["details"] = report.details;
    return out.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

std::string csv_cell(const json& v) {
    std::string text;
    if (v.is_null()) return text;
    if (v.is_string()) text = v.get<std::string>();
    else if (v.is_array()) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) text += ';';
            text += v[i].is_string() ? v[i].get<std::string>() : v[i].is_null() ? std::string() : v[i].dump();
        }
    } else text = v.dump();
    if (text.find_first_of(",\"\n\r") != std::string::npos) {
        std::string q = "\"";
        for (char c : text) {
            if (c == '"') q += '"';
            q += c;
        }
        q += '"';
        return q;
    }
    return text;
}

std::string render_csv(const Table& table) {
    std::string out;
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        if (i) out += ',';
        out += csv_cell(table.columns[i]);
    }
    out += '\n';
    for (const auto& r : table.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) out += ',';
            out += csv_cell(r[i]);
        }
        out += '\n';
    }
    return out;
}

std::string render(const Report& report, ReportFormat format) {
    return format == ReportFormat::json ? render_json(report) : render_csv(report.table);
}

Table ingest_table(const std::vector<Run>& runs) {
    Table t{{"run_id", "task", "backend", "domain", "budget", "candidates", "evaluations", "edges", "contexts"}, {}};
    for (const auto& r : runs)
        t.add_row({r.run_id, r.task, r.backend, std::string(to_string(r.domain_tag)), r.budget, r.candidates.size(),
                   r.evaluations.size(), r.edges.size(), r.contexts.size()});
    return t;
}

Table validation_table(const std::vector<std::pair<const Run*, ValidationReport>>& reports) {
    Table t{{"run_id", "code", "subject", "message"}, {}};
    for (const auto& [run, rep] : reports)
        for (const auto& v : rep.violations) t.add_row({run->run_id, v.code, v.subject, v.message});
    return t;
}

Table metrics_table(const std::vector<Run>& runs) {
    Table t{{"run_id", "task", "backend", "domain", "budget", "programs", "accepted", "rejected", "edits",
             "final_best_id", "final_best_score", "lineage_depth", "budget_utilization", "final_loc_ratio",
             "final_hparam_ratio"},
            {}};
    for (const auto& r : runs) {
        std::size_t accepted = 0;
        for (const auto& c : r.candidates) accepted += c.validity == Validity::accepted;
        json best_id, best_score, depth, util, loc, hparam;
        try {
            const Candidate& b = final_best(r);
            best_id = b.candidate_id;
            best_score = opt(b.score);
            depth = final_best_lineage_depth(r);
            util = budget_utilization(r);
        } catch (const NoScoredCandidates&) {
        }
        try {
            const auto traj = size_and_hparam_trajectory(r);
            loc = traj.back().loc_ratio;
            hparam = opt(traj.back().hparam_ratio);
        } catch (const EmptySeed&) {
        }
        t.add_row({r.run_id, r.task, r.backend, std::string(to_string(r.domain_tag)), r.budget, r.candidates.size(),
                   accepted, r.candidates.size() - accepted, r.edges.size(), best_id, best_score, depth, util, loc,
                   hparam});
    }
    return t;
}

Table trajectory_table(const Run& run) {
    Table t{{"run_id", "iteration", "normalized_iteration", "loc_ratio", "hparam_ratio", "best_candidate_id"}, {}};
    for (const auto& p : size_and_hparam_trajectory(run))
        t.add_row({run.run_id, p.iteration, p.normalized_iteration, p.loc_ratio, opt(p.hparam_ratio),
                   p.best_candidate_id});
    return t;
}

Table cycling_table(const std::vector<Run>& runs) {
    Table t{{"run_id", "run_rate", "slope", "tuning_share", "added_code_lines", "literal_lines", "tuning_lines",
             "trivial_lines", "novel_lines", "span_count", "span_median", "span_q1", "span_q3",
             "per_iteration_rate"},
            {}};
    for (const auto& r : runs) {
        CyclingAnalysis analysis(r);
        const CyclingSeries s = cycling_series_from(r, analysis);
        const SpanSummary spans = summarize_spans(literal_spans(analysis));
        json rates = json::array();
        for (const auto& v : s.per_iteration_rate) rates.push_back(opt(v));
        t.add_row({r.run_id, s.run_rate, nonfinite_safe(s.slope), s.tuning_share, s.added_code_lines,
                   s.literal_lines, s.tuning_lines, s.trivial_lines, s.novel_lines, spans.count, opt(spans.median),
                   opt(spans.q1), opt(spans.q3), rates});
    }
    return t;
}

Table tuning_share_table(const std::vector<GroupShare>& shares) {
    Table t{{"group", "tuning_share", "runs", "added_code_lines"}, {}};
    for (const auto& g : shares) t.add_row({g.group, g.tuning_share, g.runs, g.added_code_lines});
    return t;
}

Table annotation_table(const std::vector<EditAnnotation>& annotations) {
    Table t{{"run_id", "parent_id", "child_id", "labels", "driver_lines", "judge_model", "cached"}, {}};
    for (const auto& a : annotations) {
        json labels = json::array();
        for (EditLabel l : a.labels) labels.push_back(std::string(to_string(l)));
        t.add_row({a.edge_ref.run_id, a.edge_ref.parent_id, a.edge_ref.child_id, labels, a.driver_lines,
                   a.judge_model, a.cached});
    }
    return t;
}

Table agreement_table(const AgreementReport& report) {
    Table t{{"metric", "label", "value"}, {}};
    t.add_row({"n_items", nullptr, report.n_items});
    t.add_row({"macro_kappa", nullptr, report.macro_kappa});
    t.add_row({"mean_jaccard", nullptr, report.mean_jaccard});
    t.add_row({"micro_f1", nullptr, report.micro_f1});
    t.add_row({"exact_match", nullptr, report.exact_match});
    for (const auto& [l, k] : report.per_label_kappa) t.add_row({"kappa", std::string(to_string(l)), k});
    return t;
}

Table label_stats_table(const CorpusLabelStats& stats) {
    Table t{{"label", "prevalence", "n", "odds_ratio", "enrichment_bsf", "enrichment_final_lineage"}, {}};
    for (const auto& l : stats.labels)
        t.add_row({std::string(to_string(l.label)), l.prevalence, l.n, opt(l.odds_ratio), opt(l.enrichment_bsf),
                   opt(l.enrichment_final_lineage)});
    return t;
}

Table label_count_table(const CorpusLabelStats& stats) {
    Table t{{"labels_per_edit", "share"}, {}};
    for (const auto& [k, v] : stats.label_count_histogram) t.add_row({k, v});
    return t;
}

Table replay_table(const std::vector<ReplaySummary>& summaries) {
    Table t{{"run_id", "candidate_id", "model_id", "n", "parse_rate", "eval_rate", "exact_rate",
             "score_ratio_median", "pattern_tags"},
            {}};
    for (const auto& s : summaries)
        t.add_row({s.run_id, s.candidate_id, s.model_id, s.n, s.parse_rate, s.eval_rate, s.exact_rate,
                   opt(s.score_ratio_median), s.pattern_tags});
    return t;
}

Table tuning_table(const std::vector<TuningReport>& reports) {
    Table t{{"run_id", "candidate_id", "f_p0", "f_star_bo", "f_star_evo", "gap", "bo_minus_p0", "outcome", "knobs",
             "evaluations", "note"},
            {}};
    for (const auto& r : reports) {
        json names = json::array();
        for (const auto& k : r.space.knobs) names.push_back(k.name);
        t.add_row({r.run_id, r.candidate_id, r.f_p0, opt(r.f_star_bo), r.f_star_evo, opt(r.gap),
                   r.f_star_bo ? json(*r.f_star_bo - r.f_p0) : json(), std::string(to_string(r.outcome)), names,
                   r.history.size(), r.note});
    }
    return t;
}

Table rescore_table(const std::vector<GeneralizationVerdict>& verdicts) {
    Table t{{"run_id", "task", "framework", "public_delta", "private_delta", "verdict", "chain_length", "cause"}, {}};
    for (const auto& v : verdicts)
        t.add_row({v.run_id, v.task, v.framework, opt(v.public_delta), opt(v.private_delta),
                   std::string(to_string(v.verdict)), v.chain_length, v.cause});
    return t;
}

Table framework_counts_table(const std::vector<FrameworkCounts>& counts) {
    Table t{{"framework", "runs_scored", "aligned", "overfit_mild", "overfit_severe", "no_movement"}, {}};
    for (const auto& c : counts)
        t.add_row({c.framework, c.runs_scored, c.aligned, c.mild_overfit, c.severe_overfit, c.no_movement});
    return t;
}

Table delta_grid_table(const DeltaGrid& grid) {
    Table t;
    t.columns.push_back("problem");
    t.columns.insert(t.columns.end(), grid.frameworks.begin(), grid.frameworks.end());
    for (std::size_t p = 0; p < grid.problems.size(); ++p) {
        std::vector<json> row{grid.problems[p]};
        for (const auto& c : grid.cells[p]) row.emplace_back(c);
        t.add_row(std::move(row));
    }
    return t;
}

Table corpus_summary_table(const std::vector<Run>& runs) {
    Table t{{"metric", "group", "value"}, {}};
    const ScaleSummary s = corpus_scale_summary(runs);
    t.add_row({"runs", "all", s.runs});
    t.add_row({"programs", "all", s.programs});
    t.add_row({"accepted", "all", s.accepted});
    t.add_row({"rejected", "all", s.rejected});
    t.add_row({"edits", "all", s.edits});
    t.add_row({"median_programs", "all", s.median_programs});
    t.add_row({"median_accepted", "all", s.median_accepted});
    t.add_row({"median_rejected", "all", s.median_rejected});
    t.add_row({"median_edits", "all", s.median_edits});
    t.add_row({"max_programs", "all", s.max_programs});
    t.add_row({"max_edits", "all", s.max_edits});

    struct Acc {
        std::vector<double> depth, util, rate, span;
        std::size_t positive_slope = 0, slopes = 0;
    };
    std::map<std::string, Acc> groups;
    for (const auto& r : runs) {
        for (const std::string& g : {std::string("all"), std::string(to_string(r.domain_tag))}) {
            auto& a = groups[g];
            try {
                a.depth.push_back(final_best_lineage_depth(r));
                a.util.push_back(budget_utilization(r));
            } catch (const NoScoredCandidates&) {
            }
        }
        CyclingAnalysis analysis(r);
        const auto series = cycling_series_from(r, analysis);
        const auto spans = summarize_spans(literal_spans(analysis));
        for (const std::string& g : {std::string("all"), std::string(to_string(r.domain_tag))}) {
            auto& a = groups[g];
            if (series.added_code_lines > 0) {
                a.rate.push_back(series.run_rate);
                ++a.slopes;
                a.positive_slope += series.slope > 0;
            }
            if (spans.median) a.span.push_back(*spans.median);
        }
    }
    auto med = [](const std::vector<double>& v) { return v.empty() ? json() : json(median(v)); };
    for (const auto& [g, a] : groups) {
        t.add_row({"median_lineage_depth", g, med(a.depth)});
        t.add_row({"median_budget_utilization", g, med(a.util)});
        t.add_row({"median_cycling_rate", g, med(a.rate)});
        t.add_row({"median_reintroduction_span", g, med(a.span)});
        t.add_row({"runs_with_positive_slope", g, a.positive_slope});
        t.add_row({"runs_with_cycling_series", g, a.slopes});
    }
    return t;
}

}  // namespace tracelens
