#include "tracelens/trace_stats.hpp"

#include "tracelens/errors.hpp"
#include "tracelens/trace_store.hpp"

#include <algorithm>
#include <limits>

namespace tracelens {

SignTable score_change_signs(const Run& run) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& c : run.candidates)
        if (c.validity == Validity::accepted && c.score) {
            lo = std::min(lo, *c.score);
            hi = std::max(hi, *c.score);
        }
    const double range = hi - lo;

    SignTable t;
    for (const auto& e : run.edges) {
        const Candidate& p = run.candidate(e.parent_id);
        const Candidate& c = run.candidate(e.child_id);
        if (!p.score || !c.score) {
            ++t.unscored_edges;
            continue;
        }
        ScoreChangeSign s;
        s.edge_ref = run.edge_ref(e);
        s.raw_delta = *c.score - *p.score;
        // Difference of min-max normalized scores, computed without rounding
        // that could flip its sign.
        s.normalized_delta = range > 0 ? s.raw_delta / range : s.raw_delta;
        s.sign = s.raw_delta > 0 ? ScoreSign::positive : ScoreSign::non_positive;
        t.signs.push_back(std::move(s));
    }
    return t;
}

std::map<EditLabel, double> prevalence(const std::vector<EditAnnotation>& annotations) {
    if (annotations.empty()) throw EmptyInput("empty-input", "no annotations");
    std::map<EditLabel, double> out;
    for (EditLabel l : kAllLabels) out[l] = 0.0;
    for (const auto& a : annotations)
        for (EditLabel l : a.labels) out[l] += 1.0;
    for (auto& [l, v] : out) v /= static_cast<double>(annotations.size());
    return out;
}

double odds_ratio_2x2(double a, double b, double c, double d, bool* corrected) {
    const bool zero = a == 0 || b == 0 || c == 0 || d == 0;
    if (corrected) *corrected = zero;
    if (zero) {
        a += 0.5;
        b += 0.5;
        c += 0.5;
        d += 0.5;
    }
    return (a * d) / (b * c);
}

std::map<EditLabel, OddsRatio> helpfulness_odds_ratio(const std::vector<EditAnnotation>& annotations,
                                                      const std::vector<ScoreChangeSign>& signs) {
    std::map<EdgeRef, ScoreSign> by_edge;
    for (const auto& s : signs) by_edge[s.edge_ref] = s.sign;
    std::vector<std::pair<const EditAnnotation*, bool>> rows;
    rows.reserve(annotations.size());
    for (const auto& a : annotations) {
        const auto it = by_edge.find(a.edge_ref);
        if (it == by_edge.end())
            throw MissingSign("missing-sign", "no score-change sign for edge " + a.edge_ref.parent_id + "->" +
                                                  a.edge_ref.child_id + " in run " + a.edge_ref.run_id);
        rows.emplace_back(&a, it->second == ScoreSign::positive);
    }
    std::map<EditLabel, OddsRatio> out;
    for (EditLabel l : kAllLabels) {
        OddsRatio r;
        for (const auto& [a, pos] : rows) {
            const bool has = a->labels.count(l) > 0;
            if (has && pos) ++r.a;
            else if (has) ++r.b;
            else if (pos) ++r.c;
            else ++r.d;
        }
        r.n = r.a + r.b;
        r.odds_ratio = odds_ratio_2x2(static_cast<double>(r.a), static_cast<double>(r.b),
                                      static_cast<double>(r.c), static_cast<double>(r.d), &r.corrected);
        out[l] = r;
    }
    return out;
}

std::map<EditLabel, double> enrichment(const std::vector<EditAnnotation>& annotations,
                                       const std::set<EdgeRef>& event_edges) {
    std::map<EditLabel, double> out;
    if (annotations.empty()) return out;
    std::map<EditLabel, std::size_t> all, events;
    std::size_t n_events = 0;
    for (const auto& a : annotations) {
        const bool ev = event_edges.count(a.edge_ref) > 0;
        n_events += ev;
        for (EditLabel l : a.labels) {
            ++all[l];
            if (ev) ++events[l];
        }
    }
    for (EditLabel l : kAllLabels) {
        if (all[l] == 0) continue;
        const double base = static_cast<double>(all[l]) / static_cast<double>(annotations.size());
        const double rate = n_events == 0 ? 0.0 : static_cast<double>(events[l]) / static_cast<double>(n_events);
        out[l] = rate / base;
    }
    return out;
}

std::map<std::size_t, double> label_count_histogram(const std::vector<EditAnnotation>& annotations) {
    if (annotations.empty()) throw EmptyInput("empty-input", "no annotations");
    std::map<std::size_t, std::size_t> counts;
    for (const auto& a : annotations) ++counts[a.labels.size()];
    std::map<std::size_t, double> out;
    for (const auto& [k, c] : counts) out[k] = static_cast<double>(c) / static_cast<double>(annotations.size());
    return out;
}

std::set<EdgeRef> best_so_far_event_edges(const Run& run) {
    std::set<std::string> chain_children;
    try {
        for (const auto& e : best_so_far_chain(run)) chain_children.insert(e.candidate_id);
    } catch (const NoScoredCandidates&) {
        return {};
    }
    std::set<EdgeRef> out;
    for (const auto& e : run.edges)
        if (chain_children.count(e.child_id)) out.insert(run.edge_ref(e));
    return out;
}

std::set<EdgeRef> final_lineage_edges(const Run& run) {
    std::set<EdgeRef> out;
    std::vector<const Candidate*> lineage;
    try {
        lineage = lineage_of(run, final_best(run).candidate_id);
    } catch (const NoScoredCandidates&) {
        return out;
    }
    for (std::size_t i = 1; i < lineage.size(); ++i)
        out.insert({run.run_id, lineage[i]->candidate_id, lineage[i - 1]->candidate_id});  // target first
    return out;
}

CorpusLabelStats corpus_label_stats(const std::vector<Run>& corpus, const std::vector<EditAnnotation>& annotations) {
    CorpusLabelStats s;
    std::set<std::string> run_ids;
    std::set<EdgeRef> bsf, lineage;
    std::vector<ScoreChangeSign> signs;
    for (const auto& run : corpus) {
        run_ids.insert(run.run_id);
        auto b = best_so_far_event_edges(run);
        bsf.insert(b.begin(), b.end());
        auto f = final_lineage_edges(run);
        lineage.insert(f.begin(), f.end());
        auto t = score_change_signs(run);
        s.unscored_edges += t.unscored_edges;
        signs.insert(signs.end(), t.signs.begin(), t.signs.end());
    }
    std::set<EdgeRef> signed_refs;
    for (const auto& sg : signs) signed_refs.insert(sg.edge_ref);

    std::vector<EditAnnotation> in_corpus, with_sign;
    for (const auto& a : annotations) {
        if (!run_ids.count(a.edge_ref.run_id)) continue;
        in_corpus.push_back(a);
        if (signed_refs.count(a.edge_ref)) with_sign.push_back(a);
    }
    s.annotated_edges = in_corpus.size();
    s.signed_edges = with_sign.size();
    if (in_corpus.empty()) return s;

    const auto prev = prevalence(in_corpus);
    std::map<EditLabel, OddsRatio> ors;
    if (!with_sign.empty()) ors = helpfulness_odds_ratio(with_sign, signs);
    const auto e_bsf = enrichment(in_corpus, bsf);
    const auto e_lin = enrichment(in_corpus, lineage);
    for (EditLabel l : kAllLabels) {
        LabelStats ls;
        ls.label = l;
        ls.prevalence = prev.at(l);
        ls.n = static_cast<std::size_t>(std::count_if(in_corpus.begin(), in_corpus.end(),
                                                      [l](const EditAnnotation& a) { return a.labels.count(l) > 0; }));
        if (auto it = ors.find(l); it != ors.end()) ls.odds_ratio = it->second.odds_ratio;
        if (auto it = e_bsf.find(l); it != e_bsf.end()) ls.enrichment_bsf = it->second;
        if (auto it = e_lin.find(l); it != e_lin.end()) ls.enrichment_final_lineage = it->second;
        s.labels.push_back(ls);
    }
    s.label_count_histogram = label_count_histogram(in_corpus);
    return s;
}

}  // namespace tracelens
