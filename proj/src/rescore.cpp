#include "tracelens/rescore.hpp"

#include "tracelens/errors.hpp"
#include "tracelens/parallel.hpp"
#include "tracelens/trace_store.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace tracelens {

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::aligned: return "aligned";
        case Verdict::mild_overfit: return "mild_overfit";
        case Verdict::severe_overfit: return "severe_overfit";
        case Verdict::no_movement: return "no_movement";
        case Verdict::unscorable: return "unscorable";
    }
    return "?";
}

Verdict classify_generalization(double public_delta, double private_delta, double threshold) {
    if (private_delta == 0) return Verdict::no_movement;
    if (public_delta > 0) {
        if (private_delta > 0) return Verdict::aligned;
        return private_delta >= -threshold ? Verdict::mild_overfit : Verdict::severe_overfit;
    }
    return Verdict::unscorable;
}

std::vector<RescoreEntry> rescore_chain(const Run& run, const ReplayEnvironment& private_env,
                                        EvaluatorRunner& evaluator, std::size_t jobs) {
    const auto chain = best_so_far_chain(run);
    return parallel_map(chain.size(), jobs, [&](std::size_t i) {
        const Candidate& c = run.candidate(chain[i].candidate_id);
        RescoreEntry e;
        e.iteration = chain[i].iteration;
        e.candidate_id = c.candidate_id;
        e.public_score = chain[i].score;
        const Evaluation ev = evaluator.evaluate({c.source, private_env}, c.candidate_id);
        e.private_status = ev.status;
        e.private_score = ev.score;
        if (auto it = ev.metrics.find("rating_delta"); it != ev.metrics.end()) e.rating_delta = it->second;
        return e;
    });
}

GeneralizationVerdict generalization_verdict(const Run& run, const std::vector<RescoreEntry>& chain,
                                             double threshold) {
    GeneralizationVerdict v;
    v.run_id = run.run_id;
    v.task = run.task;
    v.framework = run.backend;
    v.chain_length = chain.size();
    if (chain.empty()) {
        v.cause = "empty best-so-far chain";
        return v;
    }
    const auto& first = chain.front();
    const auto& last = chain.back();
    if (first.public_score && last.public_score) v.public_delta = *last.public_score - *first.public_score;
    if (last.rating_delta) v.private_delta = *last.rating_delta;
    else if (first.private_score && last.private_score) v.private_delta = *last.private_score - *first.private_score;

    if (!v.public_delta) {
        v.cause = "missing public score";
    } else if (!v.private_delta) {
        v.cause = first.private_score ? "missing private metric" : "unscorable seed";
    } else {
        v.verdict = classify_generalization(*v.public_delta, *v.private_delta, threshold);
        if (chain.size() == 1) v.cause = "single-event lineage";
        else if (v.verdict == Verdict::unscorable) v.cause = "no public gain";
    }
    return v;
}

std::vector<FrameworkCounts> framework_counts(const std::vector<GeneralizationVerdict>& verdicts) {
    std::map<std::string, FrameworkCounts> by;
    for (const auto& v : verdicts) {
        auto& c = by[v.framework];
        c.framework = v.framework;
        if (!v.public_delta || !v.private_delta) continue;
        ++c.runs_scored;
        switch (v.verdict) {
            case Verdict::aligned: ++c.aligned; break;
            case Verdict::mild_overfit: ++c.mild_overfit; break;
            case Verdict::severe_overfit: ++c.severe_overfit; break;
            case Verdict::no_movement: ++c.no_movement; break;
            case Verdict::unscorable: break;
        }
    }
    std::vector<FrameworkCounts> out;
    for (auto& [k, c] : by) out.push_back(c);
    return out;
}

DeltaGrid private_delta_grid(const std::vector<GeneralizationVerdict>& verdicts) {
    std::set<std::string> problems, frameworks;
    std::map<std::pair<std::string, std::string>, std::string> cell;
    for (const auto& v : verdicts) {
        problems.insert(v.task);
        frameworks.insert(v.framework);
        const std::string text = v.private_delta ? fmt::format("{:+}", *v.private_delta) : "---";
        auto [it, inserted] = cell.emplace(std::make_pair(v.task, v.framework), text);
        if (!inserted) it->second += ";" + text;
    }
    DeltaGrid g{{problems.begin(), problems.end()}, {frameworks.begin(), frameworks.end()}, {}};
    for (const auto& p : g.problems) {
        auto& row = g.cells.emplace_back();
        for (const auto& f : g.frameworks) {
            auto it = cell.find({p, f});
            row.push_back(it == cell.end() ? "---" : it->second);
        }
    }
    return g;
}

json to_json(const RescoreEntry& e) {
    auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(); };
    return {{"iteration", e.iteration},
            {"candidate_id", e.candidate_id},
            {"public_score", opt(e.public_score)},
            {"private_score", opt(e.private_score)},
            {"private_status", to_string(e.private_status)},
            {"rating_delta", opt(e.rating_delta)}};
}

json to_json(const GeneralizationVerdict& v) {
    auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(); };
    return {{"run_id", v.run_id},
            {"task", v.task},
            {"framework", v.framework},
            {"public_delta", opt(v.public_delta)},
            {"private_delta", opt(v.private_delta)},
            {"verdict", to_string(v.verdict)},
            {"chain_length", v.chain_length},
            {"cause", v.cause}};
}

}  // namespace tracelens
