#include "tracelens/synthetic.hpp"

#include "tracelens/diff.hpp"
#include "tracelens/errors.hpp"
#include "tracelens/trace_store.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <unordered_map>
#include <unordered_set>

namespace tracelens {

LineageShape parse_lineage_shape(std::string_view s) {
    if (s == "chain") return LineageShape::chain;
    if (s == "tree") return LineageShape::tree;
    throw InvalidConfig("bad-shape", "unknown lineage shape '" + std::string(s) + "'");
}

ScoreProfile parse_score_profile(std::string_view s) {
    if (s == "improving") return ScoreProfile::improving;
    if (s == "jackpot_then_flat") return ScoreProfile::jackpot_then_flat;
    if (s == "noisy") return ScoreProfile::noisy;
    throw InvalidConfig("bad-profile", "unknown score profile '" + std::string(s) + "'");
}

std::string_view to_string(LineageShape s) { return s == LineageShape::chain ? "chain" : "tree"; }

std::string_view to_string(ScoreProfile p) {
    switch (p) {
        case ScoreProfile::improving: return "improving";
        case ScoreProfile::jackpot_then_flat: return "jackpot_then_flat";
        case ScoreProfile::noisy: return "noisy";
    }
    return "improving";
}

double GroundTruth::literal_rate() const {
    return code_lines() ? static_cast<double>(literal) / static_cast<double>(code_lines()) : 0.0;
}

double GroundTruth::tuning_share() const {
    return code_lines() ? static_cast<double>(tuning) / static_cast<double>(code_lines()) : 0.0;
}

json GroundTruth::to_json() const {
    json edits_json = json::array();
    for (const auto& e : edits) {
        json lines = json::array();
        for (const auto& l : e.added)
            lines.push_back({{"line_index", l.line_index},
                             {"category", to_string(l.category)},
                             {"deletion_iteration",
                              l.deletion_iteration ? json(*l.deletion_iteration) : json(nullptr)}});
        edits_json.push_back({{"parent_id", e.parent_id},
                              {"child_id", e.child_id},
                              {"iteration", e.iteration},
                              {"added", lines}});
    }
    return {{"literal", literal},     {"tuning", tuning},
            {"trivial", trivial},     {"novel", novel},
            {"literal_rate", literal_rate()}, {"tuning_share", tuning_share()},
            {"edits", edits_json}};
}

namespace {

// mt19937_64 output is fully specified by the standard; the helpers below
// avoid the implementation-defined std distributions so traces are
// identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    std::size_t below(std::size_t n) { return n ? static_cast<std::size_t>(engine_() % n) : 0; }
    int between(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::size_t>(hi - lo + 1))); }

private:
    std::mt19937_64 engine_;
};

struct Program {
    std::vector<std::string> lines;
    // Most recent deletion iteration of each line along this lineage.
    std::unordered_map<std::string, int> pool;
};

constexpr int kSeedCodeLines = 40;
constexpr std::size_t kMinCodeLines = 25;
constexpr std::size_t kMaxCodeLines = 60;

std::string render(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

std::string number_text(Rng& rng) { return fmt::format("{:.4f}", 0.0001 + rng.uniform() * 9.9); }

std::string assignment_name(const std::string& line) { return line.substr(0, line.find(" = ")); }

bool is_code(const std::string& line) { return !line.empty() && line[0] != '#'; }

double next_score(ScoreProfile profile, double parent_score, int t, Rng& rng) {
    switch (profile) {
        case ScoreProfile::improving:
            return parent_score + (rng.uniform() - 0.3) * 0.05;
        case ScoreProfile::jackpot_then_flat:
            if (t == 10) return parent_score + 1.0;
            return parent_score - rng.uniform() * 0.05;
        case ScoreProfile::noisy:
            return rng.uniform();
    }
    return parent_score;
}

}  // namespace

SyntheticTrace generate_synthetic_run(const SynthConfig& config) {
    const double lit_rate = config.planted_literal_recycle_rate;
    const double tun_rate = config.planted_tuning_recycle_rate;
    if (config.iterations < 1) throw InvalidConfig("bad-iterations", "iterations must be >= 1");
    if (!(lit_rate >= 0 && lit_rate <= 1) || !(tun_rate >= 0 && tun_rate <= 1))
        throw InvalidConfig("bad-rate", "planted rates must lie in [0, 1]");
    if (lit_rate + tun_rate > 1 + 1e-12)
        throw InvalidConfig("bad-rate", "planted rates must sum to at most 1");

    Rng rng(config.rng_seed);
    SyntheticTrace out;
    Run& run = out.run;
    GroundTruth& truth = out.truth;

    run.run_id = config.run_id;
    run.task = "synthetic";
    run.backend = "synthetic";
    run.model_config = {{"model", "synthetic-generator"}, {"diff_mode", "diff"},
                        {"lineage_shape", to_string(config.lineage_shape)},
                        {"score_profile", to_string(config.score_profile)}};
    run.domain_tag = DomainTag::other;
    run.budget = config.iterations;
    run.environment.evaluator_command = "python3 evaluate.py {program}";
    run.environment.timeout = 60.0;
    run.environment.dialect = Dialect::py_like;
    run.environment.notes = "synthetic trace; scores are generated, not evaluated";

    auto candidate_id = [](int t) { return fmt::format("c{:04d}", t); };

    std::vector<Program> programs;
    std::vector<double> scores;

    Program seed;
    seed.lines.push_back("import math");
    for (int k = 0; k < kSeedCodeLines; ++k)
        seed.lines.push_back(fmt::format("s_0_{} = {}", k, number_text(rng)));
    programs.push_back(seed);
    scores.push_back(0.5);

    Candidate seed_candidate;
    seed_candidate.candidate_id = candidate_id(0);
    seed_candidate.iteration = 0;
    seed_candidate.source = render(seed.lines);
    seed_candidate.score = scores[0];
    run.candidates.push_back(seed_candidate);
    run.seed_candidate_id = seed_candidate.candidate_id;

    // Run-wide quotas; each added code line takes the category furthest
    // behind its target share.
    std::size_t code_added = 0, lit_added = 0, tun_added = 0;

    for (int t = 1; t <= config.iterations; ++t) {
        const std::size_t parent_idx = config.lineage_shape == LineageShape::chain
                                           ? static_cast<std::size_t>(t - 1)
                                           : rng.below(static_cast<std::size_t>(t));
        const Program& parent = programs[parent_idx];
        Program child = parent;

        std::unordered_set<std::string> in_parent(parent.lines.begin(), parent.lines.end());

        // Deletions.
        std::vector<std::size_t> code_positions;
        for (std::size_t i = 1; i < child.lines.size(); ++i)
            if (is_code(child.lines[i])) code_positions.push_back(i);
        int n_delete = rng.between(1, 3);
        if (code_positions.size() > kMaxCodeLines) n_delete += 2;
        if (code_positions.size() < kMinCodeLines) n_delete = std::min(n_delete, 1);
        std::vector<std::string> deleted;
        for (int k = 0; k < n_delete && !code_positions.empty(); ++k) {
            const std::size_t pick = rng.below(code_positions.size());
            deleted.push_back(child.lines[code_positions[pick]]);
            code_positions.erase(code_positions.begin() + static_cast<std::ptrdiff_t>(pick));
        }
        for (const auto& d : deleted)
            child.lines.erase(std::find(child.lines.begin(), child.lines.end(), d));

        // Additions.
        PlantedEdit edit;
        edit.parent_id = candidate_id(static_cast<int>(parent_idx));
        edit.child_id = candidate_id(t);
        edit.iteration = t;

        struct Pending {
            std::string bytes;
            LineCategory category;
            std::optional<int> deletion_iteration;
        };
        std::vector<Pending> additions;
        std::unordered_set<std::string> taken;

        auto eligible_literal = [&]() {
            std::vector<std::pair<int, std::string>> options;
            for (const auto& [line, iter] : parent.pool)
                if (!in_parent.count(line) && !taken.count(line)) options.emplace_back(iter, line);
            std::sort(options.begin(), options.end(), std::greater<>());
            return options;
        };

        const int n_add = rng.between(1, 3);
        for (int k = 0; k < n_add; ++k) {
            const double next = static_cast<double>(code_added + 1);
            const double lit_gap = lit_rate * next - static_cast<double>(lit_added);
            const double tun_gap = tun_rate * next - static_cast<double>(tun_added);
            LineCategory want = LineCategory::novel;
            if (lit_gap >= 0.5 && lit_gap >= tun_gap)
                want = LineCategory::literal;
            else if (tun_gap >= 0.5)
                want = LineCategory::tuning;

            if (want == LineCategory::literal) {
                auto options = eligible_literal();
                if (options.empty()) break;  // retry once the pool fills up
                const auto& [iter, line] = options[rng.below(std::min<std::size_t>(options.size(), 4))];
                additions.push_back({line, LineCategory::literal, iter});
                taken.insert(line);
                ++lit_added;
            } else if (want == LineCategory::tuning) {
                auto options = eligible_literal();
                if (options.empty()) break;
                const auto& [iter, line] = options[rng.below(std::min<std::size_t>(options.size(), 4))];
                // Same name, fresh value; the exact bytes must be new to the pool.
                std::string variant;
                do {
                    variant = assignment_name(line) + " = " + number_text(rng);
                } while (parent.pool.count(variant) || in_parent.count(variant) || taken.count(variant));
                // The skeleton's most recent deletion may be a sibling variant.
                int skel_iter = iter;
                const std::string name = assignment_name(line);
                for (const auto& [other, oiter] : parent.pool)
                    if (assignment_name(other) == name) skel_iter = std::max(skel_iter, oiter);
                additions.push_back({variant, LineCategory::tuning, skel_iter});
                taken.insert(variant);
                taken.insert(line);
                ++tun_added;
            } else {
                additions.push_back({fmt::format("v_{}_{} = {}", t, k, number_text(rng)),
                                     LineCategory::novel, std::nullopt});
            }
            ++code_added;
        }
        if (rng.uniform() < 0.15) additions.push_back({fmt::format("# note {}", t), LineCategory::trivial, std::nullopt});

        for (auto& a : additions) {
            const std::size_t pos = 1 + rng.below(child.lines.size());
            child.lines.insert(child.lines.begin() + static_cast<std::ptrdiff_t>(pos), a.bytes);
        }
        for (const auto& d : deleted) child.pool[d] = t;

        // Record planted categories by final line position.
        for (const auto& a : additions) {
            PlantedLine pl;
            pl.line_index = static_cast<std::size_t>(
                std::find(child.lines.begin(), child.lines.end(), a.bytes) - child.lines.begin());
            pl.category = a.category;
            pl.deletion_iteration = a.deletion_iteration;
            switch (a.category) {
                case LineCategory::literal: ++truth.literal; break;
                case LineCategory::tuning: ++truth.tuning; break;
                case LineCategory::trivial: ++truth.trivial; break;
                case LineCategory::novel: ++truth.novel; break;
            }
            edit.added.push_back(pl);
        }
        std::sort(edit.added.begin(), edit.added.end(),
                  [](const PlantedLine& a, const PlantedLine& b) { return a.line_index < b.line_index; });
        truth.edits.push_back(std::move(edit));

        const double score = next_score(config.score_profile, scores[parent_idx], t, rng);
        scores.push_back(score);
        programs.push_back(std::move(child));

        Candidate c;
        c.candidate_id = candidate_id(t);
        c.iteration = t;
        c.source = render(programs.back().lines);
        c.parent_ids = {candidate_id(static_cast<int>(parent_idx))};
        c.context_id = fmt::format("ctx{:04d}", t);
        c.score = score;
        run.candidates.push_back(c);

        Context ctx;
        ctx.context_id = *c.context_id;
        ctx.prompt = fmt::format(
            "Improve the program below. Iteration {}.\n```python\n{}```\n", t,
            run.candidates[parent_idx].source);
        ctx.auxiliary = {{"population_summary", fmt::format("{} programs so far", t)}};
        run.contexts.push_back(std::move(ctx));

        Edge e;
        e.parent_id = candidate_id(static_cast<int>(parent_idx));
        e.child_id = c.candidate_id;
        e.op = EditOperator::mutation;
        run.edges.push_back(std::move(e));
    }

    for (const auto& c : run.candidates) {
        Evaluation ev;
        ev.candidate_id = c.candidate_id;
        ev.status = EvalStatus::ok;
        ev.score = c.score;
        ev.stdout_text = json{{"score", *c.score}}.dump() + "\n";
        ev.wall_time = 0.25;
        ev.metrics = {{"score", *c.score}};
        run.evaluations.push_back(std::move(ev));
    }
    run.reindex();
    return out;
}

void write_synthetic_run(const SyntheticTrace& trace, const std::filesystem::path& dir) {
    emit_run(trace.run, dir);
    std::ofstream out(dir / kGroundTruthFile, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write-failed", "cannot write ground truth in " + dir.string());
    out << trace.truth.to_json().dump(2) << '\n';
}

}  // namespace tracelens
