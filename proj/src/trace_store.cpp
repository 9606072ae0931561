#include "tracelens/trace_store.hpp"

#include "tracelens/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace fs = std::filesystem;

namespace tracelens {

namespace {

// ---------------------------------------------------------------------------
// JSON field access

struct RecordReader {
    const json& obj;
    std::string table;
    std::size_t line;

    [[noreturn]] void fail(const std::string& code, const std::string& what) const {
        throw SchemaViolation(code, table + ":" + std::to_string(line) + ": " + what);
    }

    const json& require(const char* key) const {
        auto it = obj.find(key);
        if (it == obj.end()) fail("missing-field", std::string("missing required field '") + key + "'");
        return *it;
    }

    std::string str(const char* key) const {
        const json& v = require(key);
        if (!v.is_string()) fail("bad-type", std::string("field '") + key + "' must be a string");
        return v.get<std::string>();
    }

    std::string str_or(const char* key, std::string fallback) const {
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) return fallback;
        if (!it->is_string()) fail("bad-type", std::string("field '") + key + "' must be a string");
        return it->get<std::string>();
    }

    std::optional<std::string> opt_str(const char* key) const {
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) return std::nullopt;
        if (!it->is_string()) fail("bad-type", std::string("field '") + key + "' must be a string");
        return it->get<std::string>();
    }

    long long integer(const char* key) const {
        const json& v = require(key);
        if (!v.is_number_integer())
            fail("bad-type", std::string("field '") + key + "' must be an integer");
        return v.get<long long>();
    }

    double real(const char* key) const {
        const json& v = require(key);
        if (!v.is_number()) fail("bad-type", std::string("field '") + key + "' must be a number");
        return v.get<double>();
    }

    double real_or(const char* key, double fallback) const {
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) return fallback;
        if (!it->is_number()) fail("bad-type", std::string("field '") + key + "' must be a number");
        return it->get<double>();
    }

    std::optional<double> opt_real(const char* key) const {
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) return std::nullopt;
        if (!it->is_number()) fail("bad-type", std::string("field '") + key + "' must be a number");
        return it->get<double>();
    }

    std::vector<std::string> str_list(const char* key, bool required) const {
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) {
            if (required) fail("missing-field", std::string("missing required field '") + key + "'");
            return {};
        }
        if (!it->is_array()) fail("bad-type", std::string("field '") + key + "' must be an array");
        std::vector<std::string> out;
        for (const auto& e : *it) {
            if (!e.is_string()) fail("bad-type", std::string("field '") + key + "' must hold strings");
            out.push_back(e.get<std::string>());
        }
        return out;
    }

    json object_or_empty(const char* key) const {
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) return json::object();
        if (!it->is_object()) fail("bad-type", std::string("field '") + key + "' must be an object");
        return *it;
    }

    json extra(std::initializer_list<const char*> known) const {
        json out = json::object();
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            bool is_known = std::any_of(known.begin(), known.end(),
                                        [&](const char* k) { return it.key() == k; });
            if (!is_known) out[it.key()] = it.value();
        }
        return out;
    }

    template <typename F>
    auto parse_enum(const char* key, F parser) const {
        try {
            return parser(str(key));
        } catch (const SchemaViolation& e) {
            fail("bad-enum", e.what());
        }
    }
};

std::vector<json> read_table(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("missing-table", "cannot open " + file.string());
    std::vector<json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }))
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaViolation("invalid-json", file.filename().string() + ":" +
                                                      std::to_string(lineno) + ": " + e.what());
        }
        if (!j.is_object())
            throw SchemaViolation("invalid-json", file.filename().string() + ":" +
                                                      std::to_string(lineno) + ": not an object");
        out.push_back(std::move(j));
    }
    if (in.bad()) throw IoError("read-failed", "error reading " + file.string());
    return out;
}

json merged(const json& extra, json known) {
    json out = extra.is_object() ? extra : json::object();
    for (auto it = known.begin(); it != known.end(); ++it) out[it.key()] = it.value();
    return out;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void write_table(const fs::path& file, const std::vector<json>& rows) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write-failed", "cannot write " + file.string());
    for (const auto& row : rows) {
        try {
            out << row.dump() << '\n';
        } catch (const json::type_error& e) {
            throw SchemaViolation("non-utf8", file.filename().string() + ": " + e.what());
        }
    }
    if (!out) throw IoError("write-failed", "error writing " + file.string());
}

}  // namespace

// ---------------------------------------------------------------------------
// Serialization

json to_json(const Candidate& c) {
    return merged(c.extra, {{"candidate_id", c.candidate_id},
                            {"iteration", c.iteration},
                            {"source", c.source},
                            {"parent_ids", c.parent_ids},
                            {"context_id", c.context_id ? json(*c.context_id) : json(nullptr)},
                            {"validity", to_string(c.validity)},
                            {"score", optional_number(c.score)}});
}

json to_json(const Evaluation& e) {
    return merged(e.extra, {{"candidate_id", e.candidate_id},
                            {"status", to_string(e.status)},
                            {"score", optional_number(e.score)},
                            {"stdout", e.stdout_text},
                            {"stderr", e.stderr_text},
                            {"wall_time", e.wall_time},
                            {"metrics", e.metrics}});
}

json to_json(const Edge& e) {
    return merged(e.extra, {{"parent_id", e.parent_id},
                            {"child_id", e.child_id},
                            {"operator", to_string(e.op)}});
}

json to_json(const Context& c) {
    return merged(c.extra,
                  {{"context_id", c.context_id}, {"prompt", c.prompt}, {"auxiliary", c.auxiliary}});
}

json to_json(const ReplayEnvironment& env) {
    return merged(env.extra, {{"evaluator_command", env.evaluator_command},
                              {"timeout", env.timeout},
                              {"dialect", to_string(env.dialect)},
                              {"artifacts", env.artifacts},
                              {"notes", env.notes}});
}

json run_header_json(const Run& run) {
    return merged(run.extra, {{"run_id", run.run_id},
                              {"task", run.task},
                              {"backend", run.backend},
                              {"model_config", run.model_config},
                              {"domain_tag", to_string(run.domain_tag)},
                              {"budget", run.budget},
                              {"seed_candidate_id", run.seed_candidate_id}});
}

ReplayEnvironment environment_from_json(const json& j) {
    RecordReader r{j, kEnvironmentsFile, 1};
    ReplayEnvironment env;
    env.evaluator_command = r.str("evaluator_command");
    env.timeout = r.real_or("timeout", 300.0);
    env.dialect = r.parse_enum("dialect", parse_dialect);
    env.artifacts = r.str_list("artifacts", false);
    env.notes = r.str_or("notes", "");
    env.extra = r.extra({"evaluator_command", "timeout", "dialect", "artifacts", "notes"});
    return env;
}

void emit_run(const Run& run, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("write-failed", "cannot create " + dir.string() + ": " + ec.message());

    write_table(dir / kRunsFile, {run_header_json(run)});
    write_table(dir / kEnvironmentsFile, {to_json(run.environment)});
    std::vector<json> rows;
    for (const auto& c : run.candidates) rows.push_back(to_json(c));
    write_table(dir / kCandidatesFile, rows);
    rows.clear();
    for (const auto& e : run.evaluations) rows.push_back(to_json(e));
    write_table(dir / kEvaluationsFile, rows);
    rows.clear();
    for (const auto& e : run.edges) rows.push_back(to_json(e));
    write_table(dir / kEdgesFile, rows);
    rows.clear();
    for (const auto& c : run.contexts) rows.push_back(to_json(c));
    write_table(dir / kContextsFile, rows);
}

// ---------------------------------------------------------------------------
// Ingest

Run ingest_run(const fs::path& dir, const std::optional<std::string>& backend_hint) {
    if (!fs::is_directory(dir)) throw IoError("missing-run-dir", "not a directory: " + dir.string());

    const auto runs = read_table(dir / kRunsFile);
    const auto environments = read_table(dir / kEnvironmentsFile);
    const auto candidates = read_table(dir / kCandidatesFile);
    const auto evaluations = read_table(dir / kEvaluationsFile);
    const auto edges = read_table(dir / kEdgesFile);
    const auto contexts = read_table(dir / kContextsFile);

    if (runs.size() != 1)
        throw SchemaViolation("run-count", std::string(kRunsFile) + ": expected exactly one run record, found " +
                                               std::to_string(runs.size()));
    if (environments.size() != 1)
        throw SchemaViolation("environment-count",
                              std::string(kEnvironmentsFile) +
                                  ": expected exactly one environment record, found " +
                                  std::to_string(environments.size()));

    Run run;
    {
        RecordReader r{runs[0], kRunsFile, 1};
        run.run_id = r.str("run_id");
        run.task = r.str("task");
        run.backend = r.str_or("backend", "");
        run.model_config = r.object_or_empty("model_config");
        run.domain_tag = r.parse_enum("domain_tag", parse_domain_tag);
        long long budget = r.integer("budget");
        run.budget = static_cast<int>(budget);
        run.seed_candidate_id = r.str("seed_candidate_id");
        run.extra = r.extra({"run_id", "task", "backend", "model_config", "domain_tag", "budget",
                             "seed_candidate_id"});
    }
    if (run.backend.empty() && backend_hint) run.backend = *backend_hint;
    run.environment = environment_from_json(environments[0]);

    for (std::size_t i = 0; i < candidates.size(); ++i) {
        RecordReader r{candidates[i], kCandidatesFile, i + 1};
        Candidate c;
        c.candidate_id = r.str("candidate_id");
        c.iteration = static_cast<int>(r.integer("iteration"));
        c.source = r.str("source");
        c.parent_ids = r.str_list("parent_ids", false);
        c.context_id = r.opt_str("context_id");
        c.validity = candidates[i].contains("validity") ? r.parse_enum("validity", parse_validity)
                                                        : Validity::accepted;
        c.score = r.opt_real("score");
        c.extra = r.extra({"candidate_id", "iteration", "source", "parent_ids", "context_id",
                           "validity", "score"});
        run.candidates.push_back(std::move(c));
    }
    for (std::size_t i = 0; i < evaluations.size(); ++i) {
        RecordReader r{evaluations[i], kEvaluationsFile, i + 1};
        Evaluation e;
        e.candidate_id = r.str("candidate_id");
        e.status = r.parse_enum("status", parse_eval_status);
        e.score = r.opt_real("score");
        e.stdout_text = r.str_or("stdout", "");
        e.stderr_text = r.str_or("stderr", "");
        e.wall_time = r.real_or("wall_time", 0.0);
        json metrics = r.object_or_empty("metrics");
        for (auto it = metrics.begin(); it != metrics.end(); ++it) {
            if (!it->is_number()) r.fail("bad-type", "metric '" + it.key() + "' must be a number");
            e.metrics[it.key()] = it->get<double>();
        }
        e.extra = r.extra(
            {"candidate_id", "status", "score", "stdout", "stderr", "wall_time", "metrics"});
        run.evaluations.push_back(std::move(e));
    }
    for (std::size_t i = 0; i < edges.size(); ++i) {
        RecordReader r{edges[i], kEdgesFile, i + 1};
        Edge e;
        e.parent_id = r.str("parent_id");
        e.child_id = r.str("child_id");
        e.op = edges[i].contains("operator") ? r.parse_enum("operator", parse_edit_operator)
                                             : EditOperator::unknown;
        e.extra = r.extra({"parent_id", "child_id", "operator"});
        run.edges.push_back(std::move(e));
    }
    for (std::size_t i = 0; i < contexts.size(); ++i) {
        RecordReader r{contexts[i], kContextsFile, i + 1};
        Context c;
        c.context_id = r.str("context_id");
        c.prompt = r.str("prompt");
        c.auxiliary = r.object_or_empty("auxiliary");
        c.extra = r.extra({"context_id", "prompt", "auxiliary"});
        run.contexts.push_back(std::move(c));
    }

    run.reindex();

    // Referential integrity.
    std::unordered_set<std::string> seen;
    for (const auto& c : run.candidates)
        if (!seen.insert(c.candidate_id).second)
            throw SchemaViolation("duplicate-candidate", "duplicate candidate_id '" + c.candidate_id + "'");
    if (!run.find_candidate(run.seed_candidate_id))
        throw SchemaViolation("dangling-seed", "seed_candidate_id '" + run.seed_candidate_id +
                                                   "' matches no candidate");
    for (const auto& c : run.candidates) {
        for (const auto& p : c.parent_ids)
            if (!run.find_candidate(p))
                throw SchemaViolation("dangling-parent", "candidate '" + c.candidate_id +
                                                             "' names unknown parent '" + p + "'");
        if (c.context_id && !run.find_context(*c.context_id))
            throw SchemaViolation("dangling-context", "candidate '" + c.candidate_id +
                                                          "' names unknown context '" +
                                                          *c.context_id + "'");
    }
    for (const auto& e : run.edges) {
        if (!run.find_candidate(e.parent_id))
            throw SchemaViolation("dangling-parent", "edge parent '" + e.parent_id + "' matches no candidate");
        if (!run.find_candidate(e.child_id))
            throw SchemaViolation("dangling-child", "edge child '" + e.child_id + "' matches no candidate");
    }
    for (const auto& e : run.evaluations)
        if (!run.find_candidate(e.candidate_id))
            throw SchemaViolation("dangling-evaluation",
                                  "evaluation names unknown candidate '" + e.candidate_id + "'");
    return run;
}

std::vector<Run> ingest_corpus(const fs::path& corpus_dir) {
    if (!fs::is_directory(corpus_dir))
        throw IoError("missing-corpus", "not a directory: " + corpus_dir.string());
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(corpus_dir))
        if (entry.is_directory() && fs::exists(entry.path() / kRunsFile)) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    std::vector<Run> runs;
    runs.reserve(dirs.size());
    for (const auto& d : dirs) runs.push_back(ingest_run(d));
    return runs;
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::has(std::string_view code) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.code == code; });
}

ValidationReport validate_run(const Run& run) {
    ValidationReport report;
    auto add = [&](std::string code, std::string subject, std::string message) {
        report.violations.push_back({std::move(code), std::move(subject), std::move(message)});
    };

    if (run.budget < 1) add("invalid-budget", run.run_id, "budget must be >= 1");
    if (!(run.environment.timeout > 0)) add("invalid-timeout", run.run_id, "timeout must be > 0");

    std::unordered_set<std::string> ids;
    for (const auto& c : run.candidates) {
        if (!ids.insert(c.candidate_id).second)
            add("duplicate-candidate", c.candidate_id, "candidate_id is not unique");
        if (c.iteration < 0 || c.iteration > run.budget)
            add("iteration-out-of-range", c.candidate_id,
                "iteration " + std::to_string(c.iteration) + " outside [0, budget]");
        for (const auto& p : c.parent_ids)
            if (!run.find_candidate(p)) add("dangling-parent", c.candidate_id, "unknown parent '" + p + "'");
        if (c.context_id && !run.find_context(*c.context_id))
            add("dangling-context", c.candidate_id, "unknown context '" + *c.context_id + "'");
        if (!c.is_root() && !c.context_id)
            add("missing-context", c.candidate_id, "non-seed candidate has no context_id");
    }
    std::unordered_set<std::string> ctx_ids;
    for (const auto& c : run.contexts)
        if (!ctx_ids.insert(c.context_id).second)
            add("duplicate-context", c.context_id, "context_id is not unique");

    const Candidate* seed = run.find_candidate(run.seed_candidate_id);
    if (!seed)
        add("dangling-seed", run.seed_candidate_id, "seed candidate does not exist");
    else if (!seed->is_root())
        add("seed-has-parent", seed->candidate_id, "seed candidate lists parents");

    for (const auto& e : run.evaluations) {
        if (!run.find_candidate(e.candidate_id))
            add("dangling-evaluation", e.candidate_id, "evaluation for unknown candidate");
        if ((e.status == EvalStatus::ok) != e.score.has_value())
            add("status-score-mismatch", e.candidate_id, "status ok must coincide with a score");
        if (!(e.wall_time >= 0)) add("negative-wall-time", e.candidate_id, "wall_time must be >= 0");
    }

    for (const auto& e : run.edges) {
        const Candidate* p = run.find_candidate(e.parent_id);
        const Candidate* c = run.find_candidate(e.child_id);
        if (!p) add("dangling-parent", e.child_id, "edge parent '" + e.parent_id + "' unknown");
        if (!c) add("dangling-child", e.child_id, "edge child unknown");
        if (!p || !c) continue;
        if (c->iteration < p->iteration)
            add("edge-iteration-order", e.child_id, "child iteration precedes parent iteration");
        if (std::find(c->parent_ids.begin(), c->parent_ids.end(), e.parent_id) == c->parent_ids.end())
            add("edge-parent-mismatch", e.child_id,
                "edge parent '" + e.parent_id + "' not listed in child's parent_ids");
    }

    // Cycle detection over parent_ids and edges together.
    std::unordered_map<std::string, std::vector<std::string>> parents;
    for (const auto& c : run.candidates)
        for (const auto& p : c.parent_ids)
            if (run.find_candidate(p)) parents[c.candidate_id].push_back(p);
    for (const auto& e : run.edges)
        if (run.find_candidate(e.parent_id) && run.find_candidate(e.child_id))
            parents[e.child_id].push_back(e.parent_id);

    enum class Mark { none, active, done };
    std::unordered_map<std::string, Mark> mark;
    std::set<std::string> cyclic;
    for (const auto& start : run.candidates) {
        if (mark[start.candidate_id] != Mark::none) continue;
        // Iterative DFS: (node, next parent index).
        std::vector<std::pair<std::string, std::size_t>> stack{{start.candidate_id, 0}};
        mark[start.candidate_id] = Mark::active;
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            const auto& ps = parents[node];
            if (next < ps.size()) {
                const std::string p = ps[next++];
                Mark& m = mark[p];
                if (m == Mark::active) {
                    cyclic.insert(p);
                } else if (m == Mark::none) {
                    m = Mark::active;
                    stack.emplace_back(p, 0);
                }
            } else {
                mark[node] = Mark::done;
                stack.pop_back();
            }
        }
    }
    for (const auto& id : cyclic) add("lineage-cycle", id, "candidate lies on a parent cycle");

    // Every candidate's first-parent chain must end at the seed.
    if (seed) {
        for (const auto& c : run.candidates) {
            const Candidate* cur = &c;
            std::size_t steps = 0;
            while (cur && !cur->is_root() && steps <= run.candidates.size()) {
                cur = run.find_candidate(cur->parent_ids.front());
                ++steps;
            }
            if (!cur || steps > run.candidates.size() || cur->candidate_id != seed->candidate_id)
                add("unreachable-seed", c.candidate_id, "first-parent chain does not reach the seed");
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Lineage and best-so-far

std::vector<const Candidate*> lineage_of(const Run& run, std::string_view candidate_id) {
    std::vector<const Candidate*> out{&run.candidate(candidate_id)};
    while (!out.back()->is_root()) {
        if (out.size() > run.candidates.size())
            throw SchemaViolation("lineage-cycle",
                                  "lineage of '" + std::string(candidate_id) + "' does not terminate");
        const auto& pid = out.back()->parent_ids.front();
        const Candidate* p = run.find_candidate(pid);
        if (!p) throw SchemaViolation("dangling-parent", "unknown parent '" + pid + "'");
        out.push_back(p);
    }
    return out;
}

std::vector<const Candidate*> all_ancestors(const Run& run, std::string_view candidate_id) {
    std::vector<const Candidate*> out;
    std::unordered_set<std::string> seen;
    std::vector<const Candidate*> frontier{&run.candidate(candidate_id)};
    seen.insert(std::string(candidate_id));
    while (!frontier.empty()) {
        const Candidate* c = frontier.back();
        frontier.pop_back();
        for (const auto& pid : c->parent_ids) {
            if (!seen.insert(pid).second) continue;
            const Candidate* p = run.find_candidate(pid);
            if (!p) throw SchemaViolation("dangling-parent", "unknown parent '" + pid + "'");
            out.push_back(p);
            frontier.push_back(p);
        }
    }
    return out;
}

std::vector<const Candidate*> candidates_in_order(const Run& run) {
    std::vector<const Candidate*> out;
    out.reserve(run.candidates.size());
    for (const auto& c : run.candidates) out.push_back(&c);
    std::stable_sort(out.begin(), out.end(), [](const Candidate* a, const Candidate* b) {
        return a->iteration < b->iteration;
    });
    return out;
}

std::vector<ChainEntry> best_so_far_chain(const Run& run, bool include_rejected) {
    std::vector<ChainEntry> chain;
    for (const Candidate* c : candidates_in_order(run)) {
        if (!c->score || !std::isfinite(*c->score)) continue;
        if (!include_rejected && c->validity != Validity::accepted) continue;
        if (chain.empty() || *c->score > chain.back().score)
            chain.push_back({c->iteration, c->candidate_id, *c->score});
    }
    if (chain.empty())
        throw NoScoredCandidates("no-scored-candidates",
                                 "run '" + run.run_id + "' has no scored accepted candidate");
    return chain;
}

const Candidate& final_best(const Run& run, bool include_rejected) {
    return run.candidate(best_so_far_chain(run, include_rejected).back().candidate_id);
}

}  // namespace tracelens
