#pragma once

// Shared test helpers: fixture paths, scripted chat backends, scratch
// directories and a hand-built run with a replayable context.

#include "tracelens/chat_client.hpp"
#include "tracelens/trace.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace tltest {

namespace fs = std::filesystem;

inline fs::path fixtures() { return fs::path(TL_FIXTURES_DIR); }

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, std::string_view text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

/// Removed on destruction.
class ScratchDir {
public:
    ScratchDir() {
        static std::atomic<unsigned> counter{0};
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("tltest-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

inline std::string python() { return TL_PYTHON; }

inline std::string shell_quote_path(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

inline tracelens::ReplayEnvironment py_environment() {
    tracelens::ReplayEnvironment env;
    env.evaluator_command = python() + " " + (fixtures() / "evaluators" / "eval_py.py").string() + " {program}";
    env.timeout = 60.0;
    env.dialect = tracelens::Dialect::py_like;
    return env;
}

inline tracelens::ReplayEnvironment c_environment() {
    tracelens::ReplayEnvironment env;
    env.evaluator_command = python() + " " + (fixtures() / "evaluators" / "eval_c.py").string() + " {program}";
    env.timeout = 120.0;
    env.dialect = tracelens::Dialect::c_like;
    return env;
}

/// Replies with whatever the function returns; counts calls.
class ScriptedBackend : public tracelens::ChatBackend {
public:
    using Fn = std::function<std::string(const tracelens::ChatRequest&, int call)>;
    explicit ScriptedBackend(Fn fn) : fn_(std::move(fn)) {}

    tracelens::ChatResponse send(const tracelens::ChatRequest& request) override {
        int call = 0;
        {
            std::lock_guard lock(mutex_);
            call = calls_++;
            requests_.push_back(request);
        }
        tracelens::ChatResponse r;
        r.content = fn_(request, call);
        return r;
    }
    int calls() const {
        std::lock_guard lock(mutex_);
        return calls_;
    }
    std::vector<tracelens::ChatRequest> requests() const {
        std::lock_guard lock(mutex_);
        return requests_;
    }

private:
    Fn fn_;
    mutable std::mutex mutex_;
    int calls_ = 0;
    std::vector<tracelens::ChatRequest> requests_;
};

inline tracelens::ChatClientOptions quiet_client_options() {
    tracelens::ChatClientOptions o;
    o.sleep = [](double) {};
    return o;
}

/// Seed "p0" -> "p1" -> "p2" with a saved context on p2. Sources are the
/// descent fixture with varying momentum, scored by running the program.
inline tracelens::Run replay_run(const std::string& parent_src, double parent_score,
                                 const std::string& child_src, double child_score) {
    using namespace tracelens;
    Run run;
    run.run_id = "replay-run";
    run.task = "descent";
    run.backend = "fixture";
    run.model_config = json{{"model", "fixture-model"}, {"temperature", 0.7}};
    run.budget = 2;
    run.seed_candidate_id = "p0";
    run.environment = py_environment();

    Candidate p0;
    p0.candidate_id = "p0";
    p0.iteration = 0;
    p0.source = parent_src;
    p0.score = parent_score;
    Candidate p1 = p0;
    p1.candidate_id = "p1";
    p1.iteration = 1;
    p1.parent_ids = {"p0"};
    p1.context_id = "ctx1";
    Candidate p2;
    p2.candidate_id = "p2";
    p2.iteration = 2;
    p2.source = child_src;
    p2.parent_ids = {"p1"};
    p2.context_id = "ctx2";
    p2.score = child_score;
    run.candidates = {p0, p1, p2};
    run.edges = {{"p0", "p1", EditOperator::mutation, json::object()},
                 {"p1", "p2", EditOperator::mutation, json::object()}};
    Context ctx;
    ctx.context_id = "ctx2";
    ctx.prompt = "Improve the program below.\n```python\n" + parent_src + "```\n";
    ctx.auxiliary = json{{"system_prompt", "You improve programs."}};
    Context ctx1;
    ctx1.context_id = "ctx1";
    ctx1.prompt = "Restate the program.";
    run.contexts = {ctx1, ctx};
    run.reindex();
    return run;
}

}  // namespace tltest
