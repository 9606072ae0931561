#include "support.hpp"

#include "tracelens/trace_store.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <array>
#include <cstdio>

using json = nlohmann::json;
using tltest::ScratchDir;

namespace {

struct Result {
    int exit_code = -1;
    std::string out;  // stdout only; stderr goes to err
    std::string err;
};

Result cli(const std::string& args, const std::string& env = {}) {
    ScratchDir tmp;
    const auto err_path = tmp.path() / "stderr.txt";
    const std::string cmd = env + " " + tltest::shell_quote_path(TL_CLI_PATH) + " " + args + " 2>" +
                            tltest::shell_quote_path(err_path.string());
    Result r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = tltest::read_file(err_path);
    return r;
}

std::string q(const std::filesystem::path& p) { return tltest::shell_quote_path(p.string()); }

std::string simulate(const ScratchDir& dir, const std::string& name, int seed) {
    const auto run_dir = dir.path() / name;
    auto r = cli("simulate --emit " + q(run_dir) + " --iterations 30 --literal-rate 0.3 --tuning-rate 0.1 --seed " +
                 std::to_string(seed) + " --run-id " + name);
    REQUIRE(r.exit_code == 0);
    return run_dir.string();
}

}  // namespace

TEST_CASE("simulate, validate and ingest a synthetic run") {
    ScratchDir dir;
    const auto run = simulate(dir, "sim", 1);
    CHECK(std::filesystem::exists(std::filesystem::path(run) / "runs.jsonl"));
    auto v = cli("validate --strict --trace " + q(run));
    CHECK(v.exit_code == 0);
    auto j = json::parse(v.out);
    CHECK(j["rows"].empty());
    auto ing = cli("ingest --trace " + q(run) + " --format csv");
    CHECK(ing.exit_code == 0);
    CHECK(ing.out.rfind("run_id,task,backend", 0) == 0);
}

TEST_CASE("strict validation fails on a broken run") {
    ScratchDir dir;
    const auto run = simulate(dir, "sim", 2);
    auto loaded = tracelens::ingest_run(run);
    loaded.budget = 3;
    tracelens::emit_run(loaded, run);
    auto v = cli("validate --strict --trace " + q(run));
    CHECK(v.exit_code == 1);
    CHECK(v.out.find("iteration-out-of-range") != std::string::npos);
    CHECK(cli("validate --trace " + q(run)).exit_code == 0);
}

TEST_CASE("cycling, metrics and report over a corpus") {
    ScratchDir dir;
    simulate(dir, "a", 3);
    simulate(dir, "b", 4);
    auto c = cli("cycling --corpus " + q(dir.path()));
    REQUIRE(c.exit_code == 0);
    auto j = json::parse(c.out);
    CHECK(j["rows"].size() == 2);
    CHECK(j["rows"][0]["run_rate"].is_number());
    auto g = cli("cycling --corpus " + q(dir.path()) + " --group-by model --format csv");
    CHECK(g.exit_code == 0);
    CHECK(g.out.rfind("group,tuning_share", 0) == 0);
    auto m = cli("metrics --corpus " + q(dir.path()) + " --run-id b");
    REQUIRE(m.exit_code == 0);
    CHECK(json::parse(m.out)["rows"].size() == 1);
    auto t = cli("metrics --trace " + q(dir.path() / "a") + " --trajectory");
    CHECK(json::parse(t.out)["rows"].size() == 31);
    auto r = cli("report --corpus " + q(dir.path()));
    CHECK(r.exit_code == 0);
    const auto out_file = dir.path() / "report.csv";
    CHECK(cli("report --corpus " + q(dir.path()) + " --format csv --out " + q(out_file)).exit_code == 0);
    CHECK_FALSE(tltest::read_file(out_file).empty());
}

TEST_CASE("the audit log has one line per added line") {
    ScratchDir dir;
    const auto run = simulate(dir, "sim", 5);
    const auto audit = dir.path() / "audit.jsonl";
    REQUIRE(cli("cycling --trace " + q(run) + " --audit " + q(audit)).exit_code == 0);
    auto text = tltest::read_file(audit);
    CHECK_FALSE(text.empty());
    CHECK(json::parse(text.substr(0, text.find('\n'))).contains("category"));
}

TEST_CASE("rescore with a private command") {
    ScratchDir dir;
    const auto run = simulate(dir, "sim", 6);
    auto r = cli("rescore --trace " + q(run) + " --private-command " +
                 tltest::shell_quote_path("echo '{\"score\": 1}' # {program}"));
    REQUIRE(r.exit_code == 0);
    auto j = json::parse(r.out);
    REQUIRE(j["rows"].size() == 1);
    CHECK(j["rows"][0]["private_delta"] == 0.0);
    CHECK(j["rows"][0]["verdict"] == "no_movement");
}

TEST_CASE("tune with a knob file") {
    ScratchDir dir;
    const auto src = tltest::read_file(tltest::fixtures() / "programs" / "knapsack.py");
    auto run = tltest::replay_run(src, 43.0, src, 43.0);
    tracelens::emit_run(run, dir.path() / "run");
    auto r = cli("tune --trace " + q(dir.path() / "run") + " --knobs " +
                 q(tltest::fixtures() / "knobs" / "knapsack.py.json") + " --budget 4 --init 2 --seed 1");
    REQUIRE(r.exit_code == 0);
    auto j = json::parse(r.out);
    REQUIRE(j["rows"].size() == 1);
    CHECK(j["rows"][0]["f_p0"] == 43.0);
}

TEST_CASE("agreement between two label files") {
    ScratchDir dir;
    tltest::write_file(dir.path() / "ref.csv", "item_id,labels\ne1,bug_fix\ne2,pruning|refactor\n");
    tltest::write_file(dir.path() / "judge.csv", "e1,bug_fix\ne2,pruning\n");
    auto r = cli("agreement --reference " + q(dir.path() / "ref.csv") + " --judged " + q(dir.path() / "judge.csv"));
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("macro_kappa") != std::string::npos);
}

TEST_CASE("model commands without credentials fail cleanly") {
    ScratchDir dir;
    const auto run = simulate(dir, "sim", 7);
    auto r = cli("annotate --trace " + q(run) + " --model judge", "env -u MODEL_API_KEY -u MODEL_BASE_URL");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("missing credential") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
    CHECK(cli("cycling --no-such-flag").exit_code == 2);
    CHECK(cli("simulate").exit_code == 2);
    CHECK(cli("metrics").exit_code == 2);
    CHECK(cli("metrics --trace /nonexistent/dir").exit_code == 1);
}
