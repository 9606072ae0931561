#include "support.hpp"

#include "tracelens/errors.hpp"
#include "tracelens/evaluator.hpp"

#include <doctest.h>

#include <chrono>

using namespace tracelens;

namespace {

/// `command` runs as given; a placeholder reference is added when missing.
EvalRequest shell_request(const std::string& command, double timeout = 20.0) {
    EvalRequest r;
    r.program_source = "print('hi')\n";
    r.environment.evaluator_command =
        command.find("{program}") == std::string::npos ? ": {program}; " + command : command;
    r.environment.timeout = timeout;
    return r;
}

}  // namespace

TEST_SUITE("evaluator") {

TEST_CASE("fixture program is scored through the evaluator command") {
    EvalRequest r;
    r.program_source = tltest::read_file(tltest::fixtures() / "programs" / "knapsack.py");
    r.environment = tltest::py_environment();
    auto e = evaluate_candidate(r);
    CHECK(e.status == EvalStatus::ok);
    REQUIRE(e.score);
    CHECK(*e.score == 43.0);
    CHECK(e.metrics.at("value") == 43.0);
    CHECK(e.wall_time > 0.0);
}

TEST_CASE("the program path substitutes the placeholder and keeps the dialect extension") {
    auto e = evaluate_candidate(shell_request("case {program} in *program.py) echo '{\"score\": 1}';; esac"));
    CHECK(e.status == EvalStatus::ok);
    auto r = shell_request("case {program} in *program.cpp) echo '{\"score\": 2}';; esac");
    r.environment.dialect = Dialect::c_like;
    CHECK(*evaluate_candidate(r).score == 2.0);
}

TEST_CASE("the last score line wins over earlier output") {
    auto e = evaluate_candidate(
        shell_request("echo 'log {\"score\": 1}'; echo '{\"score\": 5, \"metrics\": {\"n\": 2, \"tag\": \"x\"}}'"));
    REQUIRE(e.score);
    CHECK(*e.score == 5.0);
    CHECK(e.metrics.size() == 1);
    CHECK(e.metrics.at("n") == 2.0);
}

TEST_CASE("nonzero exit is an error even with a score") {
    auto e = evaluate_candidate(shell_request("echo '{\"score\": 3}'; echo oops >&2; exit 2"));
    CHECK(e.status == EvalStatus::error);
    CHECK_FALSE(e.score.has_value());
    CHECK(e.stderr_text.find("oops") != std::string::npos);
}

TEST_CASE("invalid or missing scores are errors") {
    CHECK(evaluate_candidate(shell_request("echo '{\"score\": 3, \"valid\": false}'")).status == EvalStatus::error);
    CHECK(evaluate_candidate(shell_request("echo 'no json'")).status == EvalStatus::error);
    CHECK(evaluate_candidate(shell_request("echo '{\"score\": \"high\"}'")).status == EvalStatus::error);
}

TEST_CASE("timeouts kill the whole process group") {
    auto start = std::chrono::steady_clock::now();
    auto e = evaluate_candidate(shell_request("sleep 30 & sleep 30; echo '{\"score\": 1}'", 0.5));
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(e.status == EvalStatus::timeout);
    CHECK_FALSE(e.score.has_value());
    CHECK(secs < 10.0);
}

TEST_CASE("malformed requests are rejected up front") {
    auto bare = shell_request("cat {program}");
    bare.environment.evaluator_command = "echo no placeholder";
    CHECK_THROWS_AS(evaluate_candidate(bare), InvalidArgument);
    CHECK_THROWS_AS(evaluate_candidate(shell_request("cat {program}", 0.0)), InvalidArgument);
}

TEST_CASE("runner labels the evaluation with the candidate id") {
    EvaluatorRunner runner;
    auto e = runner.evaluate(shell_request("echo '{\"score\": 1}' # {program}"), "cand-7");
    CHECK(e.candidate_id == "cand-7");
}

TEST_CASE("score object search") {
    CHECK((*find_score_object("a\n{\"score\": 1}\n{\"score\": 2}\n"))["score"] == 2);
    CHECK((*find_score_object("prefix {\"score\": 4} suffix"))["score"] == 4);
    CHECK_FALSE(find_score_object("{\"other\": 1}").has_value());
}

TEST_CASE("shell quoting") {
    CHECK(shell_quote("a b") == "'a b'");
    CHECK(shell_quote("it's") == "'it'\\''s'");
}

}  // TEST_SUITE
