#include "tracelens/cycling.hpp"
#include "tracelens/errors.hpp"

#include <doctest.h>

using namespace tracelens;

namespace {

Candidate make(std::string id, int it, std::vector<std::string> parents, std::string src, double score) {
    Candidate c;
    c.candidate_id = std::move(id);
    c.iteration = it;
    c.parent_ids = std::move(parents);
    c.source = std::move(src);
    c.score = score;
    return c;
}

// s -> a deletes "y = 2" and "z = 5"; a -> b re-adds both (one retuned),
// adds a comment and a new line.
Run recycle_run() {
    Run run;
    run.run_id = "cyc";
    run.task = "t";
    run.backend = "be";
    run.model_config = json{{"model", "m1"}, {"diff_mode", true}};
    run.budget = 4;
    run.seed_candidate_id = "s";
    run.candidates = {make("s", 0, {}, "x = 1\ny = 2\nz = 5\n", 1.0),
                      make("a", 1, {"s"}, "x = 1\n", 2.0),
                      make("b", 3, {"a"}, "x = 1\ny = 2\nz = 7\n# note\nw = q\n", 3.0)};
    run.edges = {{"s", "a", EditOperator::mutation, json::object()}, {"a", "b", EditOperator::mutation, json::object()}};
    run.reindex();
    return run;
}

std::map<std::string, LineClassification> by_bytes(const std::vector<LineClassification>& lines) {
    std::map<std::string, LineClassification> m;
    for (const auto& l : lines) m[l.bytes] = l;
    return m;
}

}  // namespace

TEST_SUITE("cycling") {

TEST_CASE("added lines fall into the four categories with spans") {
    Run run = recycle_run();
    auto m = by_bytes(classify_added_lines(run, run.edges[1]));
    REQUIRE(m.size() == 4);
    CHECK(m["y = 2"].category == LineCategory::literal);
    CHECK(m["y = 2"].span == 2);
    CHECK(m["y = 2"].matched_deletion_iteration == 1);
    CHECK(m["z = 7"].category == LineCategory::tuning);
    CHECK(m["z = 7"].span == 2);
    CHECK(m["# note"].category == LineCategory::trivial);
    CHECK(m["w = q"].category == LineCategory::novel);
    CHECK_FALSE(m["w = q"].span.has_value());
}

TEST_CASE("a deletion in the same edit does not count") {
    Run run = recycle_run();
    // s -> a deletes and re-adds nothing; the first edit has only deletions.
    CHECK(classify_added_lines(run, run.edges[0]).empty());
}

TEST_CASE("lines deleted on a sibling branch are not in the pool") {
    Run run = recycle_run();
    run.candidates[2].parent_ids = {"s"};
    run.edges[1] = {"s", "b", EditOperator::mutation, json::object()};
    run.candidates[2].source = "x = 1\ny = 2\nz = 5\nk = 0\n";
    run.candidates.push_back(make("c", 4, {"b"}, "x = 1\ny = 2\nz = 5\nk = 0\nv = 3\n", 0.0));
    run.edges.push_back({"b", "c", EditOperator::mutation, json::object()});
    run.reindex();
    // "v = 3" is new; nothing c adds was deleted on its own lineage.
    auto lines = classify_added_lines(run, run.edges[2]);
    REQUIRE(lines.size() == 1);
    CHECK(lines[0].category == LineCategory::novel);
}

TEST_CASE("series counts, run rate, tuning share and cumulative rates") {
    auto s = run_cycling_series(recycle_run());
    CHECK(s.added_code_lines == 3);
    CHECK(s.literal_lines == 1);
    CHECK(s.tuning_lines == 1);
    CHECK(s.trivial_lines == 1);
    CHECK(s.novel_lines == 1);
    CHECK(s.run_rate == doctest::Approx(1.0 / 3.0));
    CHECK(s.tuning_share == doctest::Approx(1.0 / 3.0));
    REQUIRE(s.per_iteration_rate.size() == 5);
    CHECK_FALSE(s.per_iteration_rate[2].has_value());
    CHECK(*s.per_iteration_rate[3] == doctest::Approx(1.0 / 3.0));
    CHECK(*s.per_iteration_rate[4] == doctest::Approx(1.0 / 3.0));
    CHECK(s.slope == doctest::Approx(0.0));
}

TEST_CASE("span summary quartiles and histogram") {
    auto s = summarize_spans({1, 2, 2, 5});
    CHECK(s.count == 4);
    CHECK(*s.median == 2.0);
    CHECK(s.histogram.at(2) == 2);
    CHECK_FALSE(summarize_spans({}).median.has_value());
    CHECK(*reintroduction_spans(recycle_run()).median == 2.0);
}

TEST_CASE("group keys") {
    Run run = recycle_run();
    CHECK(group_value(run, GroupKey::model) == "m1");
    CHECK(group_value(run, GroupKey::backend) == "be");
    CHECK(group_value(run, GroupKey::diff_mode) == "diff");
    CHECK_THROWS_AS(parse_group_key("colour"), UnknownGroupKey);
    auto shares = tuning_share_by_group({run, run}, GroupKey::task);
    REQUIRE(shares.size() == 1);
    CHECK(shares[0].runs == 2);
    CHECK(shares[0].added_code_lines == 6);
    CHECK(shares[0].tuning_share == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("audit log has one row per added line") {
    Run run = recycle_run();
    CyclingAnalysis analysis(run);
    auto rows = classification_audit_log(run, analysis);
    CHECK(rows.size() == 4);
    CHECK(rows[0]["child_id"] == "b");
}

TEST_CASE("post-breakthrough window must be positive") {
    CHECK_THROWS_AS(post_breakthrough_delta(recycle_run(), 0), InvalidArgument);
}

}  // TEST_SUITE
