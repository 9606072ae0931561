#include "support.hpp"

#include "tracelens/errors.hpp"
#include "tracelens/taxonomy.hpp"

#include <doctest.h>

using namespace tracelens;

namespace {

Run edit_run() {
    Run run;
    run.run_id = "tax";
    run.budget = 2;
    run.seed_candidate_id = "p";
    Candidate p;
    p.candidate_id = "p";
    p.source = "x = 1\ny = 2\n";
    p.score = 1.5;
    Candidate c;
    c.candidate_id = "c";
    c.iteration = 1;
    c.parent_ids = {"p"};
    c.source = "x = 1\ny = 3\n";
    c.score = 2.0;
    run.candidates = {p, c};
    run.edges = {{"p", "c", EditOperator::mutation, json::object()}};
    run.reindex();
    return run;
}

LabelSet labels(std::initializer_list<EditLabel> l) { return LabelSet(l); }

}  // namespace

TEST_SUITE("taxonomy") {

TEST_CASE("label names round-trip and unknown names are rejected") {
    for (EditLabel l : kAllLabels) {
        CHECK(parse_label(to_string(l)) == l);
        CHECK_FALSE(label_definition(l).empty());
        CHECK_FALSE(label_title(l).empty());
    }
    CHECK(to_string(EditLabel::hyperparameter_tuning) == "hyperparameter_tuning");
    CHECK_THROWS_AS(parse_label("speedup"), InvalidLabel);
}

TEST_CASE("judge request lists every label and carries the diff and scores") {
    Run run = edit_run();
    auto jr = build_judge_request(run, run.edges[0]);
    for (EditLabel l : kAllLabels) CHECK(jr.system_text.find(std::string(to_string(l))) != std::string::npos);
    CHECK(jr.user_text.find("-y = 2") != std::string::npos);
    CHECK(jr.user_text.find("+y = 3") != std::string::npos);
    CHECK(jr.user_text.find("Parent score: 1.5") != std::string::npos);
    CHECK(jr.user_text.find("Child score: 2") != std::string::npos);
    auto again = build_judge_request(run, run.edges[0]);
    CHECK(again.system_text == jr.system_text);
    CHECK(again.user_text == jr.user_text);
}

TEST_CASE("parse and render round-trip") {
    Judgment j;
    j.labels = labels({EditLabel::bug_fix, EditLabel::pruning});
    j.driver_lines = {2, 7};
    Judgment back = parse_judge_response(render_judgment(j));
    CHECK(back.labels == j.labels);
    CHECK(back.driver_lines == j.driver_lines);
}

TEST_CASE("parse normalizes driver lines and tolerates fences") {
    auto j = parse_judge_response("```json\n{\"labels\": [\"refactor\"], \"driver_lines\": [5, 1, 5]}\n```");
    CHECK(j.labels == labels({EditLabel::refactor}));
    CHECK(j.driver_lines == std::vector<int>{1, 5});
}

TEST_CASE("parse failures carry their error type") {
    CHECK_THROWS_AS(parse_judge_response("no json"), InvalidJson);
    CHECK_THROWS_AS(parse_judge_response("{\"labels\": [\"speedup\"]}"), InvalidLabel);
    CHECK_THROWS_AS(parse_judge_response("{\"labels\": []}"), EmptyLabels);
}

TEST_CASE("annotate_edge retries badly formatted replies") {
    auto backend = std::make_shared<tltest::ScriptedBackend>([](const ChatRequest&, int call) -> std::string {
        if (call < 2) return "I think it is a bug fix.";
        return "{\"labels\": [\"bug_fix\"], \"driver_lines\": [1]}";
    });
    ChatClient client(backend, tltest::quiet_client_options());
    Run run = edit_run();
    AnnotateOptions opt;
    opt.judge_model = "judge";
    auto a = annotate_edge(run, run.edges[0], client, opt);
    REQUIRE(a);
    CHECK(a->labels == labels({EditLabel::bug_fix}));
    CHECK(a->edge_ref == run.edge_ref(run.edges[0]));
    CHECK(backend->calls() == 3);
    auto reqs = backend->requests();
    CHECK(reqs[0].temperature == 0.0);
    CHECK(reqs[1].user_text != reqs[0].user_text);
    CHECK(reqs[2].sample_index.has_value());
}

TEST_CASE("annotate_edge gives up after the retry budget") {
    auto backend = std::make_shared<tltest::ScriptedBackend>(
        [](const ChatRequest&, int) -> std::string { return "{\"labels\": [\"nonsense\"]}"; });
    ChatClient client(backend, tltest::quiet_client_options());
    Run run = edit_run();
    AnnotateOptions opt;
    opt.judge_model = "judge";
    opt.max_format_retries = 2;
    CHECK_FALSE(annotate_edge(run, run.edges[0], client, opt).has_value());
    CHECK(backend->calls() == 3);
}

TEST_CASE("annotations round-trip through JSONL") {
    EditAnnotation a{{"r", "p", "c"}, labels({EditLabel::efficiency}), {3}, "judge", true};
    tltest::ScratchDir dir;
    write_annotations({a, a}, dir.path() / kAnnotationsFile);
    auto back = read_annotations(dir.path() / kAnnotationsFile);
    REQUIRE(back.size() == 2);
    CHECK(back[0].edge_ref == a.edge_ref);
    CHECK(back[0].labels == a.labels);
    CHECK(back[1].driver_lines == a.driver_lines);
    CHECK(back[1].cached);
}

TEST_CASE("kappa of the hand table") {
    // 100 items: both 50, ref only 10, judge only 10, neither 30.
    // po = 0.8, pe = 0.6*0.6 + 0.4*0.4 = 0.52, kappa = 0.28 / 0.48.
    CHECK(cohen_kappa(50, 10, 10, 30) == doctest::Approx(0.28 / 0.48).epsilon(1e-12));
    CHECK(std::abs(cohen_kappa(50, 10, 10, 30) - 0.5833333333333334) < 1e-9);
    CHECK(cohen_kappa(5, 0, 0, 0) == 1.0);
    CHECK(cohen_kappa(0, 5, 5, 0) == doctest::Approx(-1.0));
}

TEST_CASE("agreement report on a small labelled sample") {
    std::map<std::string, LabelSet> ref{{"e1", labels({EditLabel::bug_fix})},
                                        {"e2", labels({EditLabel::bug_fix, EditLabel::refactor})},
                                        {"e3", labels({EditLabel::pruning})}};
    std::map<std::string, LabelSet> judged{{"e1", labels({EditLabel::bug_fix})},
                                           {"e2", labels({EditLabel::bug_fix})},
                                           {"e3", labels({EditLabel::pruning})}};
    auto r = agreement_report(ref, judged);
    CHECK(r.n_items == 3);
    CHECK(r.exact_match == doctest::Approx(2.0 / 3.0));
    CHECK(r.mean_jaccard == doctest::Approx((1.0 + 0.5 + 1.0) / 3.0));
    // tp = 3, fp = 0, fn = 1.
    CHECK(r.micro_f1 == doctest::Approx(6.0 / 7.0));
    CHECK(r.per_label_kappa.size() == 3);
    CHECK(r.per_label_kappa.at(EditLabel::bug_fix) == 1.0);
    CHECK(r.per_label_kappa.at(EditLabel::refactor) == doctest::Approx(0.0));
    CHECK(r.macro_kappa == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("agreement input errors") {
    std::map<std::string, LabelSet> a{{"e1", labels({EditLabel::bug_fix})}};
    std::map<std::string, LabelSet> b{{"e2", labels({EditLabel::bug_fix})}};
    CHECK_THROWS_AS(agreement_report(a, b), KeyMismatch);
    CHECK_THROWS_AS(agreement_report({}, {}), EmptyInput);
}

TEST_CASE("label CSV with header") {
    tltest::ScratchDir dir;
    tltest::write_file(dir.path() / "ref.csv", "item_id,labels\ne1,bug_fix|refactor\ne2,pruning\n");
    auto m = read_label_csv(dir.path() / "ref.csv");
    REQUIRE(m.size() == 2);
    CHECK(m["e1"] == labels({EditLabel::bug_fix, EditLabel::refactor}));
}

}  // TEST_SUITE
