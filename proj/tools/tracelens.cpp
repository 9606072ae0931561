// tracelens command-line interface. Exit codes: 0 success, 1 runtime or
// configuration error, 2 usage error.

#include "tracelens/bayes_opt.hpp"
#include "tracelens/chat_client.hpp"
#include "tracelens/cycling.hpp"
#include "tracelens/errors.hpp"
#include "tracelens/evaluator.hpp"
#include "tracelens/knobs.hpp"
#include "tracelens/parallel.hpp"
#include "tracelens/replay.hpp"
#include "tracelens/report.hpp"
#include "tracelens/rescore.hpp"
#include "tracelens/synthetic.hpp"
#include "tracelens/taxonomy.hpp"
#include "tracelens/trace_stats.hpp"
#include "tracelens/trace_store.hpp"
#include "tracelens/tuning_gap.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace tracelens;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Common {
    std::string trace;
    std::string corpus;
    std::string run_id;
    std::string out;
    std::string format = "json";
    std::size_t jobs = 1;
    bool verbose = false;
};

struct LoadedRun {
    Run run;
    fs::path dir;
};

std::vector<LoadedRun> load_runs(const Common& c) {
    if (c.trace.empty() == c.corpus.empty())
        throw InvalidArgument("usage", "exactly one of --trace or --corpus is required");
    std::vector<LoadedRun> out;
    if (!c.trace.empty()) {
        out.push_back({ingest_run(c.trace), c.trace});
    } else {
        std::vector<fs::path> dirs;
        for (const auto& e : fs::directory_iterator(c.corpus))
            if (e.is_directory() && fs::exists(e.path() / kRunsFile)) dirs.push_back(e.path());
        std::sort(dirs.begin(), dirs.end());
        for (const auto& d : dirs) out.push_back({ingest_run(d), d});
    }
    if (!c.run_id.empty()) {
        std::erase_if(out, [&](const LoadedRun& r) { return r.run.run_id != c.run_id; });
        if (out.empty()) throw InvalidArgument("unknown-run", "no run with id '" + c.run_id + "'");
    }
    return out;
}

std::vector<Run> runs_of(std::vector<LoadedRun>&& loaded) {
    std::vector<Run> out;
    for (auto& l : loaded) out.push_back(std::move(l.run));
    return out;
}

LoadedRun load_single(const Common& c) {
    auto runs = load_runs(c);
    if (runs.size() != 1) throw InvalidArgument("usage", "this command needs one run; use --trace or --run-id");
    return std::move(runs.front());
}

json base_meta(const std::string& command, const Common& c) {
    json m = {{"command", command}, {"tool_version", kVersion}};
    if (!c.trace.empty()) m["trace"] = c.trace;
    if (!c.corpus.empty()) m["corpus"] = c.corpus;
    if (!c.run_id.empty()) m["run_id"] = c.run_id;
    return m;
}

void emit(const Report& report, const Common& c) {
    const std::string text = render(report, parse_report_format(c.format));
    if (c.out.empty() || c.out == "-") {
        std::cout << text;
        return;
    }
    const fs::path p(c.out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("write", "cannot write " + c.out);
    f << text;
}

std::shared_ptr<ChatClient> make_client(const std::string& cache_dir, std::size_t jobs) {
    ChatClientOptions o;
    if (!cache_dir.empty()) o.cache_dir = fs::path(cache_dir);
    o.max_in_flight = std::max<std::size_t>(1, jobs);
    return std::make_shared<ChatClient>(HttpChatBackend::from_environment(), o);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::string group_of(const Run& r, const std::string& key) {
    if (key == "domain") return std::string(to_string(r.domain_tag));
    return group_value(r, parse_group_key(key));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Analysis toolkit for evolutionary code-search traces"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    Common c;
    auto add_common = [&](CLI::App* sub, bool inputs = true) {
        if (inputs) {
            sub->add_option("--trace", c.trace, "Run directory");
            sub->add_option("--corpus", c.corpus, "Directory of run directories");
            sub->add_option("--run-id", c.run_id, "Restrict to one run");
        }
        sub->add_option("--out", c.out, "Report path (default: stdout)");
        sub->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
        sub->add_option("--jobs", c.jobs, "Parallel workers")->check(CLI::PositiveNumber);
        sub->add_flag("-v,--verbose", c.verbose, "Verbose logging");
    };

    // ingest
    std::string emit_dir;
    auto* ingest = app.add_subcommand("ingest", "Read traces, resolve links and report table sizes");
    add_common(ingest);
    ingest->add_option("--emit", emit_dir, "Write canonical copies of the runs here");

    // validate
    bool strict = false;
    auto* validate = app.add_subcommand("validate", "Check trace invariants");
    add_common(validate);
    validate->add_flag("--strict", strict, "Exit 1 when any violation is found");

    // metrics
    bool trajectory = false;
    auto* metrics = app.add_subcommand("metrics", "Lineage depth, budget utilization and size metrics");
    add_common(metrics);
    metrics->add_flag("--trajectory", trajectory, "Per-iteration size and literal-count trajectory");

    // cycling
    std::string group_by;
    std::string audit_path;
    int window = 0;
    auto* cycling = app.add_subcommand("cycling", "Line recycling rates, slopes and spans");
    add_common(cycling);
    cycling->add_option("--group-by", group_by, "Tuning share by model|backend|task|diff_mode");
    cycling->add_option("--audit", audit_path, "Write per-line classifications as JSONL");
    cycling->add_option("--post-breakthrough", window, "Rate change around best-so-far events, window size")
        ->check(CLI::PositiveNumber);

    // annotate
    std::string model, cache_dir, annotations_out;
    double judge_temperature = 0.0;
    auto* annotate = app.add_subcommand("annotate", "Label every edit with the judge model");
    add_common(annotate);
    annotate->add_option("--model", model, "Judge model id")->required();
    annotate->add_option("--cache-dir", cache_dir, "Response cache directory");
    annotate->add_option("--temperature", judge_temperature, "Judge sampling temperature");
    annotate->add_option("--annotations-out", annotations_out,
                         "Annotation JSONL path (default: annotations.jsonl in each run directory)");

    // agreement
    std::string reference_csv, judged_csv;
    auto* agreement = app.add_subcommand("agreement", "Reference vs judge label agreement");
    add_common(agreement, false);
    agreement->add_option("--reference", reference_csv, "Reference labels CSV")->required();
    agreement->add_option("--judged", judged_csv, "Judged labels CSV")->required();

    // stats
    std::string annotations_in;
    bool histogram = false;
    auto* stats = app.add_subcommand("stats", "Label prevalence, odds ratios and enrichment");
    add_common(stats);
    stats->add_option("--annotations", annotations_in, "Annotation JSONL (default: each run's annotations.jsonl)");
    stats->add_option("--group-by", group_by, "domain|model|backend|task|diff_mode");
    stats->add_flag("--histogram", histogram, "Report the labels-per-edit distribution instead");

    // replay
    std::string candidate_id;
    int n = 10;
    std::uint64_t seed = 0;
    std::optional<double> replay_temperature;
    auto* replay = app.add_subcommand("replay", "Resample a candidate's saved prompt");
    add_common(replay);
    replay->add_option("--candidate-id", candidate_id, "Target candidate")->required();
    replay->add_option("--model", model, "Model id, or a comma-separated list for a sweep")->required();
    replay->add_option("--n", n, "Samples per model")->check(CLI::PositiveNumber);
    replay->add_option("--seed", seed, "Recorded in the report metadata");
    replay->add_option("--temperature", replay_temperature, "Sampling temperature");
    replay->add_option("--cache-dir", cache_dir, "Response cache directory");

    // tune
    int budget = 24, init = 8;
    std::string knobs_file;
    double tolerance = 0.0;
    auto* tune = app.add_subcommand("tune", "Tuning gap of a frozen program structure");
    add_common(tune);
    tune->add_option("--candidate-id", candidate_id, "Target candidate (default: the seed)");
    tune->add_option("--model", model, "Knob-identification model id");
    tune->add_option("--knobs", knobs_file, "Knob proposal JSON {\"hparams\": [...]} instead of a model call");
    tune->add_option("--budget", budget, "Evaluator calls")->check(CLI::PositiveNumber);
    tune->add_option("--init", init, "Random initial points")->check(CLI::PositiveNumber);
    tune->add_option("--seed", seed, "Optimizer seed");
    tune->add_option("--tolerance", tolerance, "Score distance counted as no change");
    tune->add_option("--cache-dir", cache_dir, "Response cache directory");

    // rescore
    std::string private_env_file, private_command, table_kind = "verdicts";
    double private_timeout = 300, threshold = kDefaultOverfitThreshold;
    auto* rescore = app.add_subcommand("rescore", "Re-score best-so-far chains on a private evaluator");
    add_common(rescore);
    rescore->add_option("--private-env", private_env_file, "Private environment JSON object");
    rescore->add_option("--private-command", private_command, "Private evaluator command with {program}");
    rescore->add_option("--private-timeout", private_timeout, "Timeout for --private-command (seconds)");
    rescore->add_option("--threshold", threshold, "Mild/severe overfit boundary");
    rescore->add_option("--table", table_kind, "verdicts|grid|frameworks")
        ->check(CLI::IsMember({"verdicts", "grid", "frameworks"}));

    // simulate
    SynthConfig synth;
    std::string shape = "chain", profile = "improving", sim_dir;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic run with planted recycling");
    add_common(simulate, false);
    simulate->add_option("--emit", sim_dir, "Run directory to write")->required();
    simulate->add_option("--iterations", synth.iterations, "Iterations")->check(CLI::PositiveNumber);
    simulate->add_option("--literal-rate", synth.planted_literal_recycle_rate, "Planted literal recycling rate");
    simulate->add_option("--tuning-rate", synth.planted_tuning_recycle_rate, "Planted tuning recycling rate");
    simulate->add_option("--shape", shape, "chain|tree");
    simulate->add_option("--profile", profile, "improving|jackpot_then_flat|noisy");
    simulate->add_option("--seed", synth.rng_seed, "Generator seed");
    simulate->add_option("--run-id", synth.run_id, "Run id");

    // report
    auto* report_cmd = app.add_subcommand("report", "Corpus scale and per-domain summary");
    add_common(report_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        auto subs = app.get_subcommands();
        std::cerr << (subs.empty() ? app.help() : subs.front()->help());
        return 2;
    }

    spdlog::set_level(c.verbose ? spdlog::level::debug : spdlog::level::warn);
    spdlog::set_default_logger(spdlog::stderr_color_mt("tracelens"));

    try {
        Report report;
        if (*ingest) {
            auto loaded = load_runs(c);
            report.meta = base_meta("ingest", c);
            if (!emit_dir.empty())
                for (const auto& l : loaded)
                    emit_run(l.run, c.trace.empty() ? fs::path(emit_dir) / l.dir.filename() : fs::path(emit_dir));
            report.table = ingest_table(runs_of(std::move(loaded)));
        } else if (*validate) {
            const auto runs = runs_of(load_runs(c));
            std::vector<std::pair<const Run*, ValidationReport>> reps;
            bool any = false;
            for (const auto& r : runs) {
                reps.emplace_back(&r, validate_run(r));
                any = any || !reps.back().second.ok();
            }
            report.meta = base_meta("validate", c);
            report.meta["ok"] = !any;
            report.table = validation_table(reps);
            emit(report, c);
            return strict && any ? 1 : 0;
        } else if (*metrics) {
            const auto runs = runs_of(load_runs(c));
            report.meta = base_meta("metrics", c);
            if (trajectory) {
                for (const auto& r : runs) {
                    Table t = trajectory_table(r);
                    if (report.table.columns.empty()) report.table.columns = t.columns;
                    for (auto& row : t.rows) report.table.rows.push_back(std::move(row));
                }
            } else {
                report.table = metrics_table(runs);
            }
        } else if (*cycling) {
            const auto runs = runs_of(load_runs(c));
            report.meta = base_meta("cycling", c);
            if (!audit_path.empty()) {
                std::ofstream f(audit_path, std::ios::binary);
                if (!f) throw IoError("write", "cannot write " + audit_path);
                for (const auto& r : runs) {
                    CyclingAnalysis analysis(r);
                    for (const auto& line : classification_audit_log(r, analysis))
                        f << line.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
                }
            }
            if (!group_by.empty()) {
                report.meta["group_by"] = group_by;
                report.table = tuning_share_table(tuning_share_by_group(runs, parse_group_key(group_by)));
            } else if (window > 0) {
                report.meta["window"] = window;
                report.table.columns = {"run_id", "event", "delta"};
                for (const auto& r : runs) {
                    const auto deltas = post_breakthrough_delta(r, window);
                    for (std::size_t i = 0; i < deltas.size(); ++i) report.table.add_row({r.run_id, i, deltas[i]});
                }
            } else {
                report.table = cycling_table(runs);
            }
        } else if (*annotate) {
            auto loaded = load_runs(c);
            auto client = make_client(cache_dir, c.jobs);
            AnnotateOptions opts{model, judge_temperature, 3};
            std::vector<EditAnnotation> all;
            std::size_t unannotated = 0;
            for (const auto& l : loaded) {
                const auto results = parallel_map(l.run.edges.size(), c.jobs, [&](std::size_t i) {
                    return annotate_edge(l.run, l.run.edges[i], *client, opts);
                });
                std::vector<EditAnnotation> mine;
                for (const auto& a : results) {
                    if (a) mine.push_back(*a);
                    else ++unannotated;
                }
                if (annotations_out.empty()) write_annotations(mine, l.dir / kAnnotationsFile);
                all.insert(all.end(), mine.begin(), mine.end());
            }
            if (!annotations_out.empty()) write_annotations(all, annotations_out);
            report.meta = base_meta("annotate", c);
            report.meta["model"] = model;
            report.meta["temperature"] = judge_temperature;
            report.meta["unannotated_edges"] = unannotated;
            report.meta["upstream_calls"] = client->upstream_calls();
            report.table = annotation_table(all);
        } else if (*agreement) {
            const auto rep = agreement_report(read_label_csv(reference_csv), read_label_csv(judged_csv));
            report.meta = base_meta("agreement", c);
            report.meta["reference"] = reference_csv;
            report.meta["judged"] = judged_csv;
            report.table = agreement_table(rep);
        } else if (*stats) {
            auto loaded = load_runs(c);
            std::vector<EditAnnotation> annotations;
            if (!annotations_in.empty()) {
                annotations = read_annotations(annotations_in);
            } else {
                for (const auto& l : loaded) {
                    const auto p = l.dir / kAnnotationsFile;
                    if (!fs::exists(p)) throw IoError("missing-annotations", "no " + p.string() + "; run annotate first");
                    auto a = read_annotations(p);
                    annotations.insert(annotations.end(), a.begin(), a.end());
                }
            }
            const auto runs = runs_of(std::move(loaded));
            std::map<std::string, std::vector<Run>> groups;
            for (const auto& r : runs) groups[group_by.empty() ? std::string("all") : group_of(r, group_by)].push_back(r);
            report.meta = base_meta("stats", c);
            if (!group_by.empty()) report.meta["group_by"] = group_by;
            for (const auto& [g, rs] : groups) {
                const auto s = corpus_label_stats(rs, annotations);
                if (s.annotated_edges == 0) continue;
                Table t = histogram ? label_count_table(s) : label_stats_table(s);
                if (report.table.columns.empty()) {
                    report.table.columns = {"group"};
                    report.table.columns.insert(report.table.columns.end(), t.columns.begin(), t.columns.end());
                }
                for (auto& row : t.rows) {
                    row.insert(row.begin(), g);
                    report.table.add_row(std::move(row));
                }
                report.meta["groups"][g] = {{"annotated_edges", s.annotated_edges},
                                            {"signed_edges", s.signed_edges},
                                            {"unscored_edges", s.unscored_edges}};
            }
            if (report.table.columns.empty()) throw EmptyInput("empty-input", "no annotations match the selected runs");
        } else if (*replay) {
            const auto l = load_single(c);
            auto client = make_client(cache_dir, c.jobs);
            EvaluatorRunner evaluator({l.dir, c.jobs});
            ReplayOptions opts{n, replay_temperature, c.jobs};
            const auto summaries = model_substitution_sweep(l.run, candidate_id, split_list(model), *client, evaluator, opts);
            report.meta = base_meta("replay", c);
            report.meta["model"] = model;
            report.meta["seed"] = seed;
            report.meta["n"] = n;
            report.table = replay_table(summaries);
            report.details = json::array();
            for (const auto& s : summaries) report.details.push_back(to_json(s));
        } else if (*tune) {
            const auto l = load_single(c);
            const std::string target = candidate_id.empty() ? l.run.seed_candidate_id : candidate_id;
            EvaluatorRunner evaluator({l.dir, 1});
            TuningOptions opts;
            opts.bo.budget = budget;
            opts.bo.init = init;
            opts.bo.seed = seed;
            opts.tolerance = tolerance;
            TuningReport tr;
            if (!knobs_file.empty()) {
                std::ifstream f(knobs_file, std::ios::binary);
                if (!f) throw IoError("missing-file", "cannot read " + knobs_file);
                const std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
                const KnobProposal p = parse_knob_response(text);
                tr = tune_knobs(l.run, target, p.specs, evaluator, opts);
                tr.dropped.insert(tr.dropped.begin(), p.dropped.begin(), p.dropped.end());
            } else {
                if (model.empty()) throw InvalidArgument("usage", "tune needs --model or --knobs");
                auto client = make_client(cache_dir, 1);
                tr = tuning_gap_report(l.run, target, model, *client, evaluator, opts);
            }
            report.meta = base_meta("tune", c);
            report.meta["model"] = model.empty() ? json() : json(model);
            report.meta["knobs_file"] = knobs_file.empty() ? json() : json(knobs_file);
            report.meta["seed"] = seed;
            report.meta["budget"] = budget;
            report.meta["init"] = init;
            report.table = tuning_table({tr});
            report.details = to_json(tr);
        } else if (*rescore) {
            ReplayEnvironment private_env;
            if (!private_env_file.empty()) {
                std::ifstream f(private_env_file, std::ios::binary);
                if (!f) throw IoError("missing-file", "cannot read " + private_env_file);
                private_env = environment_from_json(json::parse(f));
            } else if (!private_command.empty()) {
                private_env.evaluator_command = private_command;
                private_env.timeout = private_timeout;
            } else {
                throw InvalidArgument("usage", "rescore needs --private-env or --private-command");
            }
            auto loaded = load_runs(c);
            std::vector<GeneralizationVerdict> verdicts;
            json chains = json::array();
            for (const auto& l : loaded) {
                ReplayEnvironment env = private_env;
                if (private_env_file.empty()) env.dialect = l.run.environment.dialect;
                EvaluatorRunner evaluator({l.dir, c.jobs});
                const auto chain = rescore_chain(l.run, env, evaluator, c.jobs);
                verdicts.push_back(generalization_verdict(l.run, chain, threshold));
                json entries = json::array();
                for (const auto& e : chain) entries.push_back(to_json(e));
                chains.push_back({{"run_id", l.run.run_id}, {"chain", entries}});
            }
            report.meta = base_meta("rescore", c);
            report.meta["threshold"] = threshold;
            if (table_kind == "grid") report.table = delta_grid_table(private_delta_grid(verdicts));
            else if (table_kind == "frameworks") report.table = framework_counts_table(framework_counts(verdicts));
            else report.table = rescore_table(verdicts);
            report.details = chains;
        } else if (*simulate) {
            synth.lineage_shape = parse_lineage_shape(shape);
            synth.score_profile = parse_score_profile(profile);
            const auto trace = generate_synthetic_run(synth);
            write_synthetic_run(trace, sim_dir);
            report.meta = {{"command", "simulate"}, {"tool_version", kVersion}, {"emit", sim_dir},
                           {"seed", synth.rng_seed}, {"iterations", synth.iterations},
                           {"literal_rate", synth.planted_literal_recycle_rate},
                           {"tuning_rate", synth.planted_tuning_recycle_rate}, {"shape", shape}, {"profile", profile}};
            report.table.columns = {"run_id", "candidates", "edges", "planted_literal", "planted_tuning",
                                    "planted_trivial", "planted_novel", "literal_rate", "tuning_share"};
            const auto& t = trace.truth;
            report.table.add_row({trace.run.run_id, trace.run.candidates.size(), trace.run.edges.size(), t.literal,
                                  t.tuning, t.trivial, t.novel, t.literal_rate(), t.tuning_share()});
        } else if (*report_cmd) {
            const auto runs = runs_of(load_runs(c));
            report.meta = base_meta("report", c);
            report.table = corpus_summary_table(runs);
        }
        emit(report, c);
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << " [" << e.code() << "]\n";
        return e.code() == "usage" ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
