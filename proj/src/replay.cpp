#include "tracelens/replay.hpp"

#include "tracelens/errors.hpp"
#include "tracelens/numeric.hpp"
#include "tracelens/parallel.hpp"
#include "tracelens/source_scan.hpp"
#include "tracelens/text_util.hpp"
#include "tracelens/trace_store.hpp"

#include <algorithm>

namespace tracelens {

std::optional<std::string> extract_program(std::string_view reply) {
    std::string program = extract_fenced_block(reply).value_or(std::string(reply));
    if (trim(program).empty()) return std::nullopt;
    return program;
}

namespace {

bool brackets_balanced(std::string_view text, const std::vector<Span>& spans) {
    std::string stack;
    for (const auto& s : spans) {
        if (s.kind != SpanKind::code) continue;
        for (std::size_t i = s.begin; i < s.end; ++i) {
            const char c = text[i];
            if (c == '(' || c == '[' || c == '{') {
                stack.push_back(c);
            } else if (c == ')' || c == ']' || c == '}') {
                const char open = c == ')' ? '(' : c == ']' ? '[' : '{';
                if (stack.empty() || stack.back() != open) return false;
                stack.pop_back();
            }
        }
    }
    return stack.empty();
}

bool strings_terminated(std::string_view text, const std::vector<Span>& spans) {
    for (const auto& s : spans) {
        if (s.kind != SpanKind::string) continue;
        const auto body = text.substr(s.begin, s.end - s.begin);
        const bool triple = body.size() >= 3 && (body.substr(0, 3) == "\"\"\"" || body.substr(0, 3) == "'''");
        const std::size_t q = triple ? 3 : 1;
        if (body.size() < 2 * q || body.substr(body.size() - q) != body.substr(0, q)) return false;
    }
    return true;
}

std::size_t indent_of(std::string_view line) {
    std::size_t n = 0;
    for (char c : line) {
        if (c == ' ') ++n;
        else if (c == '\t') n += 8 - n % 8;
        else break;
    }
    return n;
}

// A line ending in ':' at bracket depth 0 must be followed by a deeper
// indented line; the first code line must not be indented.
bool indentation_sane(std::string_view text, const std::vector<Span>& spans) {
    std::string code(text.size(), ' ');
    for (const auto& s : spans) {
        if (s.kind == SpanKind::comment) continue;
        for (std::size_t i = s.begin; i < s.end; ++i)
            code[i] = s.kind == SpanKind::code || text[i] == '\n' ? text[i] : 'x';
    }
    int depth = 0;
    bool first = true;
    bool expect_block = false;
    std::size_t opener_indent = 0;
    bool continued = false;
    std::size_t pos = 0;
    while (pos <= code.size()) {
        std::size_t nl = code.find('\n', pos);
        if (nl == std::string::npos) nl = code.size();
        const std::string_view line(code.data() + pos, nl - pos);
        const auto body = trim(line);
        if (!body.empty()) {
            const bool logical_start = depth == 0 && !continued;
            if (logical_start) {
                const std::size_t ind = indent_of(line);
                if (first && ind != 0) return false;
                if (expect_block && ind <= opener_indent) return false;
                expect_block = false;
                first = false;
                opener_indent = ind;
            }
            for (char c : body) {
                if (c == '(' || c == '[' || c == '{') ++depth;
                else if (c == ')' || c == ']' || c == '}') depth = std::max(0, depth - 1);
            }
            continued = body.back() == '\\';
            if (depth == 0 && !continued && body.back() == ':') expect_block = true;
        }
        pos = nl + 1;
    }
    return !expect_block;
}

}  // namespace

bool syntax_check(std::string_view source, Dialect dialect) {
    if (trim(source).empty()) return false;
    ScanState state;
    const auto spans = scan_spans(source, dialect, state);
    if (state.mode != ScanState::Mode::code) return false;
    if (!brackets_balanced(source, spans)) return false;
    if (dialect == Dialect::c_like) return true;
    return strings_terminated(source, spans) && indentation_sane(source, spans);
}

ReplaySummary replay_breakthrough(const Run& run, const std::string& candidate_id, const std::string& model_id,
                                  ChatClient& client, EvaluatorRunner& evaluator, const ReplayOptions& options) {
    if (options.n < 1) throw InvalidArgument("bad-n", "replay needs n >= 1");
    const Candidate& target = run.candidate(candidate_id);
    if (!target.context_id) throw MissingContext("missing-context", "candidate " + candidate_id + " has no context");
    const Context* ctx = run.find_context(*target.context_id);
    if (!ctx) throw MissingContext("missing-context", "context " + *target.context_id + " not in run");
    if (!target.score) throw MissingScore("missing-score", "candidate " + candidate_id + " has no score");

    ChatRequest base;
    base.model_id = model_id;
    base.user_text = ctx->prompt;
    if (auto it = ctx->auxiliary.find("system_prompt"); it != ctx->auxiliary.end() && it->is_string())
        base.system_text = it->get<std::string>();
    base.temperature = 1.0;
    if (options.temperature) base.temperature = *options.temperature;
    else if (auto it = run.model_config.find("temperature"); it != run.model_config.end() && it->is_number())
        base.temperature = it->get<double>();

    const auto samples = parallel_map(static_cast<std::size_t>(options.n), options.jobs, [&](std::size_t i) {
        ChatRequest req = base;
        req.sample_index = static_cast<int>(i);
        const ChatResponse resp = client.complete(req);
        ReplaySample s;
        const auto program = extract_program(resp.content);
        s.parse_ok = program && syntax_check(*program, run.environment.dialect);
        if (!s.parse_ok) return s;
        const Evaluation ev = evaluator.evaluate({*program, run.environment}, candidate_id);
        s.eval_status = ev.status;
        s.eval_ok = ev.status == EvalStatus::ok;
        s.score = ev.score;
        s.exact = s.eval_ok && *program == target.source;
        return s;
    });

    ReplaySummary out;
    out.run_id = run.run_id;
    out.candidate_id = candidate_id;
    out.model_id = model_id;
    out.n = options.n;
    std::vector<double> ratios;
    std::size_t parse = 0, eval = 0, exact = 0;
    for (const auto& s : samples) {
        parse += s.parse_ok;
        eval += s.eval_ok;
        exact += s.exact;
        if (s.eval_ok && *target.score != 0) ratios.push_back(*s.score / *target.score);
    }
    const double n = options.n;
    out.parse_rate = parse / n;
    out.eval_rate = eval / n;
    out.exact_rate = exact / n;
    if (!ratios.empty()) out.score_ratio_median = median(ratios);
    out.per_sample = samples;

    const double r = out.score_ratio_median.value_or(0.0);
    if (out.score_ratio_median && r >= 0.99 && out.exact_rate > 0) out.pattern_tags.push_back("tight_reproduction");
    if (out.score_ratio_median && out.exact_rate == 0 && r >= 0.95) out.pattern_tags.push_back("parent_revert");
    if (out.parse_rate <= 0.5) out.pattern_tags.push_back("bimodal_failure");
    if (out.score_ratio_median && r > 1) out.pattern_tags.push_back("exceeds");
    return out;
}

std::vector<ReplaySummary> model_substitution_sweep(const Run& run, const std::string& candidate_id,
                                                    const std::vector<std::string>& model_ids, ChatClient& client,
                                                    EvaluatorRunner& evaluator, const ReplayOptions& options) {
    std::vector<ReplaySummary> out;
    for (const auto& m : model_ids) out.push_back(replay_breakthrough(run, candidate_id, m, client, evaluator, options));
    return out;
}

json to_json(const ReplaySummary& s) {
    json samples = json::array();
    for (const auto& p : s.per_sample) {
        json j = {{"parse_ok", p.parse_ok}, {"eval_ok", p.eval_ok}, {"exact", p.exact}};
        j["score"] = p.score ? json(*p.score) : json();
        samples.push_back(std::move(j));
    }
    json j = {{"run_id", s.run_id},         {"candidate_id", s.candidate_id}, {"model_id", s.model_id},
              {"n", s.n},                   {"parse_rate", s.parse_rate},     {"eval_rate", s.eval_rate},
              {"exact_rate", s.exact_rate}, {"per_sample", samples},          {"pattern_tags", s.pattern_tags}};
    j["score_ratio_median"] = s.score_ratio_median ? json(*s.score_ratio_median) : json();
    return j;
}

}  // namespace tracelens
