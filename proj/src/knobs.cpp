#include "tracelens/knobs.hpp"

#include "tracelens/diff.hpp"
#include "tracelens/errors.hpp"
#include "tracelens/source_scan.hpp"
#include "tracelens/text_util.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <regex>
#include <set>

namespace tracelens {

std::string_view to_string(KnobScale s) { return s == KnobScale::log ? "log" : "linear"; }
std::string_view to_string(KnobKind k) { return k == KnobKind::integer ? "int" : "float"; }

std::string knob_user_message(std::string_view source, Dialect dialect) {
    std::string out = dialect == Dialect::py_like ? "```python\n" : "```cpp\n";
    out.append(source);
    if (!source.empty() && source.back() != '\n') out += '\n';
    out += "```";
    return out;
}

namespace {

bool is_snake_case(std::string_view s) {
    if (s.empty() || !(std::islower(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '_';
    });
}

std::optional<double> number_field(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number()) return std::nullopt;
    return it->get<double>();
}

std::string string_field(const json& j, const char* key) {
    auto it = j.find(key);
    return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
}

std::string_view strip_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

bool blocks_left(std::string_view line, std::size_t pos) {
    if (pos == 0) return false;
    const auto c = static_cast<unsigned char>(line[pos - 1]);
    if (is_identifier_byte(c) || c == '.') return true;
    // Exponent sign of a longer literal such as 1e-6.
    if ((c == '-' || c == '+') && pos >= 3 && (line[pos - 2] == 'e' || line[pos - 2] == 'E')) {
        const auto d = static_cast<unsigned char>(line[pos - 3]);
        return std::isdigit(d) || d == '.';
    }
    return false;
}

bool blocks_right(std::string_view line, std::size_t end) {
    if (end >= line.size()) return false;
    const auto c = static_cast<unsigned char>(line[end]);
    return is_identifier_byte(c) || c == '.';
}

struct Replacement {
    std::size_t line;
    std::size_t pos;
    std::size_t len;
    std::string text;
};

std::size_t find_unique_line(const std::vector<std::string_view>& lines, std::string_view context, std::size_t& count) {
    std::size_t found = lines.size();
    count = 0;
    for (std::size_t i = 0; i < lines.size(); ++i)
        if (lines[i] == context || strip_cr(lines[i]) == context) {
            if (count++ == 0) found = i;
        }
    return found;
}

std::string join_lines(const std::vector<std::string>& lines, bool trailing_newline) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        out += lines[i];
        if (i + 1 < lines.size() || trailing_newline) out += '\n';
    }
    return out;
}

bool is_blank_or_comment(std::string_view line) {
    const auto t = trim(line);
    return t.empty() || t.front() == '#';
}

// Line index before which a PY_LIKE parameter block goes: after shebang,
// encoding declaration, module docstring and __future__ imports.
std::size_t py_insertion_line(std::string_view source, const std::vector<std::string_view>& lines) {
    static const std::regex encoding(R"(^[ \t\f]*#.*?coding[:=][ \t]*[-_.a-zA-Z0-9]+)");
    std::size_t i = 0;
    if (i < lines.size() && lines[i].substr(0, 2) == "#!") ++i;
    for (std::size_t k = 0; k < 2 && i < lines.size(); ++k) {
        const std::string l(lines[i]);
        if (i <= 1 && std::regex_search(l, encoding)) ++i;
        else break;
    }

    std::vector<std::size_t> line_start(lines.size() + 1, 0);
    for (std::size_t k = 0; k < lines.size(); ++k) line_start[k + 1] = line_start[k] + lines[k].size() + 1;
    auto line_of = [&](std::size_t offset) {
        return static_cast<std::size_t>(std::upper_bound(line_start.begin(), line_start.end(), offset) -
                                        line_start.begin()) - 1;
    };

    std::size_t j = i;
    while (j < lines.size() && is_blank_or_comment(lines[j])) ++j;
    if (j < lines.size()) {
        // Module docstring: the first statement is a bare string literal.
        std::string_view first = trim(lines[j]);
        std::size_t prefix = 0;
        while (prefix < first.size() && prefix < 2 && std::strchr("rRuUbB", first[prefix])) ++prefix;
        if (prefix < first.size() && (first[prefix] == '"' || first[prefix] == '\'')) {
            const std::size_t begin = line_start[j] + (first.data() - lines[j].data()) + prefix;
            ScanState state;
            const auto rest = source.substr(begin);
            for (const auto& sp : scan_spans(rest, Dialect::py_like, state)) {
                if (sp.kind != SpanKind::string) break;
                const std::size_t end_line = line_of(begin + sp.end - 1);
                const auto tail = trim(lines[end_line].substr(
                    std::min(lines[end_line].size(), begin + sp.end - line_start[end_line])));
                if (tail.empty() || tail.front() == '#') i = end_line + 1;
                break;
            }
        }
    }
    for (std::size_t k = i; k < lines.size(); ++k) {
        if (is_blank_or_comment(lines[k])) continue;
        if (trim(lines[k]).substr(0, 23) == "from __future__ import ") i = k + 1;
        else break;
    }
    return i;
}

std::size_t c_insertion_line(const std::vector<std::string_view>& lines) {
    static const std::regex include(R"(^[ \t]*#[ \t]*include\b)");
    std::size_t at = 0;
    for (std::size_t i = 0; i < lines.size(); ++i)
        if (std::regex_search(std::string(lines[i]), include)) at = i + 1;
    return at;
}

std::string integer_suffix(std::string_view literal) {
    std::size_t n = literal.size();
    while (n > 0 && std::strchr("uUlL", literal[n - 1])) --n;
    return std::string(literal.substr(n));
}

bool is_hex(std::string_view literal) {
    return literal.size() > 1 && literal[0] == '0' && (literal[1] == 'x' || literal[1] == 'X');
}

std::vector<std::string> block_lines(const KnobSpace& space, const std::map<std::string, double>& values,
                                     Dialect dialect) {
    std::vector<std::string> out;
    if (dialect == Dialect::py_like) {
        out.emplace_back("PARAMS = {");
        for (const auto& k : space.knobs)
            out.push_back(fmt::format("    {}: {},", json(k.name).dump(), render_value(k, values.at(k.name), dialect)));
        out.emplace_back("}");
    } else {
        for (const auto& k : space.knobs)
            out.push_back(fmt::format("#define {} {}", macro_name(k.name), render_value(k, values.at(k.name), dialect)));
    }
    return out;
}

}  // namespace

std::variant<KnobSpec, std::string> parse_knob_spec(const json& j) {
    if (!j.is_object()) return std::string("spec is not an object");
    KnobSpec k;
    k.name = string_field(j, "name");
    if (!is_snake_case(k.name)) return "name is not a snake_case identifier: '" + k.name + "'";
    if (!j.contains("source_literal") || !j["source_literal"].is_string())
        return std::string("source_literal must be a string");
    k.source_literal = j["source_literal"].get<std::string>();
    double literal_value = 0;
    if (!parse_number_literal(k.source_literal, literal_value) || !std::isfinite(literal_value))
        return "source_literal is not a numeric literal: '" + k.source_literal + "'";
    k.default_value = literal_value;
    k.context_line = string_field(j, "context_line");
    if (k.context_line.empty()) return std::string("context_line missing");
    k.rationale = string_field(j, "rationale");

    const auto scale = string_field(j, "scale");
    if (scale == "linear") k.scale = KnobScale::linear;
    else if (scale == "log") k.scale = KnobScale::log;
    else return "scale must be linear or log, got '" + scale + "'";
    const auto kind = string_field(j, "kind");
    if (kind == "int") k.kind = KnobKind::integer;
    else if (kind == "float") k.kind = KnobKind::real;
    else return "kind must be int or float, got '" + kind + "'";

    const auto low = number_field(j, "low");
    const auto high = number_field(j, "high");
    if (!low || !high || !std::isfinite(*low) || !std::isfinite(*high)) return std::string("low/high must be finite numbers");
    k.low = *low;
    k.high = *high;
    if (k.kind == KnobKind::integer) {
        k.low = std::max(1.0, std::floor(k.low));
        k.high = std::ceil(k.high);
        if (k.default_value != std::round(k.default_value)) return std::string("int knob has a non-integral default");
    }
    if (!(k.low < k.high)) return fmt::format("low {} is not below high {}", k.low, k.high);
    if (k.scale == KnobScale::log && !(k.low > 0)) return std::string("log scale needs low > 0");
    if (k.low > 0 && k.high / k.low >= 100 && k.scale != KnobScale::log)
        return std::string("high/low >= 100 requires log scale");
    if (k.default_value < k.low || k.default_value > k.high)
        return fmt::format("default {} outside [{}, {}]", k.default_value, k.low, k.high);
    return k;
}

KnobProposal parse_knob_response(std::string_view raw) {
    const auto obj = extract_json_object(raw);
    if (!obj) throw InvalidJson("no-json", "knob reply contains no JSON object");
    const auto it = obj->find("hparams");
    if (it == obj->end() || !it->is_array()) throw InvalidJson("no-hparams", "knob reply lacks an hparams array");
    KnobProposal p;
    std::set<std::string> names;
    for (const auto& item : *it) {
        const std::string name = item.is_object() ? string_field(item, "name") : std::string();
        auto parsed = parse_knob_spec(item);
        if (auto* reason = std::get_if<std::string>(&parsed)) {
            p.dropped.push_back({name, *reason});
            continue;
        }
        auto& spec = std::get<KnobSpec>(parsed);
        if (!names.insert(spec.name).second) {
            p.dropped.push_back({name, "duplicate name"});
            continue;
        }
        if (p.specs.size() >= kMaxKnobs) {
            p.dropped.push_back({name, "over the knob cap"});
            continue;
        }
        p.specs.push_back(std::move(spec));
    }
    for (const auto& d : p.dropped) spdlog::info("dropped knob '{}': {}", d.name, d.reason);
    return p;
}

KnobProposal request_knobs(std::string_view source, Dialect dialect, const std::string& model_id,
                           ChatClient& client) {
    ChatRequest req;
    req.model_id = model_id;
    req.system_text = std::string(knob_identification_prompt());
    req.user_text = knob_user_message(source, dialect);
    req.response_format_hint = ResponseFormat::json;
    req.temperature = 0.0;
    return parse_knob_response(client.complete(req, 0).content);
}

std::vector<std::size_t> literal_occurrences(std::string_view line, std::string_view literal, Dialect dialect) {
    std::vector<std::size_t> out;
    if (literal.empty()) return out;
    const auto spans = scan_spans(line, dialect);
    auto in_code = [&](std::size_t b, std::size_t e) {
        return std::any_of(spans.begin(), spans.end(),
                           [&](const Span& s) { return s.kind == SpanKind::code && s.begin <= b && e <= s.end; });
    };
    for (std::size_t pos = line.find(literal); pos != std::string_view::npos; pos = line.find(literal, pos + 1)) {
        const std::size_t end = pos + literal.size();
        if (!blocks_left(line, pos) && !blocks_right(line, end) && in_code(pos, end)) out.push_back(pos);
    }
    return out;
}

KnobValidation validate_knobs(std::string_view source, const std::vector<KnobSpec>& specs, Dialect dialect) {
    KnobValidation v;
    const auto lines = split_lines(source);
    std::set<std::string> names;
    std::set<std::pair<std::size_t, std::size_t>> taken;  // (line, offset)
    auto drop = [&](const KnobSpec& k, std::string reason) {
        spdlog::info("knob '{}' dropped: {}", k.name, reason);
        v.dropped.push_back({k.name, std::move(reason)});
    };
    for (const auto& k : specs) {
        if (source.find(k.source_literal) == std::string_view::npos) {
            drop(k, "literal not found in source");
            continue;
        }
        std::size_t count = 0;
        const std::size_t line = find_unique_line(lines, k.context_line, count);
        if (count == 0) {
            drop(k, "context line not found in source");
            continue;
        }
        if (count > 1) {
            drop(k, "context line occurs more than once");
            continue;
        }
        const auto occ = literal_occurrences(lines[line], k.source_literal, dialect);
        if (occ.size() != 1) {
            drop(k, fmt::format("literal occurs {} times in the context line", occ.size()));
            continue;
        }
        std::size_t lines_with_literal = 0;
        for (const auto& l : lines) lines_with_literal += !literal_occurrences(l, k.source_literal, dialect).empty();
        if (lines_with_literal > 1) {
            drop(k, "ambiguous: literal appears on several lines");
            continue;
        }
        if (!names.insert(k.name).second) {
            drop(k, "duplicate name");
            continue;
        }
        if (!taken.insert({line, occ.front()}).second) {
            drop(k, "literal already claimed by another knob");
            continue;
        }
        v.accepted.push_back(k);
    }
    return v;
}

std::string macro_name(std::string_view knob_name) {
    std::string out = "_BO_";
    for (char c : knob_name) out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

std::string rewrite_with_param_block(std::string_view source, const std::vector<KnobSpec>& accepted, Dialect dialect) {
    bool trailing_newline = false;
    const auto views = split_lines(source, &trailing_newline);

    std::vector<Replacement> reps;
    for (const auto& k : accepted) {
        std::size_t count = 0;
        const std::size_t line = find_unique_line(views, k.context_line, count);
        if (count != 1)
            throw RewriteConflict("context-line", fmt::format("context line of '{}' occurs {} times", k.name, count));
        const auto occ = literal_occurrences(views[line], k.source_literal, dialect);
        if (occ.size() != 1)
            throw RewriteConflict("literal", fmt::format("literal of '{}' occurs {} times in its line", k.name, occ.size()));
        reps.push_back({line, occ.front(), k.source_literal.size(),
                        dialect == Dialect::py_like ? fmt::format("PARAMS[{}]", json(k.name).dump()) : macro_name(k.name)});
    }
    std::sort(reps.begin(), reps.end(), [](const Replacement& a, const Replacement& b) {
        return a.line != b.line ? a.line < b.line : a.pos > b.pos;
    });
    std::vector<std::string> lines(views.begin(), views.end());
    for (std::size_t i = 0; i < reps.size(); ++i) {
        const auto& r = reps[i];
        if (i > 0 && reps[i - 1].line == r.line && r.pos + r.len > reps[i - 1].pos)
            throw RewriteConflict("overlap", "two knobs target overlapping text");
        lines[r.line].replace(r.pos, r.len, r.text);
    }

    KnobSpace space{accepted, {}};
    std::map<std::string, double> defaults;
    for (const auto& k : accepted) defaults[k.name] = k.default_value;
    const auto block = block_lines(space, defaults, dialect);
    const std::size_t at = dialect == Dialect::py_like ? py_insertion_line(source, views) : c_insertion_line(views);
    // A block appended after a last line without newline needs one.
    if (at == lines.size()) trailing_newline = true;
    lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(at), block.begin(), block.end());
    return join_lines(lines, trailing_newline);
}

std::string render_value(const KnobSpec& spec, double value, Dialect dialect) {
    if (value == spec.default_value) return spec.source_literal;
    std::string text;
    if (spec.kind == KnobKind::integer) {
        text = fmt::format("{}", std::llround(value));
        if (dialect == Dialect::c_like) text += integer_suffix(spec.source_literal);
    } else {
        text = fmt::format("{}", value);
        if (text.find_first_of(".eEn") == std::string::npos) text += ".0";
        if (dialect == Dialect::c_like && !is_hex(spec.source_literal) && !spec.source_literal.empty()) {
            const char last = spec.source_literal.back();
            if (last == 'f' || last == 'F' || last == 'l' || last == 'L') text += last;
        }
    }
    if (dialect == Dialect::c_like && value < 0) text = "(" + text + ")";
    return text;
}

std::string substitute_values(std::string_view rewritten, const KnobSpace& space,
                              const std::map<std::string, double>& values, Dialect dialect) {
    for (const auto& k : space.knobs) {
        const auto it = values.find(k.name);
        if (it == values.end()) throw MissingValue("missing-value", "no value for knob '" + k.name + "'");
        if (k.kind == KnobKind::integer && it->second != std::round(it->second))
            throw NonIntegralInt("non-integral", fmt::format("int knob '{}' given {}", k.name, it->second));
    }
    if (space.knobs.empty()) return std::string(rewritten);

    bool trailing_newline = false;
    const auto views = split_lines(rewritten, &trailing_newline);
    std::size_t begin = views.size(), end = views.size();
    if (dialect == Dialect::py_like) {
        for (std::size_t i = 0; i < views.size(); ++i)
            if (views[i] == "PARAMS = {") {
                begin = i;
                break;
            }
        for (std::size_t i = begin; i < views.size(); ++i)
            if (views[i] == "}") {
                end = i + 1;
                break;
            }
    } else {
        const std::string first = "#define " + macro_name(space.knobs.front().name) + " ";
        for (std::size_t i = 0; i < views.size(); ++i)
            if (views[i].substr(0, first.size()) == first) {
                begin = i;
                end = i + space.knobs.size();
                break;
            }
        if (end <= views.size())
            for (std::size_t i = 0; i < space.knobs.size(); ++i) {
                const std::string prefix = "#define " + macro_name(space.knobs[i].name) + " ";
                if (views[begin + i].substr(0, prefix.size()) != prefix) end = views.size() + 1;
            }
    }
    if (begin >= views.size() || end > views.size())
        throw RewriteConflict("no-block", "parameter block not found in rewritten source");

    std::vector<std::string> lines;
    lines.reserve(views.size());
    for (std::size_t i = 0; i < begin; ++i) lines.emplace_back(views[i]);
    for (auto& l : block_lines(space, values, dialect)) lines.push_back(std::move(l));
    for (std::size_t i = end; i < views.size(); ++i) lines.emplace_back(views[i]);
    return join_lines(lines, trailing_newline);
}

json to_json(const KnobSpec& k) {
    return {{"name", k.name},
            {"source_literal", k.source_literal},
            {"context_line", k.context_line},
            {"default", k.default_value},
            {"low", k.low},
            {"high", k.high},
            {"scale", to_string(k.scale)},
            {"kind", to_string(k.kind)},
            {"rationale", k.rationale}};
}

}  // namespace tracelens
