#include "tracelens/source_scan.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>

namespace tracelens {

bool is_identifier_byte(unsigned char c) {
    return std::isalnum(c) || c == '_' || c >= 0x80;
}

namespace {

bool starts_with_at(std::string_view text, std::size_t i, std::string_view needle) {
    return text.substr(i, needle.size()) == needle;
}

void push(std::vector<Span>& spans, SpanKind kind, std::size_t b, std::size_t e) {
    if (e <= b) return;
    if (!spans.empty() && spans.back().kind == kind && spans.back().end == b) {
        spans.back().end = e;
        return;
    }
    spans.push_back({kind, b, e});
}

}  // namespace

std::vector<Span> scan_spans(std::string_view text, Dialect dialect, ScanState& state) {
    using Mode = ScanState::Mode;
    std::vector<Span> spans;
    const bool py = dialect == Dialect::py_like;
    std::size_t i = 0;
    std::size_t start = 0;
    const std::size_t n = text.size();

    auto kind_of = [](Mode m) {
        switch (m) {
            case Mode::code: return SpanKind::code;
            case Mode::block_comment: return SpanKind::comment;
            default: return SpanKind::string;
        }
    };

    while (i < n) {
        const char c = text[i];
        switch (state.mode) {
            case Mode::code: {
                if (py && c == '#') {
                    push(spans, SpanKind::code, start, i);
                    std::size_t e = text.find('\n', i);
                    e = e == std::string_view::npos ? n : e;
                    push(spans, SpanKind::comment, i, e);
                    i = start = e;
                    continue;
                }
                if (!py && starts_with_at(text, i, "//")) {
                    push(spans, SpanKind::code, start, i);
                    std::size_t e = text.find('\n', i);
                    e = e == std::string_view::npos ? n : e;
                    push(spans, SpanKind::comment, i, e);
                    i = start = e;
                    continue;
                }
                if (!py && starts_with_at(text, i, "/*")) {
                    push(spans, SpanKind::code, start, i);
                    start = i;
                    state.mode = Mode::block_comment;
                    i += 2;
                    continue;
                }
                if (c == '"' || c == '\'') {
                    push(spans, SpanKind::code, start, i);
                    start = i;
                    if (py && starts_with_at(text, i, c == '"' ? "\"\"\"" : "'''")) {
                        state.mode = c == '"' ? Mode::triple_double : Mode::triple_single;
                        i += 3;
                    } else {
                        state.mode = c == '"' ? Mode::double_quote : Mode::single_quote;
                        ++i;
                    }
                    continue;
                }
                ++i;
                break;
            }
            case Mode::single_quote:
            case Mode::double_quote: {
                const char q = state.mode == Mode::double_quote ? '"' : '\'';
                if (c == '\\' && i + 1 < n) {
                    i += 2;
                    continue;
                }
                if (c == '\n') {
                    // Unterminated single-line string: close at end of line.
                    push(spans, SpanKind::string, start, i);
                    start = i;
                    state.mode = Mode::code;
                    continue;
                }
                ++i;
                if (c == q) {
                    push(spans, SpanKind::string, start, i);
                    start = i;
                    state.mode = Mode::code;
                }
                break;
            }
            case Mode::triple_single:
            case Mode::triple_double: {
                const std::string_view close = state.mode == Mode::triple_double ? "\"\"\"" : "'''";
                if (c == '\\' && i + 1 < n) {
                    i += 2;
                    continue;
                }
                if (starts_with_at(text, i, close)) {
                    i += 3;
                    push(spans, SpanKind::string, start, i);
                    start = i;
                    state.mode = Mode::code;
                    continue;
                }
                ++i;
                break;
            }
            case Mode::block_comment: {
                if (starts_with_at(text, i, "*/")) {
                    i += 2;
                    push(spans, SpanKind::comment, start, i);
                    start = i;
                    state.mode = Mode::code;
                    continue;
                }
                ++i;
                break;
            }
        }
    }
    push(spans, kind_of(state.mode), start, n);
    // Single-line strings never continue onto the next scan.
    if (state.mode == Mode::single_quote || state.mode == Mode::double_quote) state.mode = Mode::code;
    return spans;
}

std::vector<Span> scan_spans(std::string_view text, Dialect dialect) {
    ScanState state;
    return scan_spans(text, dialect, state);
}

std::vector<NumberToken> find_number_tokens(std::string_view text, std::size_t region_begin,
                                            std::size_t region_end, Dialect dialect) {
    std::vector<NumberToken> out;
    auto digit = [&](std::size_t k) {
        return k < region_end && std::isdigit(static_cast<unsigned char>(text[k]));
    };
    auto hexdigit = [&](std::size_t k) {
        return k < region_end && std::isxdigit(static_cast<unsigned char>(text[k]));
    };
    auto ident_at = [&](std::size_t k) {
        return k < text.size() && is_identifier_byte(static_cast<unsigned char>(text[k]));
    };

    std::size_t i = region_begin;
    while (i < region_end) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        const bool starts_number = std::isdigit(c) || (c == '.' && digit(i + 1));
        if (!starts_number) {
            if (is_identifier_byte(c)) {
                // Skip the whole identifier so digits inside it are ignored.
                while (i < region_end && is_identifier_byte(static_cast<unsigned char>(text[i]))) ++i;
            } else {
                ++i;
            }
            continue;
        }
        // A number glued to a preceding identifier or '.'-chain is not a token.
        if (i > 0) {
            const unsigned char prev = static_cast<unsigned char>(text[i - 1]);
            if (is_identifier_byte(prev) || (c != '.' && prev == '.')) {
                ++i;
                while (i < region_end && (is_identifier_byte(static_cast<unsigned char>(text[i])) ||
                                          text[i] == '.'))
                    ++i;
                continue;
            }
        }
        std::size_t j = i;
        bool hex = false;
        if (dialect == Dialect::c_like && text[j] == '0' && j + 1 < region_end &&
            (text[j + 1] == 'x' || text[j + 1] == 'X') && hexdigit(j + 2)) {
            hex = true;
            j += 2;
            while (hexdigit(j)) ++j;
        } else {
            while (digit(j)) ++j;
            if (j < region_end && text[j] == '.') {
                ++j;
                while (digit(j)) ++j;
            }
            if (j < region_end && (text[j] == 'e' || text[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < region_end && (text[k] == '+' || text[k] == '-')) ++k;
                if (digit(k)) {
                    j = k;
                    while (digit(j)) ++j;
                }
            }
        }
        if (dialect == Dialect::c_like) {
            std::size_t k = j;
            while (k < region_end && k - j < 3 &&
                   std::string_view("uUlLfF").find(text[k]) != std::string_view::npos &&
                   !(hex && (text[k] == 'f' || text[k] == 'F')))
                ++k;
            j = k;
        }
        if (ident_at(j) || (j < region_end && text[j] == '.' )) {
            // Glued to an identifier (e.g. "2nd") or a dotted chain: skip it all.
            while (j < region_end && (is_identifier_byte(static_cast<unsigned char>(text[j])) ||
                                      text[j] == '.'))
                ++j;
            i = j;
            continue;
        }
        out.push_back({i, j});
        i = j;
    }
    return out;
}

std::vector<NumberToken> code_number_tokens(std::string_view text, Dialect dialect) {
    std::vector<NumberToken> out;
    for (const auto& span : scan_spans(text, dialect)) {
        if (span.kind != SpanKind::code) continue;
        auto toks = find_number_tokens(text, span.begin, span.end, dialect);
        out.insert(out.end(), toks.begin(), toks.end());
    }
    return out;
}

bool parse_number_literal(std::string_view text, double& out) {
    if (text.empty()) return false;
    std::string s(text);
    std::size_t end = s.size();
    const bool hex = s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X');
    while (end > 0 && std::string_view(hex ? "uUlL" : "uUlLfF").find(s[end - 1]) != std::string_view::npos)
        --end;
    s.resize(end);
    if (s.empty()) return false;
    errno = 0;
    char* stop = nullptr;
    if (hex) {
        unsigned long long v = std::strtoull(s.c_str(), &stop, 16);
        out = static_cast<double>(v);
    } else {
        if (!(std::isdigit(static_cast<unsigned char>(s[0])) || s[0] == '.' || s[0] == '-' || s[0] == '+'))
            return false;
        out = std::strtod(s.c_str(), &stop);
    }
    return errno == 0 && stop == s.c_str() + s.size();
}

}  // namespace tracelens
