#pragma once

// Lightweight lexical scanning shared by the diff normalizations, the
// replay syntax check and the knob rewriter. Tracks string and comment
// state only; it is not a parser.

#include "tracelens/trace.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace tracelens {

enum class SpanKind { code, string, comment };

struct Span {
    SpanKind kind;
    std::size_t begin;
    std::size_t end;  // exclusive
};

/// Scanner state carried across lines of one source.
struct ScanState {
    enum class Mode { code, single_quote, double_quote, triple_single, triple_double, block_comment };
    Mode mode = Mode::code;
};

/// Splits `text` into code / string / comment spans. Line comments run to
/// the next '\n'. `state` is updated so a multi-line scan can be resumed.
std::vector<Span> scan_spans(std::string_view text, Dialect dialect, ScanState& state);

/// Fresh-state convenience overload (line-local scanning).
std::vector<Span> scan_spans(std::string_view text, Dialect dialect);

/// Numeric-literal tokens found in one code region. Offsets are relative
/// to `text`; `region` limits the search to [region_begin, region_end).
struct NumberToken {
    std::size_t begin;
    std::size_t end;
};

/// Literal grammar: digits with optional fraction and exponent, or a
/// leading-dot fraction; C_LIKE adds 0x-hex and u/l/f suffixes. The sign
/// is never part of the token. A token touching an identifier character on
/// either side is not a literal.
std::vector<NumberToken> find_number_tokens(std::string_view text, std::size_t region_begin,
                                            std::size_t region_end, Dialect dialect);

/// Numeric tokens in the code spans of `text` (comments and strings skipped).
std::vector<NumberToken> code_number_tokens(std::string_view text, Dialect dialect);

bool is_identifier_byte(unsigned char c);

/// Parses a literal as a double (hex and C suffixes handled). Returns false
/// when `text` is not a single numeric literal.
bool parse_number_literal(std::string_view text, double& out);

}  // namespace tracelens
