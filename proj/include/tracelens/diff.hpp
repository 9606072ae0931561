#pragma once

#include "tracelens/trace.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace tracelens {

enum class LineKind { code, comment_only, blank };

std::string_view to_string(LineKind k);

/// Placeholder substituted for every numeric literal in a skeleton.
inline constexpr std::string_view kNumPlaceholder = "\xE2\x9F\xA8NUM\xE2\x9F\xA9";  // ⟨NUM⟩

struct LineRecord {
    std::string bytes;      // exact line, newline excluded
    std::size_t index = 0;  // 0-based line number in its own source
    LineKind kind = LineKind::code;
    std::string skeleton;
};

/// Parent -> child line diff. Removed indices refer to the parent source,
/// added indices to the child source.
struct DiffRecord {
    std::string parent_id;
    std::string child_id;
    std::vector<LineRecord> removed_lines;
    std::vector<LineRecord> added_lines;
    bool child_trailing_newline = false;

    bool empty() const { return removed_lines.empty() && added_lines.empty(); }
};

/// Splits on '\n'. A final newline does not produce an empty last line;
/// `trailing_newline` reports whether one was present.
std::vector<std::string_view> split_lines(std::string_view source, bool* trailing_newline = nullptr);

/// Line-granular shortest edit script (Myers). Lines compare by exact bytes.
DiffRecord compute_diff(std::string_view parent_source, std::string_view child_source,
                        Dialect dialect);

/// Applies `diff` to `parent_source`; byte-equal to the child it came from.
std::string reconstruct_child(std::string_view parent_source, const DiffRecord& diff);

/// Trailing comment stripped, numeric literals replaced by ⟨NUM⟩, whitespace
/// runs collapsed, ends trimmed. String literal contents are kept verbatim
/// apart from whitespace collapsing.
std::string skeletonize(std::string_view line, Dialect dialect);

LineKind classify_line_kind(std::string_view line, Dialect dialect);

/// Numeric literals in code (comments and strings excluded). Block comments
/// and triple-quoted strings spanning lines are tracked.
std::size_t count_numeric_literals(std::string_view source, Dialect dialect);

/// Non-blank line count.
std::size_t count_loc(std::string_view source);

/// Informational "---/+++/@@" rendering with `context` lines around hunks.
std::string render_unified_diff(std::string_view parent_source, std::string_view child_source,
                                std::string_view parent_label, std::string_view child_label,
                                int context = 3);

}  // namespace tracelens
