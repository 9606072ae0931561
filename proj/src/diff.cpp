#include "tracelens/diff.hpp"

#include "tracelens/source_scan.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <unordered_map>

namespace tracelens {

std::string_view to_string(LineKind k) {
    switch (k) {
        case LineKind::code: return "code";
        case LineKind::comment_only: return "comment_only";
        case LineKind::blank: return "blank";
    }
    return "code";
}

std::vector<std::string_view> split_lines(std::string_view source, bool* trailing_newline) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < source.size()) {
        std::size_t nl = source.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.push_back(source.substr(start));
            start = source.size();
            break;
        }
        lines.push_back(source.substr(start, nl - start));
        start = nl + 1;
    }
    if (trailing_newline) *trailing_newline = !source.empty() && source.back() == '\n';
    return lines;
}

namespace {

enum class EditOp { equal, remove, insert };

// Myers' greedy O((N+M)D) algorithm. Each round keeps only the diagonals
// [-d, d], so the stored trace is O(D^2).
std::vector<EditOp> shortest_edit_script(const std::vector<int>& a, const std::vector<int>& b) {
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b.size());
    const int max_d = n + m;
    std::vector<std::vector<int>> trace;  // trace[d][k + d] = furthest x on diagonal k

    std::vector<int> prev;  // round d-1
    int final_d = 0;
    for (int d = 0; d <= max_d; ++d) {
        std::vector<int> cur(2 * d + 1, 0);
        auto prev_at = [&](int k) { return prev[k + (d - 1)]; };
        bool done = false;
        for (int k = -d; k <= d; k += 2) {
            int x;
            if (d == 0)
                x = 0;
            else if (k == -d || (k != d && prev_at(k - 1) < prev_at(k + 1)))
                x = prev_at(k + 1);
            else
                x = prev_at(k - 1) + 1;
            int y = x - k;
            while (x < n && y < m && a[x] == b[y]) {
                ++x;
                ++y;
            }
            cur[k + d] = x;
            if (x >= n && y >= m) done = true;
        }
        trace.push_back(cur);
        prev = std::move(cur);
        if (done) {
            final_d = d;
            break;
        }
    }

    std::vector<EditOp> ops;
    int x = n;
    int y = m;
    for (int d = final_d; d > 0; --d) {
        const auto& pv = trace[d - 1];
        auto at = [&](int k) { return pv[k + (d - 1)]; };
        const int k = x - y;
        int prev_k;
        if (k == -d || (k != d && at(k - 1) < at(k + 1)))
            prev_k = k + 1;
        else
            prev_k = k - 1;
        const int prev_x = at(prev_k);
        const int prev_y = prev_x - prev_k;
        while (x > prev_x && y > prev_y) {
            ops.push_back(EditOp::equal);
            --x;
            --y;
        }
        if (prev_k == k + 1) {
            ops.push_back(EditOp::insert);
            --y;
        } else {
            ops.push_back(EditOp::remove);
            --x;
        }
    }
    while (x > 0 && y > 0) {
        ops.push_back(EditOp::equal);
        --x;
        --y;
    }
    std::reverse(ops.begin(), ops.end());
    return ops;
}

std::vector<EditOp> line_ops(const std::vector<std::string_view>& a,
                             const std::vector<std::string_view>& b) {
    std::unordered_map<std::string_view, int> ids;
    auto intern = [&](const std::vector<std::string_view>& lines) {
        std::vector<int> out;
        out.reserve(lines.size());
        for (auto l : lines) out.push_back(ids.emplace(l, static_cast<int>(ids.size())).first->second);
        return out;
    };
    auto ia = intern(a);
    auto ib = intern(b);

    // Common prefix and suffix are matched directly.
    std::size_t pre = 0;
    while (pre < ia.size() && pre < ib.size() && ia[pre] == ib[pre]) ++pre;
    std::size_t suf = 0;
    while (suf < ia.size() - pre && suf < ib.size() - pre &&
           ia[ia.size() - 1 - suf] == ib[ib.size() - 1 - suf])
        ++suf;
    std::vector<int> mid_a(ia.begin() + pre, ia.end() - suf);
    std::vector<int> mid_b(ib.begin() + pre, ib.end() - suf);

    std::vector<EditOp> ops(pre, EditOp::equal);
    auto mid = shortest_edit_script(mid_a, mid_b);
    ops.insert(ops.end(), mid.begin(), mid.end());
    ops.insert(ops.end(), suf, EditOp::equal);
    return ops;
}

LineRecord make_record(std::string_view bytes, std::size_t index, Dialect dialect) {
    LineRecord r;
    r.bytes = std::string(bytes);
    r.index = index;
    r.kind = classify_line_kind(bytes, dialect);
    r.skeleton = r.kind == LineKind::blank ? std::string() : skeletonize(bytes, dialect);
    return r;
}

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

DiffRecord compute_diff(std::string_view parent_source, std::string_view child_source,
                        Dialect dialect) {
    const auto a = split_lines(parent_source);
    bool child_nl = false;
    const auto b = split_lines(child_source, &child_nl);

    DiffRecord diff;
    diff.child_trailing_newline = child_nl;
    std::size_t i = 0;
    std::size_t j = 0;
    for (EditOp op : line_ops(a, b)) {
        switch (op) {
            case EditOp::equal:
                ++i;
                ++j;
                break;
            case EditOp::remove:
                diff.removed_lines.push_back(make_record(a[i], i, dialect));
                ++i;
                break;
            case EditOp::insert:
                diff.added_lines.push_back(make_record(b[j], j, dialect));
                ++j;
                break;
        }
    }
    return diff;
}

std::string reconstruct_child(std::string_view parent_source, const DiffRecord& diff) {
    const auto parent = split_lines(parent_source);
    std::vector<bool> removed(parent.size(), false);
    for (const auto& r : diff.removed_lines)
        if (r.index < removed.size()) removed[r.index] = true;

    const std::size_t kept =
        parent.size() - static_cast<std::size_t>(std::count(removed.begin(), removed.end(), true));
    const std::size_t total = kept + diff.added_lines.size();
    std::vector<std::string_view> child(total);
    std::vector<bool> filled(total, false);
    for (const auto& a : diff.added_lines) {
        if (a.index < total) {
            child[a.index] = a.bytes;
            filled[a.index] = true;
        }
    }
    std::size_t slot = 0;
    for (std::size_t i = 0; i < parent.size(); ++i) {
        if (removed[i]) continue;
        while (slot < total && filled[slot]) ++slot;
        if (slot < total) child[slot++] = parent[i];
    }

    std::string out;
    for (std::size_t i = 0; i < child.size(); ++i) {
        if (i) out.push_back('\n');
        out.append(child[i]);
    }
    if (diff.child_trailing_newline) out.push_back('\n');
    return out;
}

std::string skeletonize(std::string_view line, Dialect dialect) {
    std::string raw;
    raw.reserve(line.size());
    for (const auto& span : scan_spans(line, dialect)) {
        if (span.kind == SpanKind::comment) continue;
        if (span.kind == SpanKind::string) {
            raw.append(line.substr(span.begin, span.end - span.begin));
            continue;
        }
        std::size_t pos = span.begin;
        for (const auto& tok : find_number_tokens(line, span.begin, span.end, dialect)) {
            raw.append(line.substr(pos, tok.begin - pos));
            raw.append(kNumPlaceholder);
            pos = tok.end;
        }
        raw.append(line.substr(pos, span.end - pos));
    }

    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (unsigned char c : raw) {
        if (is_space(c) || c == '\n') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(c));
    }
    return out;
}

LineKind classify_line_kind(std::string_view line, Dialect dialect) {
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return is_space(c); }))
        return LineKind::blank;
    bool has_comment = false;
    for (const auto& span : scan_spans(line, dialect)) {
        if (span.kind == SpanKind::comment) {
            has_comment = true;
            continue;
        }
        auto text = line.substr(span.begin, span.end - span.begin);
        if (!std::all_of(text.begin(), text.end(), [](unsigned char c) { return is_space(c); }))
            return LineKind::code;
    }
    return has_comment ? LineKind::comment_only : LineKind::code;
}

std::size_t count_numeric_literals(std::string_view source, Dialect dialect) {
    ScanState state;
    std::size_t count = 0;
    for (const auto& span : scan_spans(source, dialect, state)) {
        if (span.kind != SpanKind::code) continue;
        count += find_number_tokens(source, span.begin, span.end, dialect).size();
    }
    return count;
}

std::size_t count_loc(std::string_view source) {
    std::size_t n = 0;
    for (auto line : split_lines(source))
        if (!std::all_of(line.begin(), line.end(), [](unsigned char c) { return is_space(c); })) ++n;
    return n;
}

std::string render_unified_diff(std::string_view parent_source, std::string_view child_source,
                                std::string_view parent_label, std::string_view child_label,
                                int context) {
    const auto a = split_lines(parent_source);
    const auto b = split_lines(child_source);
    const auto ops = line_ops(a, b);

    struct Row {
        EditOp op;
        std::size_t ai;
        std::size_t bi;
    };
    std::vector<Row> rows;
    std::size_t i = 0, j = 0;
    for (EditOp op : ops) {
        rows.push_back({op, i, j});
        if (op != EditOp::insert) ++i;
        if (op != EditOp::remove) ++j;
    }

    std::string out = fmt::format("--- {}\n+++ {}\n", parent_label, child_label);
    const std::size_t ctx = static_cast<std::size_t>(std::max(context, 0));
    std::size_t r = 0;
    while (r < rows.size()) {
        if (rows[r].op == EditOp::equal) {
            ++r;
            continue;
        }
        // Extend the hunk while changes are within 2*ctx of each other.
        std::size_t begin = r >= ctx ? r - ctx : 0;
        std::size_t end = r;
        std::size_t last_change = r;
        while (end < rows.size()) {
            if (rows[end].op != EditOp::equal) last_change = end;
            if (end - last_change > 2 * ctx) break;
            ++end;
        }
        end = std::min(rows.size(), last_change + ctx + 1);

        std::size_t a_len = 0, b_len = 0;
        for (std::size_t k = begin; k < end; ++k) {
            if (rows[k].op != EditOp::insert) ++a_len;
            if (rows[k].op != EditOp::remove) ++b_len;
        }
        const std::size_t a_start = a_len ? rows[begin].ai + 1 : rows[begin].ai;
        const std::size_t b_start = b_len ? rows[begin].bi + 1 : rows[begin].bi;
        out += fmt::format("@@ -{},{} +{},{} @@\n", a_start, a_len, b_start, b_len);
        for (std::size_t k = begin; k < end; ++k) {
            switch (rows[k].op) {
                case EditOp::equal:
                    out += ' ';
                    out.append(a[rows[k].ai]);
                    break;
                case EditOp::remove:
                    out += '-';
                    out.append(a[rows[k].ai]);
                    break;
                case EditOp::insert:
                    out += '+';
                    out.append(b[rows[k].bi]);
                    break;
            }
            out += '\n';
        }
        r = end;
    }
    return out;
}

}  // namespace tracelens
