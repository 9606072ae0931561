#include "tracelens/text_util.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>
#include <stdexcept>
#include <vector>

namespace tracelens {

std::string_view trim(std::string_view s) {
    const char* ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

namespace {

struct Fence {
    std::string_view info;
    std::string_view body;
};

// Fences start at the beginning of a line with ``` and close at the next
// line that starts with ```.
std::vector<Fence> fenced_blocks(std::string_view text) {
    std::vector<Fence> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t open = text.find("```", pos);
        if (open == std::string_view::npos) break;
        if (open != 0 && text[open - 1] != '\n') {
            pos = open + 3;
            continue;
        }
        std::size_t info_end = text.find('\n', open);
        if (info_end == std::string_view::npos) break;
        const std::size_t body_begin = info_end + 1;
        std::size_t close = body_begin;
        while (true) {
            close = text.find("```", close);
            if (close == std::string_view::npos || close == body_begin || text[close - 1] == '\n') break;
            close += 3;
        }
        if (close == std::string_view::npos) {
            out.push_back({text.substr(open + 3, info_end - open - 3), text.substr(body_begin)});
            break;
        }
        out.push_back({text.substr(open + 3, info_end - open - 3),
                       text.substr(body_begin, close - body_begin)});
        std::size_t after = text.find('\n', close);
        pos = after == std::string_view::npos ? text.size() : after + 1;
    }
    return out;
}

std::optional<nlohmann::json> parse_object(std::string_view s) {
    try {
        auto j = nlohmann::json::parse(s);
        if (j.is_object()) return j;
    } catch (const nlohmann::json::exception&) {
    }
    return std::nullopt;
}

}  // namespace

std::optional<nlohmann::json> extract_json_object(std::string_view text) {
    if (auto j = parse_object(trim(text))) return j;
    for (const auto& f : fenced_blocks(text))
        if (auto j = parse_object(trim(f.body))) return j;

    for (std::size_t start = text.find('{'); start != std::string_view::npos;
         start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (c == '\\') ++i;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}' && --depth == 0) {
                if (auto j = parse_object(text.substr(start, i - start + 1))) return j;
                break;
            }
        }
    }
    return std::nullopt;
}

std::optional<std::string> extract_fenced_block(std::string_view text) {
    std::optional<std::string> best;
    for (const auto& f : fenced_blocks(text))
        if (!best || f.body.size() > best->size()) best = std::string(f.body);
    return best;
}

std::string sha256_hex(std::string_view data) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1)
        throw std::runtime_error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

}  // namespace tracelens
