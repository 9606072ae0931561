#include "tracelens/chat_client.hpp"

#include "tracelens/text_util.hpp"

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>
#include <fmt/format.h>

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

namespace tracelens {

using nlohmann::json;

HttpChatBackend::HttpChatBackend(std::string base_url, std::string api_key, double timeout_seconds)
    : api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds) {
    while (!base_url.empty() && base_url.back() == '/') base_url.pop_back();
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos)
        throw Misconfigured("bad-base-url", "MODEL_BASE_URL must include a scheme: " + base_url);
    const auto path_begin = base_url.find('/', scheme_end + 3);
    scheme_host_port_ = base_url.substr(0, path_begin);
    path_prefix_ = path_begin == std::string::npos ? "" : base_url.substr(path_begin);
}

std::shared_ptr<HttpChatBackend> HttpChatBackend::from_environment() {
    const char* key = std::getenv("MODEL_API_KEY");
    if (!key || !*key) throw Misconfigured("missing-credential", "missing credential: MODEL_API_KEY is not set");
    const char* base = std::getenv("MODEL_BASE_URL");
    if (!base || !*base) throw Misconfigured("missing-endpoint", "missing endpoint: MODEL_BASE_URL is not set");
    return std::make_shared<HttpChatBackend>(base, key);
}

ChatResponse HttpChatBackend::send(const ChatRequest& request) {
    httplib::Client client(scheme_host_port_);
    const auto secs = static_cast<time_t>(timeout_seconds_);
    client.set_connection_timeout(std::min<time_t>(secs, 30), 0);
    client.set_read_timeout(secs, 0);
    client.set_write_timeout(secs, 0);
    client.set_bearer_token_auth(api_key_);

    json messages = json::array();
    if (!request.system_text.empty())
        messages.push_back({{"role", "system"}, {"content", request.system_text}});
    messages.push_back({{"role", "user"}, {"content", request.user_text}});
    json body = {{"model", request.model_id},
                 {"messages", std::move(messages)},
                 {"temperature", request.temperature}};
    if (request.response_format_hint == ResponseFormat::json)
        body["response_format"] = {{"type", "json_object"}};

    auto res = client.Post(path_prefix_ + "/chat/completions",
                           body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
    if (!res) throw TransientFailure("connection failed: " + httplib::to_string(res.error()));
    if (res->status == 401 || res->status == 403)
        throw AuthError("auth", fmt::format("endpoint rejected credential (HTTP {})", res->status));
    if (res->status == 429 || res->status >= 500)
        throw TransientFailure(fmt::format("HTTP {}", res->status));
    if (res->status != 200)
        throw Unavailable("http-status", fmt::format("HTTP {}: {}", res->status, res->body.substr(0, 200)));

    json reply;
    try {
        reply = json::parse(res->body);
    } catch (const json::exception&) {
        throw TransientFailure("malformed response body");
    }
    const auto& choices = reply.value("choices", json::array());
    if (!choices.is_array() || choices.empty() || !choices[0].contains("message"))
        throw TransientFailure("response has no choices");
    const auto& content = choices[0]["message"].value("content", json());
    ChatResponse out;
    out.content = content.is_string() ? content.get<std::string>() : std::string();
    if (auto it = reply.find("usage"); it != reply.end() && it->is_object()) {
        out.usage.prompt_tokens = std::max(0LL, it->value("prompt_tokens", 0LL));
        out.usage.completion_tokens = std::max(0LL, it->value("completion_tokens", 0LL));
    }
    return out;
}

ChatClient::ChatClient(std::shared_ptr<ChatBackend> backend, ChatClientOptions options)
    : backend_(std::move(backend)), options_(std::move(options)) {
    if (!backend_) throw Misconfigured("no-backend", "chat client needs a backend");
    if (!options_.sleep)
        options_.sleep = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
    options_.max_in_flight = std::max<std::size_t>(1, options_.max_in_flight);
    if (options_.cache_dir) std::filesystem::create_directories(*options_.cache_dir);
}

std::string ChatClient::cache_key(const ChatRequest& r) {
    // Length-prefixed fields keep the key injective for arbitrary bytes.
    std::string material;
    auto field = [&](std::string_view s) {
        material += std::to_string(s.size());
        material += ':';
        material.append(s);
    };
    field(r.model_id);
    field(r.system_text);
    field(r.user_text);
    field(fmt::format("{:.17g}", r.temperature));
    if (r.sample_index) field("sample=" + std::to_string(*r.sample_index));
    return sha256_hex(material);
}

std::size_t ChatClient::upstream_calls() const {
    std::lock_guard lock(mutex_);
    return upstream_calls_;
}

std::optional<ChatResponse> ChatClient::lookup(const std::string& key) {
    {
        std::lock_guard lock(mutex_);
        if (auto it = memory_.find(key); it != memory_.end()) return it->second;
    }
    if (!options_.cache_dir) return std::nullopt;
    std::ifstream in(*options_.cache_dir / (key + ".json"), std::ios::binary);
    if (!in) return std::nullopt;
    try {
        const json env = json::parse(in);
        if (env.value("key", "") != key) return std::nullopt;
        ChatResponse r;
        r.content = env.at("response").at("content").get<std::string>();
        r.usage.prompt_tokens = env["response"]["usage"].value("prompt_tokens", 0LL);
        r.usage.completion_tokens = env["response"]["usage"].value("completion_tokens", 0LL);
        std::lock_guard lock(mutex_);
        return memory_.emplace(key, r).first->second;
    } catch (const json::exception& e) {
        spdlog::warn("ignoring unreadable cache entry {}: {}", key, e.what());
        return std::nullopt;
    }
}

ChatResponse ChatClient::store(const std::string& key, const ChatRequest& request, ChatResponse response) {
    std::lock_guard lock(mutex_);
    auto [it, inserted] = memory_.emplace(key, response);
    if (!inserted) return it->second;
    if (!options_.cache_dir) return response;

    json env = {{"key", key},
                {"request",
                 {{"model_id", request.model_id},
                  {"temperature", request.temperature},
                  {"system_sha256", sha256_hex(request.system_text)},
                  {"user_sha256", sha256_hex(request.user_text)}}},
                {"response",
                 {{"content", response.content},
                  {"usage",
                   {{"prompt_tokens", response.usage.prompt_tokens},
                    {"completion_tokens", response.usage.completion_tokens}}}}}};
    if (request.sample_index) env["request"]["sample_index"] = *request.sample_index;
    std::string text;
    try {
        text = env.dump(2);
    } catch (const json::exception&) {
        spdlog::warn("response for {} is not valid UTF-8; kept in memory only", key);
        return response;
    }
    const auto final_path = *options_.cache_dir / (key + ".json");
    const auto tmp_path = *options_.cache_dir /
                          fmt::format("{}.{}.{}.tmp", key, ::getpid(),
                                      std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp_path, std::ios::binary);
        out << text;
    }
    // link() fails when the key already exists, so the first writer wins.
    if (::link(tmp_path.c_str(), final_path.c_str()) != 0 && errno != EEXIST)
        spdlog::warn("could not write cache entry {}", final_path.string());
    std::error_code ec;
    std::filesystem::remove(tmp_path, ec);
    return response;
}

ChatResponse ChatClient::complete(const ChatRequest& request) {
    return complete(request, options_.max_retries);
}

ChatResponse ChatClient::complete(const ChatRequest& request, int max_retries) {
    const std::string key = cache_key(request);
    if (auto hit = lookup(key)) {
        hit->from_cache = true;
        return *hit;
    }

    {
        std::unique_lock lock(mutex_);
        slot_free_.wait(lock, [&] { return in_flight_ < options_.max_in_flight; });
        ++in_flight_;
    }
    struct Release {
        ChatClient* self;
        ~Release() {
            {
                std::lock_guard lock(self->mutex_);
                --self->in_flight_;
            }
            self->slot_free_.notify_one();
        }
    } release{this};

    double backoff = options_.initial_backoff_seconds;
    std::string last_error;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        if (attempt > 0) {
            options_.sleep(std::min(backoff, options_.max_backoff_seconds));
            backoff *= options_.backoff_multiplier;
        }
        {
            std::lock_guard lock(mutex_);
            ++upstream_calls_;
        }
        try {
            ChatResponse r = backend_->send(request);
            r.from_cache = false;
            ChatResponse stored = store(key, request, r);
            stored.from_cache = false;
            return stored;
        } catch (const TransientFailure& e) {
            last_error = e.what();
            spdlog::debug("chat attempt {} failed: {}", attempt + 1, last_error);
        }
    }
    throw Unavailable("retries-exhausted",
                      fmt::format("chat endpoint unavailable after {} attempts: {}", max_retries + 1, last_error));
}

}  // namespace tracelens
