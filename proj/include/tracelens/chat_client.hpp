#pragma once

// Chat-completion boundary: a pluggable backend plus a client that adds
// retry with exponential backoff, an in-flight cap and a response cache.

#include "tracelens/errors.hpp"

#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace tracelens {

enum class ResponseFormat { json, text };

struct ChatRequest {
    std::string model_id;
    std::string system_text;
    std::string user_text;
    ResponseFormat response_format_hint = ResponseFormat::text;
    double temperature = 0.0;
    /// Distinguishes repeated samples of one prompt; part of the cache key.
    std::optional<int> sample_index;
};

struct TokenUsage {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
};

struct ChatResponse {
    std::string content;
    TokenUsage usage;
    bool from_cache = false;
};

/// Retryable upstream failure (network error, 429, 5xx).
class TransientFailure : public Error {
public:
    explicit TransientFailure(const std::string& msg) : Error("transient", msg) {}
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    /// Throws TransientFailure, AuthError or Unavailable.
    virtual ChatResponse send(const ChatRequest& request) = 0;
};

/// OpenAI-compatible endpoint: POST {base_url}/chat/completions.
class HttpChatBackend : public ChatBackend {
public:
    HttpChatBackend(std::string base_url, std::string api_key, double timeout_seconds = 120.0);

    /// Reads MODEL_BASE_URL and MODEL_API_KEY; throws Misconfigured.
    static std::shared_ptr<HttpChatBackend> from_environment();

    ChatResponse send(const ChatRequest& request) override;

private:
    std::string scheme_host_port_;
    std::string path_prefix_;
    std::string api_key_;
    double timeout_seconds_;
};

struct ChatClientOptions {
    int max_retries = 3;
    double initial_backoff_seconds = 1.0;
    double backoff_multiplier = 2.0;
    double max_backoff_seconds = 30.0;
    std::size_t max_in_flight = 4;
    std::optional<std::filesystem::path> cache_dir;
    /// Replaces std::this_thread::sleep_for; tests pass a no-op.
    std::function<void(double)> sleep;
};

class ChatClient {
public:
    explicit ChatClient(std::shared_ptr<ChatBackend> backend, ChatClientOptions options = {});

    /// Served from cache when the key is known. Throws Unavailable once
    /// retries are exhausted, AuthError without retrying.
    ChatResponse complete(const ChatRequest& request);
    ChatResponse complete(const ChatRequest& request, int max_retries);

    /// Number of backend calls attempted, successful or not.
    std::size_t upstream_calls() const;

    static std::string cache_key(const ChatRequest& request);

private:
    std::optional<ChatResponse> lookup(const std::string& key);
    ChatResponse store(const std::string& key, const ChatRequest& request, ChatResponse response);

    std::shared_ptr<ChatBackend> backend_;
    ChatClientOptions options_;
    mutable std::mutex mutex_;
    std::condition_variable slot_free_;
    std::size_t in_flight_ = 0;
    std::size_t upstream_calls_ = 0;
    std::map<std::string, ChatResponse> memory_;
};

}  // namespace tracelens
