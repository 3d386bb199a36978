#pragma once

// OpenAI-compatible HTTP client for /v1/completions and /v1/embeddings.

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <semaphore>
#include <string>
#include <thread>

#include "normsage/llm_backend.hpp"

namespace normsage {

struct RemoteConfig {
    std::string base_url;                 // e.g. "https://api.openai.com" or "http://127.0.0.1:8080/prefix"
    std::string api_key;
    std::string completion_model = "davinci-002";
    std::string embedding_model = "text-embedding-3-small";
    int top_logprobs = 5;
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{1000};
    std::chrono::seconds timeout{60};
    std::ptrdiff_t max_in_flight = 4;

    /// Reads the bearer token from NORMSAGE_API_KEY.
    static RemoteConfig from_env(std::string base_url) {
        RemoteConfig c;
        c.base_url = std::move(base_url);
        const char* key = std::getenv("NORMSAGE_API_KEY");
        if (!key || !*key) throw ConfigError("NORMSAGE_API_KEY is not set");
        c.api_key = key;
        return c;
    }
};

/// Exact request body sent to /v1/completions.
inline nlohmann::json completion_request_body(const RemoteConfig& cfg, const RenderedPrompt& prompt) {
    nlohmann::json body{{"model", cfg.completion_model},
                        {"prompt", prompt.text},
                        {"temperature", prompt.decoding.temperature},
                        {"max_tokens", prompt.decoding.max_tokens}};
    if (prompt.decoding.want_logprobs) body["logprobs"] = cfg.top_logprobs;
    return body;
}

/// Decodes a legacy completions response (choices[0].text + choices[0].logprobs).
inline CompletionResult parse_completion_response(const nlohmann::json& j) {
    const auto& choice = j.at("choices").at(0);
    CompletionResult r;
    r.text = choice.at("text").get<std::string>();
    r.model_id = j.value("model", std::string{});
    if (choice.contains("logprobs") && choice["logprobs"].is_object()) {
        const auto& lp = choice["logprobs"];
        const auto& toks = lp.at("tokens");
        const auto& tlp = lp.at("token_logprobs");
        for (std::size_t i = 0; i < toks.size(); ++i) {
            TokenLogprob t;
            t.token = toks[i].get<std::string>();
            t.logprob = tlp.at(i).is_null() ? 0.0 : std::min(0.0, tlp[i].get<double>());
            if (lp.contains("top_logprobs") && lp["top_logprobs"].is_array() && i < lp["top_logprobs"].size() &&
                lp["top_logprobs"][i].is_object())
                for (const auto& [alt, v] : lp["top_logprobs"][i].items())
                    t.top_alternatives[alt] = std::min(0.0, v.get<double>());
            r.tokens.push_back(std::move(t));
        }
    }
    return r;
}

class OpenAIClient : public CompletionBackend, public EmbeddingBackend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit OpenAIClient(RemoteConfig cfg, Sleeper sleeper = default_sleeper())
        : cfg_(std::move(cfg)), sleep_(std::move(sleeper)), in_flight_(cfg_.max_in_flight) {
        if (cfg_.base_url.empty()) throw ConfigError("backend base_url is empty");
        if (cfg_.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
        auto scheme_end = cfg_.base_url.find("://");
        auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
        auto path_start = cfg_.base_url.find('/', host_start);
        if (path_start == std::string::npos) {
            origin_ = cfg_.base_url;
        } else {
            origin_ = cfg_.base_url.substr(0, path_start);
            prefix_ = cfg_.base_url.substr(path_start);
            while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
        }
    }

    static Sleeper default_sleeper() {
        return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }

    CompletionResult complete(const RenderedPrompt& prompt) override {
        if (prompt.text.empty()) throw PreconditionError("prompt is empty");
        auto body = completion_request_body(cfg_, prompt).dump();
        auto start = std::chrono::steady_clock::now();
        auto j = post_with_retry(prefix_ + "/v1/completions", body, prompt.text.size());
        auto r = parse_completion_response(j);
        r.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start)
                           .count();
        return r;
    }

    EmbeddingVector embed(std::string_view input) override {
        if (input.empty()) throw PreconditionError("cannot embed empty text");
        nlohmann::json body{{"model", cfg_.embedding_model}, {"input", std::string(input)}};
        auto j = post_with_retry(prefix_ + "/v1/embeddings", body.dump(), input.size());
        EmbeddingVector v;
        v.values = j.at("data").at(0).at("embedding").get<std::vector<double>>();
        v.dim = v.values.size();
        v.provider_id = provider_id();
        if (v.dim == 0) throw BackendError(BackendError::Kind::provider, "provider returned an empty embedding");
        return v;
    }

    std::string provider_id() const override { return "remote:" + cfg_.base_url + ":" + cfg_.embedding_model; }

    std::size_t requests_sent() const { return sent_.load(); }

private:
    nlohmann::json post_with_retry(const std::string& path, const std::string& body, std::size_t prompt_bytes) {
        std::chrono::milliseconds backoff = cfg_.initial_backoff;
        for (int attempt = 0;; ++attempt) {
            std::chrono::milliseconds retry_after{0};
            try {
                return post_once(path, body, prompt_bytes, retry_after);
            } catch (const BackendError& e) {
                if (!e.retryable() || attempt >= cfg_.max_retries) throw;
            }
            sleep_(std::max(backoff, retry_after));
            backoff *= 2;
        }
    }

    nlohmann::json post_once(const std::string& path, const std::string& body, std::size_t prompt_bytes,
                             std::chrono::milliseconds& retry_after) {
        struct Slot {
            std::counting_semaphore<>& s;
            explicit Slot(std::counting_semaphore<>& sem) : s(sem) { s.acquire(); }
            ~Slot() { s.release(); }
        } slot(in_flight_);

        httplib::Client client(origin_);
        client.set_connection_timeout(cfg_.timeout);
        client.set_read_timeout(cfg_.timeout);
        client.set_write_timeout(cfg_.timeout);
        httplib::Headers headers;
        if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
        ++sent_;
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            auto err = res.error();
            if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout)
                throw BackendError(BackendError::Kind::timeout, "request timed out: " + httplib::to_string(err));
            throw BackendError(BackendError::Kind::transport, "transport failure: " + httplib::to_string(err));
        }
        if (res->status == 429) {
            if (res->has_header("Retry-After")) {
                try {
                    retry_after = std::chrono::seconds(std::stoi(res->get_header_value("Retry-After")));
                } catch (...) {
                }
            }
            throw BackendError(BackendError::Kind::rate_limit, "rate limited (429)", 429);
        }
        if (res->status >= 400) {
            std::string message = res->body;
            std::string code;
            try {
                auto ej = nlohmann::json::parse(res->body);
                if (ej.contains("error") && ej["error"].is_object()) {
                    message = ej["error"].value("message", message);
                    if (ej["error"].contains("code") && ej["error"]["code"].is_string())
                        code = ej["error"]["code"].get<std::string>();
                }
            } catch (const nlohmann::json::exception&) {
            }
            if (code == "context_length_exceeded" || text::contains_icase(message, "context length"))
                throw BackendError(BackendError::Kind::context_length,
                                   "context length exceeded: prompt is " + std::to_string(prompt_bytes) +
                                       " bytes (~" + std::to_string(prompt_bytes / 4) + " tokens); provider said: " +
                                       message,
                                   res->status);
            throw BackendError(BackendError::Kind::provider,
                               "provider error " + std::to_string(res->status) + ": " + message, res->status);
        }
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(BackendError::Kind::provider, std::string("malformed provider response: ") + e.what(),
                               res->status);
        }
    }

    RemoteConfig cfg_;
    Sleeper sleep_;
    std::counting_semaphore<> in_flight_;
    std::string origin_;
    std::string prefix_;
    std::atomic<std::size_t> sent_{0};
};

}  // namespace normsage
