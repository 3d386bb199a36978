#pragma once

// Completion/embedding provider interfaces plus the in-process providers:
// a scripted completion backend for tests and a hashed-trigram embedder.

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "normsage/common.hpp"
#include "normsage/templates.hpp"

namespace normsage {

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
    std::map<std::string, double> top_alternatives;

    bool operator==(const TokenLogprob&) const = default;
};

struct CompletionResult {
    std::string text;
    std::vector<TokenLogprob> tokens;
    std::string model_id;
    std::int64_t latency_ms = 0;

    bool operator==(const CompletionResult&) const = default;
};

struct EmbeddingVector {
    std::vector<double> values;
    std::size_t dim = 0;
    std::string provider_id;

    bool operator==(const EmbeddingVector&) const = default;
};

inline void to_json(nlohmann::json& j, const TokenLogprob& t) {
    j = nlohmann::json{{"token", t.token}, {"logprob", t.logprob}, {"top_alternatives", t.top_alternatives}};
}
// JSON has no infinities; a zero-probability logprob is written as null.
inline double logprob_from_json(const nlohmann::json& v) {
    return v.is_null() ? -std::numeric_limits<double>::infinity() : v.get<double>();
}
inline void from_json(const nlohmann::json& j, TokenLogprob& t) {
    t.token = j.at("token").get<std::string>();
    t.logprob = logprob_from_json(j.at("logprob"));
    t.top_alternatives.clear();
    if (j.contains("top_alternatives"))
        for (const auto& [alt, v] : j["top_alternatives"].items()) t.top_alternatives[alt] = logprob_from_json(v);
}
inline void to_json(nlohmann::json& j, const CompletionResult& r) {
    j = nlohmann::json{{"text", r.text}, {"tokens", r.tokens}, {"model_id", r.model_id}, {"latency_ms", r.latency_ms}};
}
inline void from_json(const nlohmann::json& j, CompletionResult& r) {
    r.text = j.at("text").get<std::string>();
    r.tokens = j.value("tokens", std::vector<TokenLogprob>{});
    r.model_id = j.value("model_id", std::string{});
    r.latency_ms = j.value("latency_ms", std::int64_t{0});
}
inline void to_json(nlohmann::json& j, const EmbeddingVector& e) {
    j = nlohmann::json{{"values", e.values}, {"dim", e.dim}, {"provider_id", e.provider_id}};
}
inline void from_json(const nlohmann::json& j, EmbeddingVector& e) {
    e.values = j.at("values").get<std::vector<double>>();
    e.dim = j.at("dim").get<std::size_t>();
    e.provider_id = j.at("provider_id").get<std::string>();
    if (e.values.size() != e.dim) throw Error("embedding dim does not match its values");
}

class BackendError : public Error {
public:
    enum class Kind { transport, provider, timeout, rate_limit, context_length, unscripted, budget_exhausted };

    BackendError(Kind kind, const std::string& what, int status = 0)
        : Error(what), kind_(kind), status_(status) {}

    Kind kind() const noexcept { return kind_; }
    int status() const noexcept { return status_; }
    bool retryable() const noexcept {
        return kind_ == Kind::transport || kind_ == Kind::timeout || kind_ == Kind::rate_limit ||
               (kind_ == Kind::provider && status_ >= 500);
    }

private:
    Kind kind_;
    int status_;
};

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual CompletionResult complete(const RenderedPrompt& prompt) = 0;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual EmbeddingVector embed(std::string_view text) = 0;
    virtual std::string provider_id() const = 0;
};

inline std::string prompt_key(std::string_view prompt_text) { return sha256_hex(prompt_text); }

/// Replays canned completions keyed by SHA-256 of the prompt text. Prompts are
/// captured in call order so tests can assert on what was sent.
class ScriptedBackend : public CompletionBackend {
public:
    ScriptedBackend() = default;
    ScriptedBackend(ScriptedBackend&& other) noexcept
        : responses_(std::move(other.responses_)), captured_(std::move(other.captured_)) {}
    ScriptedBackend& operator=(ScriptedBackend&& other) noexcept {
        responses_ = std::move(other.responses_);
        captured_ = std::move(other.captured_);
        return *this;
    }

    /// Loads a fixture file: a JSON object mapping prompt SHA-256 hex to
    /// {text, tokens[]} records.
    static ScriptedBackend from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read scripted fixture " + path.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("scripted fixture " + path.string() + ": " + e.what());
        }
        return from_json_object(j);
    }

    static ScriptedBackend from_json_object(const nlohmann::json& j) {
        if (!j.is_object()) throw ConfigError("scripted fixture must be an object keyed by prompt hash");
        ScriptedBackend b;
        for (const auto& [key, rec] : j.items()) {
            CompletionResult r;
            r.text = rec.at("text").get<std::string>();
            r.tokens = rec.value("tokens", std::vector<TokenLogprob>{});
            r.model_id = rec.value("model_id", std::string("scripted"));
            b.add_by_key(key, std::move(r));
        }
        return b;
    }

    void add(std::string_view prompt_text, CompletionResult result) {
        add_by_key(prompt_key(prompt_text), std::move(result));
    }

    void add_by_key(const std::string& key, CompletionResult result) {
        if (result.model_id.empty()) result.model_id = "scripted";
        if (!responses_.emplace(key, std::move(result)).second)
            throw ConfigError("scripted prompt registered twice: " + key);
    }

    nlohmann::json to_json_object() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [key, r] : responses_) j[key] = {{"text", r.text}, {"tokens", r.tokens}};
        return j;
    }

    CompletionResult complete(const RenderedPrompt& prompt) override {
        {
            std::lock_guard lock(capture_mu_);
            captured_.push_back(prompt.text);
        }
        auto it = responses_.find(prompt_key(prompt.text));
        if (it == responses_.end())
            throw BackendError(BackendError::Kind::unscripted,
                               "unscripted prompt (sha256 " + prompt_key(prompt.text) + ")");
        return it->second;
    }

    std::vector<std::string> captured() const {
        std::lock_guard lock(capture_mu_);
        return captured_;
    }

    void clear_captured() {
        std::lock_guard lock(capture_mu_);
        captured_.clear();
    }

    std::size_t size() const { return responses_.size(); }

private:
    std::unordered_map<std::string, CompletionResult> responses_;
    mutable std::mutex capture_mu_;
    std::vector<std::string> captured_;
};

/// Deterministic local embedder: bag of hashed character trigrams,
/// L2-normalized. Not semantically faithful.
///
/// Hashing: lowercase ASCII letters, pad the text with one space on each
/// side, take every byte trigram, bucket = FNV-1a-64(trigram) mod dim,
/// add 1.0 to the bucket, then divide by the Euclidean norm.
class HashedTrigramEmbedder : public EmbeddingBackend {
public:
    explicit HashedTrigramEmbedder(std::size_t dim = 256) : dim_(dim) {
        if (dim_ == 0) throw ConfigError("embedding dim must be positive");
    }

    static std::uint64_t fnv1a64(std::string_view s) {
        std::uint64_t h = 14695981039346656037ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return h;
    }

    EmbeddingVector embed(std::string_view input) override {
        if (input.empty()) throw PreconditionError("cannot embed empty text");
        std::string padded = " " + text::to_lower(input) + " ";
        EmbeddingVector v{std::vector<double>(dim_, 0.0), dim_, provider_id()};
        for (std::size_t i = 0; i + 3 <= padded.size(); ++i)
            v.values[fnv1a64(std::string_view(padded).substr(i, 3)) % dim_] += 1.0;
        double norm = 0.0;
        for (double x : v.values) norm += x * x;
        norm = std::sqrt(norm);
        for (double& x : v.values) x /= norm;
        return v;
    }

    std::string provider_id() const override { return "local-trigram-" + std::to_string(dim_); }

private:
    std::size_t dim_;
};

/// Caps the number of completion requests per run.
class BudgetGuard : public CompletionBackend {
public:
    BudgetGuard(CompletionBackend& inner, std::size_t max_requests) : inner_(inner), max_(max_requests) {}

    CompletionResult complete(const RenderedPrompt& prompt) override {
        if (used_.fetch_add(1) >= max_) {
            used_.fetch_sub(1);
            throw BackendError(BackendError::Kind::budget_exhausted,
                               "request budget of " + std::to_string(max_) + " exhausted");
        }
        return inner_.complete(prompt);
    }

    std::size_t used() const { return used_.load(); }

private:
    CompletionBackend& inner_;
    std::size_t max_;
    std::atomic<std::size_t> used_{0};
};

}  // namespace normsage
