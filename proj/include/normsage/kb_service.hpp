#pragma once

// HTTP+JSON facade over the knowledge base and on-the-fly grounding.

#include <httplib.h>
#include <json.hpp>

#include <optional>
#include <string>

#include "normsage/evalharness.hpp"
#include "normsage/normskb.hpp"
#include "normsage/pipeline.hpp"

namespace normsage {

enum class ApiErrorCode { not_found, bad_request, backend_unavailable, conflict, unauthorized };

inline int http_status(ApiErrorCode code) {
    switch (code) {
        case ApiErrorCode::not_found: return 404;
        case ApiErrorCode::bad_request: return 400;
        case ApiErrorCode::backend_unavailable: return 502;
        case ApiErrorCode::conflict: return 409;
        case ApiErrorCode::unauthorized: return 401;
    }
    return 500;
}

inline std::string_view to_string(ApiErrorCode code) {
    switch (code) {
        case ApiErrorCode::not_found: return "not_found";
        case ApiErrorCode::bad_request: return "bad_request";
        case ApiErrorCode::backend_unavailable: return "backend_unavailable";
        case ApiErrorCode::conflict: return "conflict";
        case ApiErrorCode::unauthorized: return "unauthorized";
    }
    return "?";
}

struct ApiError {
    ApiErrorCode code;
    std::string message;
};

/// Response schema served at /schema; each entry lists the required top-level
/// fields of a 2xx payload and their JSON types.
inline const nlohmann::json& service_schema() {
    static const nlohmann::json schema = nlohmann::json::parse(R"({
  "version": 1,
  "components": {
    "NormRecord": {"norm_id": "string", "text": "string", "embedding": "object", "correctness": "object",
                   "groundings": "array", "provenance": "array", "culture_tag": "string|null",
                   "review": "object", "created_at": "string"},
    "GroundingCheck": {"verdict": "integer", "relevance": "number", "explanation": "string",
                       "speaker": "string|null", "distribution": "object", "raw": "object"},
    "ContrastivePair": {"norm_a": "string", "norm_b": "string", "relation": "string",
                        "relevance": "number", "explanation": "string"},
    "ApiError": {"error": "object"}
  },
  "endpoints": {
    "GET /norms": {"items": "array<NormRecord>", "total": "integer", "page": "integer", "page_size": "integer"},
    "GET /norms/{id}": {"$ref": "NormRecord", "provenance_chunks": "array"},
    "POST /norms/{id}/review": {"$ref": "NormRecord"},
    "POST /ground": {"$ref": "GroundingCheck"},
    "GET /pairs": {"items": "array<ContrastivePair>"},
    "GET /stats": {"total": "integer", "by_review": "object", "by_culture": "object", "dedup_audit_ok": "boolean"}
  }
})");
    return schema;
}

/// KB records as served: embedding values are elided (provider and dim remain).
inline nlohmann::json record_view(const NormRecord& r) {
    nlohmann::json j = r;
    j["embedding"] = {{"provider_id", r.embedding.provider_id}, {"dim", r.embedding.dim}};
    return j;
}

class KbService {
public:
    KbService(NormsKB& kb, CompletionBackend& backend, const TemplateStore& templates, Thresholds thresholds = {},
              std::optional<std::string> token = std::nullopt)
        : kb_(kb), backend_(backend), templates_(templates), thresholds_(thresholds), token_(std::move(token)) {
        routes();
    }

    /// Token from NORMSAGE_SERVICE_TOKEN, when set.
    static std::optional<std::string> token_from_env() {
        const char* t = std::getenv("NORMSAGE_SERVICE_TOKEN");
        if (!t || !*t) return std::nullopt;
        return std::string(t);
    }

    bool listen(const std::string& host, int port) { return server_.listen(host, port); }
    int bind_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
    bool listen_after_bind() { return server_.listen_after_bind(); }
    void stop() { server_.stop(); }
    void wait_until_ready() { server_.wait_until_ready(); }

private:
    static void send(httplib::Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void fail(httplib::Response& res, const ApiError& e) {
        send(res, http_status(e.code), {{"error", {{"code", to_string(e.code)}, {"message", e.message}}}});
    }

    template <class Handler>
    httplib::Server::Handler guarded(Handler h) {
        return [this, h](const httplib::Request& req, httplib::Response& res) {
            if (token_ && req.get_header_value("Authorization") != "Bearer " + *token_)
                return fail(res, {ApiErrorCode::unauthorized, "missing or invalid bearer token"});
            try {
                h(req, res);
            } catch (const UnknownNormError& e) {
                fail(res, {ApiErrorCode::not_found, e.what()});
            } catch (const ReviewTransitionError& e) {
                fail(res, {ApiErrorCode::conflict, e.what()});
            } catch (const BackendError& e) {
                fail(res, {ApiErrorCode::backend_unavailable, e.what()});
            } catch (const VerdictError& e) {
                fail(res, {ApiErrorCode::backend_unavailable, e.what()});
            } catch (const nlohmann::json::exception& e) {
                fail(res, {ApiErrorCode::bad_request, std::string("malformed request: ") + e.what()});
            } catch (const PreconditionError& e) {
                fail(res, {ApiErrorCode::bad_request, e.what()});
            } catch (const std::invalid_argument& e) {
                fail(res, {ApiErrorCode::bad_request, e.what()});
            } catch (const std::out_of_range& e) {
                fail(res, {ApiErrorCode::bad_request, e.what()});
            }
        };
    }

    static std::optional<std::string> param(const httplib::Request& req, const char* name) {
        if (!req.has_param(name)) return std::nullopt;
        auto v = req.get_param_value(name);
        if (v.empty()) return std::nullopt;
        return v;
    }

    static std::size_t positive_param(const httplib::Request& req, const char* name, std::size_t fallback) {
        auto v = param(req, name);
        if (!v) return fallback;
        long long n = std::stoll(*v);
        if (n < 1) throw PreconditionError(std::string(name) + " must be >= 1");
        return static_cast<std::size_t>(n);
    }

    void routes() {
        server_.Get("/schema", [](const httplib::Request&, httplib::Response& res) { send(res, 200, service_schema()); });

        server_.Get("/norms", guarded([this](const httplib::Request& req, httplib::Response& res) {
            QueryFilter f;
            f.culture_tag = param(req, "culture");
            if (auto r = param(req, "review")) {
                f.review = parse_review_status(*r);
                if (!f.review) throw PreconditionError("unknown review status '" + *r + "'");
            }
            f.text_substring = param(req, "q");
            if (auto m = param(req, "min_confidence")) f.min_confidence = std::stod(*m);
            f.source_id = param(req, "source");
            Page page{positive_param(req, "page", 1), std::min<std::size_t>(positive_param(req, "page_size", 20), 100)};
            auto result = kb_.query(f, page);
            nlohmann::json items = nlohmann::json::array();
            for (const auto& r : result.items) items.push_back(record_view(r));
            send(res, 200, {{"items", items}, {"total", result.total}, {"page", page.number}, {"page_size", page.size}});
        }));

        server_.Get(R"(/norms/([0-9a-f]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto id = req.matches[1].str();
            auto r = kb_.get(id);
            if (!r) throw UnknownNormError(id);
            auto j = record_view(*r);
            nlohmann::json chunks = nlohmann::json::array();
            for (const auto& cid : r->provenance)
                if (auto c = kb_.chunk(cid)) chunks.push_back(*c);
            j["provenance_chunks"] = chunks;
            send(res, 200, j);
        }));

        server_.Post(R"(/norms/([0-9a-f]+)/review)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto id = req.matches[1].str();
            auto body = nlohmann::json::parse(req.body);
            auto status = parse_review_status(body.at("status").get<std::string>());
            if (!status) throw PreconditionError("status must be accepted or rejected");
            auto reviewer = body.at("reviewer").get<std::string>();
            if (text::trim(reviewer).empty()) throw PreconditionError("reviewer is empty");
            if (!kb_.get(id)) throw UnknownNormError(id);
            send(res, 200, record_view(kb_.set_review(id, *status, reviewer)));
        }));

        server_.Post("/ground", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto body = nlohmann::json::parse(req.body);
            std::string dialogue;
            for (const auto& l : body.at("dialogue_lines")) dialogue += l.get<std::string>() + "\n";
            auto utts = parse_transcript(dialogue, TranscriptFormat::plain, "api");
            if (utts.empty()) throw PreconditionError("dialogue_lines is empty");
            auto chunk = chunk_dialogue(utts, utts.size(), "api").front();
            auto norm = body.at("norm").get<std::string>();
            std::optional<std::string> speaker;
            if (body.contains("speaker") && !body["speaker"].is_null()) speaker = body["speaker"].get<std::string>();
            send(res, 200, ground_norm(chunk, norm, speaker, backend_, templates_));
        }));

        server_.Get("/pairs", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto a = param(req, "culture_a");
            auto b = param(req, "culture_b");
            if (!a || !b) throw PreconditionError("culture_a and culture_b are required");
            for (const auto& c : {*a, *b})
                if (kb_.query(QueryFilter{c, std::nullopt, std::nullopt, std::nullopt, std::nullopt}, Page{1, 1}).total == 0)
                    return fail(res, {ApiErrorCode::not_found, "no norms tagged with culture '" + c + "'"});
            auto pairs = find_contrastive_pairs(kb_, *a, *b, backend_, templates_, thresholds_.gamma);
            send(res, 200, {{"items", pairs}});
        }));

        server_.Get("/stats", guarded([this](const httplib::Request&, httplib::Response& res) {
            auto s = kb_.stats(thresholds_.sigma);
            send(res, 200,
                 {{"total", s.total}, {"by_review", s.by_review}, {"by_culture", s.by_culture},
                  {"dedup_audit_ok", s.dedup_audit_ok}});
        }));
    }

    NormsKB& kb_;
    CompletionBackend& backend_;
    const TemplateStore& templates_;
    Thresholds thresholds_;
    std::optional<std::string> token_;
    httplib::Server server_;
};

}  // namespace normsage
