#pragma once

// Discovery orchestration: dvr -> cor -> grd -> embed -> dedup insert.

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "normsage/extraction.hpp"
#include "normsage/ingest.hpp"
#include "normsage/llm_backend.hpp"
#include "normsage/normskb.hpp"
#include "normsage/templates.hpp"
#include "normsage/verification.hpp"

namespace normsage {

struct RunConfig {
    Thresholds thresholds;
    DiscoveryVariant variant = DiscoveryVariant::base;
    RelevanceMode relevance_mode = RelevanceMode::combined_mass;
    std::size_t max_requests = 10000;
    std::size_t parallelism = 1;
    std::uint64_t seed = 0;

    void validate() const {
        thresholds.validate();
        if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
        if (max_requests < 1) throw ConfigError("max_requests must be >= 1");
    }
};

struct StageTimes {
    double culture_ms = 0, discover_ms = 0, cor_ms = 0, grd_ms = 0, embed_ms = 0, insert_ms = 0;
};

struct RunReport {
    std::size_t chunks_processed = 0;
    std::size_t candidates = 0;
    std::size_t kept_after_cor = 0;
    std::size_t kept_after_grd = 0;
    std::size_t inserted = 0;
    std::size_t duplicates = 0;
    std::size_t errors = 0;
    std::size_t chunk_failures = 0;  // chunks whose discovery request failed
    bool budget_exhausted = false;
    std::vector<std::string> warnings;
    StageTimes wall_time;

    bool counters_consistent() const {
        return candidates >= kept_after_cor && kept_after_cor >= kept_after_grd &&
               kept_after_grd == inserted + duplicates;
    }
};

inline void to_json(nlohmann::json& j, const RunReport& r) {
    j = nlohmann::json{{"chunks_processed", r.chunks_processed},
                       {"candidates", r.candidates},
                       {"kept_after_cor", r.kept_after_cor},
                       {"kept_after_grd", r.kept_after_grd},
                       {"inserted", r.inserted},
                       {"duplicates", r.duplicates},
                       {"errors", r.errors},
                       {"chunk_failures", r.chunk_failures},
                       {"budget_exhausted", r.budget_exhausted},
                       {"warnings", r.warnings},
                       {"wall_time_ms",
                        {{"culture", r.wall_time.culture_ms},
                         {"discover", r.wall_time.discover_ms},
                         {"cor", r.wall_time.cor_ms},
                         {"grd", r.wall_time.grd_ms},
                         {"embed", r.wall_time.embed_ms},
                         {"insert", r.wall_time.insert_ms}}}};
}

/// Append-only JSON-lines run log for diagnostics and dropped candidates.
class RunLog {
public:
    RunLog() = default;
    explicit RunLog(std::filesystem::path path) : path_(std::move(path)) {}

    void write(nlohmann::json record) {
        std::lock_guard lock(mu_);
        if (path_) {
            std::ofstream out(*path_, std::ios::app | std::ios::binary);
            out << record.dump() << '\n';
        }
        records_.push_back(std::move(record));
    }

    void dropped(const CandidateNorm& c, std::string_view reason, const std::string& detail = {}) {
        write({{"kind", "dropped"},
               {"reason", reason},
               {"candidate_id", c.candidate_id},
               {"chunk_id", c.chunk_id},
               {"text", c.text},
               {"detail", detail}});
    }

    std::vector<nlohmann::json> records() const {
        std::lock_guard lock(mu_);
        return records_;
    }

private:
    std::optional<std::filesystem::path> path_;
    mutable std::mutex mu_;
    std::vector<nlohmann::json> records_;
};

struct PipelineContext {
    CompletionBackend& backend;
    EmbeddingBackend& embedder;
    const TemplateStore& templates;
    NormsKB& kb;
    RunLog& log;
};

namespace detail {

struct VerifiedCandidate {
    CandidateNorm candidate;
    CorrectnessCheck correctness;
    GroundingCheck grounding;
    EmbeddingVector embedding;
};

struct ChunkOutcome {
    std::size_t candidates = 0, kept_after_cor = 0, errors = 0;
    bool discovery_failed = false;
    std::vector<VerifiedCandidate> verified;
    bool budget_exhausted = false;
};

struct StageClock {
    std::atomic<std::int64_t> culture{0}, discover{0}, cor{0}, grd{0}, embed{0}, insert{0};
};

template <class F>
auto timed(std::atomic<std::int64_t>& acc, F&& f) {
    auto start = std::chrono::steady_clock::now();
    struct Add {
        std::atomic<std::int64_t>& acc;
        std::chrono::steady_clock::time_point start;
        ~Add() {
            acc += std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start)
                       .count();
        }
    } add{acc, start};
    return f();
}

inline bool is_budget(const BackendError& e) { return e.kind() == BackendError::Kind::budget_exhausted; }

inline ChunkOutcome process_chunk(const DialogueChunk& chunk, const SourceMeta& meta, DiscoveryVariant variant,
                                  const RunConfig& cfg, CompletionBackend& backend, PipelineContext& ctx,
                                  StageClock& clock) {
    ChunkOutcome out;
    ExtractionResult extracted;
    try {
        auto completion = timed(clock.discover, [&] {
            return backend.complete(ctx.templates.render_dvr(chunk, variant, meta));
        });
        extracted = parse_norms(completion.text, variant, chunk.chunk_id, ctx.templates.frame_fields());
    } catch (const BackendError& e) {
        if (is_budget(e)) {
            out.budget_exhausted = true;
            return out;
        }
        ++out.errors;
        out.discovery_failed = true;
        ctx.log.write({{"kind", "chunk_error"}, {"chunk_id", chunk.chunk_id}, {"detail", e.what()}});
        return out;
    }
    if (extracted.diagnostic)
        ctx.log.write({{"kind", "unparseable_completion"},
                       {"chunk_id", extracted.diagnostic->chunk_id},
                       {"raw", extracted.diagnostic->raw}});

    // collapse repeated norms within one completion
    std::set<std::string> seen;
    std::vector<CandidateNorm> unique;
    for (auto& c : extracted.candidates)
        if (seen.insert(c.text).second) unique.push_back(std::move(c));
    out.candidates = unique.size();

    for (const auto& cand : unique) {
        try {
            auto cor = timed(clock.cor, [&] { return parse_correctness(backend.complete(ctx.templates.render_cor(cand.text))); });
            if (!passes_correctness(cor, cfg.thresholds.theta)) {
                ctx.log.dropped(cand, cor.verdict == 1 ? "low_confidence" : "negative_verdict",
                                "confidence=" + std::to_string(cor.confidence));
                continue;
            }
            ++out.kept_after_cor;
            auto grd = timed(clock.grd, [&] {
                return parse_grounding(backend.complete(ctx.templates.render_grd(chunk, cand.text)), cfg.relevance_mode);
            });
            if (!passes_grounding(grd, cfg.thresholds.gamma)) {
                ctx.log.dropped(cand, "low_relevance", "relevance=" + std::to_string(grd.relevance));
                continue;
            }
            auto emb = timed(clock.embed, [&] { return ctx.embedder.embed(cand.text); });
            out.verified.push_back({cand, std::move(cor), std::move(grd), std::move(emb)});
        } catch (const VerdictError& e) {
            ++out.errors;
            ctx.log.dropped(cand, "unparseable", e.what());
        } catch (const BackendError& e) {
            if (is_budget(e)) {
                out.budget_exhausted = true;
                break;
            }
            ++out.errors;
            ctx.log.dropped(cand, "backend_error", e.what());
        }
    }
    return out;
}

}  // namespace detail

/// Extracts cultural indicators for a source when they are missing.
/// Returns false (and leaves meta unchanged) when extraction yields nothing.
inline bool extract_culture_indicators(SourceMeta& meta, CompletionBackend& backend, const TemplateStore& templates) {
    if (!meta.culture_indicators.empty()) return true;
    if (!meta.background) return false;
    auto completion = backend.complete(templates.render_culture_extract(meta));
    auto indicators = parse_culture_indicators(completion.text);
    if (indicators.empty()) return false;
    meta.culture_indicators = std::move(indicators);
    return true;
}

/// Runs discovery over one source. Individual candidate failures are logged
/// and skipped; an exhausted request budget ends the run with a truncated report.
inline RunReport discover(SourceMeta& meta, const std::vector<Utterance>& utterances, const RunConfig& cfg,
                          PipelineContext ctx) {
    cfg.validate();
    RunReport report;
    detail::StageClock clock;
    BudgetGuard backend(ctx.backend, cfg.max_requests);
    auto finish = [&] {
        auto ms = [](const std::atomic<std::int64_t>& us) { return static_cast<double>(us.load()) / 1000.0; };
        report.wall_time = {ms(clock.culture), ms(clock.discover), ms(clock.cor),
                            ms(clock.grd),     ms(clock.embed),    ms(clock.insert)};
        return report;
    };
    auto warn = [&](std::string message) {
        ctx.log.write({{"kind", "warning"}, {"source_id", meta.source_id}, {"detail", message}});
        report.warnings.push_back(std::move(message));
    };

    auto chunks = chunk_dialogue(utterances, cfg.thresholds.k, meta.source_id);
    if (chunks.empty()) return finish();

    DiscoveryVariant variant = cfg.variant;
    if (variant == DiscoveryVariant::culture && meta.culture_indicators.empty()) {
        bool ok = false;
        try {
            ok = detail::timed(clock.culture, [&] { return extract_culture_indicators(meta, backend, ctx.templates); });
        } catch (const BackendError& e) {
            if (detail::is_budget(e)) {
                report.budget_exhausted = true;
                return finish();
            }
            warn(std::string("cultural indicator extraction failed: ") + e.what());
        }
        if (!ok) {
            warn("no cultural indicators for source '" + meta.source_id + "'; using the base variant");
            variant = DiscoveryVariant::base;
        }
    }

    for (std::size_t begin = 0; begin < chunks.size() && !report.budget_exhausted; begin += cfg.parallelism) {
        auto end = std::min(chunks.size(), begin + cfg.parallelism);
        std::vector<detail::ChunkOutcome> outcomes(end - begin);
        if (end - begin == 1) {
            outcomes[0] = detail::process_chunk(chunks[begin], meta, variant, cfg, backend, ctx, clock);
        } else {
            std::vector<std::future<detail::ChunkOutcome>> futures;
            for (std::size_t i = begin; i < end; ++i)
                futures.push_back(std::async(std::launch::async, [&, i] {
                    return detail::process_chunk(chunks[i], meta, variant, cfg, backend, ctx, clock);
                }));
            for (std::size_t i = 0; i < futures.size(); ++i) outcomes[i] = futures[i].get();
        }

        // insertion is serialized in chunk order so runs are reproducible
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            auto& o = outcomes[i];
            const auto& chunk = chunks[begin + i];
            ++report.chunks_processed;
            report.candidates += o.candidates;
            report.kept_after_cor += o.kept_after_cor;
            report.errors += o.errors;
            if (o.discovery_failed) ++report.chunk_failures;
            report.budget_exhausted = report.budget_exhausted || o.budget_exhausted;
            if (!o.verified.empty()) detail::timed(clock.insert, [&] { ctx.kb.add_chunk(chunk); return 0; });
            for (auto& v : o.verified) {
                ++report.kept_after_grd;
                NormRecord rec;
                rec.text = v.candidate.text;
                rec.embedding = std::move(v.embedding);
                rec.correctness = std::move(v.correctness);
                rec.groundings.push_back({std::move(v.grounding), chunk.chunk_id});
                rec.provenance = {chunk.chunk_id};
                rec.culture_tag = v.candidate.culture_tag;
                try {
                    auto res = detail::timed(clock.insert, [&] { return ctx.kb.insert(std::move(rec), cfg.thresholds.sigma); });
                    if (res.kind == InsertOutcome::Kind::inserted) ++report.inserted;
                    else ++report.duplicates;
                } catch (const Error& e) {
                    // keep the counter chain intact: an uninsertable norm is not "kept"
                    --report.kept_after_grd;
                    ++report.errors;
                    ctx.log.dropped(v.candidate, "insert_error", e.what());
                }
            }
        }
    }
    return finish();
}

/// One grounding round-trip for an arbitrary norm; does not touch the KB.
inline GroundingCheck ground_norm(const DialogueChunk& chunk, std::string_view norm_text,
                                  const std::optional<std::string>& speaker, CompletionBackend& backend,
                                  const TemplateStore& templates,
                                  RelevanceMode mode = RelevanceMode::combined_mass) {
    auto check = parse_grounding(backend.complete(templates.render_grd(chunk, norm_text, speaker)), mode);
    check.speaker = speaker;
    return check;
}

}  // namespace normsage
