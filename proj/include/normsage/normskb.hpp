#pragma once

// Deduplicated norm knowledge base with provenance, review workflow and a
// line-oriented persistent format (records file + audit file alongside).

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "normsage/common.hpp"
#include "normsage/ingest.hpp"
#include "normsage/llm_backend.hpp"
#include "normsage/templates.hpp"
#include "normsage/verification.hpp"

namespace normsage {

inline constexpr int kSchemaVersion = 1;

class StorageError : public Error {
public:
    using Error::Error;
};

class SchemaVersionError : public StorageError {
public:
    using StorageError::StorageError;
};

class UnknownNormError : public Error {
public:
    explicit UnknownNormError(const std::string& id) : Error("unknown norm_id '" + id + "'") {}
};

class ReviewTransitionError : public Error {
public:
    using Error::Error;
};

enum class ReviewStatus { pending, accepted, rejected };

inline std::string_view to_string(ReviewStatus s) {
    switch (s) {
        case ReviewStatus::pending: return "pending";
        case ReviewStatus::accepted: return "accepted";
        case ReviewStatus::rejected: return "rejected";
    }
    return "?";
}

inline std::optional<ReviewStatus> parse_review_status(std::string_view s) {
    if (s == "pending") return ReviewStatus::pending;
    if (s == "accepted") return ReviewStatus::accepted;
    if (s == "rejected") return ReviewStatus::rejected;
    return std::nullopt;
}

struct Review {
    ReviewStatus status = ReviewStatus::pending;
    std::optional<std::string> reviewer;
    std::optional<std::string> timestamp;

    bool operator==(const Review&) const = default;
};

struct Grounding {
    GroundingCheck check;
    std::string chunk_id;

    bool operator==(const Grounding&) const = default;
};

struct NormRecord {
    std::string norm_id;
    std::string text;
    EmbeddingVector embedding;
    CorrectnessCheck correctness;
    std::vector<Grounding> groundings;
    std::vector<std::string> provenance;
    std::optional<std::string> culture_tag;
    Review review;
    std::string created_at;

    bool operator==(const NormRecord&) const = default;
};

struct AuditEntry {
    std::size_t seq = 0;
    std::string norm_id;
    ReviewStatus from = ReviewStatus::pending;
    ReviewStatus to = ReviewStatus::pending;
    std::string reviewer;
    std::string timestamp;

    bool operator==(const AuditEntry&) const = default;
};

struct ContrastivePair {
    std::string norm_a;
    std::string norm_b;
    std::string relation = "contradiction";
    double relevance = 0.0;
    std::string explanation;

    bool operator==(const ContrastivePair&) const = default;
};

inline std::string norm_id_for(std::string_view text) { return short_id(text); }

// --- serialization ---------------------------------------------------------

inline void to_json(nlohmann::json& j, const Review& r) {
    j = nlohmann::json{{"status", to_string(r.status)}};
    j["reviewer"] = r.reviewer ? nlohmann::json(*r.reviewer) : nlohmann::json(nullptr);
    j["timestamp"] = r.timestamp ? nlohmann::json(*r.timestamp) : nlohmann::json(nullptr);
}
inline void from_json(const nlohmann::json& j, Review& r) {
    auto s = parse_review_status(j.at("status").get<std::string>());
    if (!s) throw StorageError("bad review status " + j.at("status").dump());
    r.status = *s;
    r.reviewer = j.contains("reviewer") && !j["reviewer"].is_null() ? std::optional(j["reviewer"].get<std::string>())
                                                                    : std::nullopt;
    r.timestamp = j.contains("timestamp") && !j["timestamp"].is_null()
                      ? std::optional(j["timestamp"].get<std::string>())
                      : std::nullopt;
}
inline void to_json(nlohmann::json& j, const Grounding& g) {
    j = g.check;
    j["chunk_id"] = g.chunk_id;
}
inline void from_json(const nlohmann::json& j, Grounding& g) {
    g.check = j.get<GroundingCheck>();
    g.chunk_id = j.at("chunk_id").get<std::string>();
}
inline void to_json(nlohmann::json& j, const NormRecord& r) {
    j = nlohmann::json{{"norm_id", r.norm_id},         {"text", r.text},       {"embedding", r.embedding},
                       {"correctness", r.correctness}, {"groundings", r.groundings}, {"provenance", r.provenance},
                       {"review", r.review},           {"created_at", r.created_at}};
    j["culture_tag"] = r.culture_tag ? nlohmann::json(*r.culture_tag) : nlohmann::json(nullptr);
}
inline void from_json(const nlohmann::json& j, NormRecord& r) {
    r.norm_id = j.at("norm_id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.embedding = j.at("embedding").get<EmbeddingVector>();
    r.correctness = j.at("correctness").get<CorrectnessCheck>();
    r.groundings = j.at("groundings").get<std::vector<Grounding>>();
    r.provenance = j.at("provenance").get<std::vector<std::string>>();
    r.review = j.at("review").get<Review>();
    r.created_at = j.at("created_at").get<std::string>();
    r.culture_tag = j.contains("culture_tag") && !j["culture_tag"].is_null()
                        ? std::optional(j["culture_tag"].get<std::string>())
                        : std::nullopt;
}
inline void to_json(nlohmann::json& j, const AuditEntry& a) {
    j = nlohmann::json{{"seq", a.seq},           {"norm_id", a.norm_id},   {"from", to_string(a.from)},
                       {"to", to_string(a.to)}, {"reviewer", a.reviewer}, {"timestamp", a.timestamp}};
}
inline void from_json(const nlohmann::json& j, AuditEntry& a) {
    a.seq = j.at("seq").get<std::size_t>();
    a.norm_id = j.at("norm_id").get<std::string>();
    auto from = parse_review_status(j.at("from").get<std::string>());
    auto to = parse_review_status(j.at("to").get<std::string>());
    if (!from || !to) throw StorageError("bad audit status");
    a.from = *from;
    a.to = *to;
    a.reviewer = j.at("reviewer").get<std::string>();
    a.timestamp = j.at("timestamp").get<std::string>();
}
inline void to_json(nlohmann::json& j, const ContrastivePair& p) {
    j = nlohmann::json{{"norm_a", p.norm_a},
                       {"norm_b", p.norm_b},
                       {"relation", p.relation},
                       {"relevance", p.relevance},
                       {"explanation", p.explanation}};
}

// --- similarity ------------------------------------------------------------

/// Cosine similarity; 0 when either vector is all-zero.
inline double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.provider_id != v.provider_id)
        throw Error("cannot compare embeddings from '" + u.provider_id + "' and '" + v.provider_id + "'");
    if (u.dim != v.dim || u.values.size() != v.values.size())
        throw Error("embedding dimension mismatch: " + std::to_string(u.dim) + " vs " + std::to_string(v.dim));
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.values.size(); ++i) {
        dot += u.values[i] * v.values[i];
        nu += u.values[i] * u.values[i];
        nv += v.values[i] * v.values[i];
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

struct DuplicateHit {
    std::string norm_id;
    double similarity = 0.0;
};

struct InsertOutcome {
    enum class Kind { inserted, duplicate_of };
    Kind kind = Kind::inserted;
    std::string norm_id;
    double similarity = 0.0;
};

struct QueryFilter {
    std::optional<std::string> culture_tag;
    std::optional<ReviewStatus> review;
    std::optional<std::string> text_substring;
    std::optional<double> min_confidence;
    std::optional<std::string> source_id;
};

struct Page {
    std::size_t number = 1;  // 1-based
    std::size_t size = 20;
};

struct QueryResult {
    std::vector<NormRecord> items;
    std::size_t total = 0;
};

struct KbStats {
    std::size_t total = 0;
    std::map<std::string, std::size_t> by_review;
    std::map<std::string, std::size_t> by_culture;
    bool dedup_audit_ok = true;
};

struct DedupViolation {
    std::string a;
    std::string b;
    double similarity = 0.0;
};

/// Single-writer, multi-reader knowledge base. With a journal attached every
/// mutation is appended to the records/audit files as one complete line.
class NormsKB {
public:
    explicit NormsKB(Clock clock = system_clock()) : clock_(std::move(clock)) {}

    NormsKB(const NormsKB& other) {
        std::shared_lock lock(other.mu_);
        copy_state(other);
    }
    NormsKB& operator=(const NormsKB& other) {
        if (this != &other) {
            std::scoped_lock lock(mu_, other.mu_);
            copy_state(other);
        }
        return *this;
    }

    bool operator==(const NormsKB& other) const {
        std::shared_lock a(mu_);
        std::shared_lock b(other.mu_);
        return records_ == other.records_ && chunks_ == other.chunks_ && audit_ == other.audit_;
    }

    static std::filesystem::path audit_path_for(const std::filesystem::path& path) {
        auto p = path;
        p += ".audit";
        return p;
    }

    /// Reads a KB file (and its audit file, if present). Later lines for the
    /// same norm_id or chunk_id supersede earlier ones.
    static NormsKB load(const std::filesystem::path& path, Clock clock = system_clock()) {
        NormsKB kb(std::move(clock));
        std::ifstream in(path, std::ios::binary);
        if (!in) throw StorageError("cannot read KB file " + path.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (text::trim(line).empty()) continue;
            auto j = parse_line(line, path, line_no);
            auto kind = j.value("kind", std::string("norm"));
            try {
                if (kind == "norm") {
                    auto r = j.get<NormRecord>();
                    kb.index_text(r);
                    kb.records_[r.norm_id] = std::move(r);
                } else if (kind == "chunk") {
                    auto c = j.at("chunk").get<DialogueChunk>();
                    kb.chunks_[c.chunk_id] = std::move(c);
                } else {
                    throw StorageError("unknown record kind '" + kind + "'");
                }
            } catch (const nlohmann::json::exception& e) {
                throw StorageError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
        auto audit = audit_path_for(path);
        if (std::filesystem::exists(audit)) {
            std::ifstream ain(audit, std::ios::binary);
            line_no = 0;
            while (std::getline(ain, line)) {
                ++line_no;
                if (text::trim(line).empty()) continue;
                auto j = parse_line(line, audit, line_no);
                try {
                    kb.audit_.push_back(j.get<AuditEntry>());
                } catch (const nlohmann::json::exception& e) {
                    throw StorageError(audit.string() + ":" + std::to_string(line_no) + ": " + e.what());
                }
            }
        }
        for (const auto& [id, r] : kb.records_)
            if (!kb.provider_) kb.provider_ = r.embedding.provider_id;
        return kb;
    }

    /// Loads `path` if it exists and journals all further mutations to it.
    static NormsKB open(const std::filesystem::path& path, Clock clock = system_clock()) {
        NormsKB kb = std::filesystem::exists(path) ? load(path, clock) : NormsKB(clock);
        kb.journal_ = path;
        return kb;
    }

    /// Writes a compacted snapshot atomically (temp file + rename).
    void save(const std::filesystem::path& path) const {
        std::shared_lock lock(mu_);
        write_atomically(path, snapshot_locked());
        std::string audit;
        for (const auto& a : audit_) audit += line_for(a) + "\n";
        write_atomically(audit_path_for(path), audit);
    }

    /// Rewrites the attached journal as a compacted snapshot.
    void compact() const {
        if (!journal_) throw StorageError("no journal attached");
        save(*journal_);
    }

    const std::optional<std::filesystem::path>& journal() const { return journal_; }

    std::size_t size() const {
        std::shared_lock lock(mu_);
        return records_.size();
    }

    std::optional<NormRecord> get(const std::string& norm_id) const {
        std::shared_lock lock(mu_);
        auto it = records_.find(norm_id);
        if (it == records_.end()) return std::nullopt;
        return it->second;
    }

    void add_chunk(const DialogueChunk& chunk) {
        std::unique_lock lock(mu_);
        auto it = chunks_.find(chunk.chunk_id);
        if (it != chunks_.end() && it->second == chunk) return;
        chunks_[chunk.chunk_id] = chunk;
        append_journal(line_for(chunk), std::nullopt);
    }

    std::optional<DialogueChunk> chunk(const std::string& chunk_id) const {
        std::shared_lock lock(mu_);
        auto it = chunks_.find(chunk_id);
        if (it == chunks_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<DuplicateHit> find_duplicate(const std::string& text, const EmbeddingVector& embedding,
                                               double sigma) const {
        std::shared_lock lock(mu_);
        return find_duplicate_locked(text, embedding, sigma);
    }

    /// Atomic check-then-insert. On duplicate, only the existing record's
    /// provenance changes (set union with the candidate's chunk ids).
    InsertOutcome insert(NormRecord record, double sigma) {
        std::unique_lock lock(mu_);
        if (record.provenance.empty()) throw PreconditionError("record has no provenance");
        if (provider_ && record.embedding.provider_id != *provider_)
            throw Error("embedding provider '" + record.embedding.provider_id + "' differs from KB provider '" +
                        *provider_ + "'");
        if (auto hit = find_duplicate_locked(record.text, record.embedding, sigma)) {
            auto& existing = records_.at(hit->norm_id);
            bool grew = false;
            for (const auto& c : record.provenance)
                if (std::find(existing.provenance.begin(), existing.provenance.end(), c) == existing.provenance.end()) {
                    existing.provenance.push_back(c);
                    grew = true;
                }
            if (grew) append_journal(line_for(existing), std::nullopt);
            return {InsertOutcome::Kind::duplicate_of, hit->norm_id, hit->similarity};
        }
        if (record.norm_id.empty()) record.norm_id = norm_id_for(record.text);
        if (records_.count(record.norm_id))
            throw Error("norm_id collision for '" + record.text + "'");
        if (record.created_at.empty()) record.created_at = iso8601(clock_());
        if (!provider_) provider_ = record.embedding.provider_id;
        index_text(record);
        auto id = record.norm_id;
        append_journal(line_for(record), std::nullopt);
        records_.emplace(id, std::move(record));
        return {InsertOutcome::Kind::inserted, id, 1.0};
    }

    QueryResult query(const QueryFilter& filter, Page page = {}) const {
        std::shared_lock lock(mu_);
        std::vector<const NormRecord*> hits;
        for (const auto& [id, r] : records_) {
            if (filter.culture_tag && (!r.culture_tag || text::to_lower(*r.culture_tag) != text::to_lower(*filter.culture_tag)))
                continue;
            if (filter.review && r.review.status != *filter.review) continue;
            if (filter.text_substring && !text::contains_icase(r.text, *filter.text_substring)) continue;
            if (filter.min_confidence && r.correctness.confidence < *filter.min_confidence) continue;
            if (filter.source_id) {
                auto prefix = *filter.source_id + "#";
                bool any = std::any_of(r.provenance.begin(), r.provenance.end(),
                                       [&](const std::string& c) { return c.starts_with(prefix); });
                if (!any) continue;
            }
            hits.push_back(&r);
        }
        std::sort(hits.begin(), hits.end(), [](const NormRecord* a, const NormRecord* b) {
            return std::tie(a->created_at, a->norm_id) < std::tie(b->created_at, b->norm_id);
        });
        QueryResult out;
        out.total = hits.size();
        std::size_t number = std::max<std::size_t>(page.number, 1);
        std::size_t begin = (number - 1) * page.size;
        for (std::size_t i = begin; i < hits.size() && i < begin + page.size; ++i) out.items.push_back(*hits[i]);
        return out;
    }

    /// Records a review decision. Allowed: pending -> accepted/rejected and
    /// moves between accepted and rejected. Every call appends an audit entry.
    NormRecord set_review(const std::string& norm_id, ReviewStatus status, const std::string& reviewer) {
        std::unique_lock lock(mu_);
        auto it = records_.find(norm_id);
        if (it == records_.end()) throw UnknownNormError(norm_id);
        if (status == ReviewStatus::pending)
            throw ReviewTransitionError("cannot move norm '" + norm_id + "' back to pending");
        auto& r = it->second;
        AuditEntry entry{audit_.size() + 1, norm_id, r.review.status, status, reviewer, iso8601(clock_())};
        r.review = {status, reviewer, entry.timestamp};
        append_journal(line_for(r), line_for(entry));
        audit_.push_back(entry);
        return r;
    }

    std::vector<AuditEntry> audit_log() const {
        std::shared_lock lock(mu_);
        return audit_;
    }

    std::vector<AuditEntry> audit_for(const std::string& norm_id) const {
        std::shared_lock lock(mu_);
        std::vector<AuditEntry> out;
        for (const auto& a : audit_)
            if (a.norm_id == norm_id) out.push_back(a);
        return out;
    }

    /// All record pairs whose cosine similarity reaches sigma.
    std::vector<DedupViolation> audit_dedup(double sigma) const {
        std::shared_lock lock(mu_);
        std::vector<const NormRecord*> rs;
        for (const auto& [id, r] : records_) rs.push_back(&r);
        std::vector<DedupViolation> out;
        for (std::size_t i = 0; i < rs.size(); ++i)
            for (std::size_t j = i + 1; j < rs.size(); ++j) {
                double s = cosine(rs[i]->embedding, rs[j]->embedding);
                if (s >= sigma) out.push_back({rs[i]->norm_id, rs[j]->norm_id, s});
            }
        return out;
    }

    KbStats stats(double sigma) const {
        KbStats s;
        {
            std::shared_lock lock(mu_);
            s.total = records_.size();
            for (const auto& [id, r] : records_) {
                ++s.by_review[std::string(to_string(r.review.status))];
                ++s.by_culture[r.culture_tag.value_or("(none)")];
            }
        }
        s.dedup_audit_ok = audit_dedup(sigma).empty();
        return s;
    }

    std::vector<NormRecord> records() const { return query({}, Page{1, static_cast<std::size_t>(-1)}).items; }

    /// Serialized snapshot (records file contents), used by save and export.
    std::string snapshot_records() const {
        std::shared_lock lock(mu_);
        return snapshot_locked();
    }

private:
    std::string snapshot_locked() const {
        std::vector<const NormRecord*> rs;
        for (const auto& [id, r] : records_) rs.push_back(&r);
        std::sort(rs.begin(), rs.end(), [](const NormRecord* a, const NormRecord* b) {
            return std::tie(a->created_at, a->norm_id) < std::tie(b->created_at, b->norm_id);
        });
        std::string out;
        for (const auto& [id, c] : chunks_) out += line_for(c) + "\n";
        for (const auto* r : rs) out += line_for(*r) + "\n";
        return out;
    }

    void copy_state(const NormsKB& other) {
        clock_ = other.clock_;
        records_ = other.records_;
        chunks_ = other.chunks_;
        audit_ = other.audit_;
        by_text_ = other.by_text_;
        provider_ = other.provider_;
        journal_ = other.journal_;
    }

    static nlohmann::json parse_line(const std::string& line, const std::filesystem::path& path, std::size_t line_no) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw StorageError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("schema_version"))
            throw SchemaVersionError(path.string() + ":" + std::to_string(line_no) + ": missing schema_version");
        if (j["schema_version"] != kSchemaVersion)
            throw SchemaVersionError(path.string() + ":" + std::to_string(line_no) + ": unsupported schema_version " +
                                     j["schema_version"].dump() + " (expected " + std::to_string(kSchemaVersion) + ")");
        return j;
    }

    static std::string line_for(const NormRecord& r) {
        nlohmann::json j = r;
        j["schema_version"] = kSchemaVersion;
        j["kind"] = "norm";
        return j.dump();
    }
    static std::string line_for(const DialogueChunk& c) {
        return nlohmann::json{{"schema_version", kSchemaVersion}, {"kind", "chunk"}, {"chunk", c}}.dump();
    }
    static std::string line_for(const AuditEntry& a) {
        nlohmann::json j = a;
        j["schema_version"] = kSchemaVersion;
        return j.dump();
    }

    static void append_line(const std::filesystem::path& path, const std::string& line) {
        std::ofstream out(path, std::ios::binary | std::ios::app);
        if (!out) throw StorageError("cannot append to " + path.string());
        std::string buf = line + "\n";
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        out.flush();
        if (!out) throw StorageError("write failed on " + path.string());
    }

    void append_journal(const std::string& record_line, const std::optional<std::string>& audit_line) const {
        if (!journal_) return;
        append_line(*journal_, record_line);
        if (audit_line) append_line(audit_path_for(*journal_), *audit_line);
    }

    static void write_atomically(const std::filesystem::path& path, const std::string& content) {
        auto tmp = path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw StorageError("cannot write " + tmp.string());
            out.write(content.data(), static_cast<std::streamsize>(content.size()));
            if (!out) throw StorageError("write failed on " + tmp.string());
        }
        std::error_code ec;
        std::filesystem::rename(tmp, path, ec);
        if (ec) throw StorageError("cannot replace " + path.string() + ": " + ec.message());
    }

    void index_text(const NormRecord& r) { by_text_[r.text] = r.norm_id; }

    std::optional<DuplicateHit> find_duplicate_locked(const std::string& text, const EmbeddingVector& embedding,
                                                      double sigma) const {
        if (auto it = by_text_.find(text); it != by_text_.end()) return DuplicateHit{it->second, 1.0};
        std::optional<DuplicateHit> best;
        for (const auto& [id, r] : records_) {
            double s = cosine(embedding, r.embedding);
            if (s >= sigma && (!best || s > best->similarity)) best = DuplicateHit{id, s};
        }
        return best;
    }

    Clock clock_;
    mutable std::shared_mutex mu_;
    std::map<std::string, NormRecord> records_;
    std::map<std::string, DialogueChunk> chunks_;
    std::vector<AuditEntry> audit_;
    std::map<std::string, std::string> by_text_;
    std::optional<std::string> provider_;
    std::optional<std::filesystem::path> journal_;
};

/// Cross-culture contradiction search: each pair is posed as a grounding
/// question with the first norm as premise and the second as hypothesis.
inline std::vector<ContrastivePair> find_contrastive_pairs(const NormsKB& kb, const std::string& culture_a,
                                                           const std::string& culture_b, CompletionBackend& backend,
                                                           const TemplateStore& templates, double gamma,
                                                           std::size_t max_pairs = 100) {
    if (text::to_lower(culture_a) == text::to_lower(culture_b))
        throw PreconditionError("contrastive pairs need two different cultures");
    auto bucket = [&](const std::string& culture) {
        std::vector<NormRecord> out;
        for (auto& r : kb.query(QueryFilter{culture, std::nullopt, std::nullopt, std::nullopt, std::nullopt},
                                Page{1, static_cast<std::size_t>(-1)})
                           .items)
            if (r.review.status != ReviewStatus::rejected) out.push_back(std::move(r));
        if (out.empty()) throw PreconditionError("no norms tagged with culture '" + culture + "'");
        return out;
    };
    auto as = bucket(culture_a);
    auto bs = bucket(culture_b);

    std::vector<ContrastivePair> pairs;
    std::size_t compared = 0;
    for (const auto& a : as)
        for (const auto& b : bs) {
            if (compared++ >= max_pairs) break;
            DialogueChunk premise;
            premise.chunk_id = "norm#" + a.norm_id;
            premise.source_id = "norm";
            premise.utterances.push_back(Utterance{0, std::nullopt, a.text, "en"});
            auto prompt = templates.render_grd(premise, b.text);
            GroundingCheck g;
            try {
                g = parse_grounding(backend.complete(prompt));
            } catch (const BackendError& e) {
                throw BackendError(e.kind(), "pair (" + a.norm_id + ", " + b.norm_id + "): " + e.what(), e.status());
            } catch (const VerdictError&) {
                continue;
            }
            if (g.verdict == -1 && g.relevance >= gamma)
                pairs.push_back({a.norm_id, b.norm_id, "contradiction", g.relevance, g.explanation});
        }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const ContrastivePair& x, const ContrastivePair& y) { return x.relevance > y.relevance; });
    return pairs;
}

}  // namespace normsage
