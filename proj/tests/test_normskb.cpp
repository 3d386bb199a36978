#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "support.hpp"

using namespace normsage;
using namespace testing_support;

namespace {

HashedTrigramEmbedder embedder;

NormRecord make_record(const std::string& text, const std::string& chunk = "src#0",
                       std::optional<std::string> culture = std::nullopt, double confidence = 0.9) {
    NormRecord r;
    r.text = text;
    r.embedding = embedder.embed(text);
    r.correctness = {1, confidence, "ok", {}};
    GroundingCheck g;
    g.verdict = 1;
    g.relevance = 0.8;
    g.distribution = {0.7, 0.1, 0.2};
    r.groundings.push_back({g, chunk});
    r.provenance = {chunk};
    r.culture_tag = std::move(culture);
    return r;
}

Clock ticking_clock() {
    auto t = std::make_shared<std::atomic<long long>>(1'700'000'000'000LL);
    return [t] { return epoch_plus_ms((*t)++); };
}

}  // namespace

TEST(Cosine, Basics) {
    EmbeddingVector a{{1, 1, 0}, 3, "p"}, b{{1, 0, 0}, 3, "p"}, c{{0, 1, 0}, 3, "p"}, z{{0, 0, 0}, 3, "p"};
    EXPECT_NEAR(cosine(a, a), 1.0, 1e-15);
    EXPECT_EQ(cosine(b, c), 0.0);
    EXPECT_NEAR(cosine(a, b), 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(cosine(a, b), 0.70711, 1e-5);
    EXPECT_EQ(cosine(a, z), 0.0);
    EmbeddingVector other{{1, 1, 0}, 3, "q"}, longer{{1, 1, 0, 0}, 4, "p"};
    EXPECT_THROW(cosine(a, other), Error);
    EXPECT_THROW(cosine(a, longer), Error);
}

TEST(FindDuplicate, ExactTextAndEmpty) {
    NormsKB kb;
    auto e = embedder.embed("Be kind to guests.");
    EXPECT_FALSE(kb.find_duplicate("Be kind to guests.", e, 0.95));
    kb.insert(make_record("Be kind to guests."), 0.95);
    auto hit = kb.find_duplicate("Be kind to guests.", e, 0.95);
    ASSERT_TRUE(hit);
    EXPECT_EQ(hit->similarity, 1.0);
}

TEST(FindDuplicate, NearParaphraseUnderLocalEmbedder) {
    std::string a = "It is polite to remove your shoes before entering someone's home.";
    std::string b = "It is polite to remove your shoes before entering someone's house.";
    // oracle: cosine recomputed from the raw vectors
    auto va = embedder.embed(a), vb = embedder.embed(b);
    double dot = 0;
    for (std::size_t i = 0; i < va.dim; ++i) dot += va.values[i] * vb.values[i];
    ASSERT_GE(dot, 0.95);
    EXPECT_NEAR(cosine(va, vb), dot, 1e-12);

    NormsKB kb;
    kb.insert(make_record(a), 0.95);
    auto out = kb.insert(make_record(b, "src#5"), 0.95);
    EXPECT_EQ(out.kind, InsertOutcome::Kind::duplicate_of);
    EXPECT_NEAR(out.similarity, dot, 1e-12);
}

TEST(Insert, DuplicateUnionsProvenance) {
    NormsKB kb;
    auto first = kb.insert(make_record("Be kind to guests."), 0.95);
    EXPECT_EQ(first.kind, InsertOutcome::Kind::inserted);
    auto before = *kb.get(first.norm_id);
    auto dup = kb.insert(make_record("Be kind to guests.", "src#5"), 0.95);
    EXPECT_EQ(dup.kind, InsertOutcome::Kind::duplicate_of);
    EXPECT_EQ(dup.norm_id, first.norm_id);
    auto after = *kb.get(first.norm_id);
    EXPECT_EQ(after.provenance, (std::vector<std::string>{"src#0", "src#5"}));
    after.provenance = before.provenance;
    EXPECT_EQ(after, before);  // nothing else changed
    kb.insert(make_record("Be kind to guests.", "src#5"), 0.95);
    EXPECT_EQ(kb.get(first.norm_id)->provenance.size(), 2u);
    EXPECT_EQ(kb.size(), 1u);
}

TEST(Insert, RandomTextsStayDistinct) {
    NormsKB kb;
    std::mt19937_64 rng(21);
    std::set<std::string> texts;
    while (texts.size() < 100) texts.insert(random_sentence(rng, 8));
    std::size_t inserted = 0;
    for (const auto& t : texts)
        if (kb.insert(make_record(t), 0.95).kind == InsertOutcome::Kind::inserted) ++inserted;
    EXPECT_EQ(inserted, 100u);
    EXPECT_TRUE(kb.audit_dedup(0.95).empty());
}

TEST(Insert, Preconditions) {
    NormsKB kb;
    auto r = make_record("Be kind.");
    r.provenance.clear();
    EXPECT_THROW(kb.insert(r, 0.95), PreconditionError);
    kb.insert(make_record("Be kind."), 0.95);
    auto foreign = make_record("Something else entirely.");
    foreign.embedding.provider_id = "other";
    EXPECT_THROW(kb.insert(foreign, 0.95), Error);
}

TEST(Insert, ConcurrentWritersNeverDuplicate) {
    NormsKB kb;
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&, t] {
            for (int i = 0; i < 20; ++i) kb.insert(make_record("Shared norm number " + std::to_string(i) + ".",
                                                               "src#" + std::to_string(t)),
                                                   0.999);
        });
    for (auto& th : threads) th.join();
    EXPECT_EQ(kb.size(), 20u);
    for (const auto& r : kb.records()) EXPECT_EQ(r.provenance.size(), 4u);
}

TEST(Query, FiltersAndOrder) {
    NormsKB kb(ticking_clock());
    EXPECT_TRUE(kb.query({}).items.empty());
    auto wed = kb.insert(make_record("In Pakistani culture, the bride and groom may not meet until the wedding day.",
                                     "wed#0", "Pakistani"),
                         0.95);
    kb.insert(make_record("In British culture, couples usually meet long before the wedding.", "wed#5", "British", 0.6),
              0.95);
    auto third = kb.insert(make_record("Guests should bring a small gift.", "other#0"), 0.95);
    kb.set_review(third.norm_id, ReviewStatus::accepted, "rev");

    auto pk = kb.query({std::string("pakistani"), {}, {}, {}, {}});
    ASSERT_EQ(pk.total, 1u);
    EXPECT_EQ(pk.items[0].norm_id, wed.norm_id);

    auto accepted = kb.query({{}, ReviewStatus::accepted, {}, {}, {}});
    ASSERT_EQ(accepted.total, 1u);
    EXPECT_EQ(accepted.items[0].norm_id, third.norm_id);

    EXPECT_EQ(kb.query({{}, {}, std::string("WEDDING"), {}, {}}).total, 2u);
    EXPECT_EQ(kb.query({{}, {}, {}, 0.7, {}}).total, 2u);
    EXPECT_EQ(kb.query({{}, {}, {}, {}, std::string("wed")}).total, 2u);

    auto all = kb.query({}, {1, 2});
    EXPECT_EQ(all.total, 3u);
    ASSERT_EQ(all.items.size(), 2u);
    EXPECT_EQ(all.items[0].norm_id, wed.norm_id);  // insertion (created_at) order
    EXPECT_EQ(kb.query({}, {2, 2}).items.size(), 1u);
    EXPECT_TRUE(kb.query({}, {3, 2}).items.empty());
}

TEST(Review, TransitionsAreAudited) {
    NormsKB kb;
    auto id = kb.insert(make_record("Be kind."), 0.95).norm_id;
    auto r = kb.set_review(id, ReviewStatus::accepted, "alice");
    EXPECT_EQ(r.review.status, ReviewStatus::accepted);
    EXPECT_EQ(r.review.reviewer, "alice");
    EXPECT_TRUE(r.review.timestamp);
    EXPECT_EQ(kb.audit_log().size(), 1u);
    kb.set_review(id, ReviewStatus::rejected, "bob");
    auto log = kb.audit_for(id);
    ASSERT_EQ(log.size(), 2u);
    EXPECT_EQ(log[1].from, ReviewStatus::accepted);
    EXPECT_EQ(log[1].to, ReviewStatus::rejected);
    EXPECT_EQ(log[1].seq, 2u);
    EXPECT_THROW(kb.set_review("0000", ReviewStatus::accepted, "x"), UnknownNormError);
    EXPECT_THROW(kb.set_review(id, ReviewStatus::pending, "x"), ReviewTransitionError);
    EXPECT_EQ(kb.audit_log().size(), 2u);
}

TEST(Persistence, RoundTrip) {
    TempDir dir;
    NormsKB kb(ticking_clock());
    kb.add_chunk(khan_chunk());
    auto a = kb.insert(make_record("Be kind.", "khan#0"), 0.95);
    kb.insert(make_record("Listen before you speak.", "khan#0", "American"), 0.95);
    kb.insert(make_record("Bring a gift when visiting."), 0.95);
    kb.set_review(a.norm_id, ReviewStatus::accepted, "alice");
    kb.save(dir / "kb.jsonl");
    auto loaded = NormsKB::load(dir / "kb.jsonl");
    EXPECT_EQ(loaded, kb);
    EXPECT_EQ(loaded.chunk("khan#0"), khan_chunk());

    // byte-stable: saving the loaded copy reproduces the same files
    loaded.save(dir / "again.jsonl");
    EXPECT_EQ(read_bytes(dir / "kb.jsonl"), read_bytes(dir / "again.jsonl"));
    EXPECT_EQ(read_bytes(dir / "kb.jsonl.audit"), read_bytes(dir / "again.jsonl.audit"));
}

TEST(Persistence, EmptyFileAndErrors) {
    TempDir dir;
    write_bytes(dir / "empty.jsonl", "");
    EXPECT_EQ(NormsKB::load(dir / "empty.jsonl").size(), 0u);
    write_bytes(dir / "v2.jsonl", R"({"schema_version":2,"kind":"norm"})" "\n");
    EXPECT_THROW(NormsKB::load(dir / "v2.jsonl"), SchemaVersionError);
    write_bytes(dir / "nov.jsonl", R"({"kind":"norm"})" "\n");
    EXPECT_THROW(NormsKB::load(dir / "nov.jsonl"), SchemaVersionError);
    write_bytes(dir / "garbage.jsonl", "{\n");
    EXPECT_THROW(NormsKB::load(dir / "garbage.jsonl"), StorageError);
    EXPECT_THROW(NormsKB::load(dir / "missing.jsonl"), StorageError);
}

static std::ptrdiff_t line_count(const std::filesystem::path& p) {
    auto bytes = read_bytes(p);
    return std::count(bytes.begin(), bytes.end(), '\n');
}

TEST(Persistence, JournalReplaysMutations) {
    TempDir dir;
    auto path = dir / "kb.jsonl";
    std::string id;
    {
        auto kb = NormsKB::open(path, ticking_clock());
        id = kb.insert(make_record("Be kind."), 0.95).norm_id;
        kb.insert(make_record("Be kind.", "src#9"), 0.95);
        kb.set_review(id, ReviewStatus::accepted, "alice");
        // three record lines (insert, provenance growth, review), one audit line
        EXPECT_EQ(line_count(path), 3);
    }
    auto reopened = NormsKB::load(path);
    auto r = reopened.get(id);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->provenance.size(), 2u);
    EXPECT_EQ(r->review.status, ReviewStatus::accepted);
    EXPECT_EQ(reopened.audit_log().size(), 1u);

    reopened = NormsKB::open(path);
    reopened.compact();
    EXPECT_EQ(line_count(path), 1);
    EXPECT_EQ(NormsKB::load(path), reopened);
}

TEST(Persistence, TornTailIsReported) {
    TempDir dir;
    auto path = dir / "kb.jsonl";
    {
        auto kb = NormsKB::open(path);
        kb.insert(make_record("Be kind."), 0.95);
    }
    auto bytes = read_bytes(path);
    write_bytes(path, bytes + bytes.substr(0, bytes.size() / 2));
    EXPECT_THROW(NormsKB::load(path), StorageError);
}

TEST(Stats, CountsAndAudit) {
    NormsKB kb;
    auto a = kb.insert(make_record("Be kind.", "s#0", "Taiwanese"), 0.95).norm_id;
    kb.insert(make_record("Eat a light lunch such as a salad.", "s#0", "American"), 0.95);
    kb.set_review(a, ReviewStatus::rejected, "r");
    auto s = kb.stats(0.95);
    EXPECT_EQ(s.total, 2u);
    EXPECT_EQ(s.by_review.at("rejected"), 1u);
    EXPECT_EQ(s.by_review.at("pending"), 1u);
    EXPECT_EQ(s.by_culture.at("American"), 1u);
    EXPECT_TRUE(s.dedup_audit_ok);
}

TEST(ContrastivePairs, LunchNorms) {
    NormsKB kb;
    auto tw = kb.insert(make_record("In Taiwanese culture, it is common to eat a heavier lunch, such as rice.", "fob#0",
                                    "Taiwanese"),
                        0.95);
    auto us = kb.insert(make_record("In American culture, it is common to eat a light lunch, such as a salad.", "fob#0",
                                    "American"),
                        0.95);
    TemplateStore t;
    ScriptedBackend b;
    auto tw_rec = *kb.get(tw.norm_id), us_rec = *kb.get(us.norm_id);
    DialogueChunk premise;
    premise.chunk_id = "norm#" + tw_rec.norm_id;
    premise.source_id = "norm";
    premise.utterances.push_back({0, std::nullopt, tw_rec.text, "en"});
    b.add(t.render_grd(premise, us_rec.text).text, grounding(0.05, 0.85, 0.10, -1, "rice versus salad"));

    auto pairs = find_contrastive_pairs(kb, "Taiwanese", "American", b, t, 0.6);
    ASSERT_EQ(pairs.size(), 1u);
    EXPECT_EQ(pairs[0].norm_a, tw.norm_id);
    EXPECT_EQ(pairs[0].norm_b, us.norm_id);
    EXPECT_EQ(pairs[0].relation, "contradiction");
    EXPECT_NEAR(pairs[0].relevance, 0.9, 1e-12);
    ASSERT_EQ(b.captured().size(), 1u);
    EXPECT_NE(b.captured()[0].find(tw_rec.text), std::string::npos);

    EXPECT_THROW(find_contrastive_pairs(kb, "Taiwanese", "taiwanese", b, t, 0.6), PreconditionError);
    try {
        find_contrastive_pairs(kb, "Taiwanese", "Martian", b, t, 0.6);
        FAIL();
    } catch (const PreconditionError& e) {
        EXPECT_NE(std::string(e.what()).find("Martian"), std::string::npos);
    }
}

TEST(ContrastivePairs, BackendErrorsCarryPairContext) {
    NormsKB kb;
    auto a = kb.insert(make_record("In Taiwanese culture, lunch is heavy.", "s#0", "Taiwanese"), 0.95);
    auto b = kb.insert(make_record("In American culture, lunch is light.", "s#0", "American"), 0.95);
    ScriptedBackend empty;
    try {
        find_contrastive_pairs(kb, "Taiwanese", "American", empty, TemplateStore{}, 0.6);
        FAIL();
    } catch (const BackendError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find(a.norm_id), std::string::npos);
        EXPECT_NE(msg.find(b.norm_id), std::string::npos);
    }
}

TEST(ContrastivePairs, CapBoundsComparisons) {
    NormsKB kb;
    for (int i = 0; i < 5; ++i) {
        kb.insert(make_record("In Taiwanese culture, custom number " + std::to_string(i * 7919) + " applies.", "s#0",
                              "Taiwanese"),
                  0.999);
        kb.insert(make_record("In American culture, habit " + std::to_string(i * 104729) + " is typical.", "s#0",
                              "American"),
                  0.999);
    }
    struct AlwaysIrrelevant : CompletionBackend {
        int calls = 0;
        CompletionResult complete(const RenderedPrompt&) override {
            ++calls;
            return grounding(0.1, 0.1, 0.8, 0);
        }
    } backend;
    auto pairs = find_contrastive_pairs(kb, "Taiwanese", "American", backend, TemplateStore{}, 0.6, 7);
    EXPECT_TRUE(pairs.empty());
    EXPECT_EQ(backend.calls, 7);
}
