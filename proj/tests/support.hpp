#pragma once

// Shared fixtures for the test suites: completion builders with chosen
// probabilities, the two-chunk scripted discovery run, temp directories.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "normsage/normsage.hpp"

namespace testing_support {

using namespace normsage;

inline double log_or_neg_inf(double p) { return p > 0 ? std::log(p) : -std::numeric_limits<double>::infinity(); }

/// "Yes, <why>" or "No, <why>" with the given logprobs at the verdict token.
inline CompletionResult yes_no(double lp_yes, double lp_no, bool emit_yes, const std::string& why = "it is kind") {
    CompletionResult r;
    std::string head = emit_yes ? "Yes" : "No";
    r.tokens.push_back({head, emit_yes ? lp_yes : lp_no, {{"Yes", lp_yes}, {"No", lp_no}}});
    r.tokens.push_back({",", -0.01, {}});
    r.tokens.push_back({" " + why, -0.2, {}});
    r.text = head + ", " + why;
    r.model_id = "scripted";
    return r;
}

/// Correctness completion whose normalized confidence is exactly `conf`
/// up to rounding (P(yes)=conf, P(no)=1-conf).
inline CompletionResult with_confidence(double conf, bool emit_yes = true) {
    return yes_no(log_or_neg_inf(conf), log_or_neg_inf(1.0 - conf), emit_yes);
}

inline std::string label_word(int verdict) {
    return verdict > 0 ? "Entails" : verdict < 0 ? "Contradicts" : "Irrelevant";
}

/// "<Label>. <why>" with probabilities (pe, pc, pi) at the label token.
inline CompletionResult grounding(double pe, double pc, double pi, int verdict,
                                  const std::string& why = "the speaker does this") {
    CompletionResult r;
    auto head = label_word(verdict);
    double lp = log_or_neg_inf(verdict > 0 ? pe : verdict < 0 ? pc : pi);
    r.tokens.push_back(
        {head, lp, {{"Entails", log_or_neg_inf(pe)}, {"Contradicts", log_or_neg_inf(pc)}, {"Irrelevant", log_or_neg_inf(pi)}}});
    r.tokens.push_back({".", -0.01, {}});
    r.tokens.push_back({" " + why, -0.3, {}});
    r.text = head + ". " + why;
    r.model_id = "scripted";
    return r;
}

inline std::vector<Utterance> utterances(const std::vector<std::pair<std::string, std::string>>& lines) {
    std::vector<Utterance> out;
    for (std::size_t i = 0; i < lines.size(); ++i) out.push_back({i, lines[i].first, lines[i].second, "en"});
    return out;
}

inline DialogueChunk single_chunk(const std::vector<std::pair<std::string, std::string>>& lines,
                                  const std::string& source = "t") {
    auto u = utterances(lines);
    return chunk_dialogue(u, u.size(), source).front();
}

inline DialogueChunk khan_chunk() {
    return single_chunk({{"Dave", "I'm sorry"},
                         {"Mr. Khan", "Right, that's it. I don't want to hear another word."},
                         {"Dave", "But I was only trying to explain"},
                         {"Mr. Khan", "Not another word!"}},
                        "khan");
}

inline DialogueChunk jessica_chunk() {
    return single_chunk({{"Jessica", "The restaurant is empty again, but the food is good."},
                         {"Eddie", "Maybe nobody likes it."},
                         {"Jessica", "Then we make it better. We will give free samples tomorrow."}},
                        "fob");
}

/// The golden discovery run: 7 utterances (two chunks at k=5), three
/// candidate norms; one fails correctness, one fails grounding.
struct GoldenRun {
    SourceMeta meta;
    std::vector<Utterance> utts;
    ScriptedBackend backend;

    static constexpr const char* kKept = "It is polite to thank someone who helps you.";
    static constexpr const char* kLowConfidence = "It is acceptable to shout at a waiter.";
    static constexpr const char* kLowRelevance = "It is rude to interrupt someone who is speaking.";
};

inline GoldenRun golden_run(const TemplateStore& templates = {}) {
    GoldenRun g;
    g.meta.source_id = "golden";
    g.meta.title = "Golden fixture";
    g.utts = utterances({{"Ann", "Could you pass me that box?"},
                         {"Ben", "Sure, here you go."},
                         {"Ann", "Thank you so much, that really helps."},
                         {"Ben", "No problem at all."},
                         {"Ann", "Hey, waiter! Over here!"},
                         {"Cal", "Coming, one moment please."},
                         {"Ann", "Thanks, we are ready to order."}});
    auto chunks = chunk_dialogue(g.utts, 5, g.meta.source_id);

    CompletionResult dvr1;
    dvr1.text = std::string("1. ") + GoldenRun::kKept + "\n2. " + GoldenRun::kLowConfidence + "\n";
    CompletionResult dvr2;
    dvr2.text = std::string("1. ") + GoldenRun::kLowRelevance + "\n";
    g.backend.add(templates.render_dvr(chunks[0], DiscoveryVariant::base, g.meta).text, dvr1);
    g.backend.add(templates.render_dvr(chunks[1], DiscoveryVariant::base, g.meta).text, dvr2);

    g.backend.add(templates.render_cor(GoldenRun::kKept).text, yes_no(-0.05, -3.2, true, "thanking is courteous"));
    g.backend.add(templates.render_cor(GoldenRun::kLowConfidence).text, yes_no(-0.6, -0.9, true, "it can be fine"));
    g.backend.add(templates.render_cor(GoldenRun::kLowRelevance).text, yes_no(-0.1, -2.5, true, "it disrespects others"));

    g.backend.add(templates.render_grd(chunks[0], GoldenRun::kKept).text,
                  grounding(0.85, 0.05, 0.10, 1, "Ann thanks Ben for passing the box"));
    g.backend.add(templates.render_grd(chunks[1], GoldenRun::kLowRelevance).text,
                  grounding(0.15, 0.05, 0.80, 0, "nobody interrupts anyone"));
    return g;
}

inline std::chrono::system_clock::time_point epoch_plus_ms(long long ms) {
    return std::chrono::system_clock::time_point(std::chrono::milliseconds(ms));
}

/// Self-removing temporary directory.
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path = std::filesystem::temp_directory_path() /
               ("normsage-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_bytes(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
}

/// Random lowercase sentence of `words` words; used by dedup and embedder properties.
inline std::string random_sentence(std::mt19937_64& rng, int words) {
    static const std::vector<std::string> vocab{
        "guests", "elders", "teacher", "neighbor", "gift",   "dinner",  "promise", "apology", "queue",  "phone",
        "meeting", "wedding", "lunch",  "shoes",   "tea",    "rice",    "salad",   "debt",    "secret", "music",
        "temple", "office",  "market", "stranger", "parent", "child",   "friend",  "boss",    "driver", "doctor",
        "late",   "loudly",  "quietly", "early",   "twice",  "openly",  "always",  "never",   "kindly", "rudely"};
    static const std::vector<std::string> heads{"It is polite to", "It is rude to", "You should", "It is wrong to",
                                                "People are expected to", "It is good to"};
    std::uniform_int_distribution<std::size_t> v(0, vocab.size() - 1), h(0, heads.size() - 1);
    std::string s = heads[h(rng)];
    for (int i = 0; i < words; ++i) s += " " + vocab[v(rng)];
    return s + ".";
}

}  // namespace testing_support
