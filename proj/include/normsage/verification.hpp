#pragma once

// Post-processing for the correctness and grounding self-checks: verdict
// parsing, probability normalization at the verdict token, threshold filters.

#include <json.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "normsage/common.hpp"
#include "normsage/llm_backend.hpp"

namespace normsage {

class VerdictError : public Error {
public:
    enum class Kind { unparseable, no_probability_data };
    VerdictError(Kind kind, const std::string& what, std::string raw)
        : Error(what), kind_(kind), raw_(std::move(raw)) {}
    Kind kind() const noexcept { return kind_; }
    const std::string& raw_text() const noexcept { return raw_; }

private:
    Kind kind_;
    std::string raw_;
};

struct Thresholds {
    double theta = 0.7;
    double gamma = 0.6;
    double sigma = 0.95;
    std::size_t k = 5;

    bool operator==(const Thresholds&) const = default;

    void validate() const {
        auto unit = [](double v, const char* name) {
            if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must be in [0,1]");
        };
        unit(theta, "theta");
        unit(gamma, "gamma");
        unit(sigma, "sigma");
        if (k < 1) throw ConfigError("k must be >= 1");
    }

    static Thresholds from_json(const nlohmann::json& j) {
        Thresholds t;
        t.theta = j.value("theta", t.theta);
        t.gamma = j.value("gamma", t.gamma);
        t.sigma = j.value("sigma", t.sigma);
        t.k = j.value("k", t.k);
        t.validate();
        return t;
    }

    static Thresholds from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read thresholds config " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("thresholds config " + path + ": " + e.what());
        }
        return from_json(j.contains("thresholds") ? j["thresholds"] : j);
    }
};

struct CorrectnessCheck {
    int verdict = 0;           // +1 yes, -1 no
    double confidence = 0.0;   // normalized P(yes)
    std::string explanation;
    CompletionResult raw;

    bool operator==(const CorrectnessCheck&) const = default;
};

/// Normalized probability mass over the three grounding labels at the label token.
struct LabelDistribution {
    double entail = 0.0;
    double contradict = 0.0;
    double irrelevant = 0.0;

    bool operator==(const LabelDistribution&) const = default;

    double of(int verdict) const { return verdict > 0 ? entail : verdict < 0 ? contradict : irrelevant; }
};

struct GroundingCheck {
    int verdict = 0;  // +1 entail, 0 irrelevant, -1 contradict
    double relevance = 0.0;
    std::string explanation;
    std::optional<std::string> speaker;
    LabelDistribution distribution;
    CompletionResult raw;

    bool operator==(const GroundingCheck&) const = default;
};

enum class RelevanceMode {
    combined_mass,  // (P(entail)+P(contradict)) / (P(entail)+P(contradict)+P(irrelevant))
    emitted_label   // mass of the emitted relevant label; 1 - P(irrelevant) share when irrelevant is emitted
};

/// Probability assigned to a label that the provider did not list at the verdict position.
inline constexpr double kMissingLabelFloor = 1e-6;

namespace detail {

inline std::string normalize_token(std::string_view tok) {
    auto t = text::trim(tok);
    while (!t.empty() && std::ispunct(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
    while (!t.empty() && std::ispunct(static_cast<unsigned char>(t.back()))) t.remove_suffix(1);
    return text::to_lower(text::trim(t));
}

/// Alternatives at one position, with the generated token merged in.
inline std::map<std::string, double> position_alternatives(const TokenLogprob& tok) {
    auto alts = tok.top_alternatives;
    alts.emplace(tok.token, tok.logprob);
    return alts;
}

template <class Match>
double label_mass(const std::map<std::string, double>& alts, Match&& matches) {
    double mass = 0.0;
    bool listed = false;
    for (const auto& [alt, lp] : alts)
        if (matches(normalize_token(alt))) {
            mass += std::exp(lp);
            listed = true;
        }
    return listed ? mass : kMissingLabelFloor;
}

/// Character offset of each token, valid when the tokens concatenate to the text.
inline std::optional<std::vector<std::size_t>> token_offsets(const CompletionResult& r) {
    std::vector<std::size_t> offsets;
    std::string joined;
    for (const auto& t : r.tokens) {
        offsets.push_back(joined.size());
        joined += t.token;
    }
    if (joined != r.text) return std::nullopt;
    return offsets;
}

inline std::string strip_separators(std::string_view s) {
    while (!s.empty() && (text::is_space(s.front()) || s.front() == ',' || s.front() == '.' || s.front() == ':' ||
                          s.front() == ';' || s.front() == '-' || s.front() == '!'))
        s.remove_prefix(1);
    return std::string(text::trim(s));
}

inline bool word_equals_label(std::string_view text_lower, std::string_view label, std::size_t& pos) {
    for (std::size_t i = 0; i + label.size() <= text_lower.size(); ++i) {
        if (text_lower.compare(i, label.size(), label) != 0) continue;
        bool left = i == 0 || !std::isalpha(static_cast<unsigned char>(text_lower[i - 1]));
        bool right = i + label.size() == text_lower.size() ||
                     !std::isalpha(static_cast<unsigned char>(text_lower[i + label.size()]));
        if (left && right) {
            pos = i;
            return true;
        }
    }
    return false;
}

inline constexpr std::array<std::string_view, 3> kGroundingStems{"entail", "contradict", "irrelevant"};
inline constexpr std::array<int, 3> kGroundingVerdicts{1, -1, 0};

inline bool matches_stem(std::string_view normalized_alt, std::string_view stem) {
    if (normalized_alt.empty()) return false;
    return normalized_alt.starts_with(stem) || (normalized_alt.size() >= 3 && stem.starts_with(normalized_alt));
}

}  // namespace detail

/// Parses a correctness completion. Confidence is P(yes)/(P(yes)+P(no)) read
/// at the verdict token, independent of which verdict was emitted.
inline CorrectnessCheck parse_correctness(const CompletionResult& result) {
    CorrectnessCheck check;
    check.raw = result;
    std::optional<std::size_t> pos;
    for (std::size_t i = 0; i < result.tokens.size(); ++i) {
        auto n = detail::normalize_token(result.tokens[i].token);
        if (n == "yes" || n == "no") {
            pos = i;
            break;
        }
    }
    if (!pos) {
        std::size_t p = 0;
        auto lower = text::to_lower(result.text);
        bool has_word = detail::word_equals_label(lower, "yes", p) || detail::word_equals_label(lower, "no", p);
        if (has_word && result.tokens.empty())
            throw VerdictError(VerdictError::Kind::no_probability_data, "no probability data for correctness verdict",
                               result.text);
        throw VerdictError(VerdictError::Kind::unparseable, "unparseable correctness verdict: " + result.text,
                           result.text);
    }
    const auto& tok = result.tokens[*pos];
    check.verdict = detail::normalize_token(tok.token) == "yes" ? 1 : -1;
    auto alts = detail::position_alternatives(tok);
    double p_yes = detail::label_mass(alts, [](const std::string& a) { return a == "yes"; });
    double p_no = detail::label_mass(alts, [](const std::string& a) { return a == "no"; });
    if (!(p_yes + p_no > 0.0))
        throw VerdictError(VerdictError::Kind::no_probability_data, "zero probability mass at verdict token",
                           result.text);
    check.confidence = p_yes / (p_yes + p_no);

    if (auto offsets = detail::token_offsets(result)) {
        check.explanation = detail::strip_separators(
            std::string_view(result.text).substr((*offsets)[*pos] + tok.token.size()));
    } else {
        std::string rest;
        for (std::size_t i = *pos + 1; i < result.tokens.size(); ++i) rest += result.tokens[i].token;
        check.explanation = detail::strip_separators(rest);
    }
    return check;
}

/// Parses a grounding completion. The verdict is the first label stem in the
/// text; all three label probabilities come from that token's alternatives.
inline GroundingCheck parse_grounding(const CompletionResult& result,
                                      RelevanceMode mode = RelevanceMode::combined_mass) {
    GroundingCheck check;
    check.raw = result;

    auto lower = text::to_lower(result.text);
    std::size_t best_pos = std::string::npos;
    int label = -1;
    for (std::size_t s = 0; s < detail::kGroundingStems.size(); ++s) {
        auto stem = detail::kGroundingStems[s];
        for (auto p = lower.find(stem); p != std::string::npos; p = lower.find(stem, p + 1)) {
            if (p == 0 || !std::isalpha(static_cast<unsigned char>(lower[p - 1]))) {
                if (p < best_pos) {
                    best_pos = p;
                    label = static_cast<int>(s);
                }
                break;
            }
        }
    }
    if (label < 0)
        throw VerdictError(VerdictError::Kind::unparseable, "unparseable grounding verdict: " + result.text,
                           result.text);
    if (result.tokens.empty())
        throw VerdictError(VerdictError::Kind::no_probability_data, "no probability data for grounding verdict",
                           result.text);

    std::optional<std::size_t> pos;
    if (auto offsets = detail::token_offsets(result)) {
        for (std::size_t i = 0; i < offsets->size(); ++i)
            if ((*offsets)[i] <= best_pos && best_pos < (*offsets)[i] + result.tokens[i].token.size()) pos = i;
    } else {
        auto stem = detail::kGroundingStems[static_cast<std::size_t>(label)];
        for (std::size_t i = 0; i < result.tokens.size() && !pos; ++i)
            if (detail::matches_stem(detail::normalize_token(result.tokens[i].token), stem)) pos = i;
    }
    if (!pos)
        throw VerdictError(VerdictError::Kind::no_probability_data, "grounding label not aligned with any token",
                           result.text);

    check.verdict = detail::kGroundingVerdicts[static_cast<std::size_t>(label)];
    auto alts = detail::position_alternatives(result.tokens[*pos]);
    std::array<double, 3> mass{};
    for (std::size_t s = 0; s < 3; ++s)
        mass[s] = detail::label_mass(alts, [&](const std::string& a) {
            return detail::matches_stem(a, detail::kGroundingStems[s]);
        });
    double total = mass[0] + mass[1] + mass[2];
    if (!(total > 0.0))
        throw VerdictError(VerdictError::Kind::no_probability_data, "zero probability mass at label token",
                           result.text);
    check.distribution = {mass[0] / total, mass[1] / total, mass[2] / total};
    if (mode == RelevanceMode::combined_mass || check.verdict == 0)
        check.relevance = (mass[0] + mass[1]) / total;
    else
        check.relevance = (check.verdict > 0 ? mass[0] : mass[1]) / total;

    // A leading label ("Contradicts. Mr. Khan ...") is followed by the
    // explanation; otherwise the whole answer explains itself.
    auto leading = text::trim(result.text);
    if (best_pos == static_cast<std::size_t>(leading.data() - result.text.data())) {
        auto after = std::string_view(result.text).substr(best_pos);
        std::size_t word_end = 0;
        while (word_end < after.size() && std::isalpha(static_cast<unsigned char>(after[word_end]))) ++word_end;
        auto rest = detail::strip_separators(after.substr(word_end));
        check.explanation = rest.empty() ? std::string(leading) : rest;
    } else {
        check.explanation = std::string(leading);
    }
    return check;
}

/// Exhaustive, disjoint split of `items` by `keep`.
template <class T, class Pred>
std::pair<std::vector<T>, std::vector<T>> partition_by(const std::vector<T>& items, Pred&& keep) {
    std::pair<std::vector<T>, std::vector<T>> out;
    for (const auto& item : items) (keep(item) ? out.first : out.second).push_back(item);
    return out;
}

inline bool passes_correctness(const CorrectnessCheck& c, double theta) {
    return c.verdict == 1 && c.confidence >= theta;
}

inline bool passes_grounding(const GroundingCheck& g, double gamma) { return g.relevance >= gamma; }

inline std::pair<std::vector<CorrectnessCheck>, std::vector<CorrectnessCheck>> filter_by_correctness(
    const std::vector<CorrectnessCheck>& checks, double theta) {
    return partition_by(checks, [theta](const CorrectnessCheck& c) { return passes_correctness(c, theta); });
}

inline std::pair<std::vector<GroundingCheck>, std::vector<GroundingCheck>> filter_by_grounding(
    const std::vector<GroundingCheck>& checks, double gamma) {
    return partition_by(checks, [gamma](const GroundingCheck& g) { return passes_grounding(g, gamma); });
}

inline void to_json(nlohmann::json& j, const CorrectnessCheck& c) {
    j = nlohmann::json{{"verdict", c.verdict}, {"confidence", c.confidence}, {"explanation", c.explanation},
                       {"raw", c.raw}};
}
inline void from_json(const nlohmann::json& j, CorrectnessCheck& c) {
    c.verdict = j.at("verdict").get<int>();
    c.confidence = j.at("confidence").get<double>();
    c.explanation = j.value("explanation", std::string{});
    c.raw = j.contains("raw") ? j["raw"].get<CompletionResult>() : CompletionResult{};
}
inline void to_json(nlohmann::json& j, const LabelDistribution& d) {
    j = nlohmann::json{{"entail", d.entail}, {"contradict", d.contradict}, {"irrelevant", d.irrelevant}};
}
inline void from_json(const nlohmann::json& j, LabelDistribution& d) {
    d.entail = j.at("entail").get<double>();
    d.contradict = j.at("contradict").get<double>();
    d.irrelevant = j.at("irrelevant").get<double>();
}
inline void to_json(nlohmann::json& j, const GroundingCheck& g) {
    j = nlohmann::json{{"verdict", g.verdict},           {"relevance", g.relevance}, {"explanation", g.explanation},
                       {"distribution", g.distribution}, {"raw", g.raw}};
    j["speaker"] = g.speaker ? nlohmann::json(*g.speaker) : nlohmann::json(nullptr);
}
inline void from_json(const nlohmann::json& j, GroundingCheck& g) {
    g.verdict = j.at("verdict").get<int>();
    g.relevance = j.at("relevance").get<double>();
    g.explanation = j.value("explanation", std::string{});
    g.distribution = j.at("distribution").get<LabelDistribution>();
    g.raw = j.contains("raw") ? j["raw"].get<CompletionResult>() : CompletionResult{};
    if (j.contains("speaker") && !j["speaker"].is_null()) g.speaker = j["speaker"].get<std::string>();
    else g.speaker.reset();
}

}  // namespace normsage
