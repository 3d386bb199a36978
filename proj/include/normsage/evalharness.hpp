#pragma once

// Accuracy and ROC-AUC for correctness and grounding predictions against
// gold annotations.

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "normsage/ingest.hpp"
#include "normsage/llm_backend.hpp"
#include "normsage/templates.hpp"
#include "normsage/verification.hpp"

namespace normsage {

class UndefinedAucError : public Error {
public:
    using Error::Error;
};

enum class EvalTask { grounding2, grounding3, correctness };

inline EvalTask parse_eval_task(std::string_view s) {
    if (s == "grounding2") return EvalTask::grounding2;
    if (s == "grounding3") return EvalTask::grounding3;
    if (s == "correctness") return EvalTask::correctness;
    throw ConfigError("unknown eval task '" + std::string(s) + "'");
}

enum class AucAveraging { macro, micro };

struct EvalExample {
    DialogueChunk chunk;
    std::string norm_text;
    std::optional<std::string> speaker;
    int gold = 0;
    std::optional<std::string> gold_explanation;
};

struct EvalReport {
    std::size_t n = 0;
    double accuracy = 0.0;
    double auc = 0.0;
    std::vector<int> labels;                          // row/column order of the confusion matrix
    std::vector<std::vector<std::size_t>> confusion;  // [gold][predicted]
    std::map<int, double> per_class_auc;              // 3-class only
};

/// Rank-based (Mann-Whitney) AUC; tied scores get mid-ranks, which credits
/// each tied positive/negative pair with 0.5.
inline double auc_binary(std::vector<std::pair<double, bool>> scores) {
    std::size_t n_pos = 0, n_neg = 0;
    for (const auto& s : scores) (s.second ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) throw UndefinedAucError("AUC is undefined without both positive and negative examples");

    std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    double rank_sum = 0.0;  // sum of 2*midrank over positives, kept integral
    for (std::size_t i = 0; i < scores.size();) {
        std::size_t j = i;
        while (j < scores.size() && scores[j].first == scores[i].first) ++j;
        double twice_midrank = static_cast<double>(i + 1 + j);  // (i+1 + j) = 2 * average of ranks i+1..j
        for (std::size_t t = i; t < j; ++t)
            if (scores[t].second) rank_sum += twice_midrank;
        i = j;
    }
    double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    double u_twice = rank_sum - np * (np + 1.0);
    return (u_twice / 2.0) / (np * nn);
}

namespace detail {

inline void require_aligned(std::size_t a, std::size_t b) {
    if (a != b)
        throw PreconditionError("examples and predictions differ in length (" + std::to_string(a) + " vs " +
                                std::to_string(b) + ")");
}

inline EvalReport confusion_report(const std::vector<int>& labels, const std::vector<int>& gold,
                                   const std::vector<int>& predicted) {
    EvalReport r;
    r.n = gold.size();
    r.labels = labels;
    r.confusion.assign(labels.size(), std::vector<std::size_t>(labels.size(), 0));
    auto idx = [&](int label) {
        return static_cast<std::size_t>(std::find(labels.begin(), labels.end(), label) - labels.begin());
    };
    std::size_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        ++r.confusion[idx(gold[i])][idx(predicted[i])];
        if (gold[i] == predicted[i]) ++correct;
    }
    r.accuracy = r.n ? static_cast<double>(correct) / static_cast<double>(r.n) : 0.0;
    return r;
}

}  // namespace detail

/// Relevant (entail or contradict) vs irrelevant; score = relevance,
/// decision = relevance >= gamma.
inline EvalReport eval_grounding_2class(const std::vector<EvalExample>& examples,
                                        const std::vector<GroundingCheck>& predictions, double gamma) {
    detail::require_aligned(examples.size(), predictions.size());
    std::vector<int> gold, pred;
    std::vector<std::pair<double, bool>> scores;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        bool relevant = examples[i].gold != 0;
        gold.push_back(relevant ? 1 : 0);
        pred.push_back(passes_grounding(predictions[i], gamma) ? 1 : 0);
        scores.emplace_back(predictions[i].relevance, relevant);
    }
    auto r = detail::confusion_report({1, 0}, gold, pred);
    r.auc = auc_binary(std::move(scores));
    return r;
}

/// Entail / contradict / irrelevant; accuracy over verdicts, AUC from the
/// per-class probability mass (one-vs-rest, macro or micro averaged).
inline EvalReport eval_grounding_3class(const std::vector<EvalExample>& examples,
                                        const std::vector<GroundingCheck>& predictions, bool localized,
                                        AucAveraging averaging = AucAveraging::macro) {
    detail::require_aligned(examples.size(), predictions.size());
    if (localized)
        for (std::size_t i = 0; i < examples.size(); ++i)
            if (!examples[i].speaker)
                throw PreconditionError("localized evaluation needs a speaker on example " + std::to_string(i));
    std::vector<int> gold, pred;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& d = predictions[i].distribution;
        if (!(d.entail + d.contradict + d.irrelevant > 0.0))
            throw PreconditionError("prediction " + std::to_string(i) + " has no per-class probabilities");
        gold.push_back(examples[i].gold);
        pred.push_back(predictions[i].verdict);
    }
    const std::vector<int> labels{-1, 0, 1};
    auto r = detail::confusion_report(labels, gold, pred);
    std::vector<std::pair<double, bool>> pooled;
    for (int c : labels) {
        std::vector<std::pair<double, bool>> scores;
        for (std::size_t i = 0; i < examples.size(); ++i)
            scores.emplace_back(predictions[i].distribution.of(c), examples[i].gold == c);
        pooled.insert(pooled.end(), scores.begin(), scores.end());
        r.per_class_auc[c] = auc_binary(std::move(scores));
    }
    if (averaging == AucAveraging::macro) {
        double sum = 0.0;
        for (const auto& [c, a] : r.per_class_auc) sum += a;
        r.auc = sum / static_cast<double>(r.per_class_auc.size());
    } else {
        r.auc = auc_binary(std::move(pooled));
    }
    return r;
}

/// Correct (+1) vs incorrect (-1); score = confidence, decision = verdict yes
/// with confidence >= theta.
inline EvalReport eval_correctness(const std::vector<EvalExample>& examples,
                                   const std::vector<CorrectnessCheck>& predictions, double theta) {
    detail::require_aligned(examples.size(), predictions.size());
    std::vector<int> gold, pred;
    std::vector<std::pair<double, bool>> scores;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        gold.push_back(examples[i].gold);
        pred.push_back(passes_correctness(predictions[i], theta) ? 1 : -1);
        scores.emplace_back(predictions[i].confidence, examples[i].gold == 1);
    }
    auto r = detail::confusion_report({1, -1}, gold, pred);
    r.auc = auc_binary(std::move(scores));
    return r;
}

/// Reads a gold file: one JSON record per line with
/// {dialogue: [..] | "..", norm, speaker?, gold, explanation?}.
inline std::vector<EvalExample> load_gold(const std::filesystem::path& path, EvalTask task) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read gold file " + path.string());
    std::vector<EvalExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(line_no, std::string("malformed gold record: ") + e.what());
        }
        if (!j.is_object()) throw ParseError(line_no, "gold record is not an object");
        EvalExample ex;
        if (!j.contains("norm") || !j["norm"].is_string() || text::trim(j["norm"].get<std::string>()).empty())
            throw ParseError(line_no, "missing norm");
        ex.norm_text = j["norm"].get<std::string>();
        if (!j.contains("gold") || !j["gold"].is_number_integer()) throw ParseError(line_no, "missing integer gold label");
        ex.gold = j["gold"].get<int>();
        bool valid = task == EvalTask::correctness ? (ex.gold == 1 || ex.gold == -1)
                                                   : (ex.gold == 1 || ex.gold == 0 || ex.gold == -1);
        if (!valid) throw ParseError(line_no, "gold label " + std::to_string(ex.gold) + " is outside the task's label set");

        std::string dialogue;
        if (j.contains("dialogue")) {
            if (j["dialogue"].is_array()) {
                for (const auto& l : j["dialogue"]) {
                    if (!l.is_string()) throw ParseError(line_no, "dialogue lines must be text");
                    dialogue += l.get<std::string>() + "\n";
                }
            } else if (j["dialogue"].is_string()) {
                dialogue = j["dialogue"].get<std::string>();
            } else {
                throw ParseError(line_no, "dialogue must be a list of lines or text");
            }
        }
        auto source = "gold:" + std::to_string(line_no);
        auto utts = parse_transcript(dialogue, TranscriptFormat::plain, source);
        if (utts.empty() && task != EvalTask::correctness) throw ParseError(line_no, "grounding example has no dialogue");
        if (!utts.empty()) ex.chunk = chunk_dialogue(utts, utts.size(), source).front();
        if (j.contains("speaker") && !j["speaker"].is_null()) {
            ex.speaker = j["speaker"].get<std::string>();
            if (!ex.chunk.has_speaker(*ex.speaker))
                throw ParseError(line_no, "speaker '" + *ex.speaker + "' does not appear in the dialogue");
        }
        if (j.contains("explanation") && j["explanation"].is_string()) ex.gold_explanation = j["explanation"].get<std::string>();
        out.push_back(std::move(ex));
    }
    return out;
}

/// Collects grounding predictions; with `localized` the speaker-localized
/// question is asked for every example.
inline std::vector<GroundingCheck> predict_grounding(const std::vector<EvalExample>& examples,
                                                     CompletionBackend& backend, const TemplateStore& templates,
                                                     bool localized,
                                                     RelevanceMode mode = RelevanceMode::combined_mass) {
    std::vector<GroundingCheck> out;
    for (const auto& ex : examples) {
        std::optional<std::string> speaker = localized ? ex.speaker : std::nullopt;
        if (localized && !speaker) throw PreconditionError("localized evaluation needs speakers in the gold file");
        auto g = parse_grounding(backend.complete(templates.render_grd(ex.chunk, ex.norm_text, speaker)), mode);
        g.speaker = speaker;
        out.push_back(std::move(g));
    }
    return out;
}

inline std::vector<CorrectnessCheck> predict_correctness(const std::vector<EvalExample>& examples,
                                                         CompletionBackend& backend, const TemplateStore& templates) {
    std::vector<CorrectnessCheck> out;
    for (const auto& ex : examples) out.push_back(parse_correctness(backend.complete(templates.render_cor(ex.norm_text))));
    return out;
}

inline nlohmann::json to_json_report(const EvalReport& r) {
    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& [c, a] : r.per_class_auc) per_class[std::to_string(c)] = a;
    return nlohmann::json{{"n", r.n},
                          {"accuracy", r.accuracy},
                          {"auc", r.auc},
                          {"labels", r.labels},
                          {"confusion", r.confusion},
                          {"per_class_auc", per_class}};
}

inline std::string format_report(const EvalReport& r, std::string_view title) {
    std::ostringstream os;
    os << title << "\n";
    os << "  n        " << r.n << "\n";
    os << std::fixed << std::setprecision(1);
    os << "  Acc      " << 100.0 * r.accuracy << "%\n";
    os << "  AUC      " << 100.0 * r.auc << "%\n";
    for (const auto& [c, a] : r.per_class_auc) os << "  AUC[" << std::showpos << c << std::noshowpos << "]  " << 100.0 * a << "%\n";
    os << "  confusion (rows gold, cols predicted):\n        ";
    for (int l : r.labels) os << std::setw(6) << l;
    os << "\n";
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
        os << "  " << std::setw(6) << r.labels[i];
        for (auto v : r.confusion[i]) os << std::setw(6) << v;
        os << "\n";
    }
    return os.str();
}

}  // namespace normsage
