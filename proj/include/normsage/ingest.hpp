#pragma once

// Transcript parsing and k-line dialogue windowing.

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "normsage/common.hpp"

namespace normsage {

struct Utterance {
    std::size_t index = 0;
    std::optional<std::string> speaker;
    std::string text;
    std::string lang = "en";

    bool operator==(const Utterance&) const = default;
};

struct SourceMeta {
    std::string source_id;
    std::string title;
    std::optional<std::string> background;
    std::string declared_lang = "en";
    std::map<std::string, std::string> culture_indicators;

    bool operator==(const SourceMeta&) const = default;
};

struct DialogueChunk {
    std::string chunk_id;
    std::string source_id;
    std::vector<Utterance> utterances;
    std::string lang = "en";

    bool operator==(const DialogueChunk&) const = default;

    bool has_speaker(std::string_view name) const {
        for (const auto& u : utterances)
            if (u.speaker && *u.speaker == name) return true;
        return false;
    }

    std::vector<std::string> speakers() const {
        std::vector<std::string> out;
        for (const auto& u : utterances)
            if (u.speaker && std::find(out.begin(), out.end(), *u.speaker) == out.end())
                out.push_back(*u.speaker);
        return out;
    }
};

enum class TranscriptFormat { plain, records };

inline void to_json(nlohmann::json& j, const Utterance& u) {
    j = nlohmann::json{{"index", u.index}, {"text", u.text}, {"lang", u.lang}};
    if (u.speaker) j["speaker"] = *u.speaker;
}

inline void from_json(const nlohmann::json& j, Utterance& u) {
    u.index = j.value("index", std::size_t{0});
    u.text = j.at("text").get<std::string>();
    u.lang = j.value("lang", std::string("en"));
    if (j.contains("speaker") && !j["speaker"].is_null()) u.speaker = j["speaker"].get<std::string>();
    else u.speaker.reset();
}

inline void to_json(nlohmann::json& j, const DialogueChunk& c) {
    j = nlohmann::json{{"chunk_id", c.chunk_id},
                       {"source_id", c.source_id},
                       {"utterances", c.utterances},
                       {"lang", c.lang}};
}

inline void from_json(const nlohmann::json& j, DialogueChunk& c) {
    c.chunk_id = j.at("chunk_id").get<std::string>();
    c.source_id = j.at("source_id").get<std::string>();
    c.utterances = j.at("utterances").get<std::vector<Utterance>>();
    c.lang = j.value("lang", std::string("en"));
}

namespace detail {

inline Utterance parse_plain_line(std::string_view line, std::size_t index, const std::string& lang) {
    Utterance u;
    u.index = index;
    u.lang = lang;
    auto sep = line.find(": ");
    if (sep != std::string_view::npos) {
        auto speaker = text::trim(line.substr(0, sep));
        auto body = text::trim(line.substr(sep + 2));
        if (!speaker.empty() && !body.empty()) {
            u.speaker = std::string(speaker);
            u.text = std::string(body);
            return u;
        }
    }
    u.text = std::string(line);
    return u;
}

inline Utterance parse_record_line(std::string_view line, std::size_t line_no, std::size_t index,
                                   const std::string& lang) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(line_no, std::string("malformed record: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(line_no, "record is not an object");
    if (!j.contains("text") || !j["text"].is_string())
        throw ParseError(line_no, "record has no text field");
    Utterance u;
    u.index = index;
    u.text = std::string(text::trim(j["text"].get<std::string>()));
    if (u.text.empty()) throw ParseError(line_no, "record text is empty");
    u.lang = lang;
    if (j.contains("speaker") && !j["speaker"].is_null()) {
        if (!j["speaker"].is_string()) throw ParseError(line_no, "speaker must be text");
        auto s = std::string(text::trim(j["speaker"].get<std::string>()));
        if (s.empty()) throw ParseError(line_no, "speaker is empty");
        u.speaker = std::move(s);
    }
    if (j.contains("lang") && !j["lang"].is_null()) {
        if (!j["lang"].is_string() || j["lang"].get<std::string>().empty())
            throw ParseError(line_no, "lang must be a non-empty code");
        u.lang = j["lang"].get<std::string>();
    }
    return u;
}

}  // namespace detail

/// Parses a transcript into utterances in file order. Blank lines are skipped.
/// Plain lines split on the first ": " into speaker and text.
inline std::vector<Utterance> parse_transcript(std::string_view raw, TranscriptFormat format,
                                               std::string_view source_id,
                                               const std::string& default_lang = "en") {
    (void)source_id;
    std::vector<Utterance> out;
    std::size_t line_no = 0;
    for (auto line : text::split_lines(raw)) {
        ++line_no;
        auto trimmed = text::trim(line);
        if (trimmed.empty()) continue;
        if (format == TranscriptFormat::plain)
            out.push_back(detail::parse_plain_line(trimmed, out.size(), default_lang));
        else
            out.push_back(detail::parse_record_line(trimmed, line_no, out.size(), default_lang));
    }
    return out;
}

/// Serializes utterances to the "records" transcript format (one JSON object per line).
inline std::string to_records(const std::vector<Utterance>& utts) {
    std::string out;
    for (const auto& u : utts) {
        nlohmann::json j{{"text", u.text}, {"lang", u.lang}};
        if (u.speaker) j["speaker"] = *u.speaker;
        out += j.dump();
        out += '\n';
    }
    return out;
}

/// Non-overlapping windows of k utterances; a trailing partial window is kept.
inline std::vector<DialogueChunk> chunk_dialogue(const std::vector<Utterance>& utts, std::size_t k,
                                                 std::string_view source_id = "src") {
    if (k == 0) throw PreconditionError("chunk size k must be >= 1");
    std::vector<DialogueChunk> chunks;
    for (std::size_t start = 0; start < utts.size(); start += k) {
        DialogueChunk c;
        c.source_id = std::string(source_id);
        auto end = std::min(utts.size(), start + k);
        c.utterances.assign(utts.begin() + static_cast<std::ptrdiff_t>(start),
                            utts.begin() + static_cast<std::ptrdiff_t>(end));
        c.chunk_id = c.source_id + "#" + std::to_string(c.utterances.front().index);
        c.lang = c.utterances.front().lang;
        chunks.push_back(std::move(c));
    }
    return chunks;
}

inline SourceMeta attach_background(SourceMeta meta, std::string_view background) {
    auto t = text::trim(background);
    if (!t.empty()) meta.background = std::string(background);
    return meta;
}

}  // namespace normsage
