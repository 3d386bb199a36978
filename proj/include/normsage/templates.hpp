#pragma once

// Prompt templates for discovery, correctness, grounding and cultural-indicator
// extraction. Template wording lives in editable files; built-in defaults are
// used for any id without a file.

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "normsage/common.hpp"
#include "normsage/ingest.hpp"

namespace normsage {

enum class TemplateId { dvr_base, dvr_framed, dvr_culture, cor, grd, grd_speaker, culture_extract };

inline constexpr std::array<TemplateId, 7> kAllTemplateIds{
    TemplateId::dvr_base, TemplateId::dvr_framed, TemplateId::dvr_culture, TemplateId::cor,
    TemplateId::grd,      TemplateId::grd_speaker, TemplateId::culture_extract};

inline std::string_view to_string(TemplateId id) {
    switch (id) {
        case TemplateId::dvr_base: return "dvr_base";
        case TemplateId::dvr_framed: return "dvr_framed";
        case TemplateId::dvr_culture: return "dvr_culture";
        case TemplateId::cor: return "cor";
        case TemplateId::grd: return "grd";
        case TemplateId::grd_speaker: return "grd_speaker";
        case TemplateId::culture_extract: return "culture_extract";
    }
    return "?";
}

enum class DiscoveryVariant { base, framed, culture };

inline std::string_view to_string(DiscoveryVariant v) {
    switch (v) {
        case DiscoveryVariant::base: return "base";
        case DiscoveryVariant::framed: return "framed";
        case DiscoveryVariant::culture: return "culture";
    }
    return "?";
}

inline DiscoveryVariant parse_variant(std::string_view s) {
    if (s == "base") return DiscoveryVariant::base;
    if (s == "framed") return DiscoveryVariant::framed;
    if (s == "culture") return DiscoveryVariant::culture;
    throw ConfigError("unknown discovery variant '" + std::string(s) + "'");
}

struct Decoding {
    double temperature = 0.0;
    int max_tokens = 256;
    bool want_logprobs = false;

    bool operator==(const Decoding&) const = default;
};

struct RenderedPrompt {
    TemplateId template_id = TemplateId::dvr_base;
    std::string text;
    Decoding decoding;
};

namespace defaults {

// The dvr wordings are reconstructions; cor, grd, grd_speaker and
// culture_extract follow the published wording.
inline constexpr std::string_view dvr_base =
    "The following is a conversation between the speakers listed before each line.\n"
    "\n"
    "{dialogue}\n"
    "\n"
    "What are the social norms that can be learned from this conversation? "
    "Write each norm as a self-contained sentence that pairs a judgment with a behavior, "
    "and list them as a numbered list.\n";

inline constexpr std::string_view dvr_framed =
    "The following is a conversation between the speakers listed before each line.\n"
    "\n"
    "{dialogue}\n"
    "\n"
    "Describe each norm using this frame, one field per line, "
    "with a blank line between norms:\n"
    "{frames}\n"
    "\n"
    "What are the social norms that can be learned from this conversation?\n";

inline constexpr std::string_view dvr_culture =
    "The following is a conversation between the speakers listed before each line.\n"
    "\n"
    "{dialogue}\n"
    "\n"
    "Cultural background of the speakers:\n"
    "{indicators}\n"
    "\n"
    "What are the culture-specific social norms that can be learned from this conversation? "
    "Begin each norm with \"In <culture> culture,\" and list them as a numbered list.\n";

inline constexpr std::string_view cor =
    "Consider this sentence: {norm}. Is this a correct/acceptable social norm? "
    "Answer 'yes' or 'no', and then explain why.";

inline constexpr std::string_view grd =
    "Conversation:\n"
    "{dialogue}\n"
    "\n"
    "Norm: \"{norm}\"\n"
    "\n"
    "Explain whether the conversation entails, contradicts, or is irrelevant with the given norm.";

inline constexpr std::string_view grd_speaker =
    "Conversation:\n"
    "{dialogue}\n"
    "\n"
    "Norm: \"{norm}\"\n"
    "\n"
    "Explain whether what's spoken by {speaker} entails, contradicts, or is irrelevant with the norm.";

inline constexpr std::string_view culture_extract =
    "Context:\n"
    "{background}\n"
    "\n"
    "For each person, extract the country- or state- level culture they are affiliated "
    "(in adjective form) if the information is available, and skip the person if the "
    "information is not available:\n";

inline std::string_view text_for(TemplateId id) {
    switch (id) {
        case TemplateId::dvr_base: return dvr_base;
        case TemplateId::dvr_framed: return dvr_framed;
        case TemplateId::dvr_culture: return dvr_culture;
        case TemplateId::cor: return cor;
        case TemplateId::grd: return grd;
        case TemplateId::grd_speaker: return grd_speaker;
        case TemplateId::culture_extract: return culture_extract;
    }
    return {};
}

inline const std::vector<std::string>& frame_fields() {
    static const std::vector<std::string> fields{"Group/Culture", "Context", "Judgment", "Behavior"};
    return fields;
}

}  // namespace defaults

inline const std::set<std::string>& known_placeholders() {
    static const std::set<std::string> names{"dialogue",   "norm",       "speaker",
                                             "background", "indicators", "frames"};
    return names;
}

inline std::set<std::string> required_placeholders(TemplateId id) {
    switch (id) {
        case TemplateId::dvr_base: return {"dialogue"};
        case TemplateId::dvr_framed: return {"dialogue", "frames"};
        case TemplateId::dvr_culture: return {"dialogue", "indicators"};
        case TemplateId::cor: return {"norm"};
        case TemplateId::grd: return {"dialogue", "norm"};
        case TemplateId::grd_speaker: return {"dialogue", "norm", "speaker"};
        case TemplateId::culture_extract: return {"background"};
    }
    return {};
}

/// Names of all `{name}` placeholders occurring in a template body.
inline std::vector<std::string> scan_placeholders(std::string_view body) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '{') continue;
        std::size_t j = i + 1;
        while (j < body.size() && (std::islower(static_cast<unsigned char>(body[j])) || body[j] == '_')) ++j;
        if (j < body.size() && body[j] == '}' && j > i + 1) out.emplace_back(body.substr(i + 1, j - i - 1));
    }
    return out;
}

/// Single-pass substitution: payload text is never rescanned for placeholders.
inline std::string substitute(std::string_view body, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(body.size() + 256);
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] == '{') {
            auto close = body.find('}', i + 1);
            if (close != std::string_view::npos) {
                auto it = values.find(std::string(body.substr(i + 1, close - i - 1)));
                if (it != values.end()) {
                    out += it->second;
                    i = close;
                    continue;
                }
            }
        }
        out.push_back(body[i]);
    }
    return out;
}

inline std::string serialize_dialogue(const DialogueChunk& chunk) {
    std::string out;
    for (std::size_t i = 0; i < chunk.utterances.size(); ++i) {
        const auto& u = chunk.utterances[i];
        if (i) out.push_back('\n');
        if (u.speaker) out += *u.speaker + ": ";
        out += u.text;
    }
    return out;
}

class TemplateStore {
public:
    /// Store populated with the built-in defaults.
    TemplateStore() {
        for (auto id : kAllTemplateIds) set(id, std::string(defaults::text_for(id)));
        frame_fields_ = defaults::frame_fields();
    }

    /// Loads `<id>.txt` files from `dir`; ids without a file keep their defaults.
    /// An optional `frames.txt` lists one frame field per line.
    static TemplateStore from_directory(const std::filesystem::path& dir) {
        if (!std::filesystem::is_directory(dir))
            throw ConfigError("template directory not found: " + dir.string());
        TemplateStore store;
        for (auto id : kAllTemplateIds) {
            auto file = dir / (std::string(to_string(id)) + ".txt");
            if (std::filesystem::exists(file)) store.set(id, read_file(file));
        }
        auto frames = dir / "frames.txt";
        if (std::filesystem::exists(frames)) {
            std::vector<std::string> fields;
            auto body = read_file(frames);
            for (auto line : text::split_lines(body)) {
                auto t = text::trim(line);
                if (!t.empty()) fields.emplace_back(t);
            }
            if (fields.empty()) throw ConfigError("frames.txt declares no fields");
            store.frame_fields_ = std::move(fields);
        }
        return store;
    }

    /// Validates and installs a template body.
    void set(TemplateId id, std::string body) {
        auto found = scan_placeholders(body);
        for (const auto& name : found)
            if (!known_placeholders().count(name))
                throw ConfigError("template " + std::string(to_string(id)) + ": unknown placeholder {" + name + "}");
        for (const auto& name : required_placeholders(id)) {
            auto n = std::count(found.begin(), found.end(), name);
            if (n != 1)
                throw ConfigError("template " + std::string(to_string(id)) + ": placeholder {" + name +
                                  "} must appear exactly once");
        }
        bodies_[id] = std::move(body);
    }

    const std::string& body(TemplateId id) const { return bodies_.at(id); }
    const std::vector<std::string>& frame_fields() const { return frame_fields_; }
    void set_frame_fields(std::vector<std::string> fields) { frame_fields_ = std::move(fields); }

    Decoding dvr_decoding() const { return dvr_decoding_; }
    void set_dvr_decoding(Decoding d) { dvr_decoding_ = d; }

    RenderedPrompt render_dvr(const DialogueChunk& chunk, DiscoveryVariant variant, const SourceMeta& meta) const {
        std::map<std::string, std::string> values{{"dialogue", serialize_dialogue(chunk)}};
        TemplateId id = TemplateId::dvr_base;
        if (variant == DiscoveryVariant::framed) {
            id = TemplateId::dvr_framed;
            std::string frames;
            for (std::size_t i = 0; i < frame_fields_.size(); ++i) {
                if (i) frames.push_back('\n');
                frames += frame_fields_[i] + ": ...";
            }
            values["frames"] = std::move(frames);
        } else if (variant == DiscoveryVariant::culture) {
            if (meta.culture_indicators.empty())
                throw PreconditionError("source '" + meta.source_id +
                                        "' has no cultural indicators for the culture variant");
            id = TemplateId::dvr_culture;
            std::string lines;
            for (const auto& [name, culture] : meta.culture_indicators) {
                if (!lines.empty()) lines.push_back('\n');
                lines += name + ": " + culture;
            }
            values["indicators"] = std::move(lines);
        }
        return {id, substitute(body(id), values), dvr_decoding_};
    }

    RenderedPrompt render_cor(std::string_view norm_text) const {
        if (text::trim(norm_text).empty()) throw PreconditionError("norm text is empty");
        return {TemplateId::cor, substitute(body(TemplateId::cor), {{"norm", std::string(norm_text)}}),
                Decoding{0.0, 128, true}};
    }

    RenderedPrompt render_grd(const DialogueChunk& chunk, std::string_view norm_text,
                              const std::optional<std::string>& speaker = std::nullopt) const {
        if (text::trim(norm_text).empty()) throw PreconditionError("norm text is empty");
        std::map<std::string, std::string> values{{"dialogue", serialize_dialogue(chunk)},
                                                   {"norm", std::string(norm_text)}};
        TemplateId id = TemplateId::grd;
        if (speaker) {
            if (!chunk.has_speaker(*speaker)) {
                std::string avail;
                for (const auto& s : chunk.speakers()) avail += (avail.empty() ? "" : ", ") + s;
                throw PreconditionError("speaker '" + *speaker + "' not in dialogue; available: [" + avail + "]");
            }
            id = TemplateId::grd_speaker;
            values["speaker"] = *speaker;
        }
        return {id, substitute(body(id), values), Decoding{0.0, 128, true}};
    }

    RenderedPrompt render_culture_extract(const SourceMeta& meta) const {
        if (!meta.background) throw PreconditionError("source '" + meta.source_id + "' has no background");
        return {TemplateId::culture_extract,
                substitute(body(TemplateId::culture_extract), {{"background", *meta.background}}),
                Decoding{0.0, 128, false}};
    }

private:
    static std::string read_file(const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw ConfigError("cannot read template file " + p.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    std::map<TemplateId, std::string> bodies_;
    std::vector<std::string> frame_fields_;
    Decoding dvr_decoding_{0.7, 256, false};
};

/// Parses "Name: Culture" lines from a cultural-indicator completion.
/// Leading bullets or enumeration markers are tolerated; other lines are ignored.
inline std::map<std::string, std::string> parse_culture_indicators(std::string_view completion) {
    std::map<std::string, std::string> out;
    for (auto raw : text::split_lines(completion)) {
        auto line = text::trim(raw);
        // strip "-", "*", "•", "1.", "2)" prefixes
        if (line.starts_with("- ") || line.starts_with("* ")) line.remove_prefix(2);
        else if (line.starts_with("\xE2\x80\xA2")) line.remove_prefix(3);
        else {
            std::size_t d = 0;
            while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
            if (d > 0 && d < line.size() && (line[d] == '.' || line[d] == ')')) line.remove_prefix(d + 1);
        }
        line = text::trim(line);
        auto sep = line.find(':');
        if (sep == std::string_view::npos) continue;
        auto name = text::trim(line.substr(0, sep));
        auto culture = text::trim(line.substr(sep + 1));
        if (name.empty() || culture.empty()) continue;
        out[std::string(name)] = std::string(culture);
    }
    return out;
}

}  // namespace normsage
