#pragma once

// Turns discovery completions into candidate norms.

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "normsage/common.hpp"
#include "normsage/templates.hpp"

namespace normsage {

struct CandidateNorm {
    std::string candidate_id;
    std::string text;
    DiscoveryVariant variant = DiscoveryVariant::base;
    std::optional<std::map<std::string, std::string>> frame;
    std::optional<std::string> culture_tag;
    std::string chunk_id;

    bool operator==(const CandidateNorm&) const = default;
};

struct ExtractionDiagnostic {
    std::string chunk_id;
    std::string raw;
};

struct ExtractionResult {
    std::vector<CandidateNorm> candidates;
    std::optional<ExtractionDiagnostic> diagnostic;
};

namespace detail {

inline std::string collapse_whitespace(std::string_view s) {
    std::string out;
    bool in_space = false;
    for (char c : text::trim(s)) {
        if (text::is_space(c)) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out.push_back(' ');
        in_space = false;
        out.push_back(c);
    }
    return out;
}

/// Length of a leading enumeration marker ("1.", "2)", "(3)", "-", "*", "•")
/// including the whitespace after it, or 0 when there is none.
inline std::size_t enumeration_prefix(std::string_view s) {
    auto followed_ok = [&](std::size_t pos) { return pos == s.size() || text::is_space(s[pos]); };
    auto skip_ws = [&](std::size_t pos) {
        while (pos < s.size() && text::is_space(s[pos])) ++pos;
        return pos;
    };
    std::size_t d = 0;
    while (d < s.size() && std::isdigit(static_cast<unsigned char>(s[d]))) ++d;
    if (d > 0 && d < s.size() && (s[d] == '.' || s[d] == ')') && followed_ok(d + 1)) return skip_ws(d + 1);
    if (s.size() >= 3 && s[0] == '(') {
        std::size_t e = 1;
        while (e < s.size() && std::isdigit(static_cast<unsigned char>(s[e]))) ++e;
        if (e > 1 && e < s.size() && s[e] == ')' && followed_ok(e + 1)) return skip_ws(e + 1);
    }
    if (!s.empty() && (s[0] == '-' || s[0] == '*') && followed_ok(1)) return skip_ws(1);
    if (s.starts_with("\xE2\x80\xA2") && followed_ok(3)) return skip_ws(3);
    return 0;
}

inline bool is_numbered_item(std::string_view line) {
    line = text::trim(line);
    return !line.empty() && std::isdigit(static_cast<unsigned char>(line[0])) && enumeration_prefix(line) > 0;
}

inline bool is_bullet_item(std::string_view line) {
    line = text::trim(line);
    return !line.empty() && !std::isdigit(static_cast<unsigned char>(line[0])) && line[0] != '(' &&
           enumeration_prefix(line) > 0;
}

inline std::string_view strip_surrounding_quotes(std::string_view s) {
    static constexpr std::pair<std::string_view, std::string_view> pairs[] = {
        {"\"", "\""}, {"'", "'"}, {"\xE2\x80\x9C", "\xE2\x80\x9D"}, {"\xE2\x80\x98", "\xE2\x80\x99"}};
    for (const auto& [open, close] : pairs)
        if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close))
            return s.substr(open.size(), s.size() - open.size() - close.size());
    return s;
}

inline bool has_content(std::string_view s) {
    for (unsigned char c : s)
        if (std::isalnum(c) || c >= 0x80) return true;
    return false;
}

}  // namespace detail

/// Canonical form of a norm sentence: trimmed, single-spaced, without
/// enumeration markers or surrounding quotes, ending in terminal punctuation.
/// Returns nullopt for a vacuous norm.
inline std::optional<std::string> normalize_norm_text(std::string_view raw) {
    std::string t = detail::collapse_whitespace(raw);
    for (;;) {
        std::string_view v = t;
        v.remove_prefix(detail::enumeration_prefix(v));
        v = detail::strip_surrounding_quotes(text::trim(v));
        std::string next = detail::collapse_whitespace(v);
        if (next == t) break;
        t = std::move(next);
    }
    if (!detail::has_content(t)) return std::nullopt;
    char last = t.back();
    if (last != '.' && last != '!' && last != '?') t.push_back('.');
    return t;
}

/// Culture adjective from a leading "In X culture," or "In X," clause.
inline std::optional<std::string> detect_culture_tag(std::string_view norm) {
    if (!norm.starts_with("In ")) return std::nullopt;
    auto comma = norm.find(',');
    if (comma == std::string_view::npos) return std::nullopt;
    auto x = text::trim(norm.substr(3, comma - 3));
    for (std::string_view suffix : {std::string_view(" cultures"), std::string_view(" culture")})
        if (x.ends_with(suffix)) {
            x.remove_suffix(suffix.size());
            x = text::trim(x);
            break;
        }
    if (x.empty() || !std::isupper(static_cast<unsigned char>(x[0]))) return std::nullopt;
    if (std::count(x.begin(), x.end(), ' ') > 3) return std::nullopt;
    return std::string(x);
}

inline std::string candidate_id_for(std::string_view chunk_id, std::string_view normalized) {
    std::string key(chunk_id);
    key.push_back('\n');
    key.append(normalized);
    return short_id(key);
}

namespace detail {

/// Groups completion lines into raw items following the precedence
/// numbered > bulleted > blank-line-separated paragraphs.
inline std::vector<std::string> split_items(std::string_view completion) {
    auto lines = text::split_lines(completion);
    // drop a conversational preamble such as "Here are some norms:"
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto t = text::trim(lines[i]);
        if (t.empty()) continue;
        if (t.back() == ':' && enumeration_prefix(t) == 0) lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(i));
        break;
    }

    bool numbered = false, bulleted = false;
    for (auto l : lines) {
        numbered = numbered || is_numbered_item(l);
        bulleted = bulleted || is_bullet_item(l);
    }

    std::vector<std::string> items;
    if (numbered || bulleted) {
        auto starts_item = numbered ? is_numbered_item : is_bullet_item;
        bool open = false;
        for (auto l : lines) {
            auto t = text::trim(l);
            if (starts_item(t)) {
                items.emplace_back(t);
                open = true;
            } else if (t.empty()) {
                open = false;
            } else if (open) {
                items.back() += " ";
                items.back() += t;
            }
        }
        return items;
    }

    std::string para;
    for (auto l : lines) {
        auto t = text::trim(l);
        if (t.empty()) {
            if (!para.empty()) items.push_back(std::move(para));
            para.clear();
            continue;
        }
        if (!para.empty()) para.push_back(' ');
        para += t;
    }
    if (!para.empty()) items.push_back(std::move(para));
    return items;
}

inline std::optional<std::string> match_frame_field(std::string_view name, const std::vector<std::string>& schema) {
    auto lname = text::to_lower(text::trim(name));
    for (const auto& field : schema) {
        if (text::to_lower(field) == lname) return field;
        std::string_view f = field;
        std::size_t start = 0;
        while (start <= f.size()) {
            auto slash = f.find('/', start);
            auto part = f.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start);
            if (text::to_lower(text::trim(part)) == lname) return field;
            if (slash == std::string_view::npos) break;
            start = slash + 1;
        }
    }
    return std::nullopt;
}

inline std::string synthesize_from_frame(const std::map<std::string, std::string>& frame,
                                         const std::vector<std::string>& schema) {
    auto role = [&](std::string_view needle) -> std::optional<std::string> {
        for (const auto& field : schema)
            if (text::contains_icase(field, needle)) {
                auto it = frame.find(field);
                if (it != frame.end()) return it->second;
            }
        return std::nullopt;
    };
    auto group = role("culture") ? role("culture") : role("group");
    auto context = role("context");
    auto judgment = role("judgment");
    auto behavior = role("behavior");
    if (judgment && behavior) {
        std::string s;
        if (group) s += "In " + *group + " culture, ";
        if (context) s += "when " + *context + ", ";
        s += "it is " + *judgment + " to " + *behavior;
        if (!s.empty() && std::islower(static_cast<unsigned char>(s[0])))
            s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
        return s;
    }
    std::string s;
    for (const auto& field : schema) {
        auto it = frame.find(field);
        if (it == frame.end()) continue;
        if (!s.empty()) s += "; ";
        s += field + ": " + it->second;
    }
    return s;
}

}  // namespace detail

/// Splits a discovery completion into candidate norms.
inline ExtractionResult parse_norms(std::string_view completion, DiscoveryVariant variant, std::string_view chunk_id,
                                    const std::vector<std::string>& frame_schema = defaults::frame_fields()) {
    ExtractionResult result;
    auto emit = [&](std::string_view raw_text, std::optional<std::map<std::string, std::string>> frame,
                    std::optional<std::string> tag) {
        auto norm = normalize_norm_text(raw_text);
        if (!norm) return;
        CandidateNorm c;
        c.text = std::move(*norm);
        c.candidate_id = candidate_id_for(chunk_id, c.text);
        c.variant = variant;
        c.frame = std::move(frame);
        c.culture_tag = tag ? tag : (variant == DiscoveryVariant::culture ? detect_culture_tag(c.text) : std::nullopt);
        if (c.culture_tag && c.text.find(*c.culture_tag) == std::string::npos) c.culture_tag.reset();
        c.chunk_id = std::string(chunk_id);
        result.candidates.push_back(std::move(c));
    };

    if (variant == DiscoveryVariant::framed) {
        // blocks are separated by blank lines or enumeration markers
        std::vector<std::vector<std::string_view>> blocks(1);
        for (auto l : text::split_lines(completion)) {
            auto t = text::trim(l);
            if (t.empty()) {
                if (!blocks.back().empty()) blocks.emplace_back();
                continue;
            }
            auto prefix = detail::enumeration_prefix(t);
            if (prefix > 0 && !blocks.back().empty()) blocks.emplace_back();
            t.remove_prefix(prefix);
            if (!t.empty()) blocks.back().push_back(t);
        }
        for (const auto& block : blocks) {
            if (block.empty()) continue;
            std::map<std::string, std::string> frame;
            std::string loose;
            for (auto line : block) {
                auto colon = line.find(':');
                std::optional<std::string> field;
                if (colon != std::string_view::npos) field = detail::match_frame_field(line.substr(0, colon), frame_schema);
                if (field) {
                    auto value = detail::collapse_whitespace(line.substr(colon + 1));
                    if (!value.empty()) frame[*field] = value;
                } else {
                    if (!loose.empty()) loose.push_back(' ');
                    loose += line;
                }
            }
            if (frame.empty()) {
                if (!text::trim(loose).empty() && text::trim(loose).back() != ':') emit(loose, std::nullopt, std::nullopt);
                continue;
            }
            std::optional<std::string> tag;
            for (const auto& field : frame_schema)
                if ((text::contains_icase(field, "culture") || text::contains_icase(field, "group")) && frame.count(field))
                    tag = frame.at(field);
            auto sentence = detail::synthesize_from_frame(frame, frame_schema);
            emit(sentence, std::move(frame), tag);
        }
    } else {
        for (const auto& item : detail::split_items(completion)) emit(item, std::nullopt, std::nullopt);
    }

    if (result.candidates.empty() && !text::trim(completion).empty())
        result.diagnostic = ExtractionDiagnostic{std::string(chunk_id), std::string(completion)};
    return result;
}

inline void to_json(nlohmann::json& j, const CandidateNorm& c) {
    j = nlohmann::json{{"candidate_id", c.candidate_id},
                       {"text", c.text},
                       {"variant", to_string(c.variant)},
                       {"chunk_id", c.chunk_id}};
    if (c.frame) j["frame"] = *c.frame;
    if (c.culture_tag) j["culture_tag"] = *c.culture_tag;
}

}  // namespace normsage
