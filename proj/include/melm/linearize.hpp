#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "melm/corpus.hpp"
#include "melm/errors.hpp"

namespace melm {

// Rendered marker forms: ⟨B-ORG⟩, ⟨De⟩. Stable and configuration-visible.
inline std::string render_label_marker(const Tag& tag) {
    return std::string(kMarkerOpen) + tag.str() + kMarkerClose;
}

inline std::string render_lang_marker(const std::string& language) {
    return std::string(kMarkerOpen) + language + kMarkerClose;
}

enum class ItemKind { surface, label_marker, lang_marker };

struct LinItem {
    ItemKind kind = ItemKind::surface;
    std::string text;  // surface form, or the rendered marker
    Tag tag;           // tag of the surface token / of the label marker
    std::string lang;  // payload of a language marker

    static LinItem surface(std::string token, Tag tag) {
        return {ItemKind::surface, std::move(token), std::move(tag), {}};
    }
    static LinItem label(const Tag& tag) {
        return {ItemKind::label_marker, render_label_marker(tag), tag, {}};
    }
    static LinItem language(const std::string& lang) {
        return {ItemKind::lang_marker, render_lang_marker(lang), Tag::o(), lang};
    }

    friend bool operator==(const LinItem&, const LinItem&) = default;
};

// A sentence with label (and optionally language) markers injected around
// every entity token. Each entity token i with tag T becomes
//   ⟨T⟩ [⟨lang⟩] token_i ⟨T⟩
// while O tokens pass through unchanged.
struct LinearizedSequence {
    std::vector<LinItem> items;
    Sentence origin;

    std::size_t size() const { return items.size(); }

    friend bool operator==(const LinearizedSequence&, const LinearizedSequence&) = default;
};

inline LinearizedSequence linearize(const Sentence& sentence, bool with_language_markers) {
    LinearizedSequence seq;
    seq.origin = sentence;
    seq.items.reserve(sentence.size() * 3);
    for (std::size_t i = 0; i < sentence.size(); ++i) {
        const Tag& tag = sentence.tags[i];
        if (tag.is_o()) {
            seq.items.push_back(LinItem::surface(sentence.tokens[i], tag));
            continue;
        }
        seq.items.push_back(LinItem::label(tag));
        if (with_language_markers)
            seq.items.push_back(LinItem::language(sentence.token_language(i)));
        seq.items.push_back(LinItem::surface(sentence.tokens[i], tag));
        seq.items.push_back(LinItem::label(tag));
    }
    return seq;
}

// Strips markers and reconstructs tags from the enclosing label markers.
// Throws StructureError on unmatched or crossing markers, which signals
// corrupted generation output.
inline Sentence delinearize(const LinearizedSequence& seq) {
    Sentence out;
    out.language = seq.origin.language;
    std::vector<std::optional<std::string>> marker_langs;
    const auto& items = seq.items;
    std::size_t i = 0;
    while (i < items.size()) {
        const LinItem& item = items[i];
        if (item.kind == ItemKind::surface) {
            out.tokens.push_back(item.text);
            out.tags.push_back(Tag::o());
            marker_langs.emplace_back();
            ++i;
            continue;
        }
        if (item.kind == ItemKind::lang_marker)
            throw StructureError("language marker outside an entity context at item " +
                                 std::to_string(i));
        // item is an opening label marker
        std::size_t j = i + 1;
        std::optional<std::string> lang;
        if (j < items.size() && items[j].kind == ItemKind::lang_marker) {
            lang = items[j].lang;
            ++j;
        }
        if (j >= items.size() || items[j].kind != ItemKind::surface)
            throw StructureError("label marker " + item.text + " at item " + std::to_string(i) +
                                 " does not enclose a token");
        const std::string& token = items[j].text;
        ++j;
        if (j >= items.size() || items[j].kind != ItemKind::label_marker ||
            items[j].tag != item.tag)
            throw StructureError("unmatched or crossing markers around token '" + token + "'");
        out.tokens.push_back(token);
        out.tags.push_back(item.tag);
        marker_langs.push_back(std::move(lang));
        i = j + 1;
    }
    if (auto v = bio_violation(out.tags))
        throw StructureError("delinearized tags are not valid BIO: " + *v);
    // Attribution comes from language markers where present; elsewhere it is
    // positional from the origin (linearization never reorders tokens).
    const bool aligned = seq.origin.size() == out.tokens.size();
    out.token_langs.resize(out.tokens.size());
    for (std::size_t t = 0; t < out.tokens.size(); ++t)
        out.token_langs[t] = marker_langs[t]
                                 ? *marker_langs[t]
                                 : (aligned ? seq.origin.token_language(t) : out.language);
    out.normalize();
    out.validate();
    return out;
}

// Item index of each surface token, in token order.
inline std::vector<std::size_t> surface_item_indices(const LinearizedSequence& seq) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < seq.items.size(); ++i)
        if (seq.items[i].kind == ItemKind::surface) out.push_back(i);
    return out;
}

// Copy of seq with the surface text at the given item indices replaced.
inline LinearizedSequence splice_replacements(const LinearizedSequence& seq,
                                              const std::map<std::size_t, std::string>& repl) {
    LinearizedSequence out = seq;
    for (const auto& [idx, token] : repl) {
        if (idx >= out.items.size() || out.items[idx].kind != ItemKind::surface)
            throw StructureError("replacement index " + std::to_string(idx) +
                                 " is not a surface item");
        out.items[idx].text = token;
    }
    return out;
}

}  // namespace melm
