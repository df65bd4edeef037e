#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "melm/corpus.hpp"
#include "melm/linearize.hpp"
#include "melm/masking.hpp"

namespace melm {

// Whole-word vocabulary: special tokens, marker tokens, then surface tokens
// above the frequency threshold. Ids are dense from 0; unseen surface tokens
// resolve to unk.
struct Vocabulary {
    std::vector<std::string> id_to_token;
    std::unordered_map<std::string, int> token_to_id;
    int unk_id = 0;
    int mask_id = 1;
    int pad_id = 2;
    std::vector<bool> reserved;  // specials and markers; never generation candidates

    static const std::string& unk_token() {
        static const std::string t = std::string(kMarkerOpen) + "UNK" + kMarkerClose;
        return t;
    }
    static const std::string& mask_token() {
        static const std::string t = std::string(kMarkerOpen) + "MASK" + kMarkerClose;
        return t;
    }
    static const std::string& pad_token() {
        static const std::string t = std::string(kMarkerOpen) + "PAD" + kMarkerClose;
        return t;
    }

    std::size_t size() const { return id_to_token.size(); }

    int id(std::string_view token) const {
        auto it = token_to_id.find(std::string(token));
        return it == token_to_id.end() ? unk_id : it->second;
    }

    bool contains(std::string_view token) const {
        return token_to_id.count(std::string(token)) > 0;
    }

    const std::string& token(int id) const { return id_to_token.at(static_cast<std::size_t>(id)); }

    int add(const std::string& token, bool is_reserved) {
        auto [it, inserted] = token_to_id.emplace(token, static_cast<int>(id_to_token.size()));
        if (inserted) {
            id_to_token.push_back(token);
            reserved.push_back(is_reserved);
        }
        return it->second;
    }

    // Markers must be present; a missing marker means the vocabulary was not
    // built for this corpus's tag set or languages.
    int marker_id(const std::string& rendered) const {
        auto it = token_to_id.find(rendered);
        if (it == token_to_id.end())
            throw DataError("marker " + rendered + " is not in the vocabulary");
        return it->second;
    }

    std::vector<int> encode_items(const std::vector<LinItem>& items) const {
        std::vector<int> ids;
        ids.reserve(items.size());
        for (const auto& item : items)
            ids.push_back(item.kind == ItemKind::surface ? id(item.text) : marker_id(item.text));
        return ids;
    }

    // Item ids with masked positions replaced by the mask token.
    std::vector<int> encode_plan(const MaskPlan& plan) const {
        auto ids = encode_items(plan.base.items);
        for (std::size_t p : plan.masked_positions) ids[p] = mask_id;
        return ids;
    }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
        return a.id_to_token == b.id_to_token;
    }
};

// Builds the vocabulary for a corpus. Markers are added for every class and
// language that is either observed or declared, so a split that happens to
// miss a class still carries its markers.
inline Vocabulary build_vocab(const Corpus& corpus, std::size_t min_freq,
                              const std::set<std::string>& declared_classes = {},
                              const std::set<std::string>& declared_languages = {}) {
    Vocabulary v;
    v.unk_id = v.add(Vocabulary::unk_token(), true);
    v.mask_id = v.add(Vocabulary::mask_token(), true);
    v.pad_id = v.add(Vocabulary::pad_token(), true);

    std::set<std::string> classes = declared_classes;
    std::set<std::string> languages = declared_languages;
    std::map<std::string, std::size_t> freq;
    for (const auto& s : corpus.sentences) {
        languages.insert(s.language);
        for (const auto& l : s.token_langs) languages.insert(l);
        for (const auto& t : s.tags)
            if (t.is_entity()) classes.insert(t.cls);
        for (const auto& tok : s.tokens) ++freq[tok];
    }

    std::set<std::string> markers;
    for (const auto& cls : classes) {
        markers.insert(render_label_marker(Tag::b(cls)));
        markers.insert(render_label_marker(Tag::i(cls)));
    }
    for (const auto& lang : languages) markers.insert(render_lang_marker(lang));
    for (const auto& m : markers) v.add(m, true);

    for (const auto& [tok, n] : freq)
        if (n >= min_freq) v.add(tok, false);
    return v;
}

}  // namespace melm
