#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "melm/errors.hpp"
#include "melm/rng.hpp"

namespace melm {

// Reserved delimiter characters for marker tokens. Surface tokens must not
// contain them, which the parser enforces.
inline constexpr const char* kMarkerOpen = "⟨";   // ⟨
inline constexpr const char* kMarkerClose = "⟩";  // ⟩

inline bool contains_marker_char(std::string_view token) {
    return token.find(kMarkerOpen) != std::string_view::npos ||
           token.find(kMarkerClose) != std::string_view::npos;
}

enum class BioKind { O, B, I };

// One BIO tag: O, B-<class> or I-<class>.
struct Tag {
    BioKind kind = BioKind::O;
    std::string cls;  // empty iff kind == O

    static Tag o() { return Tag{}; }
    static Tag b(std::string c) { return Tag{BioKind::B, std::move(c)}; }
    static Tag i(std::string c) { return Tag{BioKind::I, std::move(c)}; }

    bool is_o() const { return kind == BioKind::O; }
    bool is_entity() const { return kind != BioKind::O; }

    std::string str() const {
        switch (kind) {
            case BioKind::O: return "O";
            case BioKind::B: return "B-" + cls;
            case BioKind::I: return "I-" + cls;
        }
        return "O";
    }

    static Tag parse(std::string_view s) {
        if (s == "O") return o();
        if (s.size() >= 3 && s[1] == '-' && (s[0] == 'B' || s[0] == 'I'))
            return Tag{s[0] == 'B' ? BioKind::B : BioKind::I, std::string(s.substr(2))};
        throw ParseError("invalid tag '" + std::string(s) + "'");
    }

    friend bool operator==(const Tag&, const Tag&) = default;
    friend auto operator<=>(const Tag&, const Tag&) = default;
};

// Returns a description of the first BIO violation, or nullopt if valid.
inline std::optional<std::string> bio_violation(const std::vector<Tag>& tags) {
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (tags[i].kind != BioKind::I) continue;
        if (i == 0 || tags[i - 1].is_o() || tags[i - 1].cls != tags[i].cls)
            return "I-" + tags[i].cls + " at position " + std::to_string(i) +
                   " does not continue an entity of the same class";
    }
    return std::nullopt;
}

// IOB1 input uses I-X to open an entity; rewrite such openings as B-X.
inline void normalize_to_bio(std::vector<Tag>& tags) {
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (tags[i].kind != BioKind::I) continue;
        if (i == 0 || tags[i - 1].is_o() || tags[i - 1].cls != tags[i].cls)
            tags[i].kind = BioKind::B;
    }
}

// Maximal entity run: token positions [start, end) of class cls.
struct EntitySpan {
    std::size_t start = 0;
    std::size_t end = 0;
    std::string cls;

    friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
    friend auto operator<=>(const EntitySpan&, const EntitySpan&) = default;
};

// A tokenized, BIO-tagged sentence. token_langs is empty when every token
// belongs to `language`; code-mixed sentences carry a full-size attribution.
struct Sentence {
    std::vector<std::string> tokens;
    std::vector<Tag> tags;
    std::string language;
    std::vector<std::string> token_langs;

    std::size_t size() const { return tokens.size(); }

    const std::string& token_language(std::size_t i) const {
        return token_langs.empty() ? language : token_langs[i];
    }

    bool has_entity() const {
        return std::any_of(tags.begin(), tags.end(), [](const Tag& t) { return t.is_entity(); });
    }

    // Drop the attribution vector when it is uniformly the sentence language.
    void normalize() {
        if (token_langs.empty()) return;
        const bool uniform = std::all_of(token_langs.begin(), token_langs.end(),
                                         [&](const std::string& l) { return l == language; });
        if (uniform) token_langs.clear();
    }

    void validate() const {
        if (tokens.size() != tags.size())
            throw DataError("sentence has " + std::to_string(tokens.size()) + " tokens but " +
                            std::to_string(tags.size()) + " tags");
        for (const auto& t : tokens) {
            if (t.empty()) throw DataError("empty token");
            if (t.find_first_of(" \t\r\n") != std::string::npos)
                throw DataError("token '" + t + "' contains whitespace");
            if (contains_marker_char(t))
                throw DataError("token '" + t + "' contains a reserved marker delimiter");
        }
        if (auto v = bio_violation(tags)) throw DataError(*v);
        if (!token_langs.empty() && token_langs.size() != tokens.size())
            throw DataError("token language attribution has wrong length");
    }

    friend bool operator==(const Sentence&, const Sentence&) = default;
};

inline Sentence make_sentence(std::vector<std::string> tokens, std::vector<Tag> tags,
                              std::string language,
                              std::vector<std::string> token_langs = {}) {
    Sentence s{std::move(tokens), std::move(tags), std::move(language), std::move(token_langs)};
    s.normalize();
    s.validate();
    return s;
}

// Spans ordered by start; their union is exactly the non-O positions.
inline std::vector<EntitySpan> extract_spans(const Sentence& sentence) {
    std::vector<EntitySpan> spans;
    const auto& tags = sentence.tags;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (tags[i].kind != BioKind::B) continue;
        std::size_t j = i + 1;
        while (j < tags.size() && tags[j].kind == BioKind::I && tags[j].cls == tags[i].cls) ++j;
        spans.push_back({i, j, tags[i].cls});
    }
    return spans;
}

// Inverse of extract_spans over a sentence of n tokens.
inline std::vector<Tag> expand_spans(const std::vector<EntitySpan>& spans, std::size_t n) {
    std::vector<Tag> tags(n, Tag::o());
    for (const auto& s : spans) {
        tags[s.start] = Tag::b(s.cls);
        for (std::size_t i = s.start + 1; i < s.end; ++i) tags[i] = Tag::i(s.cls);
    }
    return tags;
}

struct Corpus {
    std::vector<Sentence> sentences;
    std::set<std::string> languages;

    std::size_t size() const { return sentences.size(); }
    bool empty() const { return sentences.empty(); }

    void add(Sentence s) {
        languages.insert(s.language);
        sentences.push_back(std::move(s));
    }

    static Corpus from(std::vector<Sentence> ss) {
        Corpus c;
        for (auto& s : ss) c.add(std::move(s));
        return c;
    }

    std::set<std::string> classes() const {
        std::set<std::string> out;
        for (const auto& s : sentences)
            for (const auto& t : s.tags)
                if (t.is_entity()) out.insert(t.cls);
        return out;
    }

    std::size_t entity_token_count() const {
        std::size_t n = 0;
        for (const auto& s : sentences)
            for (const auto& t : s.tags) n += t.is_entity() ? 1 : 0;
        return n;
    }

    friend bool operator==(const Corpus&, const Corpus&) = default;
};

inline Corpus concat(const Corpus& a, const Corpus& b) {
    Corpus out = a;
    for (const auto& s : b.sentences) out.add(s);
    return out;
}

using Mention = std::vector<std::string>;

// Label-wise entity sets: (language, class) -> sorted distinct mentions.
struct EntityIndex {
    std::map<std::pair<std::string, std::string>, std::vector<Mention>> mentions;

    void add(const std::string& language, const std::string& cls, Mention mention) {
        auto& v = mentions[{language, cls}];
        auto it = std::lower_bound(v.begin(), v.end(), mention);
        if (it == v.end() || *it != mention) v.insert(it, std::move(mention));
    }

    const std::vector<Mention>* find(const std::string& language, const std::string& cls) const {
        auto it = mentions.find({language, cls});
        return it == mentions.end() ? nullptr : &it->second;
    }

    friend bool operator==(const EntityIndex&, const EntityIndex&) = default;
};

inline EntityIndex build_entity_index(const std::vector<Corpus>& corpora) {
    EntityIndex index;
    for (const auto& corpus : corpora)
        for (const auto& sentence : corpus.sentences)
            for (const auto& span : extract_spans(sentence))
                index.add(sentence.language, span.cls,
                          Mention(sentence.tokens.begin() + static_cast<std::ptrdiff_t>(span.start),
                                  sentence.tokens.begin() + static_cast<std::ptrdiff_t>(span.end)));
    return index;
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) fields.push_back(line.substr(i, j - i));
        i = j;
    }
    return fields;
}

inline bool is_blank(std::string_view line) {
    return line.find_first_not_of(" \t") == std::string_view::npos;
}

// "# langs: 0-2:de 4-5:en" -> [(0,2,de),(4,5,en)]
inline std::vector<std::tuple<std::size_t, std::size_t, std::string>>
parse_langs_comment(std::string_view rest, std::size_t line_no) {
    std::vector<std::tuple<std::size_t, std::size_t, std::string>> out;
    for (auto field : split_fields(rest)) {
        const auto dash = field.find('-');
        const auto colon = field.find(':', dash == std::string_view::npos ? 0 : dash);
        if (dash == std::string_view::npos || colon == std::string_view::npos || colon < dash)
            throw ParseError("line " + std::to_string(line_no) + ": bad language attribution '" +
                             std::string(field) + "'");
        std::size_t start = 0, end = 0;
        try {
            start = std::stoul(std::string(field.substr(0, dash)));
            end = std::stoul(std::string(field.substr(dash + 1, colon - dash - 1)));
        } catch (const std::exception&) {
            throw ParseError("line " + std::to_string(line_no) + ": bad span in '" +
                             std::string(field) + "'");
        }
        out.emplace_back(start, end, std::string(field.substr(colon + 1)));
    }
    return out;
}

}  // namespace detail

// Reads CoNLL column data: one "token tag" pair per line (any run of spaces
// or tabs between columns), blank line between sentences. "-DOCSTART-" lines
// are dropped. "# lang:" and "# langs:" comment lines carry the sentence
// language and per-span attributions written by this library; anything else
// starting with a column count other than two is an error.
inline Corpus parse_conll(std::string_view text, const std::string& default_language) {
    Corpus corpus;
    std::vector<std::string> tokens;
    std::vector<Tag> tags;
    std::string language = default_language;
    std::vector<std::tuple<std::size_t, std::size_t, std::string>> lang_spans;

    std::size_t line_no = 0;

    auto flush = [&](void) {
        if (tokens.empty()) {
            language = default_language;
            lang_spans.clear();
            return;
        }
        normalize_to_bio(tags);
        if (auto v = bio_violation(tags))
            throw ParseError("sentence ending at line " + std::to_string(line_no) + ": " + *v);
        Sentence s{std::move(tokens), std::move(tags), language, {}};
        if (!lang_spans.empty()) {
            s.token_langs.assign(s.tokens.size(), s.language);
            for (const auto& [start, end, lang] : lang_spans) {
                if (start >= end || end > s.tokens.size())
                    throw ParseError("sentence ending at line " + std::to_string(line_no) +
                                     ": language attribution span out of range");
                for (std::size_t i = start; i < end; ++i) s.token_langs[i] = lang;
            }
        }
        s.normalize();
        s.validate();
        corpus.add(std::move(s));
        tokens.clear();
        tags.clear();
        language = default_language;
        lang_spans.clear();
    };

    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            if (pos >= text.size()) break;
            eol = text.size();
        }
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        if (detail::is_blank(line)) {
            flush();
            continue;
        }
        if (line.rfind("-DOCSTART-", 0) == 0) continue;
        if (line.rfind("# lang:", 0) == 0) {
            auto fields = detail::split_fields(line.substr(7));
            if (fields.size() != 1)
                throw ParseError("line " + std::to_string(line_no) + ": bad '# lang:' comment");
            language = std::string(fields[0]);
            continue;
        }
        if (line.rfind("# langs:", 0) == 0) {
            lang_spans = detail::parse_langs_comment(line.substr(8), line_no);
            continue;
        }

        auto fields = detail::split_fields(line);
        if (fields.size() != 2)
            throw ParseError("line " + std::to_string(line_no) + ": expected 'token tag', got " +
                             std::to_string(fields.size()) + " column(s)");
        if (contains_marker_char(fields[0]))
            throw ParseError("line " + std::to_string(line_no) +
                             ": token contains a reserved marker delimiter");
        tokens.emplace_back(fields[0]);
        try {
            tags.push_back(Tag::parse(fields[1]));
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    flush();
    return corpus;
}

inline Corpus parse_conll(std::istream& in, const std::string& default_language) {
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_conll(std::string_view(buf.view()), default_language);
}

// Writes "token tag" lines with a blank line after each sentence. Language
// comments are emitted only for sentences that deviate from the default
// (the corpus's single language, or `default_language` when mixed).
inline void write_conll(const Corpus& corpus, std::ostream& out,
                        const std::string& default_language) {
    for (const auto& s : corpus.sentences) {
        if (s.language != default_language) out << "# lang: " << s.language << "\n";
        if (!s.token_langs.empty()) {
            out << "# langs:";
            std::size_t i = 0;
            while (i < s.token_langs.size()) {
                if (s.token_langs[i] == s.language) {
                    ++i;
                    continue;
                }
                std::size_t j = i + 1;
                while (j < s.token_langs.size() && s.token_langs[j] == s.token_langs[i]) ++j;
                out << " " << i << "-" << j << ":" << s.token_langs[i];
                i = j;
            }
            out << "\n";
        }
        for (std::size_t i = 0; i < s.tokens.size(); ++i)
            out << s.tokens[i] << " " << s.tags[i].str() << "\n";
        out << "\n";
    }
}

inline std::string write_conll(const Corpus& corpus) {
    std::ostringstream out;
    const std::string default_language =
        corpus.languages.size() == 1 ? *corpus.languages.begin() : std::string();
    write_conll(corpus, out, default_language);
    return out.str();
}

// n sentences uniformly without replacement, original order preserved.
inline Corpus sample_split(const Corpus& corpus, std::size_t n, uint64_t seed) {
    if (n > corpus.size())
        throw SizeError("cannot sample " + std::to_string(n) + " sentences from a corpus of " +
                        std::to_string(corpus.size()));
    RandomStream rng(seed);
    const auto picked = rng.sample_indices(corpus.size(), n);
    Corpus out;
    for (std::size_t i : picked) out.add(corpus.sentences[i]);
    return out;
}

}  // namespace melm
