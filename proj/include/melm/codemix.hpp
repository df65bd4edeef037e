#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "melm/corpus.hpp"
#include "melm/errors.hpp"
#include "melm/rng.hpp"
#include "melm/tagger.hpp"

namespace melm {

// Aligned word vectors for one language pair; both sides live in the same
// space, queries are looked up via source words and candidates via target
// words. Lookup is case-sensitive with a lowercase fallback.
struct EmbeddingTable {
    std::string src_lang, tgt_lang;
    std::size_t dim = 0;
    std::unordered_map<std::string, std::vector<double>> vectors;

    const std::vector<double>* lookup(const std::string& word) const {
        auto it = vectors.find(word);
        if (it != vectors.end()) return &it->second;
        it = vectors.find(detail::lowercase_ascii(word));
        return it == vectors.end() ? nullptr : &it->second;
    }
};

// Text format: optional "count dim" header, then one "word v1 ... vd" line
// per entry. Duplicate words keep their first occurrence.
inline EmbeddingTable load_embeddings(std::istream& in) {
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    bool first_data_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string word;
        fields >> word;
        std::vector<double> values;
        std::string field;
        bool numeric = true;
        while (fields >> field) {
            char* end = nullptr;
            const double v = std::strtod(field.c_str(), &end);
            if (end == nullptr || *end != '\0') {
                numeric = false;
                break;
            }
            values.push_back(v);
        }
        if (first_data_line && numeric && values.size() == 1) {
            // header "count dim": word is the count, the single value the dim
            char* end = nullptr;
            std::strtol(word.c_str(), &end, 10);
            if (end != nullptr && *end == '\0') {
                table.dim = static_cast<std::size_t>(values[0]);
                first_data_line = false;
                continue;
            }
        }
        if (!numeric)
            throw FormatError("line " + std::to_string(line_no) +
                              ": non-numeric vector component");
        if (values.empty())
            throw FormatError("line " + std::to_string(line_no) + ": no vector components");
        if (table.dim == 0) table.dim = values.size();
        if (values.size() != table.dim)
            throw FormatError("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(table.dim) + " components, got " +
                              std::to_string(values.size()));
        table.vectors.emplace(std::move(word), std::move(values));  // first wins
        first_data_line = false;
    }
    return table;
}

// Mean of the entity tokens' vectors; tokens missing from the table are
// skipped, and an entity with no covered token has no embedding.
inline std::optional<std::vector<double>> entity_embedding(const Mention& entity,
                                                           const EmbeddingTable& table) {
    std::vector<double> sum;
    std::size_t found = 0;
    for (const auto& token : entity) {
        const auto* v = table.lookup(token);
        if (!v) continue;
        if (sum.empty()) sum.assign(v->size(), 0.0);
        for (std::size_t i = 0; i < v->size(); ++i) sum[i] += (*v)[i];
        ++found;
    }
    if (found == 0) return std::nullopt;
    for (double& x : sum) x /= static_cast<double>(found);
    return sum;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a == b) return 1.0;  // self-similarity is exact
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return -2.0;  // below any real cosine
    return dot / std::sqrt(na * nb);
}

// Entity similarity search: the target-language mention of the same class
// whose averaged embedding is closest (cosine) to the query's. Candidates
// without embeddings are skipped; a query without an embedding (or with no
// scorable candidate) falls back to a uniform random choice. Ties go to the
// lexicographically smallest mention.
inline Mention ess_lookup(const Mention& query, const std::string& src_lang,
                          const std::string& tgt_lang, const std::string& cls,
                          const EntityIndex& index, const EmbeddingTable& table,
                          RandomStream& rng) {
    (void)src_lang;
    const auto* candidates = index.find(tgt_lang, cls);
    if (candidates == nullptr || candidates->empty())
        throw SubstitutionError("no known " + cls + " mentions in language " + tgt_lang);

    const auto query_emb = entity_embedding(query, table);
    if (query_emb) {
        const Mention* best = nullptr;
        double best_score = 0.0;
        for (const auto& candidate : *candidates) {  // ascending lexicographic
            const auto cand_emb = entity_embedding(candidate, table);
            if (!cand_emb || cand_emb->size() != query_emb->size()) continue;
            const double score = cosine(*query_emb, *cand_emb);
            if (score == -2.0) continue;
            if (best == nullptr || score > best_score) {
                best = &candidate;
                best_score = score;
            }
        }
        if (best != nullptr) return *best;
    }
    return (*candidates)[rng.uniform_index(candidates->size())];
}

struct CodeMixConfig {
    enum class Strategy { ess, random };
    Strategy strategy = Strategy::ess;
    double substitute_prob = 1.0;  // per-sentence probability of code-mixing

    static Strategy parse_strategy(const std::string& s) {
        if (s == "ess") return Strategy::ess;
        if (s == "random") return Strategy::random;
        throw ConfigError("unknown code-mix strategy '" + s + "'");
    }
};

struct CodeMixStats {
    std::size_t substituted = 0;
    std::size_t failed = 0;
};

namespace detail {

// Replaces token span [start, end) with the mention; tags become B + I...,
// and the new tokens are attributed to `lang` (empty = keep sentence default).
inline void splice_mention(Sentence& s, std::size_t start, std::size_t end,
                           const Mention& mention, const std::string& cls,
                           const std::string& lang) {
    if (s.token_langs.empty()) s.token_langs.assign(s.tokens.size(), s.language);
    s.tokens.erase(s.tokens.begin() + static_cast<std::ptrdiff_t>(start),
                   s.tokens.begin() + static_cast<std::ptrdiff_t>(end));
    s.tags.erase(s.tags.begin() + static_cast<std::ptrdiff_t>(start),
                 s.tags.begin() + static_cast<std::ptrdiff_t>(end));
    s.token_langs.erase(s.token_langs.begin() + static_cast<std::ptrdiff_t>(start),
                        s.token_langs.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<Tag> new_tags;
    new_tags.push_back(Tag::b(cls));
    for (std::size_t i = 1; i < mention.size(); ++i) new_tags.push_back(Tag::i(cls));
    s.tokens.insert(s.tokens.begin() + static_cast<std::ptrdiff_t>(start), mention.begin(),
                    mention.end());
    s.tags.insert(s.tags.begin() + static_cast<std::ptrdiff_t>(start), new_tags.begin(),
                  new_tags.end());
    s.token_langs.insert(s.token_langs.begin() + static_cast<std::ptrdiff_t>(start),
                         mention.size(), lang.empty() ? s.language : lang);
}

}  // namespace detail

// Creates one code-mixed variant of every sentence: for each entity, a target
// language is drawn uniformly from the other languages and the mention is
// replaced by a same-class target-language mention (nearest by ESS, or
// uniformly at random). Per-entity failures leave that entity unchanged.
inline Corpus codemix_corpus(
    const std::vector<Corpus>& corpora, const CodeMixConfig& config, const EntityIndex& index,
    const std::map<std::pair<std::string, std::string>, EmbeddingTable>& tables, uint64_t seed,
    CodeMixStats* stats = nullptr) {
    std::set<std::string> language_set;
    for (const auto& c : corpora) language_set.insert(c.languages.begin(), c.languages.end());
    if (language_set.size() < 2)
        throw DataError("code-mixing needs at least two languages, got " +
                        std::to_string(language_set.size()));

    CodeMixStats local;
    static const EmbeddingTable empty_table;
    Corpus out;
    for (std::size_t ci = 0; ci < corpora.size(); ++ci) {
        for (std::size_t si = 0; si < corpora[ci].size(); ++si) {
            Sentence sentence = corpora[ci].sentences[si];
            RandomStream rng(derive_seed(seed, {ci, si}));
            const auto spans = extract_spans(sentence);
            if (spans.empty() || !rng.bernoulli(config.substitute_prob)) {
                out.add(std::move(sentence));
                continue;
            }
            std::vector<std::string> others;
            for (const auto& l : language_set)
                if (l != sentence.language) others.push_back(l);

            // Decide left to right, splice right to left so indices hold.
            struct Planned {
                std::size_t start, end;
                Mention mention;
                std::string cls, lang;
            };
            std::vector<Planned> planned;
            for (const auto& span : spans) {
                const std::string tgt = others[rng.uniform_index(others.size())];
                const Mention query(
                    sentence.tokens.begin() + static_cast<std::ptrdiff_t>(span.start),
                    sentence.tokens.begin() + static_cast<std::ptrdiff_t>(span.end));
                try {
                    Mention replacement;
                    if (config.strategy == CodeMixConfig::Strategy::random) {
                        const auto* candidates = index.find(tgt, span.cls);
                        if (candidates == nullptr || candidates->empty())
                            throw SubstitutionError("no known " + span.cls +
                                                    " mentions in language " + tgt);
                        replacement = (*candidates)[rng.uniform_index(candidates->size())];
                    } else {
                        auto it = tables.find({sentence.language, tgt});
                        const EmbeddingTable& table =
                            it == tables.end() ? empty_table : it->second;
                        replacement =
                            ess_lookup(query, sentence.language, tgt, span.cls, index, table, rng);
                    }
                    planned.push_back({span.start, span.end, std::move(replacement), span.cls, tgt});
                    ++local.substituted;
                } catch (const SubstitutionError&) {
                    ++local.failed;
                }
            }
            for (auto it = planned.rbegin(); it != planned.rend(); ++it)
                detail::splice_mention(sentence, it->start, it->end, it->mention, it->cls,
                                       it->lang);
            sentence.normalize();
            sentence.validate();
            out.add(std::move(sentence));
        }
    }
    if (stats) *stats = local;
    return out;
}

// Monolingual baseline: every entity replaced by a uniformly drawn mention of
// the same class and language (possibly itself).
inline Corpus labelwise_substitute(const Corpus& corpus, const EntityIndex& index,
                                   RandomStream& rng) {
    Corpus out;
    for (const auto& original : corpus.sentences) {
        Sentence sentence = original;
        const auto spans = extract_spans(sentence);
        struct Planned {
            std::size_t start, end;
            Mention mention;
            std::string cls;
        };
        std::vector<Planned> planned;
        for (const auto& span : spans) {
            const auto* candidates = index.find(sentence.language, span.cls);
            if (candidates == nullptr || candidates->empty()) continue;
            planned.push_back({span.start, span.end,
                               (*candidates)[rng.uniform_index(candidates->size())], span.cls});
        }
        for (auto it = planned.rbegin(); it != planned.rend(); ++it)
            detail::splice_mention(sentence, it->start, it->end, it->mention, it->cls, {});
        sentence.normalize();
        sentence.validate();
        out.add(std::move(sentence));
    }
    return out;
}

}  // namespace melm
