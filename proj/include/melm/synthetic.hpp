#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "melm/codemix.hpp"
#include "melm/corpus.hpp"
#include "melm/rng.hpp"
#include "melm/util.hpp"

namespace melm {

// Desk-scale benchmark generator: a templated two-language corpus with
// PER/ORG/LOC lexicons of 60 mentions per class and language, half of them
// held out for the test split, plus aligned word vectors for the pair.
struct SyntheticConfig {
    uint64_t seed = 7;
    std::size_t train_per_lang = 80;
    std::size_t test_per_lang = 150;
    std::size_t full_per_lang = 400;  // oracle training split, full lexicon
    std::size_t embedding_dim = 16;
};

struct SyntheticData {
    std::vector<std::string> languages;  // {"de", "en"}
    std::map<std::string, Corpus> train, test, full;
    std::map<std::pair<std::string, std::string>, EmbeddingTable> embeddings;
    std::set<std::string> classes{"LOC", "ORG", "PER"};
    std::map<std::string, std::string> label_words{
        {"PER", "person"}, {"ORG", "organization"}, {"LOC", "location"}};
};

namespace detail {

struct LanguageSpec {
    std::string id;
    std::vector<std::string> templates;  // tokens joined by spaces, {PER} etc. slots
    std::vector<std::string> first_names, last_names;
    std::vector<std::string> org_stems, org_suffixes;
    std::vector<std::string> loc_prefixes, loc_suffixes;
};

inline LanguageSpec english_spec() {
    LanguageSpec s;
    s.id = "en";
    const std::vector<std::string> frames = {
        "{PER} visited {LOC} on Monday .",
        "{ORG} hired {PER} last week .",
        "{PER} now works for {ORG} .",
        "{ORG} opened a new office in {LOC} .",
        "{PER} was born near {LOC} .",
        "{ORG} and {ORG} announced a merger .",
        "{PER} met {PER} at the summit .",
        "residents of {LOC} welcomed {ORG} .",
        "{ORG} reported record results yesterday .",
        "{PER} spoke about the plans of {ORG} .",
        "the road from {LOC} to {LOC} reopened .",
        "{PER} leads the {ORG} branch in {LOC} .",
    };
    const std::vector<std::string> leads = {"", "Yesterday ,", "Meanwhile ,", "Reportedly ,",
                                            "Later ,"};
    for (const auto& lead : leads)
        for (const auto& frame : frames)
            s.templates.push_back(lead.empty() ? frame : lead + " " + frame);
    s.first_names = {"Alden", "Briar",  "Calla", "Doran", "Elise", "Farley", "Greta",
                     "Hollis", "Imara", "Jasper", "Keira", "Lorcan", "Maeve", "Nolan",
                     "Orla",  "Piers",  "Quinn", "Rowan", "Sable", "Torin"};
    s.last_names = {"Ashford",  "Blythe",  "Crane",    "Dunmore",   "Ellery",
                    "Fenwick",  "Garrick", "Hale",     "Ingram",    "Jarvis",
                    "Kendrick", "Lowell",  "Merritt",  "Norwood",   "Osgood",
                    "Pemberton", "Quimby", "Radcliffe", "Selwyn",    "Thackeray"};
    s.org_stems = {"Apex",  "Bolt",  "Cedar",  "Delta", "Ember",   "Flux",  "Gable",
                   "Hearth", "Iris", "Junct",  "Kite",  "Lumen",   "Mast",  "Nimbus",
                   "Opal",  "Pylon", "Quill",  "Ridge", "Sparrow", "Tide"};
    s.org_suffixes = {"Corp", "Group", "Labs", "Media", "Partners"};
    s.loc_prefixes = {"North", "East", "South", "West", "Stone",
                      "Oak",   "Elm",  "Fern",  "River", "Lake"};
    s.loc_suffixes = {"gate", "mere", "crest", "bridge", "haven", "wick"};
    return s;
}

inline LanguageSpec german_spec() {
    LanguageSpec s;
    s.id = "de";
    const std::vector<std::string> frames = {
        "{PER} besuchte {LOC} am Montag .",
        "{ORG} stellte {PER} letzte Woche ein .",
        "{PER} arbeitet jetzt bei {ORG} .",
        "{ORG} eröffnete ein Büro in {LOC} .",
        "{PER} wurde nahe {LOC} geboren .",
        "{ORG} und {ORG} kündigten eine Fusion an .",
        "{PER} traf {PER} beim Gipfel .",
        "Bewohner von {LOC} begrüssten {ORG} .",
        "{ORG} meldete gestern Rekordzahlen .",
        "{PER} sprach über die Pläne von {ORG} .",
        "die Strasse von {LOC} nach {LOC} ist wieder offen .",
        "{PER} leitet die {ORG} Filiale in {LOC} .",
    };
    const std::vector<std::string> leads = {"", "Gestern ,", "Unterdessen ,", "Angeblich ,",
                                            "Später ,"};
    for (const auto& lead : leads)
        for (const auto& frame : frames)
            s.templates.push_back(lead.empty() ? frame : lead + " " + frame);
    s.first_names = {"Anselm",  "Brigitte", "Clemens",  "Dorothea", "Eckhart",
                     "Friedl",  "Gunther",  "Hedwig",   "Ingmar",   "Jutta",
                     "Konrad",  "Liesel",   "Manfred",  "Nadja",    "Otmar",
                     "Petra",   "Quirin",   "Rosalind", "Siegfried", "Traudel"};
    s.last_names = {"Achterberg", "Brandt",   "Clausen",  "Dreher",    "Eichel",
                    "Falk",       "Grunewald", "Hartmann", "Isenberg",  "Jaeger",
                    "Kessler",    "Lindner",  "Moeller",  "Neudorf",   "Oswald",
                    "Pfeiffer",   "Quandt",   "Reinhardt", "Steiner",   "Tannhaus"};
    s.org_stems = {"Adler",  "Buche", "Claas",  "Dorn",   "Eiche", "Falke", "Gipfel",
                   "Hansa",  "Ilmen", "Jura",   "Kiefer", "Linde", "Marder", "Nebel",
                   "Orkan",  "Pappel", "Quarz", "Rhein",  "Sturm", "Tanne"};
    s.org_suffixes = {"AG", "GmbH", "Werke", "Verlag", "Handel"};
    s.loc_prefixes = {"Ober", "Unter", "Neu",  "Alt",  "Gross",
                      "Klein", "Hoch", "Berg", "Wald", "See"};
    s.loc_suffixes = {"dorf", "stadt", "burg", "heim", "bach", "feld"};
    return s;
}

// 60 distinct mentions per class; a seeded shuffle decides which 30 go to the
// train half and which to the held-out half.
struct Lexicon {
    std::vector<Mention> train_half, test_half, all;
};

inline Lexicon split_lexicon(std::vector<Mention> mentions, RandomStream& rng) {
    rng.shuffle(mentions);
    mentions.resize(60);
    Lexicon lex;
    lex.all = mentions;
    for (std::size_t i = 0; i < mentions.size(); ++i)
        (i % 2 == 0 ? lex.train_half : lex.test_half).push_back(mentions[i]);
    return lex;
}

inline std::map<std::string, Lexicon> build_lexicons(const LanguageSpec& spec,
                                                     RandomStream& rng) {
    std::map<std::string, Lexicon> out;
    std::vector<Mention> pers;
    for (const auto& f : spec.first_names)
        for (const auto& l : spec.last_names) pers.push_back({f, l});
    out["PER"] = split_lexicon(std::move(pers), rng);

    std::vector<Mention> orgs;
    for (const auto& stem : spec.org_stems)
        for (const auto& suf : spec.org_suffixes) orgs.push_back({stem, suf});
    out["ORG"] = split_lexicon(std::move(orgs), rng);

    std::vector<Mention> locs;
    for (const auto& pre : spec.loc_prefixes)
        for (const auto& suf : spec.loc_suffixes) locs.push_back({pre + suf});
    out["LOC"] = split_lexicon(std::move(locs), rng);
    return out;
}

inline Sentence fill_template(const std::string& tmpl, const std::string& language,
                              const std::map<std::string, Lexicon>& lexicons, bool test_half,
                              RandomStream& rng) {
    std::vector<std::string> tokens;
    std::vector<Tag> tags;
    std::istringstream in(tmpl);
    std::string word;
    while (in >> word) {
        if (word.size() > 2 && word.front() == '{' && word.back() == '}') {
            const std::string cls = word.substr(1, word.size() - 2);
            const auto& lex = lexicons.at(cls);
            const auto& pool = test_half ? lex.test_half : lex.train_half;
            const Mention& mention = pool[rng.uniform_index(pool.size())];
            tokens.push_back(mention[0]);
            tags.push_back(Tag::b(cls));
            for (std::size_t i = 1; i < mention.size(); ++i) {
                tokens.push_back(mention[i]);
                tags.push_back(Tag::i(cls));
            }
        } else {
            tokens.push_back(word);
            tags.push_back(Tag::o());
        }
    }
    return make_sentence(std::move(tokens), std::move(tags), language);
}

// Sentences drawn from the full lexicon, with both halves interleaved so the
// oracle sees every mention family.
inline Sentence fill_template_full(const std::string& tmpl, const std::string& language,
                                   const std::map<std::string, Lexicon>& lexicons,
                                   RandomStream& rng) {
    std::vector<std::string> tokens;
    std::vector<Tag> tags;
    std::istringstream in(tmpl);
    std::string word;
    while (in >> word) {
        if (word.size() > 2 && word.front() == '{' && word.back() == '}') {
            const std::string cls = word.substr(1, word.size() - 2);
            const auto& pool = lexicons.at(cls).all;
            const Mention& mention = pool[rng.uniform_index(pool.size())];
            tokens.push_back(mention[0]);
            tags.push_back(Tag::b(cls));
            for (std::size_t i = 1; i < mention.size(); ++i) {
                tokens.push_back(mention[i]);
                tags.push_back(Tag::i(cls));
            }
        } else {
            tokens.push_back(word);
            tags.push_back(Tag::o());
        }
    }
    return make_sentence(std::move(tokens), std::move(tags), language);
}

}  // namespace detail

inline SyntheticData generate_synthetic(const SyntheticConfig& config) {
    SyntheticData data;
    const std::vector<detail::LanguageSpec> specs = {detail::german_spec(),
                                                     detail::english_spec()};
    for (const auto& spec : specs) data.languages.push_back(spec.id);

    // Class centers sit on separate axes; each token adds seeded noise. The
    // same token always maps to the same vector, across both table keys.
    std::map<std::string, std::vector<double>> token_vectors;
    const std::map<std::string, std::size_t> class_axis = {{"PER", 0}, {"ORG", 1}, {"LOC", 2}};

    for (std::size_t li = 0; li < specs.size(); ++li) {
        const auto& spec = specs[li];
        RandomStream lex_rng(derive_seed(config.seed, {0x1e, li}));
        const auto lexicons = detail::build_lexicons(spec, lex_rng);

        RandomStream train_rng(derive_seed(config.seed, {0x2a, li}));
        Corpus train;
        for (std::size_t i = 0; i < config.train_per_lang; ++i)
            train.add(detail::fill_template(
                spec.templates[train_rng.uniform_index(spec.templates.size())], spec.id,
                lexicons, false, train_rng));
        data.train[spec.id] = std::move(train);

        RandomStream test_rng(derive_seed(config.seed, {0x3b, li}));
        Corpus test;
        for (std::size_t i = 0; i < config.test_per_lang; ++i)
            test.add(detail::fill_template(
                spec.templates[test_rng.uniform_index(spec.templates.size())], spec.id,
                lexicons, true, test_rng));
        data.test[spec.id] = std::move(test);

        RandomStream full_rng(derive_seed(config.seed, {0x4c, li}));
        Corpus full;
        for (std::size_t i = 0; i < config.full_per_lang; ++i)
            full.add(detail::fill_template_full(
                spec.templates[full_rng.uniform_index(spec.templates.size())], spec.id,
                lexicons, full_rng));
        data.full[spec.id] = std::move(full);

        for (const auto& [cls, lex] : lexicons) {
            for (const auto& mention : lex.all) {
                for (const auto& token : mention) {
                    if (token_vectors.count(token)) continue;
                    RandomStream noise(derive_seed(config.seed, {0x5d, fnv1a(token)}));
                    std::vector<double> v(config.embedding_dim, 0.0);
                    for (auto& x : v) x = noise.gaussian(0.0, 0.5);
                    v[class_axis.at(cls)] += 3.0;
                    token_vectors[token] = std::move(v);
                }
            }
        }
    }

    EmbeddingTable table;
    table.dim = config.embedding_dim;
    table.vectors.insert(token_vectors.begin(), token_vectors.end());
    for (const auto& a : data.languages)
        for (const auto& b : data.languages) {
            if (a == b) continue;
            EmbeddingTable t = table;
            t.src_lang = a;
            t.tgt_lang = b;
            data.embeddings[{a, b}] = std::move(t);
        }
    return data;
}

inline std::string write_muse(const EmbeddingTable& table) {
    std::vector<std::string> words;
    words.reserve(table.vectors.size());
    for (const auto& [w, v] : table.vectors) words.push_back(w);
    std::sort(words.begin(), words.end());
    std::ostringstream out;
    out << words.size() << " " << table.dim << "\n";
    out.precision(17);
    for (const auto& w : words) {
        out << w;
        for (double x : table.vectors.at(w)) out << " " << x;
        out << "\n";
    }
    return out.str();
}

}  // namespace melm
