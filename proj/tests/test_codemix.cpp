#include "doctest.h"

#include <cmath>
#include <sstream>

#include "melm/codemix.hpp"
#include "test_helpers.hpp"

using namespace melm;

namespace {

EmbeddingTable table_from(const std::string& text) {
    std::istringstream in(text);
    return load_embeddings(in);
}

// Deterministic pseudo-random vector per (tag, index).
std::vector<double> hash_vector(uint64_t tag, std::size_t index, std::size_t dim) {
    RandomStream rng(derive_seed(tag, {index}));
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.gaussian(0.0, 1.0);
    return v;
}

}  // namespace

TEST_CASE("load_embeddings reads the text vector format") {
    SUBCASE("three lines of dimension four") {
        EmbeddingTable t = table_from(
            "casa 1 2 3 4\n"
            "perro 0.5 -1 2.5 0\n"
            "gato 0 0 1 0\n");
        CHECK(t.vectors.size() == 3);
        CHECK(t.dim == 4);
        CHECK(*t.lookup("casa") == std::vector<double>{1, 2, 3, 4});
    }
    SUBCASE("a count/dim header is consumed") {
        std::ostringstream text;
        text << "2 300\n";
        for (const char* w : {"uno", "dos"}) {
            text << w;
            for (int i = 0; i < 300; ++i) text << " " << 0.25 * i;
            text << "\n";
        }
        EmbeddingTable t = table_from(text.str());
        CHECK(t.dim == 300);
        CHECK(t.vectors.size() == 2);
    }
    SUBCASE("duplicate words keep the first occurrence") {
        EmbeddingTable t = table_from(
            "casa 1 1\n"
            "casa 2 2\n");
        CHECK(t.vectors.size() == 1);
        CHECK(*t.lookup("casa") == std::vector<double>{1, 1});
    }
    SUBCASE("inconsistent dimension reports the line") {
        CHECK_THROWS_WITH_AS(table_from("a 1 2\nb 1 2 3\n"), doctest::Contains("line 2"),
                             FormatError);
    }
    SUBCASE("non-numeric components are rejected") {
        CHECK_THROWS_AS(table_from("a 1 2\nb 1 x\n"), FormatError);
    }
    SUBCASE("lookup falls back to lowercase") {
        EmbeddingTable t = table_from("casa 1 2\nPerro 3 4\n");
        CHECK(t.lookup("Casa") != nullptr);
        CHECK(t.lookup("CASA") != nullptr);
        CHECK(t.lookup("perro") == nullptr);  // fallback lowers the query only
        CHECK(t.lookup("gato") == nullptr);
    }
}

TEST_CASE("entity_embedding averages the covered tokens") {
    EmbeddingTable t = table_from(
        "nueva 1 3\n"
        "york 3 5\n");
    SUBCASE("single token present returns that vector exactly") {
        CHECK(*entity_embedding({"nueva"}, t) == std::vector<double>{1, 3});
    }
    SUBCASE("two tokens present yield the componentwise mean") {
        const auto emb = *entity_embedding({"nueva", "york"}, t);
        // brute force: (1+3)/2, (3+5)/2
        CHECK(emb == std::vector<double>{2, 4});
    }
    SUBCASE("tokens missing from the table are skipped") {
        CHECK(*entity_embedding({"nueva", "jersey"}, t) == std::vector<double>{1, 3});
    }
    SUBCASE("an entity with no covered token has no embedding") {
        CHECK(!entity_embedding({"los", "angeles"}, t).has_value());
    }
}

TEST_CASE("ess_lookup") {
    RandomStream rng(1);

    SUBCASE("a single candidate wins regardless of similarity") {
        EntityIndex index;
        index.add("de", "LOC", {"Berlin"});
        EmbeddingTable t = table_from("Berlin 0 1\nParis 1 0\n");
        CHECK(ess_lookup({"Paris"}, "en", "de", "LOC", index, t, rng) == Mention{"Berlin"});
    }
    SUBCASE("an exact vector match is the argmax") {
        EntityIndex index;
        index.add("de", "LOC", {"Berlin"});
        index.add("de", "LOC", {"Hamburg"});
        EmbeddingTable t = table_from(
            "Paris 0.6 0.8\n"
            "Berlin 0.6 0.8\n"
            "Hamburg -1 0.2\n");
        CHECK(ess_lookup({"Paris"}, "en", "de", "LOC", index, t, rng) == Mention{"Berlin"});
    }
    SUBCASE("matches a brute-force cosine scan on random instances") {
        const std::size_t dim = 8, n_candidates = 50;
        for (uint64_t trial = 0; trial < 100; ++trial) {
            EmbeddingTable t;
            t.dim = dim;
            EntityIndex index;
            std::vector<Mention> mentions;
            for (std::size_t i = 0; i < n_candidates; ++i) {
                const std::string word = "cand" + std::to_string(i);
                t.vectors[word] = hash_vector(trial * 977 + 1, i, dim);
                index.add("de", "ORG", {word});
                mentions.push_back({word});
            }
            t.vectors["query"] = hash_vector(trial * 977 + 2, 0, dim);

            RandomStream r(trial);
            const Mention got = ess_lookup({"query"}, "en", "de", "ORG", index, t, r);

            // brute-force loop over all candidates
            const auto q = *entity_embedding({"query"}, t);
            Mention best;
            double best_score = -2.0;
            for (const auto& m : mentions) {
                const double s = cosine(q, *entity_embedding(m, t));
                if (best.empty() || s > best_score) {
                    best = m;
                    best_score = s;
                }
            }
            // ties (none expected here) resolve to the lexicographically
            // smallest, which the sorted index provides
            CHECK(got == best);
        }
    }
    SUBCASE("ties resolve to the lexicographically smallest mention") {
        EntityIndex index;
        index.add("de", "ORG", {"Zeta"});
        index.add("de", "ORG", {"Alpha"});
        index.add("de", "ORG", {"Mitte"});
        EmbeddingTable t = table_from(
            "query 1 0\n"
            "Zeta 2 0\n"
            "Alpha 3 0\n"
            "Mitte 0 1\n");  // Zeta and Alpha are both at cosine 1
        CHECK(ess_lookup({"query"}, "en", "de", "ORG", index, t, rng) == Mention{"Alpha"});
    }
    SUBCASE("scaling candidate vectors does not change the argmax") {
        EntityIndex index;
        index.add("de", "LOC", {"Eins"});
        index.add("de", "LOC", {"Zwei"});
        index.add("de", "LOC", {"Drei"});
        EmbeddingTable a = table_from(
            "query 1 2\n"
            "Eins 2 1\n"
            "Zwei 1 2.1\n"
            "Drei -1 -2\n");
        EmbeddingTable b = a;
        for (auto& [w, v] : b.vectors)
            if (w != "query")
                for (auto& x : v) x *= 37.5;
        RandomStream r1(2), r2(2);
        CHECK(ess_lookup({"query"}, "en", "de", "LOC", index, a, r1) ==
              ess_lookup({"query"}, "en", "de", "LOC", index, b, r2));
    }
    SUBCASE("a query without embedding falls back to a random candidate") {
        EntityIndex index;
        index.add("de", "PER", {"Anna"});
        index.add("de", "PER", {"Bernd"});
        EmbeddingTable t;  // empty: nothing has an embedding
        std::set<Mention> seen;
        RandomStream r(3);
        for (int i = 0; i < 100; ++i) seen.insert(ess_lookup({"Bob"}, "en", "de", "PER", index, t, r));
        CHECK(seen == std::set<Mention>{{"Anna"}, {"Bernd"}});
    }
    SUBCASE("an empty candidate set is a substitution error") {
        EntityIndex index;
        EmbeddingTable t;
        CHECK_THROWS_AS(ess_lookup({"Bob"}, "en", "de", "PER", index, t, rng),
                        SubstitutionError);
    }
}

TEST_CASE("codemix_corpus") {
    Corpus en;
    en.add(make_sentence({"Acme", "expands"}, {Tag::b("ORG"), Tag::o()}, "en"));
    Corpus de;
    de.add(make_sentence({"Rhein", "Werke", "wachsen"}, {Tag::b("ORG"), Tag::i("ORG"), Tag::o()},
                         "de"));
    const EntityIndex index = build_entity_index({en, de});

    SUBCASE("a single language is rejected") {
        CodeMixConfig cfg;
        CHECK_THROWS_AS(codemix_corpus({en}, cfg, index, {}, 1), DataError);
    }
    SUBCASE("replacing a 1-token mention with a 2-token one resizes tags") {
        CodeMixConfig cfg;
        cfg.strategy = CodeMixConfig::Strategy::random;
        Corpus out = codemix_corpus({en, de}, cfg, index, {}, 1);
        REQUIRE(out.size() == 2);
        const Sentence& mixed = out.sentences[0];  // "Acme" -> "Rhein Werke"
        CHECK(mixed.size() == 3);
        CHECK(mixed.tokens == std::vector<std::string>{"Rhein", "Werke", "expands"});
        CHECK(mixed.tags == std::vector<Tag>{Tag::b("ORG"), Tag::i("ORG"), Tag::o()});
        CHECK(mixed.language == "en");
        CHECK(mixed.token_langs == std::vector<std::string>{"de", "de", "en"});
    }
    SUBCASE("deterministic for a fixed seed") {
        CodeMixConfig cfg;
        cfg.strategy = CodeMixConfig::Strategy::random;
        CHECK(codemix_corpus({en, de}, cfg, index, {}, 5) ==
              codemix_corpus({en, de}, cfg, index, {}, 5));
    }
    SUBCASE("entities with no target-language candidates are left unchanged") {
        Corpus fr;
        fr.add(make_sentence({"Lyon"}, {Tag::b("LOC")}, "fr"));  // LOC exists only in fr
        CodeMixConfig cfg;
        cfg.strategy = CodeMixConfig::Strategy::random;
        CodeMixStats stats;
        Corpus out = codemix_corpus({en, fr}, cfg, build_entity_index({en, fr}), {}, 2, &stats);
        // the fr LOC has no en candidates; the en ORG has no fr candidates
        CHECK(out.sentences[0].tokens == en.sentences[0].tokens);
        CHECK(out.sentences[1].tokens == fr.sentences[0].tokens);
        CHECK(stats.failed == 2);
        CHECK(stats.substituted == 0);
    }
    SUBCASE("substitution preserves context and BIO validity on random corpora") {
        RandomStream rng(7);
        Corpus a = testing::random_corpus(rng, 25, "en");
        Corpus b = testing::random_corpus(rng, 25, "de");
        CodeMixConfig cfg;
        cfg.strategy = CodeMixConfig::Strategy::random;
        Corpus out = codemix_corpus({a, b}, cfg, build_entity_index({a, b}), {}, 9);
        REQUIRE(out.size() == 50);
        for (std::size_t i = 0; i < out.size(); ++i) {
            const Sentence& mixed = out.sentences[i];
            CHECK(!bio_violation(mixed.tags).has_value());
            const Sentence& src = i < 25 ? a.sentences[i] : b.sentences[i - 25];
            // context tokens survive in order
            std::vector<std::string> src_ctx, out_ctx;
            for (std::size_t j = 0; j < src.size(); ++j)
                if (src.tags[j].is_o()) src_ctx.push_back(src.tokens[j]);
            for (std::size_t j = 0; j < mixed.size(); ++j)
                if (mixed.tags[j].is_o()) out_ctx.push_back(mixed.tokens[j]);
            CHECK(src_ctx == out_ctx);
            // span class sequence is unchanged
            const auto src_spans = extract_spans(src);
            const auto out_spans = extract_spans(mixed);
            REQUIRE(src_spans.size() == out_spans.size());
            for (std::size_t j = 0; j < src_spans.size(); ++j)
                CHECK(src_spans[j].cls == out_spans[j].cls);
        }
    }
}

TEST_CASE("labelwise_substitute") {
    SUBCASE("an index with one mention per class reproduces the corpus") {
        Corpus c;
        c.add(testing::example_sentence_per_org());
        const EntityIndex index = build_entity_index({c});
        RandomStream rng(1);
        CHECK(labelwise_substitute(c, index, rng) == c);
    }
    SUBCASE("substitution counts are uniform over the mention set") {
        Corpus c;
        c.add(make_sentence({"Acme", "expands"}, {Tag::b("ORG"), Tag::o()}, "en"));
        EntityIndex index;
        const std::vector<std::string> names = {"Apex", "Borg", "Citra", "Dyno", "Ember"};
        for (const auto& n : names) index.add("en", "ORG", {n});

        std::map<std::string, int> counts;
        RandomStream rng(2);
        const int runs = 10000;
        for (int i = 0; i < runs; ++i) {
            const Corpus out = labelwise_substitute(c, index, rng);
            ++counts[out.sentences[0].tokens[0]];
        }
        // chi-square against uniform over 5 mentions, df=4, alpha=0.01
        const double expected = runs / 5.0;
        double chi2 = 0.0;
        for (const auto& n : names) {
            const double diff = counts[n] - expected;
            chi2 += diff * diff / expected;
        }
        CHECK(chi2 < 13.2767);
    }
    SUBCASE("outputs remain BIO-valid on random corpora") {
        RandomStream rng(3);
        Corpus c = testing::random_corpus(rng, 40);
        const EntityIndex index = build_entity_index({c});
        RandomStream sub_rng(4);
        const Corpus out = labelwise_substitute(c, index, sub_rng);
        for (const auto& s : out.sentences) CHECK(!bio_violation(s.tags).has_value());
    }
}
