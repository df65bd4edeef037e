#pragma once

#include <string>
#include <vector>

#include "melm/corpus.hpp"
#include "melm/rng.hpp"

namespace melm::testing {

// Random valid sentence: tokens from a small pool, BIO tags built span by
// span so every draw is structurally valid.
inline Sentence random_sentence(RandomStream& rng, std::size_t min_len = 1,
                                std::size_t max_len = 24,
                                const std::vector<std::string>& classes = {"PER", "ORG", "LOC"},
                                const std::string& language = "en") {
    static const std::vector<std::string> pool = {
        "alpha", "beta",  "gamma", "delta", "omega", "koala", "pixel", "quartz",
        "river", "stone", "Tumba", "Quorn", "Velda", "Wren",  "Xanth", "Yolk",
    };
    const std::size_t len = min_len + rng.uniform_index(max_len - min_len + 1);
    std::vector<std::string> tokens(len);
    for (auto& t : tokens) t = pool[rng.uniform_index(pool.size())];
    std::vector<Tag> tags(len, Tag::o());
    std::size_t i = 0;
    while (i < len) {
        if (rng.bernoulli(0.35)) {
            const std::string& cls = classes[rng.uniform_index(classes.size())];
            const std::size_t span_len = 1 + rng.uniform_index(std::min<std::size_t>(3, len - i));
            tags[i] = Tag::b(cls);
            for (std::size_t j = 1; j < span_len; ++j) tags[i + j] = Tag::i(cls);
            i += span_len;
        } else {
            ++i;
        }
    }
    std::vector<std::string> token_langs;
    if (rng.bernoulli(0.2)) {
        token_langs.assign(len, language);
        for (auto& l : token_langs)
            if (rng.bernoulli(0.3)) l = "xx";
    }
    return make_sentence(std::move(tokens), std::move(tags), language, std::move(token_langs));
}

inline Corpus random_corpus(RandomStream& rng, std::size_t n_sentences,
                            const std::string& language = "en") {
    Corpus c;
    for (std::size_t i = 0; i < n_sentences; ++i)
        c.add(random_sentence(rng, 1, 24, {"PER", "ORG", "LOC"}, language));
    return c;
}

// The eight-token example sentence used across the suite.
inline Sentence example_sentence_org_misc() {
    return make_sentence(
        {"EU", "rejects", "German", "call", "to", "boycott", "British", "lamb"},
        {Tag::b("ORG"), Tag::o(), Tag::b("MISC"), Tag::o(), Tag::o(), Tag::o(), Tag::b("MISC"),
         Tag::o()},
        "en");
}

inline Sentence example_sentence_per_org() {
    return make_sentence({"Clinton", "aide", "resigns", ",", "NBC", "says"},
                         {Tag::b("PER"), Tag::o(), Tag::o(), Tag::o(), Tag::b("ORG"), Tag::o()},
                         "en");
}

}  // namespace melm::testing
