#include "doctest.h"

#include <set>

#include "melm/tagger.hpp"
#include "test_helpers.hpp"

using namespace melm;

namespace {

// Entity classes are fully determined by token prefixes, so the feature
// templates can separate the corpus perfectly.
Corpus separable_corpus(std::size_t n) {
    Corpus c;
    const std::vector<std::string> ctx = {"the", "a", "near", "with", "saw"};
    for (std::size_t i = 0; i < n; ++i) {
        const std::string per = "Zp" + std::to_string(i % 17);
        const std::string org = "Zq" + std::to_string(i % 13);
        const std::string loc = "Zr" + std::to_string(i % 11);
        c.add(make_sentence({per, ctx[i % 5], org, ctx[(i + 1) % 5], loc},
                            {Tag::b("PER"), Tag::o(), Tag::b("ORG"), Tag::o(), Tag::b("LOC")},
                            "en"));
    }
    return c;
}

std::vector<AugmentedSample> as_samples(const Corpus& c) {
    std::vector<AugmentedSample> out;
    for (std::size_t i = 0; i < c.size(); ++i)
        out.push_back({c.sentences[i], Provenance{i, 1, {}, {}}});
    return out;
}

}  // namespace

TEST_CASE("train_tagger memorizes a single sentence") {
    Corpus c;
    c.add(testing::example_sentence_org_misc());
    RandomStream rng(1);
    const auto tagger = train_tagger(c, 5, rng);
    CHECK(tagger.tag(c.sentences[0].tokens) == c.sentences[0].tags);
}

TEST_CASE("train_tagger reaches high accuracy on a separable corpus") {
    Corpus c = separable_corpus(50);
    RandomStream rng(2);
    const auto tagger = train_tagger(c, 8, rng);
    const auto& acc = tagger.epoch_accuracy();
    REQUIRE(acc.size() == 8);
    CHECK(acc.back() >= 0.95);
    // Accuracy trends upward from the first epoch.
    CHECK(acc.back() >= acc.front());
}

TEST_CASE("train_tagger is deterministic for a fixed seed") {
    Corpus c = separable_corpus(30);
    RandomStream ra(3), rb(3);
    const auto a = train_tagger(c, 5, ra);
    const auto b = train_tagger(c, 5, rb);
    CHECK(a.epoch_accuracy() == b.epoch_accuracy());
    RandomStream probe(4);
    for (int i = 0; i < 100; ++i) {
        const Sentence s = testing::random_sentence(probe);
        CHECK(a.tag(s.tokens) == b.tag(s.tokens));
    }
}

TEST_CASE("train_tagger rejects an empty corpus") {
    RandomStream rng(5);
    Corpus empty;
    CHECK_THROWS_AS(train_tagger(empty, 3, rng), TrainingError);
}

TEST_CASE("viterbi decoding never emits an invalid BIO sequence") {
    // Even a barely trained tagger must produce structurally valid output.
    Corpus c = separable_corpus(5);
    RandomStream rng(6);
    const auto tagger = train_tagger(c, 1, rng);
    RandomStream probe(7);
    for (int i = 0; i < 300; ++i) {
        const Sentence s = testing::random_sentence(probe);
        const auto tags = tagger.tag(s.tokens);
        CHECK(!bio_violation(tags).has_value());
    }
}

TEST_CASE("filter_consistent keeps agreeing samples and drops misaligned ones") {
    Corpus c = separable_corpus(50);
    RandomStream rng(8);
    const auto tagger = train_tagger(c, 8, rng);

    // A sample whose tags the tagger reproduces.
    AugmentedSample good{c.sentences[0], Provenance{0, 1, {}, {}}};
    // A PER slot filled with something the tagger reads as ORG.
    Sentence bad_sentence = c.sentences[0];
    bad_sentence.tokens[0] = "Zq0";
    AugmentedSample bad{bad_sentence, Provenance{0, 2, {0}, {"Zq0"}}};

    FilterReport report;
    const auto kept = filter_consistent({good, bad}, tagger, false, nullptr, &report);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0] == good);
    CHECK(report.input == 2);
    CHECK(report.kept == 1);
    CHECK(report.dropped_mismatch == 1);
    CHECK(report.mismatch_by_class.at("PER") == 1);
}

TEST_CASE("filter_consistent dedup drops gold duplicates and repeats") {
    Corpus c = separable_corpus(10);
    RandomStream rng(9);
    const auto tagger = train_tagger(c, 8, rng);

    const auto samples = as_samples(Corpus::from({c.sentences[0], c.sentences[0],
                                                  c.sentences[1]}));
    SUBCASE("dedup off keeps all consistent samples") {
        CHECK(filter_consistent(samples, tagger, false).size() == 3);
    }
    SUBCASE("dedup drops token-identical gold sentences and earlier keeps") {
        FilterReport report;
        const auto kept = filter_consistent(samples, tagger, true, &c, &report);
        CHECK(kept.empty());  // all three are token-identical to gold
        CHECK(report.dropped_duplicate == 3);

        Sentence fresh = c.sentences[0];
        fresh.tokens[0] = "Zp3";  // still tagged PER, but not in gold
        const auto kept2 = filter_consistent(as_samples(Corpus::from({fresh, fresh})), tagger,
                                             true, &c);
        CHECK(kept2.size() == 1);
    }
}

TEST_CASE("filter_consistent output is a subset, idempotent, and re-passes") {
    RandomStream rng(10);
    Corpus train = separable_corpus(40);
    RandomStream trng(11);
    const auto tagger = train_tagger(train, 6, trng);

    // 1000+ random samples: some valid, some scrambled.
    std::vector<AugmentedSample> samples;
    for (int i = 0; i < 520; ++i) {
        samples.push_back({train.sentences[static_cast<std::size_t>(i) % train.size()],
                           Provenance{static_cast<std::size_t>(i) % train.size(), 1, {}, {}}});
        Sentence scrambled = testing::random_sentence(rng);
        samples.push_back({scrambled, Provenance{0, 1, {}, {}}});
    }
    const auto kept = filter_consistent(samples, tagger, false);
    // subset of the input
    for (const auto& sample : kept) {
        bool found = false;
        for (const auto& original : samples)
            if (original == sample) {
                found = true;
                break;
            }
        CHECK(found);
    }
    // idempotent
    const auto twice = filter_consistent(kept, tagger, false);
    CHECK(twice == kept);
    // every kept sample re-passes re-tagging
    for (const auto& sample : kept)
        CHECK(tagger.tag(sample.sentence.tokens) == sample.sentence.tags);
}
