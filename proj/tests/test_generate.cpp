#include "doctest.h"

#include <cmath>
#include <map>
#include <set>

#include "melm/generate.hpp"
#include "test_helpers.hpp"

using namespace melm;

namespace {

// Vocabulary plus a stub with the masked-"EU" distribution.
struct StubFixture {
    Vocabulary vocab;
    StubBackend stub;

    StubFixture() : vocab(build_fixture_vocab()), stub(vocab) {
        stub.add_entry("", "rejects", render_label_marker(Tag::b("ORG")),
                       {{"EU", 0.30},
                        {"Greenpeace", 0.25},
                        {"Amnesty", 0.20},
                        {"UN", 0.15},
                        {"Reuters", 0.08},
                        {"lamb", 0.02}});
    }

    static Vocabulary build_fixture_vocab() {
        Corpus c;
        c.add(testing::example_sentence_org_misc());
        for (const char* t : {"Greenpeace", "Amnesty", "UN", "Reuters"})
            c.add(make_sentence({t, "said"}, {Tag::b("ORG"), Tag::o()}, "en"));
        return build_vocab(c, 1);
    }
};

}  // namespace

TEST_CASE("top_k_sample with k=1 is the argmax") {
    StubFixture f;
    std::vector<double> dist(f.vocab.size(), 0.0);
    dist[static_cast<std::size_t>(f.vocab.id("UN"))] = 0.9;
    dist[static_cast<std::size_t>(f.vocab.id("EU"))] = 0.1;
    RandomStream rng(1);
    for (int i = 0; i < 50; ++i)
        CHECK(top_k_sample(dist, 1, f.vocab.reserved, rng) == f.vocab.id("UN"));
}

TEST_CASE("top_k_sample draws uniformly from the top five") {
    StubFixture f;
    auto seq = linearize(testing::example_sentence_org_misc(), false);
    MaskPlan plan(seq, {surface_item_indices(seq)[0]});
    const auto dist = f.stub.predict(plan)[0];

    RandomStream rng(2);
    std::map<int, int> counts;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) ++counts[top_k_sample(dist, 5, f.vocab.reserved, rng)];

    const std::set<std::string> expected = {"EU", "Greenpeace", "Amnesty", "UN", "Reuters"};
    REQUIRE(counts.size() == 5);
    for (const auto& [id, n] : counts) {
        CHECK(expected.count(f.vocab.token(id)) == 1);
        CHECK(std::abs(static_cast<double>(n) / draws - 0.2) < 0.01);
    }
}

TEST_CASE("top_k_sample removes forbidden tokens before the top-k cut") {
    StubFixture f;
    std::vector<double> dist(f.vocab.size(), 0.0);
    // Adversarial: most mass on reserved tokens, a sliver on real ones. If the
    // cut happened before removal, the top two would both be reserved.
    dist[static_cast<std::size_t>(f.vocab.mask_id)] = 0.5;
    dist[static_cast<std::size_t>(f.vocab.unk_id)] = 0.35;
    dist[static_cast<std::size_t>(f.vocab.id("lamb"))] = 0.1;
    dist[static_cast<std::size_t>(f.vocab.id("EU"))] = 0.05;
    RandomStream rng(3);
    for (int i = 0; i < 40; ++i) {
        const int got = top_k_sample(dist, 2, f.vocab.reserved, rng);
        CHECK((got == f.vocab.id("lamb") || got == f.vocab.id("EU")));
    }

    SUBCASE("no admissible candidate at all is an error") {
        std::vector<bool> all(dist.size(), true);
        CHECK_THROWS_AS(top_k_sample(dist, 5, all, rng), GenerationError);
    }
    SUBCASE("k larger than the admissible set falls through to what remains") {
        std::vector<bool> allow_two(dist.size(), true);
        allow_two[static_cast<std::size_t>(f.vocab.id("lamb"))] = false;
        allow_two[static_cast<std::size_t>(f.vocab.id("EU"))] = false;
        std::set<int> seen;
        for (int i = 0; i < 200; ++i)
            seen.insert(top_k_sample(dist, static_cast<int>(dist.size()), allow_two, rng));
        CHECK(seen == std::set<int>{f.vocab.id("EU"), f.vocab.id("lamb")});
    }
}

TEST_CASE("top_k_sample breaks ties at the k-th probability by ascending id") {
    StubFixture f;
    // Uniform distribution: the candidate set must be the k smallest
    // admissible ids.
    std::vector<double> dist(f.vocab.size(), 1.0 / static_cast<double>(f.vocab.size()));
    std::vector<int> admissible;
    for (std::size_t i = 0; i < f.vocab.size(); ++i)
        if (!f.vocab.reserved[i]) admissible.push_back(static_cast<int>(i));
    RandomStream rng(4);
    std::set<int> seen;
    for (int i = 0; i < 500; ++i) seen.insert(top_k_sample(dist, 3, f.vocab.reserved, rng));
    CHECK(seen == std::set<int>(admissible.begin(), admissible.begin() + 3));
}

TEST_CASE("renormalized sampling weights candidates by probability") {
    StubFixture f;
    std::vector<double> dist(f.vocab.size(), 0.0);
    dist[static_cast<std::size_t>(f.vocab.id("EU"))] = 0.75;
    dist[static_cast<std::size_t>(f.vocab.id("UN"))] = 0.25;
    RandomStream rng(5);
    int eu = 0;
    const int draws = 40000;
    for (int i = 0; i < draws; ++i)
        eu += top_k_sample(dist, 2, f.vocab.reserved, rng, true) == f.vocab.id("EU");
    CHECK(std::abs(static_cast<double>(eu) / draws - 0.75) < 0.01);
}

TEST_CASE("augment returns nothing for an entity-free corpus") {
    StubFixture f;
    Corpus c;
    c.add(make_sentence({"just", "context"}, {Tag::o(), Tag::o()}, "en"));
    GenerateOptions options;
    const auto result = augment(c, f.stub, options, 1);
    CHECK(result.samples.empty());
    CHECK(result.skipped.empty());
}

TEST_CASE("augment emits R samples per eligible sentence") {
    RandomStream rng(6);
    Corpus c;
    for (int i = 0; i < 100; ++i) {
        Sentence s = testing::random_sentence(rng);
        while (!s.has_entity()) s = testing::random_sentence(rng);
        c.add(s);
    }
    Vocabulary vocab = build_vocab(c, 1);
    StubBackend stub(vocab);
    GenerateOptions options;  // rounds = 3
    const auto result = augment(c, stub, options, 7);
    CHECK(result.samples.size() == 300);
    CHECK(result.skipped.empty());
}

TEST_CASE("augment preserves tags, context tokens, and top-k membership") {
    RandomStream rng(8);
    Corpus c = testing::random_corpus(rng, 60);
    Vocabulary vocab = build_vocab(c, 1);
    StubBackend stub(vocab);
    GenerateOptions options;
    const auto result = augment(c, stub, options, 9);
    CHECK(!result.samples.empty());
    for (const auto& sample : result.samples) {
        const Sentence& src = c.sentences[sample.provenance.source_index];
        CHECK(sample.sentence.tags == src.tags);
        CHECK(sample.sentence.size() == src.size());
        std::set<std::size_t> changed(sample.provenance.positions.begin(),
                                      sample.provenance.positions.end());
        for (std::size_t i = 0; i < src.size(); ++i) {
            if (changed.count(i)) {
                CHECK(src.tags[i].is_entity());
            } else {
                CHECK(sample.sentence.tokens[i] == src.tokens[i]);
            }
        }
        // chosen tokens land at the recorded positions
        for (std::size_t j = 0; j < sample.provenance.positions.size(); ++j)
            CHECK(sample.sentence.tokens[sample.provenance.positions[j]] ==
                  sample.provenance.chosen[j]);
        // and are never reserved tokens
        for (const auto& token : sample.provenance.chosen)
            CHECK(!vocab.reserved[static_cast<std::size_t>(vocab.id(token))]);
    }
}

TEST_CASE("augment is deterministic and independent of the worker count") {
    RandomStream rng(10);
    Corpus c = testing::random_corpus(rng, 40);
    Vocabulary vocab = build_vocab(c, 1);
    StubBackend stub(vocab);
    GenerateOptions serial;
    GenerateOptions threaded;
    threaded.threads = 4;
    const auto a = augment(c, stub, serial, 11);
    const auto b = augment(c, stub, serial, 11);
    const auto d = augment(c, stub, threaded, 11);
    CHECK(a.samples == b.samples);
    CHECK(a.samples == d.samples);
    const auto other_seed = augment(c, stub, serial, 12);
    CHECK(a.samples != other_seed.samples);
}

TEST_CASE("augment records per-sentence skips instead of aborting") {
    Corpus c;
    c.add(testing::example_sentence_org_misc());
    std::vector<std::string> long_tokens;
    std::vector<Tag> long_tags;
    for (int i = 0; i < 40; ++i) {
        long_tokens.push_back("w" + std::to_string(i));
        long_tags.push_back(i % 2 == 0 ? Tag::b("ORG") : Tag::o());
    }
    c.add(make_sentence(long_tokens, long_tags, "en"));
    Vocabulary vocab = build_vocab(c, 1);
    // Max length below the long sentence's linearized size.
    TinyMlm model(vocab,
                  MlmConfig{.dim = 8, .heads = 2, .blocks = 1, .ff_mult = 2, .max_len = 24}, 13);
    GenerateOptions options;
    const auto result = augment(c, model, options, 14);
    CHECK(result.samples.size() == 3);  // the short sentence, 3 rounds
    CHECK(result.skipped.size() == 3);  // the long one, 3 rounds
    for (const auto& [idx, reason] : result.skipped) {
        CHECK(idx == 1);
        CHECK(reason.find("exceeds") != std::string::npos);
    }
}
