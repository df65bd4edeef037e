#include "doctest.h"

#include "melm/eval.hpp"
#include "test_helpers.hpp"

using namespace melm;

namespace {

Corpus retag(const Corpus& c, const std::vector<std::vector<Tag>>& tags) {
    Corpus out;
    for (std::size_t i = 0; i < c.size(); ++i) {
        Sentence s = c.sentences[i];
        s.tags = tags[i];
        out.add(std::move(s));
    }
    return out;
}

}  // namespace

TEST_CASE("micro_f1 on identical corpora is 1") {
    Corpus c;
    c.add(testing::example_sentence_org_misc());
    c.add(testing::example_sentence_per_org());
    const auto report = micro_f1(c, c);
    CHECK(report.micro.f1() == 1.0);
    CHECK(report.micro.precision() == 1.0);
    CHECK(report.micro.recall() == 1.0);
}

TEST_CASE("micro_f1 hand-computed example") {
    Corpus gold;
    gold.add(make_sentence({"EU", "x", "German", "y"},
                           {Tag::b("ORG"), Tag::o(), Tag::b("MISC"), Tag::o()}, "en"));
    Corpus pred = retag(gold, {{Tag::b("ORG"), Tag::o(), Tag::o(), Tag::o()}});
    const auto report = micro_f1(gold, pred);
    // one true positive, no false positives, one false negative
    CHECK(report.micro.precision() == 1.0);
    CHECK(report.micro.recall() == 0.5);
    CHECK(report.micro.f1() == doctest::Approx(2.0 / 3.0));
    CHECK(report.per_class.at("ORG").f1() == 1.0);
    CHECK(report.per_class.at("MISC").recall() == 0.0);
}

TEST_CASE("micro_f1 with an all-O prediction is 0") {
    Corpus gold;
    gold.add(testing::example_sentence_per_org());
    Corpus pred = retag(gold, {std::vector<Tag>(gold.sentences[0].size(), Tag::o())});
    CHECK(micro_f1(gold, pred).micro.f1() == 0.0);
}

TEST_CASE("micro_f1 swaps precision and recall when arguments swap") {
    RandomStream rng(1);
    for (int trial = 0; trial < 30; ++trial) {
        Corpus a = testing::random_corpus(rng, 8);
        Corpus b;
        for (const auto& s : a.sentences) {
            Sentence other = testing::random_sentence(rng, s.size(), s.size());
            other.tokens = s.tokens;
            b.add(other);
        }
        const auto ab = micro_f1(a, b);
        const auto ba = micro_f1(b, a);
        CHECK(ab.micro.precision() == ba.micro.recall());
        CHECK(ab.micro.recall() == ba.micro.precision());
        CHECK(ab.micro.f1() == doctest::Approx(ba.micro.f1()));
    }
}

TEST_CASE("micro_f1 rejects shape mismatches") {
    Corpus gold;
    gold.add(testing::example_sentence_per_org());
    Corpus fewer;
    CHECK_THROWS_AS(micro_f1(gold, fewer), EvalError);
    Corpus wrong_tokens;
    wrong_tokens.add(make_sentence({"one"}, {Tag::o()}, "en"));
    CHECK_THROWS_AS(micro_f1(gold, wrong_tokens), EvalError);
}

TEST_CASE("unique_valid_entities counts oracle-confirmed mentions") {
    // A memorizing oracle: trained to convergence on its own corpus.
    Corpus train;
    train.add(make_sentence({"Zp1", "met", "Zp2"}, {Tag::b("PER"), Tag::o(), Tag::b("PER")},
                            "en"));
    train.add(make_sentence({"Zq1", "hired", "Zp1"}, {Tag::b("ORG"), Tag::o(), Tag::b("PER")},
                            "en"));
    RandomStream rng(2);
    const auto oracle = train_tagger(train, 20, rng);

    SUBCASE("the oracle's own training data yields its distinct gold entities") {
        const auto counts = unique_valid_entities({{"train", &train}}, oracle);
        CHECK(counts.at("train") == 3);  // Zp1, Zp2 (PER), Zq1 (ORG)
    }
    SUBCASE("an empty dataset yields zero") {
        Corpus empty;
        CHECK(unique_valid_entities({{"empty", &empty}}, oracle).at("empty") == 0);
    }
    SUBCASE("a mention the oracle labels differently does not count") {
        Corpus wrong;
        wrong.add(make_sentence({"Zp1", "met", "Zp2"},
                                {Tag::b("ORG"), Tag::o(), Tag::b("PER")}, "en"));
        CHECK(unique_valid_entities({{"wrong", &wrong}}, oracle).at("wrong") == 1);
    }
    SUBCASE("counting is monotone under dataset union") {
        Corpus a;
        a.add(train.sentences[0]);
        Corpus b;
        b.add(train.sentences[1]);
        const Corpus both = concat(a, b);
        const auto counts =
            unique_valid_entities({{"a", &a}, {"b", &b}, {"both", &both}}, oracle);
        CHECK(counts.at("both") >= counts.at("a"));
        CHECK(counts.at("both") >= counts.at("b"));
    }
}

TEST_CASE("compare_runs pairs gold-only and gold+augmented conditions") {
    Corpus gold;
    for (int i = 0; i < 12; ++i)
        gold.add(make_sentence({"Zp" + std::to_string(i), "works", "well"},
                               {Tag::b("PER"), Tag::o(), Tag::o()}, "en"));
    Corpus test;
    for (int i = 0; i < 6; ++i)
        test.add(make_sentence({"Zp" + std::to_string(20 + i), "works", "well"},
                               {Tag::b("PER"), Tag::o(), Tag::o()}, "en"));

    SUBCASE("with no augmented data both conditions coincide") {
        const auto table = compare_runs(gold, Corpus{}, test, {1, 2, 3}, 4);
        REQUIRE(table.rows.size() == 3);
        for (const auto& row : table.rows) CHECK(row.f1_gold == row.f1_augmented);
        CHECK(table.mean_gold() == table.mean_augmented());
    }
    SUBCASE("three seeds yield three paired rows plus means") {
        Corpus augmented;
        for (int i = 0; i < 8; ++i)
            augmented.add(make_sentence({"Zp" + std::to_string(30 + i), "works", "well"},
                                        {Tag::b("PER"), Tag::o(), Tag::o()}, "en"));
        const auto table = compare_runs(gold, augmented, test, {7, 8, 9}, 4);
        REQUIRE(table.rows.size() == 3);
        CHECK(table.rows[0].seed == 7);
        const std::string text = table.to_text();
        CHECK(text.find("mean") != std::string::npos);
        const std::string tsv = table.to_tsv();
        CHECK(tsv.find("f1_gold\tf1_augmented") != std::string::npos);
    }
}
