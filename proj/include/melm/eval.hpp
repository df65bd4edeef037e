#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "melm/corpus.hpp"
#include "melm/errors.hpp"
#include "melm/generate.hpp"
#include "melm/tagger.hpp"

namespace melm {

struct ClassMetrics {
    std::size_t tp = 0, fp = 0, fn = 0;

    double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp); }
    double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn); }
    double f1() const {
        const double p = precision(), r = recall();
        return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    }
    std::size_t support() const { return tp + fn; }
};

struct EvalReport {
    std::map<std::string, ClassMetrics> per_class;
    ClassMetrics micro;

    std::string to_text() const {
        std::ostringstream out;
        out << std::fixed << std::setprecision(4);
        out << std::left << std::setw(10) << "class" << std::right << std::setw(10) << "precision"
            << std::setw(10) << "recall" << std::setw(10) << "f1" << std::setw(10) << "support"
            << "\n";
        for (const auto& [cls, m] : per_class)
            out << std::left << std::setw(10) << cls << std::right << std::setw(10)
                << m.precision() << std::setw(10) << m.recall() << std::setw(10) << m.f1()
                << std::setw(10) << m.support() << "\n";
        out << std::left << std::setw(10) << "micro" << std::right << std::setw(10)
            << micro.precision() << std::setw(10) << micro.recall() << std::setw(10) << micro.f1()
            << std::setw(10) << micro.support() << "\n";
        return out.str();
    }

    std::string to_tsv() const {
        std::ostringstream out;
        out << std::setprecision(17);
        out << "class\tprecision\trecall\tf1\tsupport\n";
        for (const auto& [cls, m] : per_class)
            out << cls << "\t" << m.precision() << "\t" << m.recall() << "\t" << m.f1() << "\t"
                << m.support() << "\n";
        out << "micro\t" << micro.precision() << "\t" << micro.recall() << "\t" << micro.f1()
            << "\t" << micro.support() << "\n";
        return out.str();
    }
};

// Span-level micro F1 under exact (start, end, class) matching.
inline EvalReport micro_f1(const Corpus& gold, const Corpus& predicted) {
    if (gold.size() != predicted.size())
        throw EvalError("gold has " + std::to_string(gold.size()) + " sentences, predicted " +
                        std::to_string(predicted.size()));
    EvalReport report;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const Sentence& g = gold.sentences[i];
        const Sentence& p = predicted.sentences[i];
        if (g.size() != p.size())
            throw EvalError("sentence " + std::to_string(i) + " token count mismatch");
        const auto gold_spans = extract_spans(g);
        const auto pred_spans = extract_spans(p);
        std::set<EntitySpan> gold_set(gold_spans.begin(), gold_spans.end());
        for (const auto& span : pred_spans) {
            if (gold_set.count(span)) {
                ++report.per_class[span.cls].tp;
                ++report.micro.tp;
            } else {
                ++report.per_class[span.cls].fp;
                ++report.micro.fp;
            }
        }
        std::set<EntitySpan> pred_set(pred_spans.begin(), pred_spans.end());
        for (const auto& span : gold_spans) {
            if (!pred_set.count(span)) {
                ++report.per_class[span.cls].fn;
                ++report.micro.fn;
            }
        }
    }
    return report;
}

// Distinct (mention, class) pairs whose dataset label agrees with the span
// the oracle tagger assigns in context.
inline std::map<std::string, std::size_t> unique_valid_entities(
    const std::vector<std::pair<std::string, const Corpus*>>& datasets,
    const PerceptronTagger& oracle) {
    std::map<std::string, std::size_t> counts;
    for (const auto& [name, corpus] : datasets) {
        std::set<std::pair<Mention, std::string>> valid;
        for (const auto& s : corpus->sentences) {
            const auto predicted = oracle.tag(s.tokens);
            Sentence pred = s;
            pred.tags = predicted;
            const auto pred_spans = extract_spans(pred);
            std::set<EntitySpan> pred_set(pred_spans.begin(), pred_spans.end());
            for (const auto& span : extract_spans(s)) {
                if (!pred_set.count(span)) continue;
                valid.insert(
                    {Mention(s.tokens.begin() + static_cast<std::ptrdiff_t>(span.start),
                             s.tokens.begin() + static_cast<std::ptrdiff_t>(span.end)),
                     span.cls});
            }
        }
        counts[name] = valid.size();
    }
    return counts;
}

struct CompareTable {
    struct Row {
        uint64_t seed;
        double f1_gold;
        double f1_augmented;
    };
    std::vector<Row> rows;

    double mean_gold() const {
        double s = 0;
        for (const auto& r : rows) s += r.f1_gold;
        return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
    }
    double mean_augmented() const {
        double s = 0;
        for (const auto& r : rows) s += r.f1_augmented;
        return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
    }
    double spread_gold() const { return spread([](const Row& r) { return r.f1_gold; }); }
    double spread_augmented() const {
        return spread([](const Row& r) { return r.f1_augmented; });
    }

    std::string to_text() const {
        std::ostringstream out;
        out << std::fixed << std::setprecision(4);
        out << std::left << std::setw(8) << "seed" << std::right << std::setw(12) << "gold-only"
            << std::setw(12) << "gold+aug"
            << "\n";
        for (const auto& r : rows)
            out << std::left << std::setw(8) << r.seed << std::right << std::setw(12) << r.f1_gold
                << std::setw(12) << r.f1_augmented << "\n";
        out << std::left << std::setw(8) << "mean" << std::right << std::setw(12) << mean_gold()
            << std::setw(12) << mean_augmented() << "\n";
        out << std::left << std::setw(8) << "spread" << std::right << std::setw(12)
            << spread_gold() << std::setw(12) << spread_augmented() << "\n";
        return out.str();
    }

    std::string to_tsv() const {
        std::ostringstream out;
        out << std::setprecision(17);
        out << "seed\tf1_gold\tf1_augmented\n";
        for (const auto& r : rows)
            out << r.seed << "\t" << r.f1_gold << "\t" << r.f1_augmented << "\n";
        out << "mean\t" << mean_gold() << "\t" << mean_augmented() << "\n";
        out << "spread\t" << spread_gold() << "\t" << spread_augmented() << "\n";
        return out.str();
    }

private:
    template <typename F>
    double spread(F&& get) const {
        if (rows.size() < 2) return 0.0;
        const double mean = [&] {
            double s = 0;
            for (const auto& r : rows) s += get(r);
            return s / static_cast<double>(rows.size());
        }();
        double var = 0;
        for (const auto& r : rows) var += (get(r) - mean) * (get(r) - mean);
        return std::sqrt(var / static_cast<double>(rows.size() - 1));
    }
};

// Trains a tagger on gold alone and on gold plus the augmented sentences for
// each seed, evaluating both on the held-out test set. Both conditions share
// the same per-seed stream, so with no augmented data the rows coincide.
inline CompareTable compare_runs(const Corpus& gold, const Corpus& augmented, const Corpus& test,
                                 const std::vector<uint64_t>& seeds, int epochs) {
    CompareTable table;
    for (uint64_t seed : seeds) {
        RandomStream rng_gold(derive_seed(seed, {0}));
        const auto tagger_gold = train_tagger(gold, epochs, rng_gold);
        const double f1_gold = micro_f1(test, tagger_gold.tag_corpus(test)).micro.f1();

        RandomStream rng_aug(derive_seed(seed, {0}));
        const Corpus combined = concat(gold, augmented);
        const auto tagger_aug = train_tagger(combined, epochs, rng_aug);
        const double f1_aug = micro_f1(test, tagger_aug.tag_corpus(test)).micro.f1();

        table.rows.push_back({seed, f1_gold, f1_aug});
    }
    return table;
}

inline CompareTable compare_runs(const Corpus& gold, const std::vector<AugmentedSample>& samples,
                                 const Corpus& test, const std::vector<uint64_t>& seeds,
                                 int epochs) {
    Corpus augmented;
    for (const auto& s : samples) augmented.add(s.sentence);
    return compare_runs(gold, augmented, test, seeds, epochs);
}

}  // namespace melm
