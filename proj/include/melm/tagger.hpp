#pragma once

#include <algorithm>
#include <cctype>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "melm/corpus.hpp"
#include "melm/errors.hpp"
#include "melm/generate.hpp"
#include "melm/rng.hpp"

namespace melm {

namespace detail {

inline std::string token_shape(const std::string& token) {
    std::string shape;
    shape.reserve(token.size());
    for (unsigned char c : token) {
        char s;
        if (std::isupper(c))
            s = 'X';
        else if (std::islower(c))
            s = 'x';
        else if (std::isdigit(c))
            s = 'd';
        else if (c >= 0x80)
            s = 'u';
        else
            s = static_cast<char>(c);
        if (shape.empty() || shape.back() != s) shape.push_back(s);
    }
    return shape;
}

inline std::string lowercase_ascii(const std::string& token) {
    std::string out = token;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace detail

// Averaged structured perceptron over a linear chain with exact Viterbi
// decoding. Transitions that would break BIO validity score -inf, so the
// decoder can never emit an invalid sequence.
class PerceptronTagger {
public:
    std::vector<Tag> tag(const std::vector<std::string>& tokens) const {
        if (tokens.empty()) return {};
        const auto viterbi_path = decode(tokens, weights_, transitions_, start_weights_);
        std::vector<Tag> tags;
        tags.reserve(tokens.size());
        for (int id : viterbi_path) tags.push_back(Tag::parse(tag_names_[static_cast<std::size_t>(id)]));
        return tags;
    }

    Corpus tag_corpus(const Corpus& input) const {
        Corpus out;
        for (const auto& s : input.sentences) {
            Sentence pred = s;
            pred.tags = tag(s.tokens);
            out.add(std::move(pred));
        }
        return out;
    }

    const std::vector<double>& epoch_accuracy() const { return epoch_accuracy_; }
    const std::vector<std::string>& tag_names() const { return tag_names_; }

    friend PerceptronTagger train_tagger(const Corpus& gold, int epochs, RandomStream& rng);

private:
    using FeatureWeights = std::unordered_map<std::string, std::vector<double>>;

    static std::vector<std::string> features_at(const std::vector<std::string>& tokens,
                                                std::size_t i) {
        const std::string& w = tokens[i];
        std::vector<std::string> f;
        f.reserve(12);
        f.push_back("b");  // bias
        f.push_back("w=" + w);
        f.push_back("lw=" + detail::lowercase_ascii(w));
        for (std::size_t n = 1; n <= 3 && n <= w.size(); ++n) {
            f.push_back("p" + std::to_string(n) + "=" + w.substr(0, n));
            f.push_back("s" + std::to_string(n) + "=" + w.substr(w.size() - n));
        }
        f.push_back("sh=" + detail::token_shape(w));
        f.push_back("prev=" + (i > 0 ? tokens[i - 1] : std::string("<s>")));
        f.push_back("next=" + (i + 1 < tokens.size() ? tokens[i + 1] : std::string("</s>")));
        return f;
    }

    bool legal_start(int t) const { return tag_names_[static_cast<std::size_t>(t)][0] != 'I'; }

    bool legal_transition(int from, int to) const {
        const std::string& next = tag_names_[static_cast<std::size_t>(to)];
        if (next[0] != 'I') return true;
        const std::string& prev = tag_names_[static_cast<std::size_t>(from)];
        if (prev[0] == 'O') return false;
        return prev.substr(2) == next.substr(2);
    }

    std::vector<int> decode(const std::vector<std::string>& tokens, const FeatureWeights& w,
                            const std::vector<std::vector<double>>& trans,
                            const std::vector<double>& start) const {
        const std::size_t L = tokens.size();
        const std::size_t T = tag_names_.size();
        constexpr double neg_inf = -std::numeric_limits<double>::infinity();
        std::vector<std::vector<double>> score(L, std::vector<double>(T, neg_inf));
        std::vector<std::vector<int>> back(L, std::vector<int>(T, -1));

        std::vector<double> emit(T);
        auto fill_emissions = [&](std::size_t i) {
            std::fill(emit.begin(), emit.end(), 0.0);
            for (const auto& feat : features_at(tokens, i)) {
                auto it = w.find(feat);
                if (it == w.end()) continue;
                for (std::size_t t = 0; t < T; ++t) emit[t] += it->second[t];
            }
        };

        fill_emissions(0);
        for (std::size_t t = 0; t < T; ++t)
            if (legal_start(static_cast<int>(t)))
                score[0][t] = emit[t] + start[t];
        for (std::size_t i = 1; i < L; ++i) {
            fill_emissions(i);
            for (std::size_t t = 0; t < T; ++t) {
                double best = neg_inf;
                int best_prev = -1;
                for (std::size_t p = 0; p < T; ++p) {
                    if (score[i - 1][p] == neg_inf) continue;
                    if (!legal_transition(static_cast<int>(p), static_cast<int>(t))) continue;
                    const double s = score[i - 1][p] + trans[p][t];
                    if (s > best) {
                        best = s;
                        best_prev = static_cast<int>(p);
                    }
                }
                if (best_prev >= 0) {
                    score[i][t] = best + emit[t];
                    back[i][t] = best_prev;
                }
            }
        }

        std::size_t best_t = 0;
        for (std::size_t t = 1; t < T; ++t)
            if (score[L - 1][t] > score[L - 1][best_t]) best_t = t;
        std::vector<int> path(L);
        path[L - 1] = static_cast<int>(best_t);
        for (std::size_t i = L - 1; i > 0; --i)
            path[i - 1] = back[i][static_cast<std::size_t>(path[i])];
        return path;
    }

    std::vector<std::string> tag_names_;
    std::map<std::string, int> tag_ids_;
    FeatureWeights weights_;
    std::vector<std::vector<double>> transitions_;  // [from][to]
    std::vector<double> start_weights_;
    std::vector<double> epoch_accuracy_;
};

inline PerceptronTagger train_tagger(const Corpus& gold, int epochs, RandomStream& rng) {
    if (gold.empty()) throw TrainingError("cannot train a tagger on an empty corpus");

    PerceptronTagger tagger;
    tagger.tag_names_.push_back("O");
    for (const auto& cls : gold.classes()) {
        tagger.tag_names_.push_back("B-" + cls);
        tagger.tag_names_.push_back("I-" + cls);
    }
    for (std::size_t t = 0; t < tagger.tag_names_.size(); ++t)
        tagger.tag_ids_[tagger.tag_names_[t]] = static_cast<int>(t);
    const std::size_t T = tagger.tag_names_.size();

    // Current weights plus running totals for averaging; totals are updated
    // lazily via last-touched timestamps.
    PerceptronTagger::FeatureWeights w, acc;
    std::unordered_map<std::string, std::vector<long long>> stamp;
    std::vector<std::vector<double>> trans(T, std::vector<double>(T, 0.0)),
        trans_acc(T, std::vector<double>(T, 0.0));
    std::vector<std::vector<long long>> trans_stamp(T, std::vector<long long>(T, 0));
    std::vector<double> start(T, 0.0), start_acc(T, 0.0);
    std::vector<long long> start_stamp(T, 0);
    long long step = 0;

    auto bump_feature = [&](const std::string& feat, int t, double delta) {
        auto& wv = w[feat];
        if (wv.empty()) wv.assign(T, 0.0);
        auto& av = acc[feat];
        if (av.empty()) av.assign(T, 0.0);
        auto& sv = stamp[feat];
        if (sv.empty()) sv.assign(T, 0);
        av[static_cast<std::size_t>(t)] +=
            wv[static_cast<std::size_t>(t)] * static_cast<double>(step - sv[static_cast<std::size_t>(t)]);
        sv[static_cast<std::size_t>(t)] = step;
        wv[static_cast<std::size_t>(t)] += delta;
    };
    auto bump_trans = [&](int from, int to, double delta) {
        auto f = static_cast<std::size_t>(from), o = static_cast<std::size_t>(to);
        trans_acc[f][o] += trans[f][o] * static_cast<double>(step - trans_stamp[f][o]);
        trans_stamp[f][o] = step;
        trans[f][o] += delta;
    };
    auto bump_start = [&](int t, double delta) {
        auto i = static_cast<std::size_t>(t);
        start_acc[i] += start[i] * static_cast<double>(step - start_stamp[i]);
        start_stamp[i] = step;
        start[i] += delta;
    };

    std::vector<std::size_t> order(gold.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        std::size_t correct = 0, total = 0;
        for (std::size_t si : order) {
            const Sentence& s = gold.sentences[si];
            ++step;
            const auto pred = tagger.decode(s.tokens, w, trans, start);

            std::vector<int> truth(s.size());
            for (std::size_t i = 0; i < s.size(); ++i)
                truth[i] = tagger.tag_ids_.at(s.tags[i].str());
            total += s.size();
            bool mismatch = false;
            for (std::size_t i = 0; i < s.size(); ++i) {
                if (pred[i] == truth[i])
                    ++correct;
                else
                    mismatch = true;
            }
            if (!mismatch) continue;
            for (std::size_t i = 0; i < s.size(); ++i) {
                if (pred[i] != truth[i]) {
                    for (const auto& feat : PerceptronTagger::features_at(s.tokens, i)) {
                        bump_feature(feat, truth[i], 1.0);
                        bump_feature(feat, pred[i], -1.0);
                    }
                }
                if (i == 0) {
                    if (pred[0] != truth[0]) {
                        bump_start(truth[0], 1.0);
                        bump_start(pred[0], -1.0);
                    }
                } else if (pred[i] != truth[i] || pred[i - 1] != truth[i - 1]) {
                    bump_trans(truth[i - 1], truth[i], 1.0);
                    bump_trans(pred[i - 1], pred[i], -1.0);
                }
            }
        }
        tagger.epoch_accuracy_.push_back(static_cast<double>(correct) /
                                         static_cast<double>(total));
    }

    // Flush and install the averaged weights.
    const auto denom = static_cast<double>(std::max<long long>(step, 1));
    for (auto& [feat, wv] : w) {
        auto& av = acc[feat];
        auto& sv = stamp[feat];
        for (std::size_t t = 0; t < T; ++t)
            av[t] += wv[t] * static_cast<double>(step - sv[t]);
        for (std::size_t t = 0; t < T; ++t) av[t] /= denom;
    }
    for (std::size_t f = 0; f < T; ++f)
        for (std::size_t t = 0; t < T; ++t) {
            trans_acc[f][t] += trans[f][t] * static_cast<double>(step - trans_stamp[f][t]);
            trans_acc[f][t] /= denom;
        }
    for (std::size_t t = 0; t < T; ++t) {
        start_acc[t] += start[t] * static_cast<double>(step - start_stamp[t]);
        start_acc[t] /= denom;
    }
    tagger.weights_ = std::move(acc);
    tagger.transitions_ = std::move(trans_acc);
    tagger.start_weights_ = std::move(start_acc);
    return tagger;
}

struct FilterReport {
    std::size_t input = 0;
    std::size_t kept = 0;
    std::size_t dropped_mismatch = 0;
    std::size_t dropped_duplicate = 0;
    std::map<std::string, std::size_t> mismatch_by_class;

    std::string to_text() const {
        std::ostringstream out;
        out << "filter report\n";
        out << "  input      " << input << "\n";
        out << "  kept       " << kept << "\n";
        out << "  mismatched " << dropped_mismatch << "\n";
        out << "  duplicate  " << dropped_duplicate << "\n";
        for (const auto& [cls, n] : mismatch_by_class)
            out << "  mismatch[" << cls << "] " << n << "\n";
        return out.str();
    }
};

// Keeps samples whose full predicted tag sequence equals their own tags.
// With dedup on, samples token-identical to a gold sentence or to an earlier
// kept sample are dropped as well. Order is stable.
inline std::vector<AugmentedSample> filter_consistent(
    const std::vector<AugmentedSample>& samples, const PerceptronTagger& tagger, bool dedup,
    const Corpus* gold = nullptr, FilterReport* report = nullptr) {
    FilterReport local;
    local.input = samples.size();
    std::set<std::vector<std::string>> seen;
    if (dedup && gold != nullptr)
        for (const auto& s : gold->sentences) seen.insert(s.tokens);

    std::vector<AugmentedSample> kept;
    for (const auto& sample : samples) {
        const auto predicted = tagger.tag(sample.sentence.tokens);
        if (predicted != sample.sentence.tags) {
            ++local.dropped_mismatch;
            for (std::size_t i = 0; i < predicted.size(); ++i) {
                if (predicted[i] == sample.sentence.tags[i]) continue;
                const Tag& expected = sample.sentence.tags[i];
                ++local.mismatch_by_class[expected.is_o() ? "O" : expected.cls];
                break;
            }
            continue;
        }
        if (dedup && !seen.insert(sample.sentence.tokens).second) {
            ++local.dropped_duplicate;
            continue;
        }
        kept.push_back(sample);
    }
    local.kept = kept.size();
    if (report) *report = local;
    return kept;
}

}  // namespace melm
