#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "melm/corpus.hpp"
#include "melm/errors.hpp"
#include "melm/linearize.hpp"
#include "melm/masking.hpp"
#include "melm/mlm.hpp"
#include "melm/rng.hpp"
#include "melm/util.hpp"

namespace melm {

struct Provenance {
    std::size_t source_index = 0;
    int round = 0;
    std::vector<std::size_t> positions;  // token positions in the source sentence
    std::vector<std::string> chosen;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

// An augmented sentence. Tags are identical to the source by construction;
// only the recorded positions carry new surface tokens.
struct AugmentedSample {
    Sentence sentence;
    Provenance provenance;

    friend bool operator==(const AugmentedSample&, const AugmentedSample&) = default;
};

struct GenerateOptions {
    MaskingConfig mask;
    bool language_markers = false;
    bool renormalize = false;  // sample within top-k proportionally instead of uniformly
    int threads = 1;
};

// Draws a replacement token id from the k most probable admissible tokens.
// Forbidden ids (markers and special tokens) are removed before the top-k cut;
// ties at the k-th probability go to the smaller token id. Uniform choice
// within the candidate set by default.
inline int top_k_sample(const std::vector<double>& dist, int k,
                        const std::vector<bool>& forbidden, RandomStream& rng,
                        bool renormalize = false) {
    if (k < 1) throw GenerationError("top-k size must be at least 1");
    std::vector<int> ids;
    ids.reserve(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i)
        if (i >= forbidden.size() || !forbidden[i]) ids.push_back(static_cast<int>(i));
    if (ids.empty()) throw GenerationError("no admissible candidate tokens");
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), ids.size());
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(),
                      [&](int a, int b) {
                          if (dist[static_cast<std::size_t>(a)] != dist[static_cast<std::size_t>(b)])
                              return dist[static_cast<std::size_t>(a)] >
                                     dist[static_cast<std::size_t>(b)];
                          return a < b;
                      });
    ids.resize(keep);
    if (!renormalize) return ids[rng.uniform_index(ids.size())];
    double total = 0.0;
    for (int id : ids) total += dist[static_cast<std::size_t>(id)];
    if (total <= 0.0) return ids[rng.uniform_index(ids.size())];
    const double r = rng.uniform_real() * total;
    double cum = 0.0;
    for (int id : ids) {
        cum += dist[static_cast<std::size_t>(id)];
        if (r < cum) return id;
    }
    return ids.back();
}

struct AugmentResult {
    std::vector<AugmentedSample> samples;
    std::vector<std::pair<std::size_t, std::string>> skipped;  // (sentence index, reason)
};

// Generates R augmented variants of every sentence with at least one entity
// token: linearize, draw a generation mask, predict, sample a replacement per
// masked slot, splice, strip markers. Per-sentence failures are recorded and
// skipped, never fatal. Deterministic for a fixed seed at any worker count,
// since each (sentence, round) task draws from its own derived stream.
inline AugmentResult augment(const Corpus& corpus, const MlmBackend& backend,
                             const GenerateOptions& options, uint64_t seed) {
    const auto& vocab = backend.vocab();
    const std::vector<bool>& forbidden = vocab.reserved;
    const int rounds = options.mask.rounds;

    struct Slot {
        bool produced = false;
        AugmentedSample sample;
        bool failed = false;
        std::size_t source = 0;
        std::string reason;
    };
    const std::size_t tasks = corpus.size() * static_cast<std::size_t>(rounds);
    std::vector<Slot> slots(tasks);

    parallel_for(tasks, options.threads, [&](std::size_t task) {
        const std::size_t s = task / static_cast<std::size_t>(rounds);
        const int round = static_cast<int>(task % static_cast<std::size_t>(rounds)) + 1;
        const Sentence& sentence = corpus.sentences[s];
        if (!sentence.has_entity()) return;
        Slot& slot = slots[task];
        slot.source = s;
        try {
            RandomStream rng(derive_seed(seed, {s, static_cast<uint64_t>(round)}));
            const auto seq = linearize(sentence, options.language_markers);
            auto plan = gen_mask(seq, options.mask.mu, rng);
            const auto dists = backend.predict(*plan);
            std::map<std::size_t, std::string> replacements;
            Provenance prov;
            prov.source_index = s;
            prov.round = round;
            const auto surface_items = surface_item_indices(seq);
            for (std::size_t i = 0; i < plan->masked_positions.size(); ++i) {
                const std::size_t item_idx = plan->masked_positions[i];
                const int chosen =
                    top_k_sample(dists[i], options.mask.k, forbidden, rng, options.renormalize);
                const std::string& token = vocab.token(chosen);
                replacements[item_idx] = token;
                const auto it =
                    std::lower_bound(surface_items.begin(), surface_items.end(), item_idx);
                prov.positions.push_back(
                    static_cast<std::size_t>(it - surface_items.begin()));
                prov.chosen.push_back(token);
            }
            Sentence out = delinearize(splice_replacements(seq, replacements));
            slot.sample = AugmentedSample{std::move(out), std::move(prov)};
            slot.produced = true;
        } catch (const Error& e) {
            slot.failed = true;
            slot.reason = e.what();
        }
    });

    AugmentResult result;
    for (const auto& slot : slots) {
        if (slot.produced)
            result.samples.push_back(slot.sample);
        else if (slot.failed)
            result.skipped.emplace_back(slot.source, slot.reason);
    }
    return result;
}

}  // namespace melm
