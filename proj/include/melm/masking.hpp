#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "melm/corpus.hpp"
#include "melm/errors.hpp"
#include "melm/linearize.hpp"
#include "melm/rng.hpp"

namespace melm {

struct MaskingConfig {
    double eta = 0.7;  // fine-tune mask rate
    double mu = 0.5;   // generation Gaussian mean
    int k = 5;         // top-k candidate set size
    int rounds = 3;    // generation rounds R
};

// Masked positions of a linearized sequence plus the original tokens there.
// Only entity surface tokens are ever masked; a plan is never empty.
struct MaskPlan {
    LinearizedSequence base;
    std::vector<std::size_t> masked_positions;  // ascending item indices
    std::map<std::size_t, std::string> targets;

    MaskPlan(LinearizedSequence seq, std::vector<std::size_t> positions)
        : base(std::move(seq)), masked_positions(std::move(positions)) {
        std::sort(masked_positions.begin(), masked_positions.end());
        if (masked_positions.empty()) throw DataError("mask plan with no masked positions");
        for (std::size_t p : masked_positions) {
            if (p >= base.items.size()) throw DataError("masked position out of range");
            const LinItem& item = base.items[p];
            if (item.kind != ItemKind::surface || !item.tag.is_entity())
                throw DataError("masked position " + std::to_string(p) +
                                " is not an entity token");
            targets[p] = item.text;
        }
    }
};

namespace detail {

inline std::vector<std::size_t> entity_item_indices(const LinearizedSequence& seq) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < seq.items.size(); ++i)
        if (seq.items[i].kind == ItemKind::surface && seq.items[i].tag.is_entity())
            out.push_back(i);
    return out;
}

}  // namespace detail

// Fine-tuning mask: each entity token masked independently with probability
// eta; when the draw selects nothing, one entity position is forced so every
// emitted plan is non-empty. Entity-free sequences yield nullopt.
inline std::optional<MaskPlan> finetune_mask(const LinearizedSequence& seq, double eta,
                                             RandomStream& rng) {
    const auto entity_items = detail::entity_item_indices(seq);
    if (entity_items.empty()) return std::nullopt;
    std::vector<std::size_t> picked;
    for (std::size_t idx : entity_items)
        if (rng.bernoulli(eta)) picked.push_back(idx);
    if (picked.empty()) picked.push_back(entity_items[rng.uniform_index(entity_items.size())]);
    return MaskPlan(seq, std::move(picked));
}

// Generation mask: per entity span of n tokens, draw a dynamic rate
// eps ~ N(mu, 1/n^2), clip to [0,1], and mask m = clamp(round(eps*n), 1, n)
// positions of the span chosen uniformly without replacement. Rounding is
// half-away-from-zero. Entity-free sequences yield nullopt.
inline std::optional<MaskPlan> gen_mask(const LinearizedSequence& seq, double mu,
                                        RandomStream& rng) {
    const auto spans = extract_spans(seq.origin);
    if (spans.empty()) return std::nullopt;
    const auto surface_items = surface_item_indices(seq);
    std::vector<std::size_t> picked;
    for (const auto& span : spans) {
        const std::size_t n = span.end - span.start;
        double eps = rng.gaussian(mu, 1.0 / static_cast<double>(n));
        eps = std::clamp(eps, 0.0, 1.0);
        const auto m = static_cast<std::size_t>(std::clamp<long long>(
            std::llround(eps * static_cast<double>(n)), 1, static_cast<long long>(n)));
        std::vector<std::size_t> within(n);
        for (std::size_t i = 0; i < n; ++i) within[i] = span.start + i;
        for (std::size_t i = 0; i < m; ++i)
            std::swap(within[i], within[i + rng.uniform_index(n - i)]);
        for (std::size_t i = 0; i < m; ++i) picked.push_back(surface_items[within[i]]);
    }
    return MaskPlan(seq, std::move(picked));
}

}  // namespace melm
