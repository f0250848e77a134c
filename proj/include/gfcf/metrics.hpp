#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "gfcf/errors.hpp"
#include "gfcf/recommend.hpp"

namespace gfcf {

// Binary relevance, log2(p+1) discount, ideal DCG truncated at
// min(k, |truth|) — the convention of the public evaluation code this
// toolkit's reported numbers are comparable with.

inline double recall_at_k(const ScoredSlate& slate, std::span<const Index> truth_sorted, Index k) {
    if (truth_sorted.empty()) throw validation_error("recall_at_k: empty truth set");
    if (k < 1) throw validation_error("recall_at_k: k must be >= 1");
    const Index depth = std::min<Index>(k, static_cast<Index>(slate.item_ids.size()));
    Index hits = 0;
    for (Index p = 0; p < depth; ++p)
        if (std::binary_search(truth_sorted.begin(), truth_sorted.end(), slate.item_ids[p])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(truth_sorted.size());
}

inline double ndcg_at_k(const ScoredSlate& slate, std::span<const Index> truth_sorted, Index k) {
    if (truth_sorted.empty()) throw validation_error("ndcg_at_k: empty truth set");
    if (k < 1) throw validation_error("ndcg_at_k: k must be >= 1");
    const Index depth = std::min<Index>(k, static_cast<Index>(slate.item_ids.size()));
    double dcg = 0.0;
    for (Index p = 0; p < depth; ++p)
        if (std::binary_search(truth_sorted.begin(), truth_sorted.end(), slate.item_ids[p]))
            dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
    const Index ideal = std::min<Index>(k, static_cast<Index>(truth_sorted.size()));
    double idcg = 0.0;
    for (Index p = 0; p < ideal; ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

} // namespace gfcf
