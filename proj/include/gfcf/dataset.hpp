#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gfcf/errors.hpp"
#include "gfcf/sparse.hpp"

namespace gfcf {

struct SplitStats {
    Index n_users = 0;
    Index n_items = 0;
    Index train_nnz = 0;
    Index test_nnz = 0;
    double density = 0.0;
};

/// Train matrix plus per-user held-out items (sorted), as loaded from the
/// public adjacency-list split format: one line per user,
/// `user_id item_id item_id ...`, space-separated decimal integers.
struct SplitDataset {
    std::shared_ptr<const InteractionMatrix> train;
    std::vector<std::vector<Index>> test;  // indexed by user, sorted
    SplitStats stats;
};

/// Raw contents of one adjacency-list file (user then items per line).
struct AdjacencyFile {
    std::vector<std::pair<Index, Index>> pairs;
    Index max_user = -1;
    Index max_item = -1;
};

inline AdjacencyFile read_adjacency_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open " + path.string());
    AdjacencyFile out;
    std::string line;
    Index line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string token;
        bool first = true;
        Index user = -1;
        while (ls >> token) {
            Index value;
            try {
                std::size_t pos = 0;
                value = std::stoll(token, &pos);
                if (pos != token.size() || value < 0) throw std::invalid_argument(token);
            } catch (const std::exception&) {
                throw io_error(path.string() + ": parse error at line " + std::to_string(line_no) +
                               ": bad token '" + token + "'");
            }
            if (first) {
                user = value;
                out.max_user = std::max(out.max_user, user);
                first = false;
            } else {
                out.pairs.emplace_back(user, value);
                out.max_item = std::max(out.max_item, value);
            }
        }
        // A user line with no items is permitted.
    }
    return out;
}

inline SplitDataset load_split(const std::filesystem::path& train_path,
                               const std::filesystem::path& test_path) {
    AdjacencyFile train_file = read_adjacency_file(train_path);
    AdjacencyFile test_file = read_adjacency_file(test_path);

    const Index n_users = std::max(train_file.max_user, test_file.max_user) + 1;
    const Index n_items = std::max(train_file.max_item, test_file.max_item) + 1;

    SplitDataset ds;
    ds.train = std::make_shared<const InteractionMatrix>(
        build_interactions(train_file.pairs, n_users, n_items));

    ds.test.assign(static_cast<std::size_t>(n_users), {});
    for (const auto& [u, i] : test_file.pairs) ds.test[static_cast<std::size_t>(u)].push_back(i);
    Index test_nnz = 0;
    for (Index u = 0; u < n_users; ++u) {
        auto& items = ds.test[static_cast<std::size_t>(u)];
        std::sort(items.begin(), items.end());
        items.erase(std::unique(items.begin(), items.end()), items.end());
        for (Index i : items)
            if (ds.train->has(u, i))
                throw validation_error("train/test overlap: user " + std::to_string(u) +
                                       " holds item " + std::to_string(i) + " in both splits");
        test_nnz += static_cast<Index>(items.size());
    }

    ds.stats.n_users = n_users;
    ds.stats.n_items = n_items;
    ds.stats.train_nnz = ds.train->nnz();
    ds.stats.test_nnz = test_nnz;
    const double cells = static_cast<double>(n_users) * static_cast<double>(n_items);
    ds.stats.density = cells > 0 ? (ds.stats.train_nnz + ds.stats.test_nnz) / cells : 0.0;
    return ds;
}

/// Seeded per-user holdout for hyperparameter sweeps: each user with at least
/// two train items donates round(fraction * degree) of them (at least one,
/// never all) to a validation set.
inline SplitDataset make_validation_split(const InteractionMatrix& train, double fraction,
                                          std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw validation_error("make_validation_split: fraction must lie in (0, 1)");
    std::mt19937_64 rng(seed);

    std::vector<std::pair<Index, Index>> kept;
    SplitDataset ds;
    ds.test.assign(static_cast<std::size_t>(train.n_users), {});
    for (Index u = 0; u < train.n_users; ++u) {
        auto row = train.items_of(u);
        const auto deg = static_cast<Index>(row.size());
        if (deg < 2) {
            for (Index i : row) kept.emplace_back(u, i);
            continue;
        }
        Index hold = std::llround(fraction * static_cast<double>(deg));
        hold = std::clamp<Index>(hold, 1, deg - 1);
        std::vector<Index> shuffled(row.begin(), row.end());
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        auto& held = ds.test[static_cast<std::size_t>(u)];
        held.assign(shuffled.begin(), shuffled.begin() + hold);
        std::sort(held.begin(), held.end());
        for (auto it = shuffled.begin() + hold; it != shuffled.end(); ++it)
            kept.emplace_back(u, *it);
    }

    ds.train = std::make_shared<const InteractionMatrix>(
        build_interactions(kept, train.n_users, train.n_items));
    ds.stats.n_users = train.n_users;
    ds.stats.n_items = train.n_items;
    ds.stats.train_nnz = ds.train->nnz();
    ds.stats.test_nnz = train.nnz() - ds.train->nnz();
    const double cells = static_cast<double>(train.n_users) * static_cast<double>(train.n_items);
    ds.stats.density = cells > 0 ? static_cast<double>(train.nnz()) / cells : 0.0;
    return ds;
}

/// FNV-1a over dimensions and the sorted entry list; identifies the dataset a
/// model artifact was fit on.
inline std::uint64_t dataset_fingerprint(const InteractionMatrix& m) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    mix(static_cast<std::uint64_t>(m.n_users));
    mix(static_cast<std::uint64_t>(m.n_items));
    for (Index u = 0; u < m.n_users; ++u)
        for (Index i : m.items_of(u)) {
            mix(static_cast<std::uint64_t>(u));
            mix(static_cast<std::uint64_t>(i));
        }
    return h;
}

} // namespace gfcf
