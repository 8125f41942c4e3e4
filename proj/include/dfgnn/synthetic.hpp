#pragma once

// Planted-cluster signed rating data. Users and items are assigned to
// interest clusters; a user rates same-cluster items highly and other
// items poorly, with a fraction of signs flipped.

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "dfgnn/error.hpp"
#include "dfgnn/ingest.hpp"
#include "dfgnn/rng.hpp"

namespace dfgnn {

struct PlantedConfig {
    std::size_t num_users = 200;
    std::size_t num_items = 200;
    std::size_t num_clusters = 2;
    std::size_t interactions_per_user = 10;
    double sign_noise = 0.1;
    double own_cluster_share = 0.3;  // 0 = items drawn uniformly; else expected fraction from the user's cluster
    std::uint64_t seed = 0;

    void validate() const {
        if (num_users == 0 || num_items == 0) throw InputError("planted data needs users and items");
        if (num_clusters == 0) throw InputError("planted data needs at least one cluster");
        if (interactions_per_user > num_items) throw InputError("interactions_per_user exceeds num_items");
        if (sign_noise < 0.0 || sign_noise > 1.0) throw InputError("sign_noise must lie in [0, 1]");
        if (own_cluster_share < 0.0 || own_cluster_share > 1.0) throw InputError("own_cluster_share must lie in [0, 1]");
    }
};

struct PlantedData {
    std::vector<RatingRecord> ratings;
    std::vector<std::size_t> user_cluster;
    std::vector<std::size_t> item_cluster;
};

/// Round-robin cluster labels; each user rates `interactions_per_user`
/// distinct items, a share `own_cluster_share` of them (in expectation) from
/// the user's own cluster. Positive feedback is rated 4 or 5,
/// negative 1 or 2.
inline PlantedData planted_ratings(const PlantedConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    PlantedData d;
    d.user_cluster.resize(cfg.num_users);
    d.item_cluster.resize(cfg.num_items);
    for (std::size_t u = 0; u < cfg.num_users; ++u) d.user_cluster[u] = u % cfg.num_clusters;
    for (std::size_t v = 0; v < cfg.num_items; ++v) d.item_cluster[v] = v % cfg.num_clusters;
    std::int64_t clock = 0;
    for (std::size_t u = 0; u < cfg.num_users; ++u) {
        std::unordered_set<std::size_t> chosen;
        std::vector<std::size_t> picks;
        if (cfg.own_cluster_share <= 0.0) {
            picks = sample_ranking_negatives(cfg.interactions_per_user, chosen, cfg.num_items, rng);
        } else {
            while (picks.size() < cfg.interactions_per_user) {
                const std::size_t v = rng.index(cfg.num_items);
                const bool own = d.item_cluster[v] == d.user_cluster[u];
                const double keep = own ? cfg.own_cluster_share : (1.0 - cfg.own_cluster_share) / static_cast<double>(cfg.num_clusters - 1);
                if (chosen.count(v) || rng.uniform() >= keep * static_cast<double>(cfg.num_clusters)) continue;
                chosen.insert(v);
                picks.push_back(v);
            }
        }
        for (auto v : picks) {
            bool positive = d.user_cluster[u] == d.item_cluster[v];
            if (rng.uniform() < cfg.sign_noise) positive = !positive;
            const double rating = (positive ? 4.0 : 1.0) + static_cast<double>(rng.index(2));
            d.ratings.push_back({"u" + std::to_string(u), "i" + std::to_string(v), rating, clock++});
        }
    }
    return d;
}

/// Planted ratings pushed through the standard ingest pipeline.
inline DatasetSplit planted_split(const PlantedConfig& cfg, IngestConfig ingest = {}) {
    ingest.seed = derive_seed(cfg.seed, 0x5B11);
    return ingest_records(planted_ratings(cfg).ratings, ingest);
}

} // namespace dfgnn
