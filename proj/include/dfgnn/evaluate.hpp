#pragma once

// Scoring protocols for the two tasks.
//
// ranking: every held-out positive edge (u, v) becomes a query ranking v
//   against `num_candidates` items u never interacted with in any split.
// feedback_type: every held-out signed edge is scored; label 1 for positive.

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfgnn/ingest.hpp"
#include "dfgnn/kvconfig.hpp"
#include "dfgnn/losses.hpp"
#include "dfgnn/metrics.hpp"
#include "dfgnn/model.hpp"

namespace dfgnn {

struct EvalProtocol {
    std::size_t num_candidates = 99;  // sampled negatives per query
    bool all_items = false;           // rank against every non-interacted item instead
    double f1_threshold = 0.5;
    std::uint64_t seed = 0;

    void write(KeyValues& kv) const {
        kv.set("eval.num_candidates", std::to_string(num_candidates));
        kv.set("eval.all_items", all_items ? "true" : "false");
        kv.set("eval.f1_threshold", format_number(f1_threshold));
    }
};

struct EvalReport {
    Task task = Task::feedback_type;
    std::map<std::string, double> metrics;
    std::size_t count = 0;  // queries (ranking) or examples (feedback_type)
    std::uint64_t seed = 0;
    std::string config_digest;
};

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json j;
    j["task"] = to_string(r.task);
    j["metrics"] = r.metrics;
    j[r.task == Task::ranking ? "num_queries" : "num_examples"] = r.count;
    j["seed"] = r.seed;
    j["config_digest"] = r.config_digest;
    return j;
}

/// Per-user set of items the user interacted with, either sign.
inline std::vector<std::unordered_set<std::size_t>> interacted_items(std::size_t num_users, const std::vector<SignedEdge>& edges) {
    std::vector<std::unordered_set<std::size_t>> seen(num_users);
    for (const auto& e : edges) seen[e.user].insert(e.item);
    return seen;
}

/// Candidate lists (scores left empty) for every positive edge in `edges`.
inline std::vector<RankingQuery> build_ranking_queries(const DatasetSplit& split, const std::vector<SignedEdge>& edges,
                                                       const EvalProtocol& protocol) {
    const auto seen = interacted_items(split.num_users(), split.all_edges());
    Rng rng(derive_seed(protocol.seed, 0xE7A1));
    std::vector<RankingQuery> out;
    bool clamped = false;
    for (const auto& e : edges) {
        if (e.sign != Sign::positive) continue;
        RankingQuery q;
        q.user = e.user;
        q.positive_item = e.item;
        q.candidates.push_back(e.item);
        const std::size_t available = split.num_items() - seen[e.user].size();
        std::size_t k = protocol.all_items ? available : protocol.num_candidates;
        if (k > available) {
            k = available;
            clamped = true;
        }
        if (protocol.all_items) {
            for (std::size_t v = 0; v < split.num_items(); ++v)
                if (!seen[e.user].count(v)) q.candidates.push_back(v);
        } else {
            for (auto v : sample_ranking_negatives(k, seen[e.user], split.num_items(), rng)) q.candidates.push_back(v);
        }
        out.push_back(std::move(q));
    }
    if (clamped) warn("some ranking queries have fewer than " + std::to_string(protocol.num_candidates) + " candidate negatives");
    return out;
}

inline void score_queries(std::vector<RankingQuery>& queries, const Matrix& reps, std::size_t num_users) {
    for (auto& q : queries) {
        q.scores.resize(q.candidates.size());
        for (std::size_t i = 0; i < q.candidates.size(); ++i) q.scores[i] = score_logit(reps, num_users, q.user, q.candidates[i]);
    }
}

inline EvalReport ranking_report(const std::vector<RankingQuery>& queries) {
    EvalReport r;
    r.task = Task::ranking;
    r.count = queries.size();
    r.metrics["MRR"] = mrr(queries);
    for (std::size_t k : {10, 50}) {
        r.metrics["HIT@" + std::to_string(k)] = hit_at_k(queries, k);
        r.metrics["NDCG@" + std::to_string(k)] = ndcg_at_k(queries, k);
    }
    return r;
}

inline EvalReport evaluate_ranking(const Matrix& reps, std::size_t num_users, std::vector<RankingQuery> queries) {
    score_queries(queries, reps, num_users);
    return ranking_report(queries);
}

inline EvalReport evaluate_feedback(const Matrix& reps, std::size_t num_users, const std::vector<SignedEdge>& edges,
                                    double f1_threshold = 0.5) {
    if (edges.empty()) throw EmptyResultError("no signed edges to evaluate");
    std::vector<double> logits, probs;
    std::vector<int> labels;
    for (const auto& e : edges) {
        const double z = score_logit(reps, num_users, e.user, e.item);
        logits.push_back(z);
        probs.push_back(sigmoid(z));
        labels.push_back(e.sign == Sign::positive);
    }
    EvalReport r;
    r.task = Task::feedback_type;
    r.count = edges.size();
    r.metrics["AUC"] = auc(logits, labels);
    r.metrics["F1-Macro"] = f1_macro(threshold_predictions(probs, f1_threshold), labels);
    return r;
}

} // namespace dfgnn
