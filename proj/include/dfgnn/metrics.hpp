#pragma once

// Ranking metrics (single relevant item per query), binary classification
// metrics, and embedding diagnostics: normalized singular spectrum, 2-D SVD
// projection, and mean pairwise distance of unit-normalized rows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "dfgnn/error.hpp"
#include "dfgnn/graph.hpp"
#include "dfgnn/rng.hpp"

namespace dfgnn {

/// One held-out positive ranked against sampled candidates. candidates[0]
/// is the positive item; scores are aligned with candidates.
struct RankingQuery {
    std::size_t user = 0;
    std::size_t positive_item = 0;
    std::vector<std::size_t> candidates;
    std::vector<double> scores;
};

/// 1 + #{strictly higher} + #{ties}: ties count against the positive.
inline std::size_t rank_of_positive(const RankingQuery& q) {
    const auto pos = std::find(q.candidates.begin(), q.candidates.end(), q.positive_item);
    if (pos == q.candidates.end() || q.scores.size() != q.candidates.size())
        throw InputError("ranking query must contain its positive item and one score per candidate");
    const auto pi = static_cast<std::size_t>(pos - q.candidates.begin());
    const double s = q.scores[pi];
    std::size_t rank = 1;
    for (std::size_t i = 0; i < q.scores.size(); ++i)
        if (i != pi && q.scores[i] >= s) ++rank;
    return rank;
}

namespace detail {

template <typename F>
double mean_over_queries(const std::vector<RankingQuery>& qs, F&& f) {
    if (qs.empty()) throw EmptyResultError("no ranking queries");
    double total = 0.0;
    for (const auto& q : qs) total += f(rank_of_positive(q));
    return total / static_cast<double>(qs.size());
}

} // namespace detail

inline double mrr(const std::vector<RankingQuery>& qs) {
    return detail::mean_over_queries(qs, [](std::size_t r) { return 1.0 / static_cast<double>(r); });
}

inline double hit_at_k(const std::vector<RankingQuery>& qs, std::size_t k) {
    return detail::mean_over_queries(qs, [k](std::size_t r) { return r <= k ? 1.0 : 0.0; });
}

inline double ndcg_at_k(const std::vector<RankingQuery>& qs, std::size_t k) {
    return detail::mean_over_queries(qs, [k](std::size_t r) {
        return r <= k ? 1.0 / std::log2(static_cast<double>(r) + 1.0) : 0.0;
    });
}

/// Mann-Whitney AUC: P(score+ > score-) + P(tie) / 2, via midranks.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw InputError("auc: scores and labels differ in length");
    for (double s : scores)
        if (std::isnan(s)) throw NumericError("auc: NaN score");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) {
                pos_rank_sum += midrank;
                ++n_pos;
            }
        i = j;
    }
    const std::size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw InputError("auc needs both classes present");
    const double np = static_cast<double>(n_pos);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

/// Unweighted mean of the per-class F1 scores for classes {0, 1}. A class
/// absent from both predictions and labels scores 0.
inline double f1_macro(const std::vector<int>& pred, const std::vector<int>& labels) {
    if (pred.empty() || pred.size() != labels.size()) throw InputError("f1_macro: need equal-length nonempty inputs");
    double total = 0.0;
    for (int c : {0, 1}) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const bool p = pred[i] == c, l = labels[i] == c;
            tp += p && l;
            fp += p && !l;
            fn += !p && l;
        }
        if (2 * tp + fp + fn == 0) {
            warn("f1_macro: class " + std::to_string(c) + " absent from predictions and labels");
            continue;
        }
        total += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    }
    return total / 2.0;
}

inline std::vector<int> threshold_predictions(const std::vector<double>& probabilities, double threshold = 0.5) {
    std::vector<int> out(probabilities.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = probabilities[i] >= threshold;
    return out;
}

inline Matrix center_columns(const Matrix& m) {
    Matrix c = m;
    c.rowwise() -= m.colwise().mean();
    return c;
}

/// Singular values of the column-centered matrix, descending, divided by
/// the largest.
inline std::vector<double> singular_spectrum(const Matrix& emb) {
    const Matrix c = center_columns(emb);
    if (c.size() == 0 || c.cwiseAbs().maxCoeff() == 0.0) throw InputError("singular_spectrum: zero matrix after centering");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(c), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector s = svd.singularValues();
    std::vector<double> out(static_cast<std::size_t>(s.size()));
    for (Eigen::Index i = 0; i < s.size(); ++i) out[static_cast<std::size_t>(i)] = s[i] / s[0];
    return out;
}

/// Coordinates along the top two right-singular directions of the centered
/// matrix. Each output column is flipped so its largest-magnitude entry is
/// positive.
inline Matrix project_2d(const Matrix& emb) {
    if (emb.cols() < 2) throw InputError("project_2d needs at least 2 columns");
    const Matrix c = center_columns(emb);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(c), Eigen::ComputeThinU | Eigen::ComputeThinV);
    Matrix coords = c * svd.matrixV().leftCols(2);
    for (Eigen::Index j = 0; j < 2; ++j) {
        Eigen::Index arg = 0;
        coords.col(j).cwiseAbs().maxCoeff(&arg);
        if (coords(arg, j) < 0.0) coords.col(j) *= -1.0;
    }
    return coords;
}

inline constexpr std::size_t kExactUniformityLimit = 2000;
inline constexpr std::size_t kUniformitySamplePairs = 1000000;

/// Mean L2 distance between unit-normalized rows over unordered pairs.
/// Exact up to 2000 nonzero rows; seeded pair sampling above that.
inline double uniformity(const Matrix& emb, std::uint64_t seed = 0) {
    std::vector<Eigen::RowVectorXd> rows;
    std::size_t zero_rows = 0;
    for (Eigen::Index i = 0; i < emb.rows(); ++i) {
        const double n = emb.row(i).norm();
        if (n == 0.0) ++zero_rows;
        else rows.push_back(emb.row(i) / n);
    }
    if (zero_rows) warn("uniformity: skipped " + std::to_string(zero_rows) + " zero rows");
    if (rows.size() < 2) throw InputError("uniformity needs at least two nonzero rows");
    double total = 0.0;
    if (rows.size() <= kExactUniformityLimit) {
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = i + 1; j < rows.size(); ++j, ++pairs) total += (rows[i] - rows[j]).norm();
        return total / static_cast<double>(pairs);
    }
    Rng rng(seed);
    for (std::size_t k = 0; k < kUniformitySamplePairs; ++k) {
        const std::size_t i = rng.index(rows.size());
        std::size_t j = rng.index(rows.size() - 1);
        if (j >= i) ++j;
        total += (rows[i] - rows[j]).norm();
    }
    return total / static_cast<double>(kUniformitySamplePairs);
}

} // namespace dfgnn
