#pragma once

// One-dimensional matrix factorization, fitted by SGD. The fitted factors,
// laid out in unified node order, serve as a scalar graph signal for
// frequency analysis.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dfgnn/error.hpp"
#include "dfgnn/graph.hpp"
#include "dfgnn/rng.hpp"

namespace dfgnn {

struct Rating {
    std::size_t user = 0;
    std::size_t item = 0;
    double value = 0.0;
};

struct MFConfig {
    double lr = 0.01;
    double l2_reg = 0.01;
    std::size_t epochs = 50;
    std::uint64_t seed = 0;
    // Fit r - mean(r) instead of r. Off by default; the spectrum pipeline
    // turns it on so that the sign of p*q tracks above/below-average ratings.
    bool center = false;
};

struct MFModel {
    std::vector<double> user_factors;
    std::vector<double> item_factors;
    MFConfig config;
    double offset = 0.0;  // subtracted from ratings when config.center
    std::vector<double> epoch_loss;
};

struct MFRecordGradient {
    double loss;
    double d_user;
    double d_item;
};

/// (r - p q)^2 + reg (p^2 + q^2) and its partial derivatives.
inline MFRecordGradient mf_record_loss(double p, double q, double r, double reg) {
    const double e = r - p * q;
    return {e * e + reg * (p * p + q * q), -2.0 * e * q + 2.0 * reg * p, -2.0 * e * p + 2.0 * reg * q};
}

inline double mf_objective(const MFModel& m, const std::vector<Rating>& records) {
    double total = 0.0;
    for (const auto& r : records)
        total += mf_record_loss(m.user_factors[r.user], m.item_factors[r.item], r.value - m.offset, m.config.l2_reg).loss;
    return total;
}

inline MFModel train_mf_1d(const std::vector<Rating>& records, std::size_t num_users, std::size_t num_items,
                           const MFConfig& cfg = {}) {
    if (records.empty()) throw InputError("matrix factorization needs at least one rating");
    MFModel m;
    m.config = cfg;
    Rng rng(cfg.seed);
    m.user_factors.resize(num_users);
    m.item_factors.resize(num_items);
    for (auto& p : m.user_factors) p = rng.uniform(-0.05, 0.05);
    for (auto& q : m.item_factors) q = rng.uniform(-0.05, 0.05);
    for (const auto& r : records)
        if (r.user >= num_users || r.item >= num_items) throw InputError("rating index out of range");
    if (cfg.center) {
        double s = 0.0;
        for (const auto& r : records) s += r.value;
        m.offset = s / static_cast<double>(records.size());
    }

    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (auto idx : order) {
            const auto& r = records[idx];
            double& p = m.user_factors[r.user];
            double& q = m.item_factors[r.item];
            const auto g = mf_record_loss(p, q, r.value - m.offset, cfg.l2_reg);
            p -= cfg.lr * g.d_user;
            q -= cfg.lr * g.d_item;
        }
        const double loss = mf_objective(m, records);
        if (!std::isfinite(loss) || loss > 1e6)
            throw NumericError("matrix factorization diverged at epoch " + std::to_string(epoch + 1) +
                               " with lr " + std::to_string(cfg.lr));
        m.epoch_loss.push_back(loss);
    }
    return m;
}

/// [user_factors ; item_factors] in unified node order.
inline Vector node_signal(const MFModel& m) {
    Vector x(static_cast<Eigen::Index>(m.user_factors.size() + m.item_factors.size()));
    Eigen::Index i = 0;
    for (double p : m.user_factors) x[i++] = p;
    for (double q : m.item_factors) x[i++] = q;
    return x;
}

} // namespace dfgnn
