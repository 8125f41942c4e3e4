#pragma once

// Task loss (binary cross-entropy on sigmoid(h_u . h_v)), signed graph
// regularization on the embedding table, and the exact reverse pass through
// the encoder.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dfgnn/error.hpp"
#include "dfgnn/graph.hpp"
#include "dfgnn/kvconfig.hpp"
#include "dfgnn/model.hpp"

namespace dfgnn {

struct LossConfig {
    double tau = 0.2;
    double w = 0.1;
    // Average the uniformity term over users and the alignment terms over
    // their edge sets. Off gives the plain sums.
    bool normalize = true;

    void validate() const {
        if (!(tau > 0.0)) throw InputError("tau must be > 0");
        if (!(w >= 0.0)) throw InputError("SGR weight w must be >= 0");
    }

    void write(KeyValues& kv) const {
        kv.set("loss.tau", format_number(tau));
        kv.set("loss.w", format_number(w));
        kv.set("loss.normalize", normalize ? "true" : "false");
    }
};

enum class Task { ranking, feedback_type };

inline const char* to_string(Task t) { return t == Task::ranking ? "ranking" : "feedback_type"; }

inline Task parse_task(const std::string& s) {
    if (s == "ranking") return Task::ranking;
    if (s == "feedback_type" || s == "feedback") return Task::feedback_type;
    throw InputError("unknown task '" + s + "' (ranking, feedback_type)");
}

struct TrainingExample {
    std::size_t user = 0;
    std::size_t item = 0;
    int label = 0;
};

/// Node subsets and signed pairs the regularizer is evaluated on.
struct SgrBatch {
    std::vector<std::size_t> users;
    std::vector<std::size_t> items;
    std::vector<std::pair<std::size_t, std::size_t>> pos_pairs;  // (user, item)
    std::vector<std::pair<std::size_t, std::size_t>> neg_pairs;
};

struct Batch {
    std::vector<TrainingExample> examples;
    SgrBatch sgr;
};

/// SGR batch over the whole graph: every user, every item, every edge.
inline SgrBatch full_sgr_batch(const SignedBipartiteGraph& g) {
    SgrBatch s;
    for (std::size_t u = 0; u < g.num_users; ++u) s.users.push_back(u);
    for (std::size_t v = 0; v < g.num_items; ++v) s.items.push_back(v);
    for (const auto& e : g.pos_edges) s.pos_pairs.emplace_back(e.user, e.item);
    for (const auto& e : g.neg_edges) s.neg_pairs.emplace_back(e.user, e.item);
    return s;
}

inline constexpr double kProbClamp = 1e-12;

/// -[y ln p + (1 - y) ln(1 - p)] with p clamped to [1e-12, 1 - 1e-12].
inline double bce_loss(double p, int y) {
    p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    return y ? -std::log(p) : -std::log1p(-p);
}

/// u.v / (|u| |v|); 0 when either vector is zero.
inline double cosine_sim(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
    const double nu = u.norm(), nv = v.norm();
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return u.dot(v) / (nu * nv);
}

/// Gradients of cosine_sim with respect to u and v.
inline std::pair<Vector, Vector> cosine_sim_grad(const Vector& u, const Vector& v) {
    const double nu = u.norm(), nv = v.norm();
    if (nu == 0.0 || nv == 0.0) return {Vector::Zero(u.size()), Vector::Zero(v.size())};
    const double c = u.dot(v) / (nu * nv);
    return {v / (nu * nv) - c * u / (nu * nu), u / (nu * nv) - c * v / (nv * nv)};
}

namespace detail {

inline double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    const double m = x.maxCoeff();
    return m + std::log((x.array() - m).exp().sum());
}

/// Unit-normalized rows (zero rows stay zero) and the original norms.
struct NormalizedRows {
    Matrix unit;
    Vector norms;
};

inline NormalizedRows normalize_rows(const Matrix& x) {
    NormalizedRows n{x, x.rowwise().norm()};
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        if (n.norms[i] > 0.0) n.unit.row(i) /= n.norms[i];
        else n.unit.row(i).setZero();
    return n;
}

/// Backprop through row normalization: d x = (I - x^ x^T) d x^ / |x|.
inline Matrix normalize_rows_backward(const NormalizedRows& n, const Matrix& d_unit) {
    Matrix d = Matrix::Zero(d_unit.rows(), d_unit.cols());
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        if (n.norms[i] <= 0.0) continue;
        const auto uh = n.unit.row(i);
        d.row(i) = (d_unit.row(i) - d_unit.row(i).dot(uh) * uh) / n.norms[i];
    }
    return d;
}

inline Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& rows, std::size_t offset) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(offset + rows[i]));
    return out;
}

inline void scatter_add_rows(Matrix& x, const Matrix& rows_grad, const std::vector<std::size_t>& rows, std::size_t offset) {
    for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Eigen::Index>(offset + rows[i])) += rows_grad.row(static_cast<Eigen::Index>(i));
}

/// sum_u log sum_v exp(cos(u, v) / tau), divided by the user count when
/// normalized. Adds d/d(emb) into *grad when given.
inline double uniform_term(const Matrix& emb, std::size_t num_users, const std::vector<std::size_t>& users,
                           const std::vector<std::size_t>& items, double tau, bool normalize, Matrix* grad) {
    if (users.empty() || items.empty()) throw InputError("uniform loss needs a nonempty user and item sample");
    const auto un = normalize_rows(gather_rows(emb, users, 0));
    const auto vn = normalize_rows(gather_rows(emb, items, num_users));
    const Matrix s = un.unit * vn.unit.transpose() / tau;
    const double scale = normalize ? 1.0 / static_cast<double>(users.size()) : 1.0;
    double total = 0.0;
    Matrix d_s(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double lse = log_sum_exp(s.row(i));
        total += lse;
        d_s.row(i) = (s.row(i).array() - lse).exp() * (scale / tau);
    }
    if (grad) {
        scatter_add_rows(*grad, normalize_rows_backward(un, d_s * vn.unit), users, 0);
        scatter_add_rows(*grad, normalize_rows_backward(vn, d_s.transpose() * un.unit), items, num_users);
    }
    return total * scale;
}

inline double pair_term(const Matrix& emb, std::size_t num_users, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                        double coef, Matrix* grad) {
    double total = 0.0;
    for (const auto& [u, v] : pairs) {
        const Vector hu = emb.row(static_cast<Eigen::Index>(u)).transpose();
        const Vector hv = emb.row(static_cast<Eigen::Index>(num_users + v)).transpose();
        total += coef * cosine_sim(hu, hv);
        if (grad) {
            const auto [gu, gv] = cosine_sim_grad(hu, hv);
            grad->row(static_cast<Eigen::Index>(u)) += coef * gu.transpose();
            grad->row(static_cast<Eigen::Index>(num_users + v)) += coef * gv.transpose();
        }
    }
    return total;
}

} // namespace detail

/// Uniformity over every user row against every item row (exact mode).
inline double uniform_loss(const Matrix& user_emb, const Matrix& item_emb, double tau, bool normalize = true) {
    if (!(tau > 0.0)) throw InputError("tau must be > 0");
    Matrix all(user_emb.rows() + item_emb.rows(), user_emb.cols());
    all << user_emb, item_emb;
    std::vector<std::size_t> users(static_cast<std::size_t>(user_emb.rows())), items(static_cast<std::size_t>(item_emb.rows()));
    for (std::size_t i = 0; i < users.size(); ++i) users[i] = i;
    for (std::size_t i = 0; i < items.size(); ++i) items[i] = i;
    return detail::uniform_term(all, users.size(), users, items, tau, normalize, nullptr);
}

/// Uniformity with users / items restricted to a sample (row indices).
inline double uniform_loss(const Matrix& emb, std::size_t num_users, const std::vector<std::size_t>& users,
                           const std::vector<std::size_t>& items, double tau, bool normalize = true, Matrix* grad = nullptr) {
    if (!(tau > 0.0)) throw InputError("tau must be > 0");
    return detail::uniform_term(emb, num_users, users, items, tau, normalize, grad);
}

/// -mean_{E+} cos/tau + mean_{E-} cos/tau (plain sums when !normalize); an
/// empty edge set contributes nothing.
inline double alignment_loss(const Matrix& emb, std::size_t num_users,
                             const std::vector<std::pair<std::size_t, std::size_t>>& pos_pairs,
                             const std::vector<std::pair<std::size_t, std::size_t>>& neg_pairs, double tau,
                             bool normalize = true, Matrix* grad = nullptr) {
    if (!(tau > 0.0)) throw InputError("tau must be > 0");
    double total = 0.0;
    if (!pos_pairs.empty()) {
        const double n = normalize ? static_cast<double>(pos_pairs.size()) : 1.0;
        total += detail::pair_term(emb, num_users, pos_pairs, -1.0 / (tau * n), grad);
    }
    if (!neg_pairs.empty()) {
        const double n = normalize ? static_cast<double>(neg_pairs.size()) : 1.0;
        total += detail::pair_term(emb, num_users, neg_pairs, 1.0 / (tau * n), grad);
    }
    return total;
}

struct SgrValue {
    double uniform = 0.0;
    double alignment = 0.0;
    bool uniform_skipped = false;  // empty user or item sample

    double total() const { return uniform + alignment; }
};

/// Uniformity + alignment on the embedding table H^0.
inline SgrValue sgr_loss(const Matrix& emb, std::size_t num_users, const SgrBatch& batch, const LossConfig& cfg,
                         Matrix* grad = nullptr) {
    cfg.validate();
    SgrValue v;
    if (batch.users.empty() || batch.items.empty()) {
        v.uniform_skipped = true;
        warn("SGR uniformity term skipped: empty user or item sample");
    } else {
        v.uniform = detail::uniform_term(emb, num_users, batch.users, batch.items, cfg.tau, cfg.normalize, grad);
    }
    v.alignment = alignment_loss(emb, num_users, batch.pos_pairs, batch.neg_pairs, cfg.tau, cfg.normalize, grad);
    return v;
}

inline double total_loss(double task_loss, double sgr, double w) { return task_loss + w * sgr; }

/// The regularizer is part of the full model only; ablation variants train
/// on the task loss alone.
inline double effective_sgr_weight(Variant variant, const LossConfig& cfg) {
    return variant == Variant::dfgnn ? cfg.w : 0.0;
}

struct LossBreakdown {
    double task = 0.0;
    double sgr = 0.0;
    double total = 0.0;
};

/// Mean BCE over the examples, scored from final representations.
inline double task_loss(const Matrix& reps, std::size_t num_users, const std::vector<TrainingExample>& examples) {
    if (examples.empty()) return 0.0;
    double total = 0.0;
    for (const auto& ex : examples) total += bce_loss(sigmoid(score_logit(reps, num_users, ex.user, ex.item)), ex.label);
    return total / static_cast<double>(examples.size());
}

/// Loss without gradients; used by finite-difference checks.
inline LossBreakdown compute_loss(const Model& model, const GraphOperators& ops, const Batch& batch, const LossConfig& cfg) {
    const auto trace = forward(model, ops);
    LossBreakdown b;
    b.task = task_loss(trace.output, model.num_users, batch.examples);
    const double w = effective_sgr_weight(model.config.variant, cfg);
    if (w != 0.0) b.sgr = sgr_loss(model.embedding, model.num_users, batch.sgr, cfg).total();
    b.total = w != 0.0 ? total_loss(b.task, b.sgr, w) : b.task;
    return b;
}

struct Gradients {
    Model grads;  // same tensor layout as the model
    LossBreakdown loss;
};

/// Exact gradients of task + w * SGR for every parameter, given the trace
/// of a forward pass over the same model version.
inline Gradients backward(const ForwardTrace& trace, const Model& model, const GraphOperators& ops, const Batch& batch,
                          const LossConfig& cfg) {
    cfg.validate();
    if (trace.model_version != model.version || trace.variant != model.config.variant ||
        trace.layers.size() != model.config.num_layers ||
        trace.output.rows() != static_cast<Eigen::Index>(model.num_nodes()))
        throw InputError("backward: stale forward trace (model changed since forward)");

    Gradients out{model.zeros_like(), {}};
    Model& g = out.grads;
    const std::size_t nu = model.num_users;
    const Matrix& reps = trace.output;

    Matrix d_h = Matrix::Zero(reps.rows(), reps.cols());
    if (!batch.examples.empty()) {
        const double inv_b = 1.0 / static_cast<double>(batch.examples.size());
        double total = 0.0;
        for (const auto& ex : batch.examples) {
            const auto ru = static_cast<Eigen::Index>(ex.user);
            const auto rv = static_cast<Eigen::Index>(nu + ex.item);
            const double p = sigmoid(reps.row(ru).dot(reps.row(rv)));
            total += bce_loss(p, ex.label);
            const double dz = (p - ex.label) * inv_b;
            d_h.row(ru) += dz * reps.row(rv);
            d_h.row(rv) += dz * reps.row(ru);
        }
        out.loss.task = total * inv_b;
    }

    const bool dual = has_negative_branch(model.config.variant);
    const auto d = model.config.embed_dim;
    for (std::size_t li = trace.layers.size(); li-- > 0;) {
        const LayerTrace& t = trace.layers[li];
        Matrix d_pos_out, d_neg_out;
        if (dual) {
            const Matrix d_fused_pre = activation_backward(t.act, t.fused_pre, d_h);
            g.w_fuse[li] = t.fused_in.transpose() * d_fused_pre;
            g.b_fuse[li] = d_fused_pre.colwise().sum();
            const Matrix d_fused_in = d_fused_pre * model.w_fuse[li].transpose();
            d_pos_out = d_fused_in.leftCols(static_cast<Eigen::Index>(d));
            d_neg_out = d_fused_in.rightCols(static_cast<Eigen::Index>(d));
        } else {
            d_pos_out = d_h;
        }
        const Matrix d_pos_pre = activation_backward(t.act, t.pos_pre, d_pos_out);
        g.w_pos[li] = t.pos_agg.transpose() * d_pos_pre;
        // Operators are symmetric, so the adjoint of H -> P H is P itself.
        Matrix d_in = spmm(ops.pos_propagation, d_pos_pre * model.w_pos[li].transpose(), ops.threads);
        if (dual) {
            const Matrix d_neg_pre = activation_backward(t.act, t.neg_pre, d_neg_out);
            const Matrix d_w_neg = t.neg_agg.transpose() * d_neg_pre;
            if (model.config.share_filter_weights) g.w_pos[li] += d_w_neg;
            else g.w_neg[li] = d_w_neg;
            d_in += spmm(ops.neg_operator, d_neg_pre * model.neg_weight(li).transpose(), ops.threads);
        }
        d_h = std::move(d_in);
    }
    g.embedding = std::move(d_h);

    const double w = effective_sgr_weight(model.config.variant, cfg);
    if (w != 0.0) {
        Matrix d_sgr = Matrix::Zero(model.embedding.rows(), model.embedding.cols());
        out.loss.sgr = sgr_loss(model.embedding, nu, batch.sgr, cfg, &d_sgr).total();
        g.embedding += w * d_sgr;
        out.loss.total = total_loss(out.loss.task, out.loss.sgr, w);
    } else {
        out.loss.total = out.loss.task;
    }
    return out;
}

} // namespace dfgnn
