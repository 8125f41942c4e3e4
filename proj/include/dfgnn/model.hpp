#pragma once

// Dual-frequency graph encoder.
//
// Each layer l maps H^l to H^{l+1}:
//   H_pos = act(P_pos H W_pos)              low-pass filter on the positive graph
//   H_neg = act(O_neg H W_neg)              high-pass (or low-pass) filter on the negative graph
//   H^{l+1} = act([H_pos | H_neg] W_f + b_f)
// where P_pos = D~^{-1/2}(A+I)D~^{-1/2} and O_neg is the normalized Laplacian
// of the negative graph (DGF) or its propagation matrix (Basic+LGF). The
// Basic variant keeps only H^{l+1} = act(P_pos H W_pos). The last layer uses
// the identity activation.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dfgnn/error.hpp"
#include "dfgnn/graph.hpp"
#include "dfgnn/kvconfig.hpp"
#include "dfgnn/rng.hpp"

namespace dfgnn {

enum class Variant { basic, basic_lgf, basic_dgf, dfgnn };

inline const char* to_string(Variant v) {
    switch (v) {
    case Variant::basic: return "Basic";
    case Variant::basic_lgf: return "Basic+LGF";
    case Variant::basic_dgf: return "Basic+DGF";
    case Variant::dfgnn: return "DFGNN";
    }
    return "?";
}

inline Variant parse_variant(const std::string& s) {
    if (s == "Basic" || s == "basic") return Variant::basic;
    if (s == "Basic+LGF" || s == "basic_lgf" || s == "basic+lgf") return Variant::basic_lgf;
    if (s == "Basic+DGF" || s == "basic_dgf" || s == "basic+dgf") return Variant::basic_dgf;
    if (s == "DFGNN" || s == "dfgnn") return Variant::dfgnn;
    throw InputError("unknown variant '" + s + "' (Basic, Basic+LGF, Basic+DGF, DFGNN)");
}

inline bool has_negative_branch(Variant v) { return v != Variant::basic; }

enum class Activation { relu, identity, tanh };

inline const char* to_string(Activation a) {
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    }
    return "?";
}

inline Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "identity") return Activation::identity;
    if (s == "tanh") return Activation::tanh;
    throw InputError("unknown activation '" + s + "' (relu, identity, tanh)");
}

inline Matrix apply_activation(Activation a, const Matrix& z) {
    switch (a) {
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::identity: return z;
    case Activation::tanh: return z.array().tanh().matrix();
    }
    return z;
}

/// Multiplies an upstream gradient by act'(z).
inline Matrix activation_backward(Activation a, const Matrix& z, const Matrix& upstream) {
    switch (a) {
    case Activation::relu: return (z.array() > 0.0).select(upstream, 0.0);
    case Activation::identity: return upstream;
    case Activation::tanh: return (upstream.array() * (1.0 - z.array().tanh().square())).matrix();
    }
    return upstream;
}

struct ModelConfig {
    std::size_t embed_dim = 64;
    std::size_t num_layers = 2;
    Activation activation = Activation::relu;
    Variant variant = Variant::dfgnn;
    bool share_filter_weights = false;  // W_neg[l] aliases W_pos[l]
    std::uint64_t seed = 0;

    void validate() const {
        if (embed_dim < 1) throw InputError("embed_dim must be >= 1");
        if (num_layers < 1) throw InputError("num_layers must be >= 1");
    }

    void write(KeyValues& kv) const {
        kv.set("model.embed_dim", std::to_string(embed_dim));
        kv.set("model.num_layers", std::to_string(num_layers));
        kv.set("model.activation", to_string(activation));
        kv.set("model.variant", to_string(variant));
        kv.set("model.share_filter_weights", share_filter_weights ? "true" : "false");
    }

    static ModelConfig read(const KeyValues& kv) {
        ModelConfig c;
        c.embed_dim = kv.get_uint("model.embed_dim");
        c.num_layers = kv.get_uint("model.num_layers");
        c.activation = parse_activation(kv.get("model.activation"));
        c.variant = parse_variant(kv.get("model.variant"));
        c.share_filter_weights = kv.get_bool("model.share_filter_weights");
        c.validate();
        return c;
    }
};

/// All trainable tensors. Biases are stored as 1 x d matrices so every
/// parameter has the same type.
struct Model {
    ModelConfig config;
    std::size_t num_users = 0;
    std::size_t num_items = 0;
    Matrix embedding;             // H^0 = X, N x d
    std::vector<Matrix> w_pos;    // d x d per layer
    std::vector<Matrix> w_neg;    // d x d per layer; empty for Basic or when shared
    std::vector<Matrix> w_fuse;   // 2d x d per layer; empty for Basic
    std::vector<Matrix> b_fuse;   // 1 x d per layer; empty for Basic
    std::uint64_t version = 0;    // bumped by every optimizer step

    std::size_t num_nodes() const { return num_users + num_items; }

    const Matrix& neg_weight(std::size_t l) const { return config.share_filter_weights ? w_pos[l] : w_neg[l]; }

    /// Named parameter tensors in a fixed order.
    std::vector<std::pair<std::string, Matrix*>> parameters() {
        std::vector<std::pair<std::string, Matrix*>> out;
        out.emplace_back("embedding", &embedding);
        for (std::size_t l = 0; l < w_pos.size(); ++l) {
            const std::string s = "." + std::to_string(l);
            out.emplace_back("w_pos" + s, &w_pos[l]);
            if (l < w_neg.size()) out.emplace_back("w_neg" + s, &w_neg[l]);
            if (l < w_fuse.size()) out.emplace_back("w_fuse" + s, &w_fuse[l]);
            if (l < b_fuse.size()) out.emplace_back("b_fuse" + s, &b_fuse[l]);
        }
        return out;
    }

    std::vector<std::pair<std::string, const Matrix*>> parameters() const {
        std::vector<std::pair<std::string, const Matrix*>> out;
        for (auto& [name, ptr] : const_cast<Model*>(this)->parameters()) out.emplace_back(name, ptr);
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : parameters()) n += static_cast<std::size_t>(p.second->size());
        return n;
    }

    /// Same shapes, all zeros.
    Model zeros_like() const {
        Model z = *this;
        for (auto& p : z.parameters()) p.second->setZero();
        return z;
    }
};

namespace detail {

inline Matrix uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double a) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-a, a);
    return m;
}

inline double xavier_bound(Eigen::Index fan_in, Eigen::Index fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

} // namespace detail

/// Xavier-uniform weights; embeddings uniform(-a, a) with a = sqrt(6 / 2d);
/// fusion biases zero.
inline Model init_model(const ModelConfig& cfg, std::size_t num_users, std::size_t num_items) {
    cfg.validate();
    Model m;
    m.config = cfg;
    m.num_users = num_users;
    m.num_items = num_items;
    Rng rng(cfg.seed);
    const auto d = static_cast<Eigen::Index>(cfg.embed_dim);
    m.embedding = detail::uniform_matrix(rng, static_cast<Eigen::Index>(num_users + num_items), d,
                                         detail::xavier_bound(d, d));
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        m.w_pos.push_back(detail::uniform_matrix(rng, d, d, detail::xavier_bound(d, d)));
        if (!has_negative_branch(cfg.variant)) continue;
        if (!cfg.share_filter_weights) m.w_neg.push_back(detail::uniform_matrix(rng, d, d, detail::xavier_bound(d, d)));
        m.w_fuse.push_back(detail::uniform_matrix(rng, 2 * d, d, detail::xavier_bound(2 * d, d)));
        m.b_fuse.push_back(Matrix::Zero(1, d));
    }
    return m;
}

/// Precomputed graph operators; constant during training.
struct GraphOperators {
    std::size_t num_users = 0;
    std::size_t num_items = 0;
    Variant variant = Variant::dfgnn;
    SparseSymMatrix pos_propagation;  // P_pos
    SparseSymMatrix neg_operator;     // Laplacian of G- (DGF) or P_neg (Basic+LGF); empty for Basic
    unsigned threads = 1;

    std::size_t num_nodes() const { return num_users + num_items; }
};

inline GraphOperators build_operators(const SignedBipartiteGraph& g, Variant variant, unsigned threads = 1) {
    GraphOperators ops;
    ops.num_users = g.num_users;
    ops.num_items = g.num_items;
    ops.variant = variant;
    ops.threads = threads;
    ops.pos_propagation = augmented_propagation(sign_adjacency(g, Sign::positive));
    if (variant == Variant::basic_lgf) ops.neg_operator = augmented_propagation(sign_adjacency(g, Sign::negative));
    else if (has_negative_branch(variant)) ops.neg_operator = high_pass_operator(sign_adjacency(g, Sign::negative));
    return ops;
}

/// act(P H W): one low-pass layer.
inline Matrix lgf_layer(const SparseSymMatrix& propagation, const Matrix& h, const Matrix& w, Activation act) {
    if (h.cols() != w.rows()) throw InputError("lgf_layer: H columns do not match W rows");
    return apply_activation(act, spmm(propagation, h) * w);
}

/// act(L H W): one high-pass layer.
inline Matrix hgf_layer(const SparseSymMatrix& laplacian, const Matrix& h, const Matrix& w, Activation act) {
    if (h.cols() != w.rows()) throw InputError("hgf_layer: H columns do not match W rows");
    return apply_activation(act, spmm(laplacian, h) * w);
}

inline Matrix concat_features(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), a.cols() + b.cols());
    c << a, b;
    return c;
}

/// act([H_pos | H_neg] W_f + b_f).
inline Matrix fuse(const Matrix& h_pos, const Matrix& h_neg, const Matrix& w_fuse, const Matrix& b_fuse, Activation act) {
    if (h_pos.rows() != h_neg.rows() || h_pos.cols() + h_neg.cols() != w_fuse.rows() || b_fuse.cols() != w_fuse.cols() ||
        b_fuse.rows() != 1)
        throw InputError("fuse: shape mismatch");
    Matrix z = concat_features(h_pos, h_neg) * w_fuse;
    z.rowwise() += b_fuse.row(0);
    return apply_activation(act, z);
}

struct LayerTrace {
    Matrix input;         // H^l
    Matrix pos_agg;       // P_pos H^l
    Matrix pos_pre;       // P_pos H^l W_pos
    Matrix pos_out;       // act(pos_pre)
    Matrix neg_agg;       // O_neg H^l
    Matrix neg_pre;
    Matrix neg_out;
    Matrix fused_in;      // [pos_out | neg_out]
    Matrix fused_pre;     // fused_in W_f + b_f
    Activation act = Activation::identity;
};

struct ForwardTrace {
    std::vector<LayerTrace> layers;
    Matrix output;  // H^K
    std::uint64_t model_version = 0;
    Variant variant = Variant::dfgnn;
};

inline Activation layer_activation(const ModelConfig& cfg, std::size_t l) {
    return l + 1 == cfg.num_layers ? Activation::identity : cfg.activation;
}

inline ForwardTrace forward(const Model& model, const GraphOperators& ops) {
    if (ops.num_nodes() != model.num_nodes() || ops.variant != model.config.variant)
        throw InputError("forward: graph operators do not match the model");
    ForwardTrace trace;
    trace.model_version = model.version;
    trace.variant = model.config.variant;
    Matrix h = model.embedding;
    const bool dual = has_negative_branch(model.config.variant);
    for (std::size_t l = 0; l < model.config.num_layers; ++l) {
        LayerTrace t;
        t.act = layer_activation(model.config, l);
        t.input = h;
        t.pos_agg = spmm(ops.pos_propagation, h, ops.threads);
        t.pos_pre = t.pos_agg * model.w_pos[l];
        t.pos_out = apply_activation(t.act, t.pos_pre);
        if (dual) {
            t.neg_agg = spmm(ops.neg_operator, h, ops.threads);
            t.neg_pre = t.neg_agg * model.neg_weight(l);
            t.neg_out = apply_activation(t.act, t.neg_pre);
            t.fused_in = concat_features(t.pos_out, t.neg_out);
            t.fused_pre = t.fused_in * model.w_fuse[l];
            t.fused_pre.rowwise() += model.b_fuse[l].row(0);
            h = apply_activation(t.act, t.fused_pre);
        } else {
            h = t.pos_out;
        }
        trace.layers.push_back(std::move(t));
    }
    trace.output = std::move(h);
    return trace;
}

/// Numerically stable logistic function.
inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// sigmoid(h_u . h_v).
inline double predict(const Eigen::Ref<const Vector>& h_u, const Eigen::Ref<const Vector>& h_v) {
    return sigmoid(h_u.dot(h_v));
}

inline double score_logit(const Matrix& reps, std::size_t num_users, std::size_t user, std::size_t item) {
    return reps.row(static_cast<Eigen::Index>(user)).dot(reps.row(static_cast<Eigen::Index>(num_users + item)));
}

} // namespace dfgnn
