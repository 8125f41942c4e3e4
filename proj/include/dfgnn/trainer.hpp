#pragma once

// Mini-batch training over edges with one full-graph forward pass per
// batch, Adam, early stopping on a validation metric, finite-difference
// gradient checking, and binary checkpoints.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfgnn/evaluate.hpp"
#include "dfgnn/ingest.hpp"
#include "dfgnn/kvconfig.hpp"
#include "dfgnn/losses.hpp"
#include "dfgnn/model.hpp"
#include "dfgnn/rng.hpp"

namespace dfgnn {

inline const std::vector<double>& learning_rate_grid() {
    static const std::vector<double> grid{1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5};
    return grid;
}

inline const std::vector<double>& sgr_tau_grid() {
    static const std::vector<double> grid{0.1, 0.2, 0.5, 1.0};
    return grid;
}

inline const std::vector<double>& sgr_weight_grid() {
    static const std::vector<double> grid{0.01, 0.1, 0.5, 1.0};
    return grid;
}

struct TrainConfig {
    std::size_t batch_size = 512;
    double lr = 1e-3;
    std::size_t patience = 20;
    std::size_t max_epochs = 200;
    Task task = Task::feedback_type;
    std::size_t neg_sample_ratio = 1;  // sampled non-interacted items per positive (ranking)
    std::uint64_t seed = 0;
    // Propagate over the training graph minus the current batch's edges, so
    // no supervised edge is visible to its own forward pass.
    bool withhold_batch_edges = true;
    LossConfig loss;
    ModelConfig model;
    EvalProtocol eval;

    void validate() const {
        if (batch_size < 1) throw InputError("batch_size must be >= 1");
        if (patience < 1) throw InputError("patience must be >= 1");
        if (!(lr > 0.0)) throw InputError("learning rate must be > 0");
        loss.validate();
        model.validate();
    }

    void write(KeyValues& kv) const {
        kv.set("train.batch_size", std::to_string(batch_size));
        kv.set("train.lr", format_number(lr));
        kv.set("train.patience", std::to_string(patience));
        kv.set("train.max_epochs", std::to_string(max_epochs));
        kv.set("train.task", to_string(task));
        kv.set("train.neg_sample_ratio", std::to_string(neg_sample_ratio));
        kv.set("train.withhold_batch_edges", withhold_batch_edges ? "true" : "false");
        loss.write(kv);
        model.write(kv);
        eval.write(kv);
    }
};

// ---------------------------------------------------------------- Adam

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
};

using NamedTensors = std::vector<std::pair<std::string, Matrix*>>;
using ConstNamedTensors = std::vector<std::pair<std::string, const Matrix*>>;

/// One bias-corrected Adam update. Fails before touching any parameter if a
/// gradient holds a non-finite value.
inline void adam_step(const NamedTensors& params, const ConstNamedTensors& grads, AdamState& state, double lr) {
    if (params.size() != grads.size()) throw InputError("adam_step: parameter/gradient count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].second->rows() != grads[i].second->rows() || params[i].second->cols() != grads[i].second->cols())
            throw InputError("adam_step: shape mismatch for " + params[i].first);
        if (!grads[i].second->allFinite()) throw NumericError("non-finite gradient in parameter " + params[i].first);
    }
    if (state.m.empty()) {
        for (const auto& [name, p] : params) {
            state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
            state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
        }
    }
    if (state.m.size() != params.size()) throw InputError("adam_step: optimizer state does not match parameters");
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Matrix& g = *grads[i].second;
        Matrix& m = state.m[i];
        Matrix& v = state.v[i];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseAbs2();
        params[i].second->array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
    }
}

inline void adam_step(Model& model, const Model& grads, AdamState& state, double lr) {
    adam_step(model.parameters(), grads.parameters(), state, lr);
    ++model.version;
}

// ---------------------------------------------------------------- batches

/// Interacted items per user over the training edges (either sign).
struct TrainIndex {
    std::vector<std::unordered_set<std::size_t>> seen;
    std::size_t num_items = 0;
};

inline TrainIndex make_train_index(std::size_t num_users, std::size_t num_items, const std::vector<SignedEdge>& train) {
    return {interacted_items(num_users, train), num_items};
}

/// Builds the loss batch for a slice of signed training edges.
///   feedback_type: every edge is an example labelled by its sign.
///   ranking: positive edges are label-1 examples, each joined by
///     `neg_ratio` label-0 items the user has not interacted with;
///     negative edges feed the regularizer only.
/// The regularizer sees the slice's signed pairs, its distinct users, and
/// every item appearing in the examples or pairs.
inline Batch make_batch(const std::vector<SignedEdge>& slice, Task task, const TrainIndex& index, std::size_t neg_ratio, Rng& rng) {
    Batch b;
    std::set<std::size_t> users, items;
    for (const auto& e : slice) {
        users.insert(e.user);
        items.insert(e.item);
        (e.sign == Sign::positive ? b.sgr.pos_pairs : b.sgr.neg_pairs).emplace_back(e.user, e.item);
        if (task == Task::feedback_type) {
            b.examples.push_back({e.user, e.item, e.sign == Sign::positive ? 1 : 0});
            continue;
        }
        if (e.sign != Sign::positive) continue;
        b.examples.push_back({e.user, e.item, 1});
        const auto& seen = index.seen[e.user];
        const std::size_t available = index.num_items - seen.size();
        const std::size_t k = std::min(neg_ratio, available);
        for (auto v : sample_ranking_negatives(k, seen, index.num_items, rng)) {
            b.examples.push_back({e.user, v, 0});
            items.insert(v);
        }
    }
    b.sgr.users.assign(users.begin(), users.end());
    b.sgr.items.assign(items.begin(), items.end());
    return b;
}

struct EpochStats {
    double mean_loss = 0.0;
    double mean_task_loss = 0.0;
    double mean_sgr = 0.0;
    std::size_t batches = 0;
    double elapsed_ms = 0.0;
};

inline EpochStats train_epoch(Model& model, const GraphOperators& ops, std::vector<SignedEdge> train, const TrainIndex& index,
                              const TrainConfig& cfg, AdamState& adam, Rng& rng) {
    const auto start = std::chrono::steady_clock::now();
    EpochStats stats;
    rng.shuffle(train);
    for (std::size_t begin = 0; begin < train.size(); begin += cfg.batch_size) {
        const std::size_t end = std::min(train.size(), begin + cfg.batch_size);
        const std::vector<SignedEdge> slice(train.begin() + static_cast<std::ptrdiff_t>(begin),
                                            train.begin() + static_cast<std::ptrdiff_t>(end));
        const Batch batch = make_batch(slice, cfg.task, index, cfg.neg_sample_ratio, rng);
        GraphOperators withheld;
        if (cfg.withhold_batch_edges) {
            std::vector<SignedEdge> rest(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(begin));
            rest.insert(rest.end(), train.begin() + static_cast<std::ptrdiff_t>(end), train.end());
            withheld = build_operators(build_graph(ops.num_users, ops.num_items, rest), ops.variant, ops.threads);
        }
        const GraphOperators& batch_ops = cfg.withhold_batch_edges ? withheld : ops;
        const auto trace = forward(model, batch_ops);
        const auto grads = backward(trace, model, batch_ops, batch, cfg.loss);
        if (!std::isfinite(grads.loss.total))
            throw NumericError("non-finite loss at batch " + std::to_string(stats.batches + 1));
        adam_step(model, grads.grads, adam, cfg.lr);
        stats.mean_loss += grads.loss.total;
        stats.mean_task_loss += grads.loss.task;
        stats.mean_sgr += grads.loss.sgr;
        ++stats.batches;
    }
    if (stats.batches) {
        const auto n = static_cast<double>(stats.batches);
        stats.mean_loss /= n;
        stats.mean_task_loss /= n;
        stats.mean_sgr /= n;
    }
    stats.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return stats;
}

// ---------------------------------------------------------------- early stopping

/// Tracks the best metric (higher is better); stops after `patience`
/// consecutive epochs without strict improvement.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

    bool update(double metric) {
        ++epoch_;
        if (metric > best_) {
            best_ = metric;
            best_epoch_ = epoch_;
            since_best_ = 0;
            return true;
        }
        ++since_best_;
        return false;
    }

    bool should_stop() const { return since_best_ >= patience_; }
    double best() const { return best_; }
    std::size_t best_epoch() const { return best_epoch_; }

private:
    std::size_t patience_;
    std::size_t epoch_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t since_best_ = 0;
    double best_ = -std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------- checkpoints

struct Checkpoint {
    std::string config_text;  // resolved key-value config; includes model.* and graph.* keys
    Model model;
    AdamState adam;
    std::uint64_t epoch = 0;
    double best_metric = 0.0;
    std::string rng_state;
};

inline constexpr char kCheckpointMagic[4] = {'D', 'F', 'G', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint8_t kDtypeF64 = 1;

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b, 8);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b, 4);
}

inline void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

inline void put_string(std::ostream& os, const std::string& s) {
    put_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
public:
    explicit Reader(std::istream& is) : is_(is) {}

    void bytes(char* out, std::size_t n, const std::string& what) {
        is_.read(out, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n) throw InputError("checkpoint truncated while reading " + what);
    }

    std::uint64_t u64(const std::string& what) {
        unsigned char b[8];
        bytes(reinterpret_cast<char*>(b), 8, what);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }

    std::uint32_t u32(const std::string& what) {
        unsigned char b[4];
        bytes(reinterpret_cast<char*>(b), 4, what);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }

    double f64(const std::string& what) {
        const std::uint64_t bits = u64(what);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    std::string string(const std::string& what, std::uint64_t max_len = 1ULL << 32) {
        const auto n = u64(what);
        if (n > max_len) throw InputError("checkpoint " + what + " length is implausible");
        std::string s(n, '\0');
        bytes(s.data(), n, what);
        return s;
    }

private:
    std::istream& is_;
};

inline ConstNamedTensors checkpoint_tensors(const Checkpoint& c) {
    ConstNamedTensors out = c.model.parameters();
    const auto names = c.model.parameters();
    for (std::size_t i = 0; i < c.adam.m.size(); ++i) out.emplace_back("adam.m." + names[i].first, &c.adam.m[i]);
    for (std::size_t i = 0; i < c.adam.v.size(); ++i) out.emplace_back("adam.v." + names[i].first, &c.adam.v[i]);
    return out;
}

} // namespace detail

/// Little-endian layout:
///   "DFGN" | u32 version | string config | u64 epoch | f64 best_metric |
///   u64 adam_step | f64 beta1 | f64 beta2 | f64 eps | string rng_state |
///   u32 tensor_count | directory (string name, u32 ndims, u64 dims..., u8 dtype)* |
///   raw f64 tensor data in directory order, row-major.
/// Strings are u64 length + UTF-8 bytes.
inline void save_checkpoint(const Checkpoint& c, std::ostream& os) {
    os.write(kCheckpointMagic, 4);
    detail::put_u32(os, kCheckpointVersion);
    detail::put_string(os, c.config_text);
    detail::put_u64(os, c.epoch);
    detail::put_f64(os, c.best_metric);
    detail::put_u64(os, c.adam.step);
    detail::put_f64(os, c.adam.beta1);
    detail::put_f64(os, c.adam.beta2);
    detail::put_f64(os, c.adam.eps);
    detail::put_string(os, c.rng_state);
    const auto tensors = detail::checkpoint_tensors(c);
    detail::put_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        detail::put_string(os, name);
        detail::put_u32(os, 2);
        detail::put_u64(os, static_cast<std::uint64_t>(t->rows()));
        detail::put_u64(os, static_cast<std::uint64_t>(t->cols()));
        os.put(static_cast<char>(kDtypeF64));
    }
    for (const auto& [name, t] : tensors)
        for (Eigen::Index i = 0; i < t->size(); ++i) detail::put_f64(os, t->data()[i]);
    if (!os) throw InputError("failed writing checkpoint");
}

/// Model skeleton (shapes only) described by a checkpoint config.
inline Model model_skeleton(const KeyValues& kv) {
    const auto cfg = ModelConfig::read(kv);
    const auto nu = kv.get_uint("graph.num_users");
    const auto ni = kv.get_uint("graph.num_items");
    Model m = init_model(cfg, nu, ni);
    for (auto& p : m.parameters()) p.second->setZero();
    return m;
}

inline Checkpoint load_checkpoint(std::istream& is) {
    detail::Reader r(is);
    char magic[4];
    r.bytes(magic, 4, "magic");
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw InputError("not a checkpoint (bad magic)");
    const auto version = r.u32("version");
    if (version != kCheckpointVersion)
        throw InputError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                         std::to_string(kCheckpointVersion) + ")");
    Checkpoint c;
    c.config_text = r.string("config");
    c.epoch = r.u64("epoch");
    c.best_metric = r.f64("best_metric");
    c.adam.step = r.u64("adam step");
    c.adam.beta1 = r.f64("adam beta1");
    c.adam.beta2 = r.f64("adam beta2");
    c.adam.eps = r.f64("adam eps");
    c.rng_state = r.string("rng state");

    c.model = model_skeleton(KeyValues::parse(c.config_text));
    const std::size_t num_params = c.model.parameters().size();
    const auto count = r.u32("tensor count");
    const bool has_adam = count == 3 * num_params;
    if (count != num_params && !has_adam)
        throw InputError("checkpoint holds " + std::to_string(count) + " tensors; config implies " + std::to_string(num_params));
    if (has_adam) {
        for (const auto& p : c.model.parameters()) {
            c.adam.m.push_back(Matrix::Zero(p.second->rows(), p.second->cols()));
            c.adam.v.push_back(Matrix::Zero(p.second->rows(), p.second->cols()));
        }
    }
    auto expected = detail::checkpoint_tensors(c);
    std::vector<Matrix*> targets;
    for (auto& p : c.model.parameters()) targets.push_back(p.second);
    for (auto& m : c.adam.m) targets.push_back(&m);
    for (auto& v : c.adam.v) targets.push_back(&v);

    for (std::size_t i = 0; i < count; ++i) {
        const auto name = r.string("tensor directory", 4096);
        const auto ndims = r.u32("tensor directory");
        if (ndims != 2) throw InputError("tensor " + name + ": expected 2 dims, found " + std::to_string(ndims));
        const auto rows = r.u64("tensor directory");
        const auto cols = r.u64("tensor directory");
        char dtype;
        r.bytes(&dtype, 1, "tensor directory");
        if (name != expected[i].first) throw InputError("tensor " + std::to_string(i) + " is '" + name + "', expected '" + expected[i].first + "'");
        if (static_cast<std::uint8_t>(dtype) != kDtypeF64) throw InputError("tensor " + name + ": unsupported dtype");
        if (rows != static_cast<std::uint64_t>(targets[i]->rows()) || cols != static_cast<std::uint64_t>(targets[i]->cols()))
            throw InputError("tensor " + name + ": shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                             " does not match config");
    }
    for (std::size_t i = 0; i < count; ++i) {
        Matrix& t = *targets[i];
        for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = r.f64("tensor " + expected[i].first);
    }
    return c;
}

// ---------------------------------------------------------------- fit

struct HistoryEntry {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_metric = 0.0;
    double elapsed_ms = 0.0;
};

inline nlohmann::json to_json(const HistoryEntry& h, bool with_timing = true) {
    nlohmann::json j{{"epoch", h.epoch}, {"train_loss", h.train_loss}, {"val_metric", h.val_metric}};
    if (with_timing) j["elapsed_ms"] = h.elapsed_ms;
    return j;
}

struct FitResult {
    Checkpoint best;
    std::vector<HistoryEntry> history;
    bool early_stopped = false;
};

/// Resolved config text stored in checkpoints: caller-provided keys plus
/// the training, model and graph-size keys.
inline std::string checkpoint_config(const TrainConfig& cfg, std::size_t num_users, std::size_t num_items, KeyValues extra = {}) {
    cfg.write(extra);
    extra.set("graph.num_users", std::to_string(num_users));
    extra.set("graph.num_items", std::to_string(num_items));
    return extra.serialize();
}

/// Validation scorer for the configured task: MRR over ranking queries or
/// AUC over signed edges.
class Validator {
public:
    Validator(const DatasetSplit& split, const TrainConfig& cfg) : task_(cfg.task), num_users_(split.num_users()) {
        if (split.validation.empty()) throw EmptyResultError("validation split is empty");
        if (task_ == Task::ranking) {
            EvalProtocol p = cfg.eval;
            p.seed = derive_seed(cfg.seed, 0x7A11D);
            queries_ = build_ranking_queries(split, split.validation, p);
            if (queries_.empty()) throw EmptyResultError("validation split has no positive edges");
        } else {
            edges_ = split.validation;
        }
    }

    double operator()(const Matrix& reps) const {
        if (task_ == Task::ranking) return evaluate_ranking(reps, num_users_, queries_).metrics.at("MRR");
        return evaluate_feedback(reps, num_users_, edges_).metrics.at("AUC");
    }

private:
    Task task_;
    std::size_t num_users_;
    std::vector<RankingQuery> queries_;
    std::vector<SignedEdge> edges_;
};

/// Trains until `patience` epochs pass without validation improvement or
/// max_epochs is reached. Returns the best-epoch checkpoint.
inline FitResult fit(Model model, const GraphOperators& ops, const DatasetSplit& split, const TrainConfig& cfg,
                     const KeyValues& extra_config = {},
                     const std::function<void(const HistoryEntry&)>& on_epoch = {}) {
    cfg.validate();
    const Validator validate(split, cfg);
    const auto index = make_train_index(split.num_users(), split.num_items(), split.train);
    Rng rng(derive_seed(cfg.seed, 0x7EA1));
    AdamState adam;
    EarlyStopping stopper(cfg.patience);
    FitResult result;
    result.best.config_text = checkpoint_config(cfg, split.num_users(), split.num_items(), extra_config);
    result.best.model = model;
    result.best.best_metric = -std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto stats = train_epoch(model, ops, split.train, index, cfg, adam, rng);
        const Matrix reps = forward(model, ops).output;
        if (!reps.allFinite()) throw NumericError("non-finite representations after epoch " + std::to_string(epoch));
        const double metric = validate(reps);
        HistoryEntry h{epoch, stats.mean_loss, metric, stats.elapsed_ms};
        result.history.push_back(h);
        if (on_epoch) on_epoch(h);
        if (stopper.update(metric)) {
            result.best.model = model;
            result.best.adam = adam;
            result.best.epoch = epoch;
            result.best.best_metric = metric;
            result.best.rng_state = rng.state();
        }
        if (stopper.should_stop()) {
            result.early_stopped = true;
            break;
        }
    }
    return result;
}

// ---------------------------------------------------------------- gradient check

struct GradCheckEntry {
    std::string parameter;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double tolerance = 1e-4;

    bool pass() const {
        for (const auto& e : entries)
            if (!(e.max_rel_error < tolerance)) return false;
        return true;
    }

    std::vector<std::string> failures() const {
        std::vector<std::string> out;
        for (const auto& e : entries)
            if (!(e.max_rel_error < tolerance)) out.push_back(e.parameter);
        return out;
    }
};

using GradientFn = std::function<Model(const Model&)>;

/// Copy of `model` with fusion biases drawn from U(-a, a). Zero-initialised
/// biases put whole rows of fusion pre-activations on the ReLU kink, where
/// central differences and the analytic subgradient legitimately disagree.
inline Model with_random_biases(Model model, std::uint64_t seed, double a = 0.1) {
    Rng rng(seed);
    for (auto& b : model.b_fuse) b = detail::uniform_matrix(rng, b.rows(), b.cols(), a);
    return model;
}

/// Compares analytic gradients against central differences,
/// |analytic - numeric| / max(1, |analytic|), for every parameter entry.
inline GradCheckReport grad_check(const Model& model, const GraphOperators& ops, const Batch& batch, const LossConfig& cfg,
                                  double step = 1e-5, double tolerance = 1e-4, GradientFn analytic = {}) {
    if (!analytic)
        analytic = [&](const Model& m) { return backward(forward(m, ops), m, ops, batch, cfg).grads; };
    const Model grads = analytic(model);
    Model probe = model;
    GradCheckReport report;
    report.tolerance = tolerance;
    auto params = probe.parameters();
    const auto gparams = grads.parameters();
    for (std::size_t p = 0; p < params.size(); ++p) {
        GradCheckEntry entry{params[p].first, 0.0, 0};
        Matrix& t = *params[p].second;
        for (Eigen::Index k = 0; k < t.size(); ++k) {
            const double saved = t.data()[k];
            t.data()[k] = saved + step;
            const double up = compute_loss(probe, ops, batch, cfg).total;
            t.data()[k] = saved - step;
            const double down = compute_loss(probe, ops, batch, cfg).total;
            t.data()[k] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = gparams[p].second->data()[k];
            const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
            if (!(err <= entry.max_rel_error)) {
                entry.max_rel_error = err;
                entry.worst_index = static_cast<std::size_t>(k);
            }
        }
        report.entries.push_back(entry);
    }
    return report;
}

} // namespace dfgnn
