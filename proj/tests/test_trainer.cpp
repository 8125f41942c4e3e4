#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "dfgnn/synthetic.hpp"
#include "dfgnn/trainer.hpp"
#include "oracles.hpp"

using namespace dfgnn;

namespace {

DatasetSplit small_split(std::uint64_t seed = 0) {
    PlantedConfig pc;
    pc.num_users = 40;
    pc.num_items = 40;
    pc.interactions_per_user = 10;
    pc.seed = seed;
    IngestConfig ic;
    ic.min_interactions = 2;
    return planted_split(pc, ic);
}

TrainConfig small_config(Variant v = Variant::dfgnn, Task t = Task::feedback_type) {
    TrainConfig c;
    c.model.embed_dim = 8;
    c.model.variant = v;
    c.task = t;
    c.batch_size = 64;
    c.max_epochs = 5;
    c.patience = 3;
    return c;
}

std::string bytes_of(const Checkpoint& c) {
    std::ostringstream os(std::ios::binary);
    save_checkpoint(c, os);
    return os.str();
}

} // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
    Matrix p = Matrix::Constant(2, 2, 1.0), g = Matrix::Ones(2, 2);
    AdamState s;
    adam_step({{"p", &p}}, {{"p", &g}}, s, 0.01);
    EXPECT_EQ(s.step, 1u);
    EXPECT_NEAR(p(0, 0), 1.0 - 0.01, 1e-9);
}

TEST(Adam, ZeroGradientLeavesParameters) {
    Matrix p = Matrix::Constant(2, 1, 0.3), g = Matrix::Zero(2, 1);
    AdamState s;
    adam_step({{"p", &p}}, {{"p", &g}}, s, 0.1);
    EXPECT_EQ(p(0, 0), 0.3);
    EXPECT_EQ(s.step, 1u);
}

TEST(Adam, TwoStepsMatchScalarOracle) {
    Matrix p(1, 3), g1(1, 3), g2(1, 3);
    p << 0.5, -1.0, 2.0;
    g1 << 0.1, -0.3, 2.0;
    g2 << -0.2, 0.4, 1.0;
    const Matrix start = p;
    AdamState s;
    adam_step({{"p", &p}}, {{"p", &g1}}, s, 0.003);
    adam_step({{"p", &p}}, {{"p", &g2}}, s, 0.003);
    for (int j = 0; j < 3; ++j) {
        double x = start(0, j), m = 0, v = 0;
        const double gs[2] = {g1(0, j), g2(0, j)};
        for (int t = 1; t <= 2; ++t) {
            m = 0.9 * m + (1 - 0.9) * gs[t - 1];
            v = 0.999 * v + (1 - 0.999) * (gs[t - 1] * gs[t - 1]);
            const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
            x -= 0.003 * mh / (std::sqrt(vh) + 1e-8);
        }
        EXPECT_EQ(p(0, j), x);
    }
}

TEST(Adam, NonFiniteGradientNamesParameter) {
    Matrix p = Matrix::Zero(1, 1), q = Matrix::Zero(1, 1), gp = Matrix::Zero(1, 1), gq(1, 1);
    gq << std::nan("");
    AdamState s;
    try {
        adam_step({{"a", &p}, {"w_fuse.1", &q}}, {{"a", &gp}, {"w_fuse.1", &gq}}, s, 0.1);
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("w_fuse.1"), std::string::npos);
    }
    EXPECT_EQ(s.step, 0u);
    Matrix wrong = Matrix::Zero(2, 1);
    EXPECT_THROW(adam_step({{"a", &p}}, {{"a", &wrong}}, s, 0.1), InputError);
}

TEST(MakeBatch, RankingNegativesNeverInteracted) {
    const auto split = small_split();
    const auto index = make_train_index(split.num_users(), split.num_items(), split.train);
    Rng rng(1);
    const auto b = make_batch(split.train, Task::ranking, index, 1, rng);
    std::size_t pos = 0, neg = 0;
    for (const auto& ex : b.examples) {
        if (ex.label) ++pos;
        else {
            ++neg;
            EXPECT_FALSE(index.seen[ex.user].count(ex.item));
        }
    }
    EXPECT_EQ(pos, neg);
    std::size_t n_pos_edges = 0;
    for (const auto& e : split.train) n_pos_edges += e.sign == Sign::positive;
    EXPECT_EQ(pos, n_pos_edges);
    EXPECT_EQ(b.sgr.pos_pairs.size() + b.sgr.neg_pairs.size(), split.train.size());
}

TEST(MakeBatch, FeedbackLabelsFollowSign) {
    const std::vector<SignedEdge> slice{{0, 1, Sign::positive}, {1, 0, Sign::negative}};
    Rng rng(0);
    const auto b = make_batch(slice, Task::feedback_type, make_train_index(2, 2, slice), 1, rng);
    ASSERT_EQ(b.examples.size(), 2u);
    EXPECT_EQ(b.examples[0].label, 1);
    EXPECT_EQ(b.examples[1].label, 0);
    EXPECT_EQ(b.sgr.users, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(b.sgr.items, (std::vector<std::size_t>{0, 1}));
}

TEST(TrainEpoch, SmokeAndDeterminism) {
    const auto split = small_split();
    const auto cfg = small_config();
    const auto ops = build_operators(split.train_graph(), cfg.model.variant);
    const auto index = make_train_index(split.num_users(), split.num_items(), split.train);
    auto run = [&] {
        auto m = init_model(cfg.model, split.num_users(), split.num_items());
        AdamState adam;
        Rng rng(7);
        std::vector<double> losses;
        for (int e = 0; e < 2; ++e) losses.push_back(train_epoch(m, ops, split.train, index, cfg, adam, rng).mean_loss);
        return std::make_pair(losses, m);
    };
    const auto [la, ma] = run();
    const auto [lb, mb] = run();
    EXPECT_EQ(la, lb);
    for (double l : la) EXPECT_TRUE(std::isfinite(l));
    for (std::size_t i = 0; i < ma.parameters().size(); ++i) {
        EXPECT_TRUE(ma.parameters()[i].second->allFinite());
        EXPECT_TRUE(*ma.parameters()[i].second == *mb.parameters()[i].second);
    }
}

TEST(TrainEpoch, SgrWeightChangesTrajectory) {
    const auto split = small_split();
    auto a = small_config(), b = small_config();
    a.loss.w = 0.0;
    b.loss.w = 0.1;
    const auto ops = build_operators(split.train_graph(), Variant::dfgnn);
    const auto index = make_train_index(split.num_users(), split.num_items(), split.train);
    auto ma = init_model(a.model, split.num_users(), split.num_items()), mb = ma;
    AdamState sa, sb;
    Rng ra(3), rb(3);
    train_epoch(ma, ops, split.train, index, a, sa, ra);
    train_epoch(mb, ops, split.train, index, b, sb, rb);
    EXPECT_FALSE(ma.embedding == mb.embedding);
}

TEST(TrainEpoch, WithheldEdgesAreInvisibleToTheirBatch) {
    // One edge, one batch: with withholding the operators see an empty graph,
    // so the filter output cannot depend on that edge.
    const std::vector<SignedEdge> train{{0, 0, Sign::negative}};
    DatasetSplit split;
    split.user_keys = {"u"};
    split.item_keys = {"i"};
    split.train = train;
    auto cfg = small_config(Variant::basic_dgf);
    cfg.model.num_layers = 1;
    cfg.batch_size = 1;
    const auto ops = build_operators(split.train_graph(), Variant::basic_dgf);
    const auto index = make_train_index(1, 1, train);
    auto run = [&](bool withhold) {
        auto c = cfg;
        c.withhold_batch_edges = withhold;
        auto m = init_model(c.model, 1, 1);
        AdamState s;
        Rng rng(0);
        train_epoch(m, ops, train, index, c, s, rng);
        return m;
    };
    const auto empty_ops = build_operators(build_graph(1, 1, {}), Variant::basic_dgf);
    auto m0 = init_model(cfg.model, 1, 1);
    const auto g = backward(forward(m0, empty_ops), m0, empty_ops, make_batch(train, Task::feedback_type, index, 1, *std::make_unique<Rng>(0)),
                            cfg.loss);
    AdamState s;
    adam_step(m0, g.grads, s, cfg.lr);
    const auto with = run(true);
    EXPECT_TRUE(with.embedding == m0.embedding);
    EXPECT_FALSE(run(false).embedding == m0.embedding);
}

TEST(TrainEpoch, SingleEdgeLossDecreases) {
    const std::vector<SignedEdge> train{{0, 0, Sign::positive}};
    auto cfg = small_config(Variant::basic);
    cfg.model.num_layers = 1;
    cfg.withhold_batch_edges = false;
    const auto ops = build_operators(build_graph(1, 1, train), Variant::basic);
    const auto index = make_train_index(1, 1, train);
    auto m = init_model(cfg.model, 1, 1);
    AdamState s;
    Rng rng(0);
    double prev = 1e9;
    for (int step = 0; step < 50; ++step) {
        const double l = train_epoch(m, ops, train, index, cfg, s, rng).mean_loss;
        EXPECT_LT(l, prev);
        prev = l;
    }
}

TEST(EarlyStopping, Rules) {
    EarlyStopping rising(3);
    for (int e = 0; e < 50; ++e) {
        EXPECT_TRUE(rising.update(e));
        EXPECT_FALSE(rising.should_stop());
    }
    EarlyStopping flat(20);
    std::size_t epochs = 0;
    while (!flat.should_stop()) {
        flat.update(0.5);
        ++epochs;
    }
    EXPECT_EQ(epochs, 21u);
    EXPECT_EQ(flat.best_epoch(), 1u);
}

TEST(Fit, BestCheckpointIsMaximumOfHistory) {
    const auto split = small_split(2);
    auto cfg = small_config();
    cfg.max_epochs = 12;
    const auto ops = build_operators(split.train_graph(), cfg.model.variant);
    const auto r = fit(init_model(cfg.model, split.num_users(), split.num_items()), ops, split, cfg);
    ASSERT_FALSE(r.history.empty());
    double best = -1;
    for (const auto& h : r.history) best = std::max(best, h.val_metric);
    EXPECT_EQ(r.best.best_metric, best);
    EXPECT_EQ(r.history[r.best.epoch - 1].val_metric, best);
    EXPECT_NEAR(Validator(split, cfg)(forward(r.best.model, ops).output), best, 1e-12);
}

TEST(Fit, RunsToMaxEpochsOrStopsAfterPatience) {
    const auto split = small_split(3);
    auto cfg = small_config();
    cfg.max_epochs = 4;
    cfg.patience = 50;
    const auto ops = build_operators(split.train_graph(), cfg.model.variant);
    const auto r = fit(init_model(cfg.model, split.num_users(), split.num_items()), ops, split, cfg);
    EXPECT_EQ(r.history.size(), 4u);
    EXPECT_FALSE(r.early_stopped);
    cfg.lr = 1e-12;  // metric frozen from epoch 1
    cfg.patience = 2;
    cfg.max_epochs = 30;
    const auto s = fit(init_model(cfg.model, split.num_users(), split.num_items()), ops, split, cfg);
    EXPECT_TRUE(s.early_stopped);
    EXPECT_EQ(s.history.size(), s.best.epoch + 2);
}

TEST(Fit, EmptyValidationIsAnError) {
    auto split = small_split();
    split.validation.clear();
    const auto cfg = small_config();
    EXPECT_THROW(fit(init_model(cfg.model, split.num_users(), split.num_items()), build_operators(split.train_graph(), cfg.model.variant),
                     split, cfg),
                 EmptyResultError);
}

TEST(Fit, DeterministicHistoryAndCheckpoint) {
    const auto split = small_split(4);
    for (auto task : {Task::feedback_type, Task::ranking}) {
        const auto cfg = small_config(Variant::dfgnn, task);
        const auto ops = build_operators(split.train_graph(), cfg.model.variant);
        const auto a = fit(init_model(cfg.model, split.num_users(), split.num_items()), ops, split, cfg);
        const auto b = fit(init_model(cfg.model, split.num_users(), split.num_items()), ops, split, cfg);
        ASSERT_EQ(a.history.size(), b.history.size());
        for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(to_json(a.history[i], false), to_json(b.history[i], false));
        EXPECT_EQ(bytes_of(a.best), bytes_of(b.best));
    }
}

TEST(Checkpoint, RoundTripBitwise) {
    const auto split = small_split(5);
    const auto cfg = small_config();
    const auto ops = build_operators(split.train_graph(), cfg.model.variant);
    const auto r = fit(init_model(cfg.model, split.num_users(), split.num_items()), ops, split, cfg);
    const std::string first = bytes_of(r.best);
    std::istringstream is(first);
    const auto loaded = load_checkpoint(is);
    EXPECT_EQ(bytes_of(loaded), first);
    EXPECT_EQ(loaded.epoch, r.best.epoch);
    EXPECT_EQ(loaded.rng_state, r.best.rng_state);
    EXPECT_TRUE(loaded.model.embedding == r.best.model.embedding);
    EXPECT_EQ(loaded.adam.m.size(), r.best.model.parameters().size());
}

TEST(Checkpoint, WithoutOptimizerState) {
    Checkpoint c;
    TrainConfig cfg = small_config(Variant::basic);
    c.model = init_model(cfg.model, 3, 2);
    c.config_text = checkpoint_config(cfg, 3, 2);
    const auto bytes = bytes_of(c);
    std::istringstream is(bytes);
    const auto loaded = load_checkpoint(is);
    EXPECT_TRUE(loaded.adam.m.empty());
    EXPECT_EQ(bytes_of(loaded), bytes);
}

TEST(Checkpoint, Errors) {
    Checkpoint c;
    TrainConfig cfg = small_config(Variant::basic_lgf);
    c.model = init_model(cfg.model, 3, 2);
    c.config_text = checkpoint_config(cfg, 3, 2);
    const auto bytes = bytes_of(c);

    auto load = [](const std::string& b) {
        std::istringstream is(b);
        return load_checkpoint(is);
    };
    std::string bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(load(bad), InputError);
    bad = bytes;
    bad[4] = 9;
    EXPECT_THROW(load(bad), InputError);
    try {
        load(bytes.substr(0, bytes.size() - 10));
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("b_fuse.1"), std::string::npos) << e.what();
    }
    Checkpoint other = c;
    other.config_text = checkpoint_config(cfg, 4, 2);  // config claims a different node count
    const auto mismatched = bytes_of(c);
    std::string swapped = bytes_of(other).substr(0, 8 + 8 + other.config_text.size());
    swapped += mismatched.substr(8 + 8 + c.config_text.size());
    EXPECT_THROW(load(swapped), InputError);
}

TEST(GradCheck, PassesAndCoversEveryTensor) {
    const auto split = small_split(6);
    for (auto v : {Variant::basic, Variant::basic_lgf, Variant::basic_dgf, Variant::dfgnn})
        for (auto task : {Task::ranking, Task::feedback_type}) {
            const std::size_t nu = 5, ni = 6;
            std::vector<SignedEdge> edges;
            for (const auto& e : split.train)
                if (e.user < nu && e.item < ni) edges.push_back(e);
            edges.push_back({0, 5, Sign::negative});
            edges.push_back({1, 4, Sign::positive});
            auto g = build_graph(nu, ni, edges);
            auto cfg = small_config(v, task);
            cfg.model.embed_dim = 4;
            const auto m = init_model(cfg.model, nu, ni);
            Rng rng(1);
            const auto batch = make_batch(g.pos_edges, task, make_train_index(nu, ni, edges), 1, rng);
            const auto report = grad_check(m, build_operators(g, v), batch, cfg.loss);
            EXPECT_TRUE(report.pass()) << to_string(v);
            std::vector<std::string> names;
            for (const auto& e : report.entries) names.push_back(e.parameter);
            std::vector<std::string> expected;
            for (const auto& p : m.parameters()) expected.push_back(p.first);
            EXPECT_EQ(names, expected);
        }
}

TEST(GradCheck, CorruptedGradientIsNamed) {
    const std::vector<SignedEdge> edges{{0, 0, Sign::positive}, {1, 1, Sign::negative}, {1, 0, Sign::positive}};
    const auto g = build_graph(2, 2, edges);
    auto cfg = small_config();
    cfg.model.embed_dim = 3;
    const auto m = init_model(cfg.model, 2, 2);
    const auto ops = build_operators(g, Variant::dfgnn);
    Rng rng(0);
    const auto batch = make_batch(edges, Task::feedback_type, make_train_index(2, 2, edges), 1, rng);
    const auto report = grad_check(m, ops, batch, cfg.loss, 1e-5, 1e-4, [&](const Model& x) {
        auto gr = backward(forward(x, ops), x, ops, batch, cfg.loss).grads;
        gr.w_neg[1](0, 0) += 0.5;
        return gr;
    });
    EXPECT_FALSE(report.pass());
    EXPECT_EQ(report.failures(), std::vector<std::string>{"w_neg.1"});
}

TEST(Config, WriteAndLearningRateGrid) {
    EXPECT_EQ(learning_rate_grid(), (std::vector<double>{1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5}));
    TrainConfig c;
    EXPECT_EQ(c.batch_size, 512u);
    EXPECT_EQ(c.patience, 20u);
    EXPECT_EQ(c.model.embed_dim, 64u);
    EXPECT_EQ(c.model.num_layers, 2u);
    EXPECT_EQ(c.loss.tau, 0.2);
    EXPECT_EQ(c.loss.w, 0.1);
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), InputError);
    c = {};
    c.patience = 0;
    EXPECT_THROW(c.validate(), InputError);
}

TEST(GradCheck, ZeroBiasKinkAndGenericPoint) {
    const std::size_t nu = 5, ni = 6;
    const std::vector<SignedEdge> edges{{0, 0, Sign::positive}, {0, 3, Sign::negative}, {1, 1, Sign::positive}, {1, 5, Sign::negative},
                                        {2, 2, Sign::positive}, {2, 0, Sign::negative}, {3, 4, Sign::positive}, {3, 1, Sign::positive},
                                        {4, 5, Sign::positive}, {4, 2, Sign::negative}};
    const auto g = build_graph(nu, ni, edges);
    ModelConfig mc;
    mc.embed_dim = 4;
    mc.seed = 12;
    LossConfig lc;
    lc.w = 0.5;
    Rng rng(12);
    const auto batch = make_batch(edges, Task::feedback_type, make_train_index(nu, ni, edges), 1, rng);
    const auto ops = build_operators(g, Variant::dfgnn);
    const auto at_init = init_model(mc, nu, ni);
    // With zero fusion biases a dead row sits exactly on the ReLU kink.
    const auto kink = grad_check(at_init, ops, batch, lc);
    EXPECT_EQ(kink.failures(), std::vector<std::string>{"b_fuse.0"});
    const auto generic = with_random_biases(at_init, 12);
    EXPECT_TRUE(generic.embedding == at_init.embedding);
    EXPECT_FALSE(generic.b_fuse[0] == at_init.b_fuse[0]);
    EXPECT_TRUE(grad_check(generic, ops, batch, lc).pass());
}
