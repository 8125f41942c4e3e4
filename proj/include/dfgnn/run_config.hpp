#pragma once

// Every tunable of a run in one place. Defaults come from the module
// configs; a config file or command-line flags override individual keys and
// unknown keys are rejected. The resolved text is what gets echoed into
// artifacts.

#include <cstdint>
#include <fstream>
#include <string>

#include "dfgnn/ingest.hpp"
#include "dfgnn/kvconfig.hpp"
#include "dfgnn/mf.hpp"
#include "dfgnn/synthetic.hpp"
#include "dfgnn/trainer.hpp"

namespace dfgnn {

struct RunConfig {
    std::uint64_t seed = 0;
    std::string input_format = "csv";
    RatingFormat columns;
    IngestConfig ingest;
    MFConfig mf;
    PlantedConfig planted;  // used by `ingest --planted`
    std::size_t spectrum_buckets = 10;
    std::size_t ablate_seeds = 5;
    TrainConfig train;

    /// Copies the run seed into every module config.
    void propagate_seed() {
        ingest.seed = seed;
        mf.seed = seed;
        planted.seed = seed;
        train.seed = seed;
        train.model.seed = seed;
        train.eval.seed = seed;
    }

    KeyValues to_kv() const {
        KeyValues kv;
        kv.set("run.seed", std::to_string(seed));
        kv.set("ingest.format", input_format);
        kv.set("ingest.user_column", std::to_string(columns.user_column));
        kv.set("ingest.item_column", std::to_string(columns.item_column));
        kv.set("ingest.rating_column", std::to_string(columns.rating_column));
        kv.set("ingest.timestamp_column", std::to_string(columns.timestamp_column));
        kv.set("ingest.neg_threshold", format_number(ingest.neg_threshold));
        kv.set("ingest.pos_threshold", format_number(ingest.pos_threshold));
        kv.set("ingest.min_interactions", std::to_string(ingest.min_interactions));
        kv.set("ingest.train_fraction", format_number(ingest.train_fraction));
        kv.set("ingest.validation_fraction", format_number(ingest.validation_fraction));
        kv.set("ingest.test_fraction", format_number(ingest.test_fraction));
        kv.set("mf.lr", format_number(mf.lr));
        kv.set("mf.l2_reg", format_number(mf.l2_reg));
        kv.set("mf.epochs", std::to_string(mf.epochs));
        kv.set("planted.num_users", std::to_string(planted.num_users));
        kv.set("planted.num_items", std::to_string(planted.num_items));
        kv.set("planted.num_clusters", std::to_string(planted.num_clusters));
        kv.set("planted.interactions_per_user", std::to_string(planted.interactions_per_user));
        kv.set("planted.sign_noise", format_number(planted.sign_noise));
        kv.set("planted.own_cluster_share", format_number(planted.own_cluster_share));
        kv.set("spectrum.buckets", std::to_string(spectrum_buckets));
        kv.set("ablate.seeds", std::to_string(ablate_seeds));
        train.write(kv);
        return kv;
    }

    std::string resolved() const { return to_kv().serialize(); }
    std::string digest() const { return hex_digest(resolved()); }

    /// Defaults overlaid with `overrides`; any key the defaults lack is an error.
    static RunConfig from_kv(const KeyValues& overrides) {
        KeyValues kv = RunConfig{}.to_kv();
        for (const auto& [key, value] : overrides.entries()) {
            if (!kv.has(key)) throw InputError("unknown config key '" + key + "'");
            kv.set(key, value);
        }
        RunConfig c;
        c.seed = kv.get_uint("run.seed");
        c.input_format = kv.get("ingest.format");
        c.columns = RatingFormat::named(c.input_format);
        c.columns.user_column = static_cast<int>(kv.get_uint("ingest.user_column"));
        c.columns.item_column = static_cast<int>(kv.get_uint("ingest.item_column"));
        c.columns.rating_column = static_cast<int>(kv.get_uint("ingest.rating_column"));
        c.columns.timestamp_column = static_cast<int>(kv.get_uint("ingest.timestamp_column"));
        c.ingest.neg_threshold = kv.get_double("ingest.neg_threshold");
        c.ingest.pos_threshold = kv.get_double("ingest.pos_threshold");
        c.ingest.min_interactions = kv.get_uint("ingest.min_interactions");
        c.ingest.train_fraction = kv.get_double("ingest.train_fraction");
        c.ingest.validation_fraction = kv.get_double("ingest.validation_fraction");
        c.ingest.test_fraction = kv.get_double("ingest.test_fraction");
        c.mf.lr = kv.get_double("mf.lr");
        c.mf.l2_reg = kv.get_double("mf.l2_reg");
        c.mf.epochs = kv.get_uint("mf.epochs");
        c.planted.num_users = kv.get_uint("planted.num_users");
        c.planted.num_items = kv.get_uint("planted.num_items");
        c.planted.num_clusters = kv.get_uint("planted.num_clusters");
        c.planted.interactions_per_user = kv.get_uint("planted.interactions_per_user");
        c.planted.sign_noise = kv.get_double("planted.sign_noise");
        c.planted.own_cluster_share = kv.get_double("planted.own_cluster_share");
        c.spectrum_buckets = kv.get_uint("spectrum.buckets");
        c.ablate_seeds = kv.get_uint("ablate.seeds");

        auto& t = c.train;
        t.batch_size = kv.get_uint("train.batch_size");
        t.lr = kv.get_double("train.lr");
        t.patience = kv.get_uint("train.patience");
        t.max_epochs = kv.get_uint("train.max_epochs");
        t.task = parse_task(kv.get("train.task"));
        t.neg_sample_ratio = kv.get_uint("train.neg_sample_ratio");
        t.withhold_batch_edges = kv.get_bool("train.withhold_batch_edges");
        t.loss.tau = kv.get_double("loss.tau");
        t.loss.w = kv.get_double("loss.w");
        t.loss.normalize = kv.get_bool("loss.normalize");
        t.model = ModelConfig::read(kv);
        t.eval.num_candidates = kv.get_uint("eval.num_candidates");
        t.eval.all_items = kv.get_bool("eval.all_items");
        t.eval.f1_threshold = kv.get_double("eval.f1_threshold");

        c.propagate_seed();
        c.ingest.validate();
        c.planted.validate();
        c.train.validate();
        if (c.spectrum_buckets == 0) throw InputError("spectrum.buckets must be >= 1");
        if (c.ablate_seeds == 0) throw InputError("ablate.seeds must be >= 1");
        return c;
    }

    static RunConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot open config file '" + path + "'");
        return from_kv(KeyValues::parse(in));
    }
};

} // namespace dfgnn
