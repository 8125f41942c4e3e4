// dfgnn command-line driver.
//
//   dfgnn ingest    --input ratings.csv --out-dir data/
//   dfgnn spectrum  --data data/ --out-dir freq/
//   dfgnn train     --data data/ --out-dir run/ [--grad-check] [--lr-sweep] [--sgr-sweep]
//   dfgnn evaluate  --data data/ --checkpoint run/checkpoint.bin --out-dir eval/
//   dfgnn ablate    --data data/ --out-dir ablate/
//   dfgnn diagnose  --data data/ --checkpoint a.bin [--compare b.bin] --out-dir diag/
//
// Exit codes: 0 success, 1 input error, 2 empty result, 3 numeric failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dfgnn/analysis.hpp"
#include "dfgnn/evaluate.hpp"
#include "dfgnn/ingest.hpp"
#include "dfgnn/metrics.hpp"
#include "dfgnn/run_config.hpp"
#include "dfgnn/synthetic.hpp"
#include "dfgnn/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dfgnn;

namespace {

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    std::string variant;
    std::string task;
    std::vector<std::string> overrides;  // key=value
};

RunConfig resolve_config(const CommonOptions& o) {
    KeyValues kv;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw InputError("cannot open config file '" + o.config_path + "'");
        kv = KeyValues::parse(in);
    }
    for (const auto& s : o.overrides) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + s + "'");
        kv.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (o.seed) kv.set("run.seed", std::to_string(*o.seed));
    if (!o.variant.empty()) kv.set("model.variant", to_string(parse_variant(o.variant)));
    if (!o.task.empty()) kv.set("train.task", to_string(parse_task(o.task)));
    return RunConfig::from_kv(kv);
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write " + path.string());
    return os;
}

void write_json(const fs::path& path, const json& j) {
    auto os = open_out(path);
    os << j.dump(2) << '\n';
}

/// Resolved config next to the artifacts of a command.
void echo_config(const fs::path& dir, const RunConfig& cfg) {
    auto os = open_out(dir / "config.ini");
    os << cfg.resolved();
}

json config_json(const RunConfig& cfg) { return {{"resolved", cfg.resolved()}, {"digest", cfg.digest()}}; }

std::string csv_number(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

// ------------------------------------------------------------------ ingest

int cmd_ingest(const CommonOptions& o, const std::string& input, bool planted) {
    RunConfig cfg = resolve_config(o);
    DatasetSplit split;
    if (planted) {
        split = planted_split(cfg.planted, cfg.ingest);
    } else {
        if (input.empty()) throw InputError("ingest needs --input or --planted");
        std::ifstream in(input, std::ios::binary);
        if (!in) throw InputError("cannot open input '" + input + "'");
        split = ingest_records(parse_ratings(in, cfg.columns), cfg.ingest);
    }
    write_split(o.out_dir, split);
    echo_config(o.out_dir, cfg);
    const auto stats = dataset_stats(split);
    std::cout << "ingested " << stats.num_instances << " instances, " << stats.num_users << " users, " << stats.num_items
              << " items, negative rate " << stats.negative_rate << '\n';
    return 0;
}

// ------------------------------------------------------------------ spectrum

int cmd_spectrum(const CommonOptions& o, const std::string& data_dir) {
    RunConfig cfg = resolve_config(o);
    const auto split = read_split(data_dir);
    const auto g = build_graph(split.num_users(), split.num_items(), split.all_edges());
    const auto a = analyze_frequencies(g, cfg.mf, cfg.spectrum_buckets);
    const fs::path out = o.out_dir;
    {
        auto os = open_out(out / "frequency_histogram.csv");
        os << "bucket_low,bucket_high,mass_positive_graph,mass_negative_graph\n";
        const auto& hp = a.positive.histogram;
        const auto& hn = a.negative.histogram;
        for (std::size_t b = 0; b < hp.mass.size(); ++b)
            os << csv_number(hp.bucket_edges[b]) << ',' << csv_number(hp.bucket_edges[b + 1]) << ',' << csv_number(hp.mass[b])
               << ',' << csv_number(hn.mass[b]) << '\n';
    }
    {
        const int k = static_cast<int>(cfg.train.model.num_layers);
        auto os = open_out(out / "kernel_response.csv");
        os << "lambda,lgf_gain,hgf_gain\n";
        for (int i = 0; i <= 200; ++i) {
            const double lambda = i / 100.0;
            os << csv_number(lambda) << ',' << csv_number(lgf_kernel_response(lambda, k)) << ','
               << csv_number(hgf_kernel_response(lambda, k)) << '\n';
        }
    }
    auto side = [](const SubgraphSpectrum& s) {
        return json{{"mean_eigenvalue", s.mean_eigenvalue},
                    {"max_eigenvalue", s.max_eigenvalue},
                    {"empty_graph", s.empty_graph},
                    {"zero_signal", s.histogram.zero_signal}};
    };
    write_json(out / "spectrum.json", {{"positive_graph", side(a.positive)},
                                       {"negative_graph", side(a.negative)},
                                       {"mf_final_loss", a.mf.epoch_loss.empty() ? 0.0 : a.mf.epoch_loss.back()},
                                       {"config", config_json(cfg)}});
    echo_config(out, cfg);
    std::cout << "energy-weighted mean eigenvalue: positive " << a.positive.mean_eigenvalue << ", negative "
              << a.negative.mean_eigenvalue << '\n';
    return 0;
}

// ------------------------------------------------------------------ train

/// Gradient check on a small induced subgraph with a 4-dimensional model of
/// the configured variant and task.
GradCheckReport subgraph_grad_check(const DatasetSplit& split, const TrainConfig& tc) {
    const std::size_t nu = std::min<std::size_t>(6, split.num_users());
    const std::size_t ni = std::min<std::size_t>(6, split.num_items());
    std::vector<SignedEdge> edges;
    for (const auto& e : split.train)
        if (e.user < nu && e.item < ni) edges.push_back(e);
    if (edges.empty()) edges.push_back({0, 0, Sign::positive});
    const auto g = build_graph(nu, ni, edges);
    ModelConfig mc = tc.model;
    mc.embed_dim = 4;
    const auto model = with_random_biases(init_model(mc, nu, ni), derive_seed(tc.seed, 0x6B));
    const auto ops = build_operators(g, mc.variant);
    Rng rng(derive_seed(tc.seed, 0x6C));
    const auto batch = make_batch(edges, tc.task, make_train_index(nu, ni, edges), tc.neg_sample_ratio, rng);
    return grad_check(model, ops, batch, tc.loss);
}

struct TrainOutcome {
    FitResult fit;
    EvalReport validation;
};

TrainOutcome train_once(const RunConfig& cfg, const DatasetSplit& split, const TrainConfig& tc,
                        const std::function<void(const HistoryEntry&)>& on_epoch = {}) {
    const auto ops = build_operators(split.train_graph(), tc.model.variant);
    const auto model = init_model(tc.model, split.num_users(), split.num_items());
    KeyValues extra = cfg.to_kv();
    TrainOutcome out;
    out.fit = fit(model, ops, split, tc, extra, on_epoch);
    const Matrix reps = forward(out.fit.best.model, ops).output;
    if (tc.task == Task::ranking) {
        EvalProtocol p = tc.eval;
        out.validation = evaluate_ranking(reps, split.num_users(), build_ranking_queries(split, split.validation, p));
    } else {
        out.validation = evaluate_feedback(reps, split.num_users(), split.validation, tc.eval.f1_threshold);
    }
    out.validation.seed = cfg.seed;
    out.validation.config_digest = cfg.digest();
    return out;
}

int cmd_train(const CommonOptions& o, const std::string& data_dir, bool grad_check_first, bool lr_sweep, bool sgr_sweep,
              bool omit_timing) {
    RunConfig cfg = resolve_config(o);
    const auto split = read_split(data_dir);
    const fs::path out = o.out_dir;
    if (grad_check_first) {
        const auto report = subgraph_grad_check(split, cfg.train);
        for (const auto& e : report.entries) std::cout << "grad-check " << e.parameter << " max_rel_error " << e.max_rel_error << '\n';
        if (!report.pass()) {
            std::string names;
            for (const auto& f : report.failures()) names += " " + f;
            throw NumericError("gradient check failed for:" + names);
        }
    }

    struct Setting {
        double lr, tau, w;
    };
    std::vector<Setting> grid;
    for (double lr : lr_sweep ? learning_rate_grid() : std::vector<double>{cfg.train.lr})
        for (double tau : sgr_sweep ? sgr_tau_grid() : std::vector<double>{cfg.train.loss.tau})
            for (double w : sgr_sweep ? sgr_weight_grid() : std::vector<double>{cfg.train.loss.w}) grid.push_back({lr, tau, w});
    std::optional<TrainOutcome> best;
    Setting chosen = grid.front();
    json sweep = json::array();
    for (const auto& st : grid) {
        TrainConfig tc = cfg.train;
        tc.lr = st.lr;
        tc.loss.tau = st.tau;
        tc.loss.w = st.w;
        auto outcome = train_once(cfg, split, tc);
        sweep.push_back({{"lr", st.lr}, {"tau", st.tau}, {"w", st.w}, {"best_epoch", outcome.fit.best.epoch},
                         {"val_metric", outcome.fit.best.best_metric}});
        if (grid.size() > 1)
            std::cout << "lr " << st.lr << " tau " << st.tau << " w " << st.w << " best val " << outcome.fit.best.best_metric << '\n';
        if (!best || outcome.fit.best.best_metric > best->fit.best.best_metric) {
            best = std::move(outcome);
            chosen = st;
        }
    }
    if (grid.size() > 1) {
        cfg.train.lr = chosen.lr;
        cfg.train.loss.tau = chosen.tau;
        cfg.train.loss.w = chosen.w;
        auto os = open_out(out / "sweep.csv");
        os << "lr,tau,w,best_epoch,val_metric\n";
        for (const auto& r : sweep)
            os << csv_number(r["lr"].get<double>()) << ',' << csv_number(r["tau"].get<double>()) << ','
               << csv_number(r["w"].get<double>()) << ',' << r["best_epoch"].get<std::uint64_t>() << ','
               << csv_number(r["val_metric"].get<double>()) << '\n';
    }
    {
        auto os = open_out(out / "checkpoint.bin");
        save_checkpoint(best->fit.best, os);
    }
    {
        auto os = open_out(out / "history.jsonl");
        for (const auto& h : best->fit.history) os << to_json(h, !omit_timing).dump() << '\n';
    }
    json report = to_json(best->validation);
    report["split"] = "validation";
    report["best_epoch"] = best->fit.best.epoch;
    report["early_stopped"] = best->fit.early_stopped;
    report["config"] = config_json(cfg);
    write_json(out / "validation_report.json", report);
    echo_config(out, cfg);
    std::cout << "best epoch " << best->fit.best.epoch << ", validation " << (cfg.train.task == Task::ranking ? "MRR " : "AUC ")
              << best->fit.best.best_metric << '\n';
    return 0;
}

// ------------------------------------------------------------------ evaluate

struct LoadedCheckpoint {
    Checkpoint ckpt;
    KeyValues config;
};

LoadedCheckpoint load_checkpoint_file(const std::string& path, const DatasetSplit& split) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint '" + path + "'");
    LoadedCheckpoint lc{load_checkpoint(in), {}};
    lc.config = KeyValues::parse(lc.ckpt.config_text);
    if (lc.ckpt.model.num_users != split.num_users() || lc.ckpt.model.num_items != split.num_items())
        throw InputError("checkpoint was trained on " + std::to_string(lc.ckpt.model.num_users) + " users / " +
                         std::to_string(lc.ckpt.model.num_items) + " items but the split has " +
                         std::to_string(split.num_users()) + " / " + std::to_string(split.num_items()));
    return lc;
}

int cmd_evaluate(const CommonOptions& o, const std::string& data_dir, const std::string& checkpoint, const std::string& which) {
    RunConfig cfg = resolve_config(o);
    const auto split = read_split(data_dir);
    const auto lc = load_checkpoint_file(checkpoint, split);
    const Variant variant = lc.ckpt.model.config.variant;
    const Task task = o.task.empty() && lc.config.has("train.task") ? parse_task(lc.config.get("train.task")) : cfg.train.task;
    const auto ops = build_operators(split.train_graph(), variant);
    const Matrix reps = forward(lc.ckpt.model, ops).output;
    const std::vector<SignedEdge>* edges = nullptr;
    if (which == "test") edges = &split.test;
    else if (which == "validation") edges = &split.validation;
    else throw InputError("--split must be test or validation");
    EvalReport r;
    if (task == Task::ranking) {
        r = evaluate_ranking(reps, split.num_users(), build_ranking_queries(split, *edges, cfg.train.eval));
    } else {
        r = evaluate_feedback(reps, split.num_users(), *edges, cfg.train.eval.f1_threshold);
    }
    r.seed = cfg.seed;
    r.config_digest = cfg.digest();
    json j = to_json(r);
    j["split"] = which;
    j["variant"] = to_string(variant);
    j["checkpoint"] = checkpoint;
    j["checkpoint_config_digest"] = hex_digest(lc.ckpt.config_text);
    j["config"] = config_json(cfg);
    write_json(fs::path(o.out_dir) / "eval_report.json", j);
    echo_config(o.out_dir, cfg);
    for (const auto& [name, value] : r.metrics) std::cout << name << ' ' << value << '\n';
    return 0;
}

// ------------------------------------------------------------------ ablate

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

int cmd_ablate(const CommonOptions& o, const std::string& data_dir) {
    RunConfig cfg = resolve_config(o);
    const auto split = read_split(data_dir);
    const std::vector<Variant> variants{Variant::basic, Variant::basic_lgf, Variant::basic_dgf, Variant::dfgnn};
    std::vector<Task> tasks{Task::feedback_type, Task::ranking};
    if (!o.task.empty()) tasks = {parse_task(o.task)};

    // results[variant][metric] = per-seed values
    std::map<std::string, std::map<std::string, std::vector<double>>> results;
    std::vector<std::string> metric_order;
    json runs = json::array();
    for (std::size_t s = 0; s < cfg.ablate_seeds; ++s) {
        const std::uint64_t seed = cfg.seed + s;
        for (auto task : tasks) {
            for (auto variant : variants) {
                TrainConfig tc = cfg.train;
                tc.task = task;
                tc.seed = seed;
                tc.model.seed = seed;
                tc.eval.seed = seed;
                tc.model.variant = variant;
                const auto ops = build_operators(split.train_graph(), variant);
                const auto fitted = fit(init_model(tc.model, split.num_users(), split.num_items()), ops, split, tc);
                const Matrix reps = forward(fitted.best.model, ops).output;
                const auto report = task == Task::ranking
                                        ? evaluate_ranking(reps, split.num_users(), build_ranking_queries(split, split.test, tc.eval))
                                        : evaluate_feedback(reps, split.num_users(), split.test, tc.eval.f1_threshold);
                json run{{"variant", to_string(variant)}, {"task", to_string(task)}, {"seed", seed}, {"best_epoch", fitted.best.epoch}};
                for (const auto& [name, value] : report.metrics) {
                    if (std::find(metric_order.begin(), metric_order.end(), name) == metric_order.end()) metric_order.push_back(name);
                    results[to_string(variant)][name].push_back(value);
                    run["metrics"][name] = value;
                }
                runs.push_back(run);
                std::cout << "seed " << seed << ' ' << to_string(task) << ' ' << to_string(variant) << " done\n";
            }
        }
    }
    const fs::path out = o.out_dir;
    json table = json::array();
    {
        auto os = open_out(out / "ablation.csv");
        os << "variant";
        for (const auto& m : metric_order) os << ',' << m << "_mean," << m << "_std";
        os << '\n';
        for (auto variant : variants) {
            const auto& per = results[to_string(variant)];
            os << to_string(variant);
            json row{{"variant", to_string(variant)}};
            for (const auto& m : metric_order) {
                const auto& v = per.at(m);
                os << ',' << csv_number(mean_of(v)) << ',' << csv_number(std_of(v));
                row[m] = {{"mean", mean_of(v)}, {"std", std_of(v)}};
            }
            os << '\n';
            table.push_back(row);
        }
    }
    write_json(out / "ablation.json", {{"table", table}, {"runs", runs}, {"seeds", cfg.ablate_seeds}, {"config", config_json(cfg)}});
    echo_config(out, cfg);
    return 0;
}

// ------------------------------------------------------------------ diagnose

Matrix diagnostic_matrix(const LoadedCheckpoint& lc, const DatasetSplit& split, const std::string& representation) {
    if (representation == "embedding") return lc.ckpt.model.embedding;
    if (representation == "encoded") {
        const auto ops = build_operators(split.train_graph(), lc.ckpt.model.config.variant);
        return forward(lc.ckpt.model, ops).output;
    }
    throw InputError("--representation must be embedding or encoded");
}

json diagnose_one(const Matrix& emb, std::size_t num_users, const fs::path& out, const std::string& tag, std::uint64_t seed) {
    const auto spectrum = singular_spectrum(emb);
    {
        auto os = open_out(out / ("singular_spectrum" + tag + ".csv"));
        os << "sigma_index,sigma_ratio\n";
        for (std::size_t i = 0; i < spectrum.size(); ++i) os << i + 1 << ',' << csv_number(spectrum[i]) << '\n';
    }
    {
        const Matrix xy = project_2d(emb);
        auto os = open_out(out / ("projection" + tag + ".csv"));
        os << "node_id,x,y,node_type\n";
        for (Eigen::Index i = 0; i < xy.rows(); ++i)
            os << i << ',' << csv_number(xy(i, 0)) << ',' << csv_number(xy(i, 1)) << ','
               << (static_cast<std::size_t>(i) < num_users ? "user" : "item") << '\n';
    }
    const double u = uniformity(emb, seed);
    json j{{"uniformity", u}, {"sigma_ratios", spectrum}};
    if (spectrum.size() >= 10) j["sigma10_over_sigma1"] = spectrum[9];
    return j;
}

int cmd_diagnose(const CommonOptions& o, const std::string& data_dir, const std::string& checkpoint, const std::string& compare,
                 const std::string& representation) {
    RunConfig cfg = resolve_config(o);
    if (checkpoint.empty()) throw InputError("diagnose needs --checkpoint");
    const auto split = read_split(data_dir);
    const fs::path out = o.out_dir;
    json report{{"representation", representation}, {"config", config_json(cfg)}};
    const auto a = load_checkpoint_file(checkpoint, split);
    if (compare.empty()) {
        report["checkpoint"] = checkpoint;
        report["diagnostics"] = diagnose_one(diagnostic_matrix(a, split, representation), split.num_users(), out, "", cfg.seed);
        std::cout << "uniformity " << report["diagnostics"]["uniformity"].get<double>() << '\n';
    } else {
        const auto b = load_checkpoint_file(compare, split);
        const auto da = diagnose_one(diagnostic_matrix(a, split, representation), split.num_users(), out, "_a", cfg.seed);
        const auto db = diagnose_one(diagnostic_matrix(b, split, representation), split.num_users(), out, "_b", cfg.seed);
        report["a"] = {{"checkpoint", checkpoint}, {"diagnostics", da}};
        report["b"] = {{"checkpoint", compare}, {"diagnostics", db}};
        {
            const auto sa = da["sigma_ratios"].get<std::vector<double>>();
            const auto sb = db["sigma_ratios"].get<std::vector<double>>();
            auto os = open_out(out / "singular_spectrum_compare.csv");
            os << "sigma_index,sigma_ratio_a,sigma_ratio_b\n";
            for (std::size_t i = 0; i < std::max(sa.size(), sb.size()); ++i)
                os << i + 1 << ',' << (i < sa.size() ? csv_number(sa[i]) : "") << ',' << (i < sb.size() ? csv_number(sb[i]) : "") << '\n';
        }
        std::cout << "uniformity a " << da["uniformity"].get<double>() << ", b " << db["uniformity"].get<double>() << '\n';
    }
    write_json(out / "diagnostics.json", report);
    echo_config(out, cfg);
    return 0;
}

void add_common(CLI::App* sub, CommonOptions& o) {
    sub->add_option("--config", o.config_path, "Key-value config file");
    sub->add_option("--seed", o.seed, "Run seed");
    sub->add_option("--out-dir", o.out_dir, "Output directory");
    sub->add_option("--variant", o.variant, "Basic, Basic+LGF, Basic+DGF or DFGNN");
    sub->add_option("--task", o.task, "ranking or feedback_type");
    sub->add_option("--set", o.overrides, "Override a config key (section.key=value)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-frequency graph filtering for signed recommendation data"};
    app.require_subcommand(1);
    CommonOptions common;
    std::string input, data_dir, checkpoint, compare, split_name = "test", representation = "encoded";
    bool planted = false, grad_check_first = false, lr_sweep = false, sgr_sweep = false, omit_timing = false;

    auto* ingest = app.add_subcommand("ingest", "Parse, sign, filter and split a rating file");
    add_common(ingest, common);
    ingest->add_option("--input", input, "Rating file (csv, tsv or dat)");
    ingest->add_flag("--planted", planted, "Generate planted two-cluster data instead of reading --input");

    auto* spectrum = app.add_subcommand("spectrum", "Frequency histograms of the positive and negative subgraphs");
    add_common(spectrum, common);
    spectrum->add_option("--data", data_dir, "Ingested split directory")->required();

    auto* train = app.add_subcommand("train", "Fit a model and write the best checkpoint");
    add_common(train, common);
    train->add_option("--data", data_dir, "Ingested split directory")->required();
    train->add_flag("--grad-check", grad_check_first, "Check gradients on a small subgraph first");
    train->add_flag("--lr-sweep", lr_sweep, "Select the learning rate from the grid by validation metric");
    train->add_flag("--sgr-sweep", sgr_sweep, "Select loss.tau and loss.w from their grids by validation metric");
    train->add_flag("--omit-timing", omit_timing, "Leave elapsed_ms out of history.jsonl");

    auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a held-out split");
    add_common(evaluate, common);
    evaluate->add_option("--data", data_dir, "Ingested split directory")->required();
    evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    evaluate->add_option("--split", split_name, "test or validation");

    auto* ablate = app.add_subcommand("ablate", "Train all four variants over several seeds");
    add_common(ablate, common);
    ablate->add_option("--data", data_dir, "Ingested split directory")->required();

    auto* diagnose = app.add_subcommand("diagnose", "Singular spectrum, 2-D projection and uniformity");
    add_common(diagnose, common);
    diagnose->add_option("--data", data_dir, "Ingested split directory")->required();
    diagnose->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    diagnose->add_option("--compare", compare, "Second checkpoint for side-by-side output");
    diagnose->add_option("--representation", representation, "embedding (layer 0) or encoded (final layer)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*ingest) return cmd_ingest(common, input, planted);
        if (*spectrum) return cmd_spectrum(common, data_dir);
        if (*train) return cmd_train(common, data_dir, grad_check_first, lr_sweep, sgr_sweep, omit_timing);
        if (*evaluate) return cmd_evaluate(common, data_dir, checkpoint, split_name);
        if (*ablate) return cmd_ablate(common, data_dir);
        if (*diagnose) return cmd_diagnose(common, data_dir, checkpoint, compare, representation);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const EmptyResultError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
