// Command-line front end: synthetic data generation, training, evaluation,
// routing, and the sweep/noise/tsweep experiments. Every command is
// deterministic given explicit seeds.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lineage/baselines.hpp"
#include "lineage/checkpoint.hpp"
#include "lineage/dataset.hpp"
#include "lineage/graph.hpp"
#include "lineage/io.hpp"
#include "lineage/lrmf.hpp"
#include "lineage/metrics.hpp"
#include "lineage/routing.hpp"
#include "lineage/synthgen.hpp"

namespace {

using namespace lineage;

// ----------------------------------------------------------------------------
// Config file support: flags > --config JSON file > built-in defaults.
// Keys are long option names without the leading dashes; values are appended
// to argv for options not given explicitly.
// ----------------------------------------------------------------------------
std::vector<std::string> expand_config_args(int argc, char** argv) {
    std::vector<std::string> args;
    std::string config_path;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" && i + 1 < argc) {
            config_path = argv[++i];
        } else if (a.rfind("--config=", 0) == 0) {
            config_path = a.substr(9);
        } else {
            args.push_back(a);
        }
    }
    if (config_path.empty()) return args;

    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config file '" + config_path + "'");
    nlohmann::json cfg;
    in >> cfg;
    if (!cfg.is_object()) throw std::runtime_error("config file must hold a JSON object");

    auto given = [&](const std::string& key) {
        const std::string flag = "--" + key;
        for (const auto& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
        return false;
    };
    for (const auto& [key, value] : cfg.items()) {
        if (given(key)) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back("--" + key);
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& v : value) {
                if (!joined.empty()) joined += ",";
                joined += v.is_string() ? v.get<std::string>() : v.dump();
            }
            args.push_back("--" + key + "=" + joined);
        } else if (value.is_string()) {
            args.push_back("--" + key + "=" + value.get<std::string>());
        } else {
            args.push_back("--" + key + "=" + value.dump());
        }
    }
    return args;
}

std::size_t worker_cap() {
    std::size_t cap = std::thread::hardware_concurrency();
    if (cap == 0) cap = 1;
    if (const char* env = std::getenv("LINEAGE_PREDICT_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1 && static_cast<std::size_t>(v) < cap) cap = static_cast<std::size_t>(v);
    }
    return cap;
}

// ----------------------------------------------------------------------------
// Shared option bundles
// ----------------------------------------------------------------------------
struct DataOpts {
    std::string models;
    std::string instances;
    std::string observations;

    void add_to(CLI::App* app) {
        app->add_option("--models", models, "models.jsonl path")->required();
        app->add_option("--instances", instances, "instances.jsonl path")->required();
        app->add_option("--observations", observations, "observations.jsonl path")->required();
    }

    ObservationSet load() const { return load_dataset(models, instances, observations); }
};

struct SplitOpts {
    double train_frac = 0.7;
    double dev_frac = 0.15;
    double test_frac = 0.15;
    std::uint64_t seed = 0;

    void add_to(CLI::App* app) {
        app->add_option("--train-frac", train_frac, "train split fraction");
        app->add_option("--dev-frac", dev_frac, "dev split fraction");
        app->add_option("--test-frac", test_frac, "test split fraction");
        app->add_option("--split-seed", seed, "seed for the model split");
    }

    ObservationSet apply(const ObservationSet& set) const {
        return split_models(set, train_frac, dev_frac, test_frac, seed);
    }
};

struct TrainOpts {
    TrainConfig cfg;
    std::size_t knn_k = 20;
    bool instance_graph_train_only = false;
    std::string coldstart = "joint";
    std::size_t embedding_dim = 8;   // ncf
    std::size_t hidden_units = 128;  // ncf

    void add_to(CLI::App* app) {
        app->add_option("--latent-dim", cfg.latent_dim, "embedding dimension");
        app->add_option("--lambda-l2", cfg.lambda_l2, "L2 penalty");
        app->add_option("--lambda-model", cfg.lambda_model, "model lineage penalty");
        app->add_option("--lambda-instance", cfg.lambda_instance, "instance similarity penalty");
        app->add_option("--learning-rate", cfg.learning_rate, "Adam learning rate");
        app->add_option("--max-epochs", cfg.max_epochs, "epoch cap");
        app->add_option("--patience", cfg.patience, "early stopping patience");
        app->add_option("--seed", cfg.seed, "training seed");
        app->add_option("--minibatch", cfg.minibatch_size, "minibatch size (0 = full batch)");
        app->add_flag("--include-dev-in-loss", cfg.include_dev_in_loss,
                      "include dev observations in the BCE loss");
        app->add_option("--coldstart", coldstart, "cold-start mode: joint or closed-form")
            ->check(CLI::IsMember({"joint", "closed-form"}));
        app->add_option("--k", knn_k, "instance kNN neighbor count");
        app->add_flag("--instance-graph-train-only", instance_graph_train_only,
                      "restrict instance-graph edges to train-observed instances");
        app->add_option("--embedding-dim", embedding_dim, "factor embedding dim (ncf)");
        app->add_option("--hidden-units", hidden_units, "MLP hidden width (ncf)");
    }

    TrainConfig config() const {
        TrainConfig c = cfg;
        c.coldstart_mode = coldstart_mode_from_string(coldstart);
        return c;
    }
};

Laplacian empty_laplacian(std::size_t n_nodes, const ObservationSet& obs, bool instances) {
    Graph g;
    g.node_ids.reserve(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i)
        g.node_ids.push_back(instances ? obs.instances[i].instance_id : obs.models[i].model_id);
    return laplacian(g);
}

Laplacian build_instance_laplacian(const ObservationSet& obs, const TrainOpts& topt,
                                   double lambda_instance) {
    if (lambda_instance <= 0.0) return empty_laplacian(obs.n_instances(), obs, true);
    std::vector<bool> active;
    const std::vector<bool>* active_ptr = nullptr;
    if (topt.instance_graph_train_only) {
        active.assign(obs.n_instances(), false);
        for (const auto& t : obs.triples)
            if (obs.split[t.model] == Split::train) active[t.instance] = true;
        active_ptr = &active;
    }
    return laplacian(build_instance_knn_graph(obs.instances, topt.knn_k, active_ptr));
}

void write_train_log_csv(const std::string& path, const std::vector<TrainLogEntry>& log) {
    std::string out = "epoch,train_loss,dev_metric\n";
    for (std::size_t e = 0; e < log.size(); ++e)
        out += std::to_string(e + 1) + "," + fmt_g(log[e].train_loss) + "," +
               fmt_g(log[e].dev_metric) + "\n";
    write_file(path, out);
}

Predictor make_oracle_predictor(const ObservationSet& obs) {
    auto table = std::make_shared<std::unordered_map<std::uint64_t, double>>();
    for (const auto& t : obs.triples)
        table->emplace((static_cast<std::uint64_t>(t.model) << 32) | t.instance, t.score);
    return [table](std::size_t u, std::size_t i) {
        auto it = table->find((static_cast<std::uint64_t>(u) << 32) | i);
        return it == table->end() ? 0.5 : it->second;
    };
}

void check_meta_matches(const CheckpointMeta& meta, const ObservationSet& obs,
                        const std::string& path) {
    if (meta.model_ids.size() != obs.n_models() || meta.instance_ids.size() != obs.n_instances())
        throw std::runtime_error("checkpoint '" + path + "' does not match the dataset");
    for (std::size_t u = 0; u < obs.n_models(); ++u)
        if (meta.model_ids[u] != obs.models[u].model_id)
            throw std::runtime_error("checkpoint '" + path + "' model order mismatch at index " +
                                     std::to_string(u));
    for (std::size_t i = 0; i < obs.n_instances(); ++i)
        if (meta.instance_ids[i] != obs.instances[i].instance_id)
            throw std::runtime_error("checkpoint '" + path + "' instance order mismatch at index " +
                                     std::to_string(i));
}

// Loads any checkpoint kind and returns a predictor over dataset indices,
// applying the stored split to `obs`.
struct LoadedPredictor {
    std::string kind;
    Predictor predict;
    std::shared_ptr<void> keepalive;
};

LoadedPredictor load_predictor(const std::string& path, ObservationSet& obs) {
    const std::string kind = peek_checkpoint_kind(path);
    LoadedPredictor out;
    out.kind = kind;
    if (kind == "lrmf") {
        const LoadedLrmf loaded = load_lrmf_checkpoint(path);
        check_meta_matches(loaded.meta, obs, path);
        obs.split = loaded.meta.split;
        const Laplacian lap = laplacian(build_lineage_graph(obs.models));
        out.predict = make_lrmf_predictor(loaded.model, obs, lap);
    } else if (kind == "irt") {
        auto loaded = std::make_shared<LoadedIrt>(load_irt_checkpoint(path));
        check_meta_matches(loaded->meta, obs, path);
        obs.split = loaded->meta.split;
        out.predict = [loaded](std::size_t u, std::size_t i) { return loaded->model.predict(u, i); };
        out.keepalive = loaded;
    } else if (kind == "ncf") {
        auto loaded = std::make_shared<LoadedNcf>(load_ncf_checkpoint(path));
        check_meta_matches(loaded->meta, obs, path);
        obs.split = loaded->meta.split;
        auto feats = std::make_shared<NcfFeatures>(build_ncf_features(loaded->model, obs));
        out.predict = [loaded, feats](std::size_t u, std::size_t i) {
            return ncf_predict(loaded->model, *feats, u, i);
        };
        out.keepalive = std::make_shared<std::pair<decltype(loaded), decltype(feats)>>(loaded, feats);
    } else {
        throw std::runtime_error("unknown checkpoint kind '" + kind + "'");
    }
    return out;
}

// Trains one method name on an already-split dataset; used by the sweep-style
// experiment commands. Returns a predictor for evaluation on held-out splits.
struct TrainedPredictor {
    Predictor predict;
    std::shared_ptr<void> keepalive;
};

TrainedPredictor train_method(const std::string& method, const ObservationSet& obs,
                              const Laplacian& lap_m, const Laplacian& lap_x,
                              const TrainOpts& topt) {
    TrainedPredictor out;
    if (method == "lrmf" || method == "mf") {
        TrainConfig cfg = topt.config();
        if (method == "mf") {
            cfg.lambda_model = 0.0;
            cfg.lambda_instance = 0.0;
        }
        const LrmfModel model = train(obs, lap_m, lap_x, cfg);
        out.predict = make_lrmf_predictor(model, obs, lap_m);
    } else if (method == "irt") {
        auto model = std::make_shared<IrtModel>(irt_train(obs, topt.config()));
        out.predict = [model](std::size_t u, std::size_t i) { return model->predict(u, i); };
        out.keepalive = model;
    } else if (method == "ncf") {
        NcfConfig cfg{topt.config(), topt.embedding_dim, topt.hidden_units};
        auto model = std::make_shared<NcfModel>(ncf_train(obs, cfg));
        auto feats = std::make_shared<NcfFeatures>(build_ncf_features(*model, obs));
        out.predict = [model, feats](std::size_t u, std::size_t i) {
            return ncf_predict(*model, *feats, u, i);
        };
        out.keepalive = std::make_shared<std::pair<decltype(model), decltype(feats)>>(model, feats);
    } else if (method == "mla") {
        auto model = std::make_shared<MlaModel>(obs, lap_m.graph);
        out.predict = [model](std::size_t u, std::size_t i) {
            return model->predict_or_default(u, i);
        };
        out.keepalive = model;
    } else {
        throw std::runtime_error("unknown method '" + method + "'");
    }
    return out;
}

// ----------------------------------------------------------------------------
// Subcommands
// ----------------------------------------------------------------------------
int cmd_gen(const SynthConfig& cfg, const std::string& out_dir, bool export_lineage) {
    const SynthData data = generate(cfg);
    write_synth_files(data, out_dir);
    if (export_lineage)
        write_graph_csv(build_lineage_graph(data.observations.models),
                        (std::filesystem::path(out_dir) / "lineage.csv").string());
    std::cout << "generated " << data.observations.n_models() << " models, "
              << data.observations.n_instances() << " instances, "
              << data.observations.observations.size() << " observations\n"
              << "wrote models.jsonl instances.jsonl observations.jsonl ground_truth.json to "
              << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& method, const DataOpts& data, const SplitOpts& split,
              const TrainOpts& topt, const std::string& out_path, const std::string& log_path) {
    ObservationSet obs = split.apply(data.load());
    if (method == "lrmf" || method == "mf") {
        TrainConfig cfg = topt.config();
        if (method == "mf") {
            cfg.lambda_model = 0.0;
            cfg.lambda_instance = 0.0;
        }
        const Laplacian lap_m = laplacian(build_lineage_graph(obs.models));
        const Laplacian lap_x = build_instance_laplacian(obs, topt, cfg.lambda_instance);
        const LrmfModel model = train(obs, lap_m, lap_x, cfg);
        save_lrmf_checkpoint(out_path, model, obs);
        if (!log_path.empty()) write_train_log_csv(log_path, model.training_log);
        std::cout << "trained " << method << ": " << model.training_log.size() << " epochs, best "
                  << model.best_epoch << ", dev metric "
                  << fmt_g(model.training_log.empty()
                               ? 0.0
                               : model.training_log[model.best_epoch - 1].dev_metric)
                  << "\n";
    } else if (method == "irt") {
        const IrtModel model = irt_train(obs, topt.config());
        save_irt_checkpoint(out_path, model, obs);
        if (!log_path.empty()) write_train_log_csv(log_path, model.training_log);
        std::cout << "trained irt: " << model.training_log.size() << " epochs, best "
                  << model.best_epoch << "\n";
    } else if (method == "ncf") {
        NcfConfig cfg{topt.config(), topt.embedding_dim, topt.hidden_units};
        const NcfModel model = ncf_train(obs, cfg);
        save_ncf_checkpoint(out_path, model, obs);
        if (!log_path.empty()) write_train_log_csv(log_path, model.training_log);
        std::cout << "trained ncf: " << model.training_log.size() << " epochs, best "
                  << model.best_epoch << "\n";
    } else {
        throw std::runtime_error("unknown method '" + method + "'");
    }
    std::cout << "checkpoint written to " << out_path << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& method, const DataOpts& data,
             const SplitOpts& split, std::size_t hops, const std::string& split_name,
             const std::string& label, const std::string& out_json, const std::string& out_csv) {
    ObservationSet obs = data.load();
    Predictor predict;
    std::shared_ptr<void> keepalive;
    std::string method_label = label;
    if (!checkpoint.empty()) {
        LoadedPredictor loaded = load_predictor(checkpoint, obs);
        predict = loaded.predict;
        keepalive = loaded.keepalive;
        if (method_label.empty()) method_label = loaded.kind;
    } else {
        obs = split.apply(obs);
        if (method == "mla") {
            auto model = std::make_shared<MlaModel>(obs, build_lineage_graph(obs.models), hops);
            predict = [model](std::size_t u, std::size_t i) {
                return model->predict_or_default(u, i);
            };
            keepalive = model;
        } else if (method == "oracle") {
            predict = make_oracle_predictor(obs);
        } else if (method == "constant") {
            predict = [](std::size_t, std::size_t) { return 0.5; };
        } else {
            throw std::runtime_error("--method must be mla, oracle, or constant (or use --checkpoint)");
        }
        if (method_label.empty()) method_label = method;
    }
    const EvalReport report = evaluate(predict, obs, split_from_string(split_name), method_label);
    if (!out_json.empty()) write_file(out_json, eval_report_to_json(report).dump(2) + "\n");
    if (!out_csv.empty()) write_file(out_csv, eval_report_to_csv(report));
    std::cout << "eval " << method_label << " on " << split_name << ": auc "
              << (report.overall.auc ? fmt_g(*report.overall.auc) : "nan") << ", pearson "
              << (report.overall.pearson ? fmt_g(*report.overall.pearson) : "nan") << " ("
              << report.overall.n_pairs << " pairs, " << report.overall.n_models << " models)\n";
    return 0;
}

int cmd_route(const DataOpts& data, const SplitOpts& split, const std::vector<std::string>& checkpoints,
              const std::vector<std::string>& methods, std::uint64_t seed, bool best_global,
              const std::string& pool, const std::string& scores_csv,
              const std::string& assignments_csv) {
    ObservationSet obs = data.load();
    std::vector<std::pair<std::string, Predictor>> predictors;
    std::vector<std::shared_ptr<void>> keepalive;
    bool split_applied = false;
    std::map<std::string, int> kind_counts;
    for (const auto& path : checkpoints) {
        LoadedPredictor loaded = load_predictor(path, obs);  // applies stored split
        split_applied = true;
        std::string name = loaded.kind;
        if (++kind_counts[name] > 1) name += "_" + std::to_string(kind_counts[name]);
        predictors.emplace_back(name, loaded.predict);
        keepalive.push_back(loaded.keepalive);
    }
    if (!split_applied) obs = split.apply(obs);

    std::vector<std::size_t> candidates;
    if (pool == "test") {
        candidates = obs.models_in_split(Split::test);
    } else if (pool == "all") {
        candidates.resize(obs.n_models());
        for (std::size_t u = 0; u < candidates.size(); ++u) candidates[u] = u;
    } else {
        throw std::runtime_error("--pool must be test or all");
    }
    std::vector<std::size_t> instance_idx(obs.n_instances());
    for (std::size_t i = 0; i < instance_idx.size(); ++i) instance_idx[i] = i;

    std::vector<RoutingResult> results;
    for (const auto& [name, predict] : predictors)
        results.push_back(route(predict, obs, candidates, instance_idx, name));
    for (const auto& m : methods) {
        if (m == "mla") {
            MlaModel model(obs, build_lineage_graph(obs.models));
            results.push_back(route(
                [&](std::size_t u, std::size_t i) { return model.predict_or_default(u, i); }, obs,
                candidates, instance_idx, "mla"));
        } else if (m == "random") {
            results.push_back(random_routing(obs, candidates, instance_idx, seed));
        } else if (m == "best") {
            results.push_back(best_model_baseline(obs, candidates, instance_idx, !best_global));
        } else if (m == "oracle") {
            results.push_back(route(make_oracle_predictor(obs), obs, candidates, instance_idx,
                                    "oracle"));
        } else {
            throw std::runtime_error("unknown routing method '" + m + "'");
        }
    }
    write_file(scores_csv, routing_scores_csv(results));
    write_file(assignments_csv, routing_assignments_csv(results));
    for (const auto& r : results)
        std::cout << "route " << r.strategy << ": realized " << fmt_g(r.overall_score) << " over "
                  << r.n_instances << " instances\n";
    return 0;
}

int cmd_sweep(const DataOpts& data, const SplitOpts& split, const TrainOpts& topt,
              const std::vector<double>& grid_model, const std::vector<double>& grid_instance,
              const std::string& out_path) {
    const ObservationSet base = split.apply(data.load());
    const Laplacian lap_m = laplacian(build_lineage_graph(base.models));
    bool any_instance_penalty = false;
    for (double lx : grid_instance) any_instance_penalty |= lx > 0.0;
    const Laplacian lap_x_real =
        build_instance_laplacian(base, topt, any_instance_penalty ? 1.0 : 0.0);
    const Laplacian lap_x_empty = empty_laplacian(base.n_instances(), base, true);

    struct Cell {
        double lm = 0.0, lx = 0.0;
        std::string line;
        bool done = false;
    };
    std::vector<Cell> cells;
    for (double lm : grid_model)
        for (double lx : grid_instance) cells.push_back({lm, lx, "", false});

    // Resume: keep raw lines of completed cells, keyed by the lambda columns.
    std::map<std::string, std::string> completed;
    if (std::filesystem::exists(out_path)) {
        std::istringstream in(read_file(out_path));
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (first || line.empty()) {
                first = false;
                continue;
            }
            const auto c1 = line.find(',');
            const auto c2 = line.find(',', c1 + 1);
            if (c1 == std::string::npos || c2 == std::string::npos) continue;
            completed[line.substr(0, c2)] = line;
        }
    }
    std::size_t todo = 0;
    for (auto& cell : cells) {
        const std::string key = fmt_g(cell.lm) + "," + fmt_g(cell.lx);
        auto it = completed.find(key);
        if (it != completed.end()) {
            cell.line = it->second;
            cell.done = true;
        } else {
            ++todo;
        }
    }

    auto run_cell = [&](Cell& cell) {
        TrainConfig cfg = topt.config();
        cfg.lambda_model = cell.lm;
        cfg.lambda_instance = cell.lx;
        std::string auc = "nan", pear = "nan", status = "ok";
        try {
            const LrmfModel model = train(base, lap_m, cell.lx > 0 ? lap_x_real : lap_x_empty, cfg);
            const auto report = evaluate(
                [&](std::size_t u, std::size_t i) { return model.predict(u, i); }, base,
                Split::dev, "lrmf");
            if (report.overall.auc) auc = fmt_g(*report.overall.auc);
            if (report.overall.pearson) pear = fmt_g(*report.overall.pearson);
        } catch (const std::exception&) {
            status = "failed";
        }
        cell.line = fmt_g(cell.lm) + "," + fmt_g(cell.lx) + "," + auc + "," + pear + "," + status;
        cell.done = true;
    };

    const std::size_t n_threads = std::min<std::size_t>(worker_cap(), std::max<std::size_t>(todo, 1));
    if (n_threads <= 1 || todo <= 1) {
        for (auto& cell : cells)
            if (!cell.done) run_cell(cell);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            while (true) {
                const std::size_t k = next.fetch_add(1);
                if (k >= cells.size()) break;
                if (!cells[k].done) run_cell(cells[k]);
            }
        };
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::string out = "lambda_model,lambda_instance,dev_auc,dev_pearson,status\n";
    for (const auto& cell : cells) out += cell.line + "\n";
    write_file(out_path, out);
    std::cout << "sweep: " << cells.size() << " cells (" << (cells.size() - todo)
              << " reused), written to " << out_path << "\n";
    return 0;
}

int cmd_noise(const DataOpts& data, const SplitOpts& split, const TrainOpts& topt,
              const std::vector<double>& fractions, const std::vector<std::string>& methods,
              std::uint64_t seed, const std::string& out_path) {
    const ObservationSet base = split.apply(data.load());
    const Graph clean = build_lineage_graph(base.models);
    const Laplacian lap_x = build_instance_laplacian(base, topt, topt.config().lambda_instance);

    std::string out = "fraction,method,pearson\n";
    for (double f : fractions) {
        const Laplacian lap_m = laplacian(perturb_lineage(clean, f, seed));
        for (const auto& m : methods) {
            if (m != "lrmf" && m != "mf" && m != "mla")
                throw std::runtime_error("noise supports methods lrmf, mf, mla");
            TrainedPredictor tp = train_method(m, base, lap_m, lap_x, topt);
            const auto report = evaluate(tp.predict, base, Split::test, m);
            out += fmt_g(f) + "," + m + "," +
                   (report.overall.pearson ? fmt_g(*report.overall.pearson) : "nan") + "\n";
        }
    }
    write_file(out_path, out);
    std::cout << "noise sweep written to " << out_path << "\n";
    return 0;
}

int cmd_tsweep(const DataOpts& data, const SplitOpts& split, const TrainOpts& topt,
               const std::vector<std::size_t>& t_values, const std::vector<std::string>& methods,
               std::uint64_t seed, const std::string& out_path) {
    const ObservationSet base = split.apply(data.load());
    std::string out = "t,method,auc,pearson\n";
    for (std::size_t t : t_values) {
        const ObservationSet sub = subsample_observations(base, t, seed);
        const Laplacian lap_m = laplacian(build_lineage_graph(sub.models));
        const Laplacian lap_x = build_instance_laplacian(sub, topt, topt.config().lambda_instance);
        for (const auto& m : methods) {
            TrainedPredictor tp = train_method(m, sub, lap_m, lap_x, topt);
            const auto report = evaluate(tp.predict, sub, Split::test, m);
            out += std::to_string(t) + "," + m + "," +
                   (report.overall.auc ? fmt_g(*report.overall.auc) : "nan") + "," +
                   (report.overall.pearson ? fmt_g(*report.overall.pearson) : "nan") + "\n";
        }
    }
    write_file(out_path, out);
    std::cout << "t sweep written to " << out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Instance-level LLM performance prediction from lineage-regularized"
                 " matrix factorization"};
    app.require_subcommand(1);

    // --config is consumed before parsing; registered here so help documents it
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its values");

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic lineage ecosystem");
    SynthConfig synth_cfg;
    std::string gen_out;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--seed", synth_cfg.seed, "generator seed");
    gen->add_option("--roots", synth_cfg.n_roots, "number of root models");
    gen->add_option("--children", synth_cfg.children_per_generation, "children per generation");
    gen->add_option("--generations", synth_cfg.generations, "derivation generations");
    gen->add_option("--merge-fraction", synth_cfg.merge_fraction, "fraction of merged children")
        ->check(CLI::Range(0.0, 1.0));
    gen->add_option("--instances", synth_cfg.n_instances, "number of instances");
    gen->add_option("--benchmarks", synth_cfg.n_benchmarks, "number of benchmarks");
    gen->add_option("--latent-dim", synth_cfg.latent_dim, "generator latent dimension");
    gen->add_option("--drift", synth_cfg.drift_sigma, "child drift sigma");
    gen->add_option("--base-tag-fraction", synth_cfg.base_tag_fraction,
                    "chance a fine-tune also tags its upstream base")
        ->check(CLI::Range(0.0, 1.0));
    bool gen_export_lineage = false;
    gen->add_flag("--export-lineage", gen_export_lineage,
                  "also write lineage.csv (node_a,node_b,weight)");

    // train
    auto* train_cmd = app.add_subcommand("train", "fit a predictor and write a checkpoint");
    std::string train_method_name = "lrmf";
    DataOpts train_data;
    SplitOpts train_split;
    TrainOpts train_opts;
    std::string train_out, train_log;
    train_cmd->add_option("--method", train_method_name, "lrmf | mf | irt | ncf")
        ->check(CLI::IsMember({"lrmf", "mf", "irt", "ncf"}));
    train_data.add_to(train_cmd);
    train_split.add_to(train_cmd);
    train_opts.add_to(train_cmd);
    train_cmd->add_option("--out", train_out, "checkpoint output path")->required();
    train_cmd->add_option("--log", train_log, "training log CSV path");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a predictor on one split");
    std::string eval_ckpt, eval_method, eval_split_name = "test", eval_label;
    std::string eval_json, eval_csv;
    std::size_t eval_hops = 1;
    DataOpts eval_data;
    SplitOpts eval_split;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "trained checkpoint path");
    eval_cmd->add_option("--method", eval_method, "mla | oracle | constant (no checkpoint)");
    eval_data.add_to(eval_cmd);
    eval_split.add_to(eval_cmd);
    eval_cmd->add_option("--hops", eval_hops, "MLA neighborhood hop radius");
    eval_cmd->add_option("--split", eval_split_name, "split to score: train | dev | test")
        ->check(CLI::IsMember({"train", "dev", "test"}));
    eval_cmd->add_option("--label", eval_label, "method label used in reports");
    eval_cmd->add_option("--out-json", eval_json, "report JSON path");
    eval_cmd->add_option("--out-csv", eval_csv, "report CSV path");

    // route
    auto* route_cmd = app.add_subcommand("route", "instance-level routing over test models");
    DataOpts route_data;
    SplitOpts route_split;
    std::vector<std::string> route_ckpts, route_methods{"mla", "random", "best"};
    std::uint64_t route_seed = 0;
    bool route_best_global = false;
    std::string route_pool = "test";
    std::string route_scores, route_assignments;
    route_data.add_to(route_cmd);
    route_split.add_to(route_cmd);
    route_cmd->add_option("--pool", route_pool, "candidate pool: test | all")
        ->check(CLI::IsMember({"test", "all"}));
    route_cmd->add_option("--checkpoint", route_ckpts, "checkpoint(s) to route with")
        ->take_all();
    route_cmd->add_option("--methods", route_methods, "mla | random | best | oracle")
        ->delimiter(',');
    route_cmd->add_option("--seed", route_seed, "random routing seed");
    route_cmd->add_flag("--best-global", route_best_global,
                        "best-model baseline picks one global model instead of per benchmark");
    route_cmd->add_option("--scores-csv", route_scores, "realized score CSV")->required();
    route_cmd->add_option("--assignments-csv", route_assignments, "assignment histogram CSV")
        ->required();

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "grid search over the Laplacian penalties");
    DataOpts sweep_data;
    SplitOpts sweep_split;
    TrainOpts sweep_opts;
    std::vector<double> sweep_grid_model{1e-6, 1e-5, 1e-4, 1e-3};
    std::vector<double> sweep_grid_instance{0.0, 1e-5};
    std::string sweep_out;
    sweep_data.add_to(sweep_cmd);
    sweep_split.add_to(sweep_cmd);
    sweep_opts.add_to(sweep_cmd);
    sweep_cmd->add_option("--grid-lambda-model", sweep_grid_model, "lineage penalty grid")
        ->delimiter(',');
    sweep_cmd->add_option("--grid-lambda-instance", sweep_grid_instance, "instance penalty grid")
        ->delimiter(',');
    sweep_cmd->add_option("--out", sweep_out, "heatmap CSV path")->required();

    // noise
    auto* noise_cmd = app.add_subcommand("noise", "lineage perturbation robustness experiment");
    DataOpts noise_data;
    SplitOpts noise_split;
    TrainOpts noise_opts;
    std::vector<double> noise_fractions{-0.4, -0.2, 0.0, 0.2, 0.4};
    std::vector<std::string> noise_methods{"lrmf", "mla"};
    std::uint64_t noise_seed = 0;
    std::string noise_out;
    noise_data.add_to(noise_cmd);
    noise_split.add_to(noise_cmd);
    noise_opts.add_to(noise_cmd);
    noise_cmd->add_option("--fractions", noise_fractions,
                          "perturbation fractions (negative removes, positive adds)")
        ->delimiter(',');
    noise_cmd->add_option("--methods", noise_methods, "lrmf | mf | mla")->delimiter(',');
    noise_cmd->add_option("--noise-seed", noise_seed, "perturbation seed");
    noise_cmd->add_option("--out", noise_out, "output CSV path")->required();

    // tsweep
    auto* tsweep_cmd = app.add_subcommand("tsweep", "observations-per-model sweep");
    DataOpts tsweep_data;
    SplitOpts tsweep_split;
    TrainOpts tsweep_opts;
    std::vector<std::size_t> tsweep_values{5, 10, 20, 50, 100, 200, 500, 1000};
    std::vector<std::string> tsweep_methods{"lrmf", "mf", "mla"};
    std::uint64_t tsweep_seed = 0;
    std::string tsweep_out;
    tsweep_data.add_to(tsweep_cmd);
    tsweep_split.add_to(tsweep_cmd);
    tsweep_opts.add_to(tsweep_cmd);
    tsweep_cmd->add_option("--t", tsweep_values, "observations kept per train model")
        ->delimiter(',');
    tsweep_cmd->add_option("--methods", tsweep_methods, "lrmf | mf | irt | ncf | mla")
        ->delimiter(',');
    tsweep_cmd->add_option("--subsample-seed", tsweep_seed, "subsampling seed");
    tsweep_cmd->add_option("--out", tsweep_out, "output CSV path")->required();

    for (auto* sub : app.get_subcommands(std::function<bool(CLI::App*)>{}))
        sub->add_option("--config", config_path,
                        "JSON config file; flags override its values");

    std::vector<std::string> args;
    try {
        args = expand_config_args(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    try {
        std::vector<const char*> argv2;
        argv2.push_back(argc > 0 ? argv[0] : "lineage_predict");
        for (const auto& a : args) argv2.push_back(a.c_str());
        app.parse(static_cast<int>(argv2.size()), argv2.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed()) return cmd_gen(synth_cfg, gen_out, gen_export_lineage);
        if (train_cmd->parsed())
            return cmd_train(train_method_name, train_data, train_split, train_opts, train_out,
                             train_log);
        if (eval_cmd->parsed())
            return cmd_eval(eval_ckpt, eval_method, eval_data, eval_split, eval_hops,
                            eval_split_name, eval_label, eval_json, eval_csv);
        if (route_cmd->parsed())
            return cmd_route(route_data, route_split, route_ckpts, route_methods, route_seed,
                             route_best_global, route_pool, route_scores, route_assignments);
        if (sweep_cmd->parsed())
            return cmd_sweep(sweep_data, sweep_split, sweep_opts, sweep_grid_model,
                             sweep_grid_instance, sweep_out);
        if (noise_cmd->parsed())
            return cmd_noise(noise_data, noise_split, noise_opts, noise_fractions, noise_methods,
                             noise_seed, noise_out);
        if (tsweep_cmd->parsed())
            return cmd_tsweep(tsweep_data, tsweep_split, tsweep_opts, tsweep_values,
                              tsweep_methods, tsweep_seed, tsweep_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
