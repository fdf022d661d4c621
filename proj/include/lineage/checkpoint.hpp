#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lineage/baselines.hpp"
#include "lineage/dataset.hpp"
#include "lineage/lrmf.hpp"
#include "lineage/training.hpp"

namespace lineage {

// One JSON container for every trained predictor, tagged with its kind.
// Doubles survive the round trip exactly (shortest round-trip serialization).

namespace detail {

constexpr const char* kCheckpointFormat = "lineage-predict-checkpoint";
constexpr int kCheckpointVersion = 1;

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
    return {{"latent_dim", c.latent_dim},
            {"lambda_l2", c.lambda_l2},
            {"lambda_model", c.lambda_model},
            {"lambda_instance", c.lambda_instance},
            {"learning_rate", c.learning_rate},
            {"max_epochs", c.max_epochs},
            {"patience", c.patience},
            {"seed", c.seed},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"adam_eps", c.adam_eps},
            {"include_dev_in_loss", c.include_dev_in_loss},
            {"minibatch_size", c.minibatch_size},
            {"coldstart_mode", to_string(c.coldstart_mode)}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.lambda_l2 = j.at("lambda_l2").get<double>();
    c.lambda_model = j.at("lambda_model").get<double>();
    c.lambda_instance = j.at("lambda_instance").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.max_epochs = j.at("max_epochs").get<std::size_t>();
    c.patience = j.at("patience").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.include_dev_in_loss = j.at("include_dev_in_loss").get<bool>();
    c.minibatch_size = j.at("minibatch_size").get<std::size_t>();
    c.coldstart_mode = coldstart_mode_from_string(j.at("coldstart_mode").get<std::string>());
    return c;
}

inline nlohmann::json checkpoint_shell(const std::string& kind, const ObservationSet& obs,
                                        const std::vector<TrainLogEntry>& log,
                                        std::size_t best_epoch) {
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    j["kind"] = kind;
    nlohmann::json model_ids = nlohmann::json::array();
    nlohmann::json split = nlohmann::json::object();
    for (std::size_t u = 0; u < obs.n_models(); ++u) {
        model_ids.push_back(obs.models[u].model_id);
        split[obs.models[u].model_id] = to_string(obs.split[u]);
    }
    nlohmann::json instance_ids = nlohmann::json::array();
    for (const auto& r : obs.instances) instance_ids.push_back(r.instance_id);
    j["model_ids"] = std::move(model_ids);
    j["instance_ids"] = std::move(instance_ids);
    j["split"] = std::move(split);
    nlohmann::json log_json = nlohmann::json::array();
    for (const auto& e : log) log_json.push_back({e.train_loss, e.dev_metric});
    j["training_log"] = std::move(log_json);
    j["best_epoch"] = best_epoch;
    return j;
}

inline nlohmann::json rows_to_json(const double* data, std::size_t rows, std::size_t cols) {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t r = 0; r < rows; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < cols; ++c) row.push_back(data[r * cols + c]);
        out.push_back(std::move(row));
    }
    return out;
}

inline void rows_from_json(const nlohmann::json& j, double* data, std::size_t rows,
                           std::size_t cols) {
    if (j.size() != rows) throw std::runtime_error("checkpoint: row count mismatch");
    for (std::size_t r = 0; r < rows; ++r) {
        if (j[r].size() != cols) throw std::runtime_error("checkpoint: column count mismatch");
        for (std::size_t c = 0; c < cols; ++c) data[r * cols + c] = j[r][c].get<double>();
    }
}

inline nlohmann::json read_checkpoint_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    nlohmann::json j;
    in >> j;
    if (!j.contains("format") || j["format"] != kCheckpointFormat)
        throw std::runtime_error("'" + path + "' is not a checkpoint file");
    if (j.at("version").get<int>() != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version in '" + path + "'");
    return j;
}

inline void write_checkpoint_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
    out << j.dump() << '\n';
}

inline std::vector<TrainLogEntry> log_from_json(const nlohmann::json& j) {
    std::vector<TrainLogEntry> log;
    for (const auto& e : j) log.push_back({e[0].get<double>(), e[1].get<double>()});
    return log;
}

} // namespace detail

struct CheckpointMeta {
    std::string kind;
    std::vector<std::string> model_ids;
    std::vector<std::string> instance_ids;
    std::vector<Split> split;  // aligned with model_ids
};

inline CheckpointMeta checkpoint_meta_from_json(const nlohmann::json& j) {
    CheckpointMeta meta;
    meta.kind = j.at("kind").get<std::string>();
    for (const auto& id : j.at("model_ids")) meta.model_ids.push_back(id.get<std::string>());
    for (const auto& id : j.at("instance_ids")) meta.instance_ids.push_back(id.get<std::string>());
    meta.split.reserve(meta.model_ids.size());
    for (const auto& id : meta.model_ids)
        meta.split.push_back(split_from_string(j.at("split").at(id).get<std::string>()));
    return meta;
}

inline std::string peek_checkpoint_kind(const std::string& path) {
    return detail::read_checkpoint_json(path).at("kind").get<std::string>();
}

inline void save_lrmf_checkpoint(const std::string& path, const LrmfModel& model,
                                 const ObservationSet& obs, const std::string& kind = "lrmf") {
    nlohmann::json j = detail::checkpoint_shell(kind, obs, model.training_log, model.best_epoch);
    j["config"] = detail::train_config_to_json(model.config);
    j["model_embeddings"] =
        detail::rows_to_json(model.params.data(), model.n_models, model.config.latent_dim);
    j["instance_embeddings"] =
        detail::rows_to_json(model.params.data() + model.n_models * model.config.latent_dim,
                             model.n_instances, model.config.latent_dim);
    detail::write_checkpoint_json(path, j);
}

struct LoadedLrmf {
    LrmfModel model;
    CheckpointMeta meta;
};

inline LoadedLrmf load_lrmf_checkpoint(const std::string& path) {
    const nlohmann::json j = detail::read_checkpoint_json(path);
    LoadedLrmf out;
    out.meta = checkpoint_meta_from_json(j);
    if (out.meta.kind != "lrmf")
        throw std::runtime_error("'" + path + "' holds a " + out.meta.kind +
                                 " checkpoint, expected lrmf");
    out.model.config = detail::train_config_from_json(j.at("config"));
    out.model.n_models = out.meta.model_ids.size();
    out.model.n_instances = out.meta.instance_ids.size();
    out.model.params.resize((out.model.n_models + out.model.n_instances) *
                            out.model.config.latent_dim);
    detail::rows_from_json(j.at("model_embeddings"), out.model.params.data(), out.model.n_models,
                           out.model.config.latent_dim);
    detail::rows_from_json(j.at("instance_embeddings"),
                           out.model.params.data() +
                               out.model.n_models * out.model.config.latent_dim,
                           out.model.n_instances, out.model.config.latent_dim);
    out.model.training_log = detail::log_from_json(j.at("training_log"));
    out.model.best_epoch = j.at("best_epoch").get<std::size_t>();
    return out;
}

inline void save_irt_checkpoint(const std::string& path, const IrtModel& model,
                                const ObservationSet& obs) {
    nlohmann::json j = detail::checkpoint_shell("irt", obs, model.training_log, model.best_epoch);
    j["config"] = detail::train_config_to_json(model.config);
    j["ability"] = std::vector<double>(model.params.begin(),
                                       model.params.begin() + static_cast<std::ptrdiff_t>(model.n_models));
    j["discrimination"] = std::vector<double>(
        model.params.begin() + static_cast<std::ptrdiff_t>(model.n_models),
        model.params.begin() + static_cast<std::ptrdiff_t>(model.n_models + model.n_instances));
    j["difficulty"] = std::vector<double>(
        model.params.begin() + static_cast<std::ptrdiff_t>(model.n_models + model.n_instances),
        model.params.end());
    detail::write_checkpoint_json(path, j);
}

struct LoadedIrt {
    IrtModel model;
    CheckpointMeta meta;
};

inline LoadedIrt load_irt_checkpoint(const std::string& path) {
    const nlohmann::json j = detail::read_checkpoint_json(path);
    LoadedIrt out;
    out.meta = checkpoint_meta_from_json(j);
    if (out.meta.kind != "irt")
        throw std::runtime_error("'" + path + "' holds a " + out.meta.kind +
                                 " checkpoint, expected irt");
    out.model.config = detail::train_config_from_json(j.at("config"));
    out.model.n_models = out.meta.model_ids.size();
    out.model.n_instances = out.meta.instance_ids.size();
    const auto theta = j.at("ability").get<std::vector<double>>();
    const auto disc = j.at("discrimination").get<std::vector<double>>();
    const auto diff = j.at("difficulty").get<std::vector<double>>();
    if (theta.size() != out.model.n_models || disc.size() != out.model.n_instances ||
        diff.size() != out.model.n_instances)
        throw std::runtime_error("checkpoint: parameter size mismatch");
    out.model.params = theta;
    out.model.params.insert(out.model.params.end(), disc.begin(), disc.end());
    out.model.params.insert(out.model.params.end(), diff.begin(), diff.end());
    out.model.training_log = detail::log_from_json(j.at("training_log"));
    out.model.best_epoch = j.at("best_epoch").get<std::size_t>();
    return out;
}

inline void save_ncf_checkpoint(const std::string& path, const NcfModel& model,
                                const ObservationSet& obs) {
    nlohmann::json j = detail::checkpoint_shell("ncf", obs, model.training_log, model.best_epoch);
    j["config"] = detail::train_config_to_json(model.config.base);
    j["config"]["embedding_dim"] = model.config.embedding_dim;
    j["config"]["hidden_units"] = model.config.hidden_units;
    j["model_vocab"] = model.model_vocab;
    j["instance_vocab"] = model.instance_vocab;
    j["arch_vocab"] = model.arch_vocab;
    j["bench_vocab"] = model.bench_vocab;
    j["imputed_parameter_size"] = model.imputed_parameter_size;
    j["weights"] = model.params;
    detail::write_checkpoint_json(path, j);
}

struct LoadedNcf {
    NcfModel model;
    CheckpointMeta meta;
};

inline LoadedNcf load_ncf_checkpoint(const std::string& path) {
    const nlohmann::json j = detail::read_checkpoint_json(path);
    LoadedNcf out;
    out.meta = checkpoint_meta_from_json(j);
    if (out.meta.kind != "ncf")
        throw std::runtime_error("'" + path + "' holds a " + out.meta.kind +
                                 " checkpoint, expected ncf");
    out.model.config.base = detail::train_config_from_json(j.at("config"));
    out.model.config.embedding_dim = j.at("config").at("embedding_dim").get<std::size_t>();
    out.model.config.hidden_units = j.at("config").at("hidden_units").get<std::size_t>();
    out.model.model_vocab = j.at("model_vocab").get<std::vector<std::string>>();
    out.model.instance_vocab = j.at("instance_vocab").get<std::vector<std::string>>();
    out.model.arch_vocab = j.at("arch_vocab").get<std::vector<std::string>>();
    out.model.bench_vocab = j.at("bench_vocab").get<std::vector<std::string>>();
    out.model.imputed_parameter_size = j.at("imputed_parameter_size").get<double>();
    out.model.params = j.at("weights").get<std::vector<double>>();
    if (out.model.params.size() != out.model.total_params())
        throw std::runtime_error("checkpoint: weight count mismatch");
    out.model.training_log = detail::log_from_json(j.at("training_log"));
    out.model.best_epoch = j.at("best_epoch").get<std::size_t>();
    return out;
}

} // namespace lineage
