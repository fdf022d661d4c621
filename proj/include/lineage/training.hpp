#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "lineage/adam.hpp"

namespace lineage {

enum class ColdstartMode { joint, closed_form };

inline std::string to_string(ColdstartMode m) {
    return m == ColdstartMode::joint ? "joint" : "closed-form";
}

inline ColdstartMode coldstart_mode_from_string(const std::string& s) {
    if (s == "joint") return ColdstartMode::joint;
    if (s == "closed-form" || s == "closed_form") return ColdstartMode::closed_form;
    throw std::invalid_argument("unknown coldstart mode: " + s);
}

// Shared trainer configuration. The lambdas and the Adam/early-stopping
// protocol are common to all gradient-trained predictors; latent_dim is
// ignored where it does not apply.
struct TrainConfig {
    std::size_t latent_dim = 32;
    double lambda_l2 = 1e-5;
    double lambda_model = 1e-4;
    double lambda_instance = 1e-5;
    double learning_rate = 3e-3;
    std::size_t max_epochs = 10000;
    std::size_t patience = 100;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    // When true, dev-split observations enter the BCE loss; they always
    // drive early stopping.
    bool include_dev_in_loss = false;
    // 0 = full batch.
    std::size_t minibatch_size = 0;
    ColdstartMode coldstart_mode = ColdstartMode::joint;

    void validate() const {
        if (latent_dim == 0) throw std::invalid_argument("latent_dim must be positive");
        if (lambda_l2 < 0 || lambda_model < 0 || lambda_instance < 0)
            throw std::invalid_argument("regularization strengths must be nonnegative");
        if (learning_rate <= 0) throw std::invalid_argument("learning_rate must be positive");
        if (max_epochs == 0) throw std::invalid_argument("max_epochs must be positive");
        if (patience == 0 || patience > max_epochs)
            throw std::invalid_argument("patience must be in [1, max_epochs]");
    }

    AdamConfig adam() const {
        return AdamConfig{learning_rate, adam_beta1, adam_beta2, adam_eps};
    }
};

struct TrainLogEntry {
    double train_loss = 0.0;  // objective at the start of the epoch
    double dev_metric = 0.0;  // early-stopping metric after the update
};

class TrainingDiverged : public std::runtime_error {
public:
    explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

struct TrainOutcome {
    std::vector<TrainLogEntry> log;
    std::size_t best_epoch = 0;  // 1-based epoch whose parameters were kept
};

// Generic full-run driver. `run_epoch(params, adam)` performs one epoch of
// optimization and returns the training objective it observed at the start;
// `dev_metric(params)` scores the updated parameters (higher is better).
// Keeps the parameters from the best-metric epoch.
template <typename RunEpoch, typename DevMetric>
TrainOutcome run_training_loop(std::vector<double>& params, const TrainConfig& cfg,
                               RunEpoch&& run_epoch, DevMetric&& dev_metric) {
    cfg.validate();
    Adam adam(params.size(), cfg.adam());
    TrainOutcome out;
    out.log.reserve(std::min<std::size_t>(cfg.max_epochs, 4096));

    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> best_params = params;
    std::size_t epochs_since_improvement = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const double loss = run_epoch(params, adam);
        if (!std::isfinite(loss))
            throw TrainingDiverged("objective became non-finite at epoch " + std::to_string(epoch));
        const double metric = dev_metric(params);
        out.log.push_back({loss, metric});
        if (metric > best) {
            best = metric;
            best_params = params;
            out.best_epoch = epoch;
            epochs_since_improvement = 0;
        } else {
            ++epochs_since_improvement;
        }
        if (epochs_since_improvement >= cfg.patience) break;
    }
    params = std::move(best_params);
    return out;
}

} // namespace lineage
