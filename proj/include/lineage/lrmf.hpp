#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "lineage/dataset.hpp"
#include "lineage/graph.hpp"
#include "lineage/math.hpp"
#include "lineage/metrics.hpp"
#include "lineage/training.hpp"

namespace lineage {

// Sigmoid matrix factorization with BCE loss, L2, and two Laplacian
// regularizers (model lineage, instance similarity). Parameters are stored
// flat as [model embeddings | instance embeddings]; row order matches the
// dataset's model/instance order.
struct LrmfModel {
    std::size_t n_models = 0;
    std::size_t n_instances = 0;
    TrainConfig config;
    std::vector<double> params;
    std::vector<TrainLogEntry> training_log;
    std::size_t best_epoch = 0;

    std::size_t model_offset(std::size_t u) const { return u * config.latent_dim; }
    std::size_t instance_offset(std::size_t i) const {
        return (n_models + i) * config.latent_dim;
    }
    const double* model_row(std::size_t u) const {
        if (u >= n_models) throw std::out_of_range("model index out of range");
        return params.data() + model_offset(u);
    }
    const double* instance_row(std::size_t i) const {
        if (i >= n_instances) throw std::out_of_range("instance index out of range");
        return params.data() + instance_offset(i);
    }
    double* mutable_model_row(std::size_t u) { return params.data() + model_offset(u); }
    double* mutable_instance_row(std::size_t i) { return params.data() + instance_offset(i); }

    double predict(std::size_t u, std::size_t i) const {
        return sigmoid(dot(model_row(u), instance_row(i), config.latent_dim));
    }

    ConstMatrixView model_embeddings() const {
        return {params.data(), n_models, config.latent_dim};
    }
    ConstMatrixView instance_embeddings() const {
        return {params.data() + n_models * config.latent_dim, n_instances, config.latent_dim};
    }
};

struct ObjectiveParts {
    double bce = 0.0;
    double l2 = 0.0;
    double lap_model = 0.0;
    double lap_instance = 0.0;
    double total() const { return bce + l2 + lap_model + lap_instance; }
};

namespace detail {

// Objective and (optionally) its gradient over the flat parameter vector.
// Gradient accumulation order is fixed, so results are deterministic.
inline ObjectiveParts lrmf_accumulate(const std::vector<double>& params, std::size_t n_models,
                                      std::size_t n_instances, std::size_t dim,
                                      const std::vector<ObsTriple>& pairs, const Laplacian& lap_m,
                                      const Laplacian& lap_x, const TrainConfig& cfg,
                                      std::vector<double>* grad) {
    if (pairs.empty()) throw std::invalid_argument("observed pair set is empty");
    if (lap_m.graph.n_nodes() != n_models || lap_x.graph.n_nodes() != n_instances)
        throw std::invalid_argument("graph node counts do not match the dataset");

    ObjectiveParts parts;
    if (grad) grad->assign(params.size(), 0.0);
    const double* m_base = params.data();
    const double* x_base = params.data() + n_models * dim;
    const double inv_n = 1.0 / static_cast<double>(pairs.size());

    for (const auto& t : pairs) {
        const double* mu = m_base + t.model * dim;
        const double* xi = x_base + t.instance * dim;
        const double p = sigmoid(dot(mu, xi, dim));
        parts.bce -= inv_n * (t.score * clamped_log(p) + (1.0 - t.score) * clamped_log(1.0 - p));
        if (grad) {
            const double coef = inv_n * (p - t.score);
            double* gm = grad->data() + t.model * dim;
            double* gx = grad->data() + (n_models + t.instance) * dim;
            for (std::size_t c = 0; c < dim; ++c) {
                gm[c] += coef * xi[c];
                gx[c] += coef * mu[c];
            }
        }
    }

    parts.l2 = cfg.lambda_l2 * squared_norm(params.data(), params.size());
    if (grad && cfg.lambda_l2 > 0) {
        const double two_l2 = 2.0 * cfg.lambda_l2;
        for (std::size_t i = 0; i < params.size(); ++i) (*grad)[i] += two_l2 * params[i];
    }

    if (cfg.lambda_model > 0) {
        parts.lap_model =
            cfg.lambda_model * laplacian_quadratic(lap_m, ConstMatrixView{m_base, n_models, dim});
        if (grad) {
            const double two_lm = 2.0 * cfg.lambda_model;
            for (const auto& e : lap_m.graph.edges) {
                double* ga = grad->data() + e.a * dim;
                double* gb = grad->data() + e.b * dim;
                const double* ma = m_base + e.a * dim;
                const double* mb = m_base + e.b * dim;
                for (std::size_t c = 0; c < dim; ++c) {
                    const double d = two_lm * e.weight * (ma[c] - mb[c]);
                    ga[c] += d;
                    gb[c] -= d;
                }
            }
        }
    }
    if (cfg.lambda_instance > 0) {
        parts.lap_instance =
            cfg.lambda_instance * laplacian_quadratic(lap_x, ConstMatrixView{x_base, n_instances, dim});
        if (grad) {
            const double two_lx = 2.0 * cfg.lambda_instance;
            const std::size_t x_off = n_models * dim;
            for (const auto& e : lap_x.graph.edges) {
                double* ga = grad->data() + x_off + e.a * dim;
                double* gb = grad->data() + x_off + e.b * dim;
                const double* xa = x_base + e.a * dim;
                const double* xb = x_base + e.b * dim;
                for (std::size_t c = 0; c < dim; ++c) {
                    const double d = two_lx * e.weight * (xa[c] - xb[c]);
                    ga[c] += d;
                    gb[c] -= d;
                }
            }
        }
    }
    return parts;
}

// Dev-set AUC if the dev observations carry both classes; otherwise the
// negated training objective, so early stopping still has a signal.
inline double dev_metric_or_fallback(const std::vector<double>& params, std::size_t n_models,
                                     std::size_t n_instances, std::size_t dim,
                                     const std::vector<ObsTriple>& dev_pairs,
                                     const std::vector<ObsTriple>& fit_pairs,
                                     const Laplacian& lap_m, const Laplacian& lap_x,
                                     const TrainConfig& cfg) {
    bool has_pos = false, has_neg = false;
    for (const auto& t : dev_pairs) (t.score > 0.5 ? has_pos : has_neg) = true;
    if (has_pos && has_neg) {
        std::vector<double> preds;
        std::vector<int> labels;
        preds.reserve(dev_pairs.size());
        labels.reserve(dev_pairs.size());
        const double* m_base = params.data();
        const double* x_base = params.data() + n_models * dim;
        for (const auto& t : dev_pairs) {
            preds.push_back(sigmoid(dot(m_base + t.model * dim, x_base + t.instance * dim, dim)));
            labels.push_back(t.score > 0.5 ? 1 : 0);
        }
        return auc_roc(preds, labels);
    }
    return -lrmf_accumulate(params, n_models, n_instances, dim, fit_pairs, lap_m, lap_x, cfg,
                            nullptr)
                .total();
}

} // namespace detail

inline ObjectiveParts objective(const LrmfModel& model, const ObservationSet& obs,
                                const Laplacian& lap_m, const Laplacian& lap_x) {
    return detail::lrmf_accumulate(model.params, model.n_models, model.n_instances,
                                   model.config.latent_dim,
                                   obs.fit_triples(model.config.include_dev_in_loss), lap_m, lap_x,
                                   model.config, nullptr);
}

// Analytic gradient of `objective` with respect to (M, X).
inline std::pair<Matrix, Matrix> gradients(const LrmfModel& model, const ObservationSet& obs,
                                           const Laplacian& lap_m, const Laplacian& lap_x) {
    std::vector<double> flat;
    detail::lrmf_accumulate(model.params, model.n_models, model.n_instances,
                            model.config.latent_dim,
                            obs.fit_triples(model.config.include_dev_in_loss), lap_m, lap_x,
                            model.config, &flat);
    const std::size_t dim = model.config.latent_dim;
    Matrix dm(model.n_models, dim), dx(model.n_instances, dim);
    std::copy(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(model.n_models * dim),
              dm.data.begin());
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(model.n_models * dim), flat.end(),
              dx.data.begin());
    return {std::move(dm), std::move(dx)};
}

// Full-batch Adam with early stopping on the dev metric. All models and
// instances own embedding rows; rows without fitting observations are shaped
// only by the L2 and Laplacian terms, which is what propagates signal to
// cold models along lineage edges.
inline LrmfModel train(const ObservationSet& obs, const Laplacian& lap_m, const Laplacian& lap_x,
                       const TrainConfig& cfg) {
    cfg.validate();
    LrmfModel model;
    model.n_models = obs.n_models();
    model.n_instances = obs.n_instances();
    model.config = cfg;

    const std::size_t dim = cfg.latent_dim;
    const auto fit = obs.fit_triples(cfg.include_dev_in_loss);
    if (fit.empty()) throw std::invalid_argument("no training observations");
    const auto dev = obs.split_triples(Split::dev);

    model.params.resize((model.n_models + model.n_instances) * dim);
    Rng rng(cfg.seed);
    for (auto& p : model.params) p = rng.gaussian(0.0, 0.1);

    std::vector<double> grad;
    std::vector<std::size_t> order;
    auto run_epoch = [&](std::vector<double>& params, Adam& adam) {
        if (cfg.minibatch_size == 0 || cfg.minibatch_size >= fit.size()) {
            const auto parts = detail::lrmf_accumulate(params, model.n_models, model.n_instances,
                                                       dim, fit, lap_m, lap_x, cfg, &grad);
            adam.step(params, grad);
            return parts.total();
        }
        // Seeded minibatch mode: BCE gradients per batch, regularizer
        // gradients scaled so one epoch applies them once in total.
        if (order.size() != fit.size()) {
            order.resize(fit.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        }
        Rng epoch_rng(mix_seed(cfg.seed, adam.steps_taken() + 1));
        epoch_rng.shuffle(order);
        const double epoch_loss = detail::lrmf_accumulate(params, model.n_models,
                                                          model.n_instances, dim, fit, lap_m,
                                                          lap_x, cfg, nullptr)
                                      .total();
        std::vector<ObsTriple> batch;
        TrainConfig scaled = cfg;
        for (std::size_t start = 0; start < fit.size(); start += cfg.minibatch_size) {
            batch.clear();
            const std::size_t end = std::min(start + cfg.minibatch_size, fit.size());
            for (std::size_t i = start; i < end; ++i) batch.push_back(fit[order[i]]);
            const double frac = static_cast<double>(batch.size()) / static_cast<double>(fit.size());
            scaled.lambda_l2 = cfg.lambda_l2 * frac;
            scaled.lambda_model = cfg.lambda_model * frac;
            scaled.lambda_instance = cfg.lambda_instance * frac;
            detail::lrmf_accumulate(params, model.n_models, model.n_instances, dim, batch, lap_m,
                                    lap_x, scaled, &grad);
            adam.step(params, grad);
        }
        return epoch_loss;
    };
    auto dev_metric = [&](const std::vector<double>& params) {
        return detail::dev_metric_or_fallback(params, model.n_models, model.n_instances, dim, dev,
                                              fit, lap_m, lap_x, cfg);
    };

    auto outcome = run_training_loop(model.params, cfg, run_epoch, dev_metric);
    model.training_log = std::move(outcome.log);
    model.best_epoch = outcome.best_epoch;
    return model;
}

// Closed-form cold embedding: the minimizer of the L2 + lineage penalty for
// row u with all neighbor rows held fixed. Isolated models (or a zero
// denominator) fall back to the zero vector, i.e. probability 0.5 everywhere.
inline std::vector<double> coldstart_embed(const LrmfModel& model, const Laplacian& lap_m,
                                           std::size_t u, bool* isolated = nullptr) {
    if (u >= model.n_models) throw std::out_of_range("model index out of range");
    const std::size_t dim = model.config.latent_dim;
    std::vector<double> row(dim, 0.0);
    double degree = 0.0;
    for (const auto& e : lap_m.graph.edges) {
        std::size_t other = model.n_models;
        if (e.a == u) other = e.b;
        else if (e.b == u) other = e.a;
        else continue;
        degree += e.weight;
        const double* mv = model.model_row(other);
        for (std::size_t c = 0; c < dim; ++c) row[c] += e.weight * mv[c];
    }
    const double denom = model.config.lambda_model * degree + model.config.lambda_l2;
    if (degree == 0.0 || denom == 0.0 || model.config.lambda_model == 0.0) {
        if (isolated) *isolated = true;
        return std::vector<double>(dim, 0.0);
    }
    if (isolated) *isolated = false;
    const double scale = model.config.lambda_model / denom;
    for (auto& v : row) v *= scale;
    return row;
}

// Self-contained pair scorer honoring the configured cold-start mode. In
// closed-form mode, rows of models outside the fitting set are recomputed
// from their lineage neighbors' trained rows.
inline std::function<double(std::size_t, std::size_t)> make_lrmf_predictor(
    const LrmfModel& model, const ObservationSet& obs, const Laplacian& lap_m) {
    auto state = std::make_shared<LrmfModel>(model);
    if (model.config.coldstart_mode == ColdstartMode::closed_form) {
        for (std::size_t u = 0; u < model.n_models; ++u) {
            const bool in_fit = obs.split[u] == Split::train ||
                                (model.config.include_dev_in_loss && obs.split[u] == Split::dev);
            if (in_fit) continue;
            const auto cold = coldstart_embed(model, lap_m, u);
            std::copy(cold.begin(), cold.end(), state->mutable_model_row(u));
        }
    }
    return [state](std::size_t u, std::size_t i) { return state->predict(u, i); };
}

} // namespace lineage
