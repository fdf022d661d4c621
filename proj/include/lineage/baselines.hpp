#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lineage/dataset.hpp"
#include "lineage/graph.hpp"
#include "lineage/math.hpp"
#include "lineage/metrics.hpp"
#include "lineage/training.hpp"

namespace lineage {

// ---------------------------------------------------------------------------
// Model Lineage Averaging: predict a model's score on an instance as the mean
// of its lineage neighbors' observed scores on that instance.
// ---------------------------------------------------------------------------

// Nodes within `hops` of u (u excluded), ascending index order.
inline std::vector<std::size_t> mla_neighborhood(const Graph& g, std::size_t u,
                                                 std::size_t hops = 1) {
    if (u >= g.n_nodes()) throw std::out_of_range("node index out of range");
    const auto adj = g.adjacency();
    std::vector<int> dist(g.n_nodes(), -1);
    dist[u] = 0;
    std::deque<std::size_t> queue{u};
    std::vector<std::size_t> out;
    while (!queue.empty()) {
        const std::size_t v = queue.front();
        queue.pop_front();
        if (static_cast<std::size_t>(dist[v]) >= hops) continue;
        for (const auto& [w, _] : adj[v]) {
            if (dist[w] >= 0) continue;
            dist[w] = dist[v] + 1;
            out.push_back(w);
            queue.push_back(w);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Precomputed MLA scorer. Only observations of models in visible splits are
// consulted, so held-out models' labels never leak into their own prediction.
class MlaModel {
public:
    MlaModel(const ObservationSet& obs, const Graph& lineage, std::size_t hops = 1,
             std::vector<Split> visible = {Split::train, Split::dev})
        : n_models_(obs.n_models()), hops_(hops) {
        if (lineage.n_nodes() != obs.n_models())
            throw std::invalid_argument("lineage graph does not match the model table");
        neighborhoods_.resize(n_models_);
        for (std::size_t u = 0; u < n_models_; ++u)
            neighborhoods_[u] = mla_neighborhood(lineage, u, hops);
        known_.reserve(obs.triples.size());
        for (const auto& t : obs.triples) {
            const Split s = obs.split[t.model];
            if (std::find(visible.begin(), visible.end(), s) == visible.end()) continue;
            known_.emplace(key(t.model, t.instance), t.score);
        }
    }

    // nullopt = abstain (no neighbor observed this instance).
    std::optional<double> predict(std::size_t u, std::size_t i) const {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t v : neighborhoods_[u]) {
            auto it = known_.find(key(v, i));
            if (it == known_.end()) continue;
            sum += it->second;
            ++count;
        }
        if (count == 0) return std::nullopt;
        return sum / static_cast<double>(count);
    }

    // Abstentions become 0.5 so downstream metrics stay defined.
    double predict_or_default(std::size_t u, std::size_t i) const {
        return predict(u, i).value_or(0.5);
    }

private:
    static std::uint64_t key(std::size_t u, std::size_t i) {
        return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(i);
    }

    std::size_t n_models_;
    std::size_t hops_;
    std::vector<std::vector<std::size_t>> neighborhoods_;
    std::unordered_map<std::uint64_t, double> known_;
};

inline std::optional<double> mla_predict(const ObservationSet& obs, const Graph& lineage,
                                         std::size_t u, std::size_t i, std::size_t hops = 1,
                                         std::vector<Split> visible = {Split::train, Split::dev}) {
    return MlaModel(obs, lineage, hops, std::move(visible)).predict(u, i);
}

// ---------------------------------------------------------------------------
// Two-parameter IRT: probability sigma(a_i * theta_u - b_i), fit with the same
// BCE + L2 + Adam + early-stopping protocol as the factorization trainer.
// Parameters are flat [theta | discrimination | difficulty].
// ---------------------------------------------------------------------------

struct IrtModel {
    std::size_t n_models = 0;
    std::size_t n_instances = 0;
    TrainConfig config;
    std::vector<double> params;
    std::vector<TrainLogEntry> training_log;
    std::size_t best_epoch = 0;

    double ability(std::size_t u) const { return params[u]; }
    double discrimination(std::size_t i) const { return params[n_models + i]; }
    double difficulty(std::size_t i) const { return params[n_models + n_instances + i]; }

    double predict(std::size_t u, std::size_t i) const {
        if (u >= n_models || i >= n_instances) throw std::out_of_range("index out of range");
        return sigmoid(discrimination(i) * ability(u) - difficulty(i));
    }
};

struct IrtObjectiveParts {
    double bce = 0.0;
    double l2 = 0.0;
    double total() const { return bce + l2; }
};

namespace detail {

inline IrtObjectiveParts irt_accumulate(const std::vector<double>& params, std::size_t n_models,
                                        std::size_t n_instances,
                                        const std::vector<ObsTriple>& pairs,
                                        const TrainConfig& cfg, std::vector<double>* grad) {
    if (pairs.empty()) throw std::invalid_argument("observed pair set is empty");
    IrtObjectiveParts parts;
    if (grad) grad->assign(params.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(pairs.size());
    const double* theta = params.data();
    const double* disc = params.data() + n_models;
    const double* diff = params.data() + n_models + n_instances;
    for (const auto& t : pairs) {
        const double p = sigmoid(disc[t.instance] * theta[t.model] - diff[t.instance]);
        parts.bce -= inv_n * (t.score * clamped_log(p) + (1.0 - t.score) * clamped_log(1.0 - p));
        if (grad) {
            const double coef = inv_n * (p - t.score);
            (*grad)[t.model] += coef * disc[t.instance];
            (*grad)[n_models + t.instance] += coef * theta[t.model];
            (*grad)[n_models + n_instances + t.instance] -= coef;
        }
    }
    parts.l2 = cfg.lambda_l2 * squared_norm(params.data(), params.size());
    if (grad && cfg.lambda_l2 > 0)
        for (std::size_t i = 0; i < params.size(); ++i) (*grad)[i] += 2.0 * cfg.lambda_l2 * params[i];
    return parts;
}

} // namespace detail

inline IrtObjectiveParts irt_objective(const IrtModel& model, const ObservationSet& obs) {
    return detail::irt_accumulate(model.params, model.n_models, model.n_instances,
                                  obs.fit_triples(model.config.include_dev_in_loss), model.config,
                                  nullptr);
}

inline std::vector<double> irt_gradients(const IrtModel& model, const ObservationSet& obs) {
    std::vector<double> grad;
    detail::irt_accumulate(model.params, model.n_models, model.n_instances,
                           obs.fit_triples(model.config.include_dev_in_loss), model.config, &grad);
    return grad;
}

inline IrtModel irt_train(const ObservationSet& obs, const TrainConfig& cfg) {
    cfg.validate();
    IrtModel model;
    model.n_models = obs.n_models();
    model.n_instances = obs.n_instances();
    model.config = cfg;
    const auto fit = obs.fit_triples(cfg.include_dev_in_loss);
    if (fit.empty()) throw std::invalid_argument("no training observations");
    const auto dev = obs.split_triples(Split::dev);

    model.params.resize(model.n_models + 2 * model.n_instances);
    Rng rng(cfg.seed);
    for (std::size_t u = 0; u < model.n_models; ++u) model.params[u] = rng.gaussian(0.0, 0.1);
    for (std::size_t i = 0; i < model.n_instances; ++i)
        model.params[model.n_models + i] = rng.gaussian(1.0, 0.1);  // discrimination near 1
    for (std::size_t i = 0; i < model.n_instances; ++i)
        model.params[model.n_models + model.n_instances + i] = rng.gaussian(0.0, 0.1);

    std::vector<double> grad;
    auto run_epoch = [&](std::vector<double>& params, Adam& adam) {
        const auto parts = detail::irt_accumulate(params, model.n_models, model.n_instances, fit,
                                                  cfg, &grad);
        adam.step(params, grad);
        return parts.total();
    };
    auto dev_metric = [&](const std::vector<double>& params) {
        bool has_pos = false, has_neg = false;
        for (const auto& t : dev) (t.score > 0.5 ? has_pos : has_neg) = true;
        if (has_pos && has_neg) {
            std::vector<double> preds;
            std::vector<int> labels;
            const double* theta = params.data();
            const double* disc = params.data() + model.n_models;
            const double* diff = params.data() + model.n_models + model.n_instances;
            for (const auto& t : dev) {
                preds.push_back(sigmoid(disc[t.instance] * theta[t.model] - diff[t.instance]));
                labels.push_back(t.score > 0.5 ? 1 : 0);
            }
            return auc_roc(preds, labels);
        }
        return -detail::irt_accumulate(params, model.n_models, model.n_instances, fit, cfg, nullptr)
                    .total();
    };
    auto outcome = run_training_loop(model.params, cfg, run_epoch, dev_metric);
    model.training_log = std::move(outcome.log);
    model.best_epoch = outcome.best_epoch;
    return model;
}

inline double irt_predict(const IrtModel& model, std::size_t u, std::size_t i) {
    return model.predict(u, i);
}

// ---------------------------------------------------------------------------
// NCF with factors: id embeddings plus categorical factor embeddings
// (architecture type, model type, benchmark) and a log-parameter-size scalar,
// concatenated into a two-hidden-layer ReLU MLP with sigmoid output.
// Vocabularies come from the train split; anything unseen maps to a dedicated
// unknown row, which is how cold models are scored.
// ---------------------------------------------------------------------------

struct NcfConfig {
    TrainConfig base;
    std::size_t embedding_dim = 8;  // factor embeddings
    std::size_t hidden_units = 128;
};

struct NcfModel {
    NcfConfig config;
    std::vector<std::string> model_vocab;     // sorted; unknown row appended
    std::vector<std::string> instance_vocab;  // sorted; unknown row appended
    std::vector<std::string> arch_vocab;      // sorted; unknown row appended
    std::vector<std::string> bench_vocab;     // sorted; unknown row appended
    double imputed_parameter_size = 1.0;      // train-set median
    std::vector<double> params;
    std::vector<TrainLogEntry> training_log;
    std::size_t best_epoch = 0;

    static constexpr std::size_t kNumModelTypes = 3;  // finetuned, merged, other

    std::size_t id_dim() const { return config.base.latent_dim; }
    std::size_t factor_dim() const { return config.embedding_dim; }
    std::size_t input_dim() const { return 2 * id_dim() + 3 * factor_dim() + 1; }

    std::size_t off_model_emb() const { return 0; }
    std::size_t off_instance_emb() const {
        return off_model_emb() + (model_vocab.size() + 1) * id_dim();
    }
    std::size_t off_arch_emb() const {
        return off_instance_emb() + (instance_vocab.size() + 1) * id_dim();
    }
    std::size_t off_type_emb() const {
        return off_arch_emb() + (arch_vocab.size() + 1) * factor_dim();
    }
    std::size_t off_bench_emb() const {
        return off_type_emb() + (kNumModelTypes + 1) * factor_dim();
    }
    std::size_t off_w1() const {
        return off_bench_emb() + (bench_vocab.size() + 1) * factor_dim();
    }
    std::size_t off_b1() const { return off_w1() + config.hidden_units * input_dim(); }
    std::size_t off_w2() const { return off_b1() + config.hidden_units; }
    std::size_t off_b2() const { return off_w2() + config.hidden_units * config.hidden_units; }
    std::size_t off_w3() const { return off_b2() + config.hidden_units; }
    std::size_t off_b3() const { return off_w3() + config.hidden_units; }
    std::size_t total_params() const { return off_b3() + 1; }
};

// Resolved input indices for every model and instance of a dataset.
struct NcfFeatures {
    struct ModelFeat {
        std::size_t emb = 0;
        std::size_t arch = 0;
        std::size_t type = 0;
        double log_size = 0.0;
    };
    struct InstanceFeat {
        std::size_t emb = 0;
        std::size_t bench = 0;
    };
    std::vector<ModelFeat> models;
    std::vector<InstanceFeat> instances;
};

namespace detail {

inline std::size_t vocab_lookup(const std::vector<std::string>& vocab, const std::string& id) {
    auto it = std::lower_bound(vocab.begin(), vocab.end(), id);
    if (it != vocab.end() && *it == id) return static_cast<std::size_t>(it - vocab.begin());
    return vocab.size();  // unknown row
}

inline std::size_t model_type_index(const std::string& t) {
    if (t == "finetuned") return 0;
    if (t == "merged") return 1;
    if (t == "other") return 2;
    return NcfModel::kNumModelTypes;
}

} // namespace detail

inline NcfFeatures build_ncf_features(const NcfModel& model, const ObservationSet& obs) {
    NcfFeatures f;
    f.models.resize(obs.n_models());
    f.instances.resize(obs.n_instances());
    for (std::size_t u = 0; u < obs.n_models(); ++u) {
        const auto& m = obs.models[u];
        f.models[u].emb = detail::vocab_lookup(model.model_vocab, m.model_id);
        f.models[u].arch = detail::vocab_lookup(model.arch_vocab, m.architecture_type);
        f.models[u].type = detail::model_type_index(m.model_type);
        const double size = m.parameter_size ? *m.parameter_size : model.imputed_parameter_size;
        f.models[u].log_size = std::log(size);
    }
    for (std::size_t i = 0; i < obs.n_instances(); ++i) {
        const auto& r = obs.instances[i];
        f.instances[i].emb = detail::vocab_lookup(model.instance_vocab, r.instance_id);
        f.instances[i].bench = detail::vocab_lookup(model.bench_vocab, r.benchmark_id);
    }
    return f;
}

namespace detail {

// Scratch buffers reused across observations in one accumulation pass.
struct NcfWork {
    std::vector<double> x, h1, h2, pre1, pre2, dx, dh1, dh2;
};

inline void ncf_assemble_input(const NcfModel& m, const std::vector<double>& params,
                               const NcfFeatures::ModelFeat& mf,
                               const NcfFeatures::InstanceFeat& xf, std::vector<double>& x) {
    const std::size_t id_d = m.id_dim();
    const std::size_t f_d = m.factor_dim();
    x.resize(m.input_dim());
    std::size_t pos = 0;
    const double* src = params.data() + m.off_model_emb() + mf.emb * id_d;
    for (std::size_t c = 0; c < id_d; ++c) x[pos++] = src[c];
    src = params.data() + m.off_instance_emb() + xf.emb * id_d;
    for (std::size_t c = 0; c < id_d; ++c) x[pos++] = src[c];
    src = params.data() + m.off_arch_emb() + mf.arch * f_d;
    for (std::size_t c = 0; c < f_d; ++c) x[pos++] = src[c];
    src = params.data() + m.off_type_emb() + mf.type * f_d;
    for (std::size_t c = 0; c < f_d; ++c) x[pos++] = src[c];
    src = params.data() + m.off_bench_emb() + xf.bench * f_d;
    for (std::size_t c = 0; c < f_d; ++c) x[pos++] = src[c];
    x[pos++] = mf.log_size;
}

inline double ncf_forward(const NcfModel& m, const std::vector<double>& params, NcfWork& w) {
    const std::size_t h = m.config.hidden_units;
    const std::size_t d = m.input_dim();
    const double* w1 = params.data() + m.off_w1();
    const double* b1 = params.data() + m.off_b1();
    const double* w2 = params.data() + m.off_w2();
    const double* b2 = params.data() + m.off_b2();
    const double* w3 = params.data() + m.off_w3();
    const double b3 = params[m.off_b3()];
    w.pre1.resize(h);
    w.h1.resize(h);
    w.pre2.resize(h);
    w.h2.resize(h);
    for (std::size_t k = 0; k < h; ++k) {
        w.pre1[k] = b1[k] + dot(w1 + k * d, w.x.data(), d);
        w.h1[k] = w.pre1[k] > 0.0 ? w.pre1[k] : 0.0;
    }
    for (std::size_t k = 0; k < h; ++k) {
        w.pre2[k] = b2[k] + dot(w2 + k * h, w.h1.data(), h);
        w.h2[k] = w.pre2[k] > 0.0 ? w.pre2[k] : 0.0;
    }
    return b3 + dot(w3, w.h2.data(), h);
}

// dz is dLoss/dlogit; scatters the chain back into `grad`.
inline void ncf_backward(const NcfModel& m, const std::vector<double>& params,
                         const NcfFeatures::ModelFeat& mf, const NcfFeatures::InstanceFeat& xf,
                         double dz, NcfWork& w, std::vector<double>& grad) {
    const std::size_t h = m.config.hidden_units;
    const std::size_t d = m.input_dim();
    const double* w2 = params.data() + m.off_w2();
    const double* w3 = params.data() + m.off_w3();
    double* gw1 = grad.data() + m.off_w1();
    double* gb1 = grad.data() + m.off_b1();
    double* gw2 = grad.data() + m.off_w2();
    double* gb2 = grad.data() + m.off_b2();
    double* gw3 = grad.data() + m.off_w3();

    w.dh2.resize(h);
    w.dh1.resize(h);
    w.dx.assign(d, 0.0);
    for (std::size_t k = 0; k < h; ++k) {
        gw3[k] += dz * w.h2[k];
        w.dh2[k] = w.pre2[k] > 0.0 ? dz * w3[k] : 0.0;
    }
    grad[m.off_b3()] += dz;
    for (std::size_t k = 0; k < h; ++k) {
        if (w.dh2[k] == 0.0) continue;
        gb2[k] += w.dh2[k];
        double* row = gw2 + k * h;
        for (std::size_t c = 0; c < h; ++c) row[c] += w.dh2[k] * w.h1[c];
    }
    for (std::size_t c = 0; c < h; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < h; ++k) s += w.dh2[k] * w2[k * h + c];
        w.dh1[c] = w.pre1[c] > 0.0 ? s : 0.0;
    }
    const double* w1 = params.data() + m.off_w1();
    for (std::size_t k = 0; k < h; ++k) {
        if (w.dh1[k] == 0.0) continue;
        gb1[k] += w.dh1[k];
        double* row = gw1 + k * d;
        for (std::size_t c = 0; c < d; ++c) row[c] += w.dh1[k] * w.x[c];
        const double* wrow = w1 + k * d;
        for (std::size_t c = 0; c < d; ++c) w.dx[c] += w.dh1[k] * wrow[c];
    }

    const std::size_t id_d = m.id_dim();
    const std::size_t f_d = m.factor_dim();
    std::size_t pos = 0;
    double* dst = grad.data() + m.off_model_emb() + mf.emb * id_d;
    for (std::size_t c = 0; c < id_d; ++c) dst[c] += w.dx[pos++];
    dst = grad.data() + m.off_instance_emb() + xf.emb * id_d;
    for (std::size_t c = 0; c < id_d; ++c) dst[c] += w.dx[pos++];
    dst = grad.data() + m.off_arch_emb() + mf.arch * f_d;
    for (std::size_t c = 0; c < f_d; ++c) dst[c] += w.dx[pos++];
    dst = grad.data() + m.off_type_emb() + mf.type * f_d;
    for (std::size_t c = 0; c < f_d; ++c) dst[c] += w.dx[pos++];
    dst = grad.data() + m.off_bench_emb() + xf.bench * f_d;
    for (std::size_t c = 0; c < f_d; ++c) dst[c] += w.dx[pos++];
    // log_size feeds a constant input, no parameter behind it
}

inline IrtObjectiveParts ncf_accumulate(const NcfModel& m, const std::vector<double>& params,
                                        const NcfFeatures& feats,
                                        const std::vector<ObsTriple>& pairs,
                                        std::vector<double>* grad) {
    if (pairs.empty()) throw std::invalid_argument("observed pair set is empty");
    IrtObjectiveParts parts;
    if (grad) grad->assign(params.size(), 0.0);
    NcfWork w;
    const double inv_n = 1.0 / static_cast<double>(pairs.size());
    for (const auto& t : pairs) {
        const auto& mf = feats.models[t.model];
        const auto& xf = feats.instances[t.instance];
        ncf_assemble_input(m, params, mf, xf, w.x);
        const double z = ncf_forward(m, params, w);
        const double p = sigmoid(z);
        parts.bce -= inv_n * (t.score * clamped_log(p) + (1.0 - t.score) * clamped_log(1.0 - p));
        if (grad) ncf_backward(m, params, mf, xf, inv_n * (p - t.score), w, *grad);
    }
    const double l2 = m.config.base.lambda_l2;
    parts.l2 = l2 * squared_norm(params.data(), params.size());
    if (grad && l2 > 0)
        for (std::size_t i = 0; i < params.size(); ++i) (*grad)[i] += 2.0 * l2 * params[i];
    return parts;
}

} // namespace detail

inline double ncf_predict(const NcfModel& model, const NcfFeatures& feats, std::size_t u,
                          std::size_t i) {
    detail::NcfWork w;
    detail::ncf_assemble_input(model, model.params, feats.models.at(u), feats.instances.at(i), w.x);
    return sigmoid(detail::ncf_forward(model, model.params, w));
}

inline double ncf_predict(const NcfModel& model, const ObservationSet& obs, std::size_t u,
                          std::size_t i) {
    return ncf_predict(model, build_ncf_features(model, obs), u, i);
}

inline IrtObjectiveParts ncf_objective(const NcfModel& model, const ObservationSet& obs) {
    return detail::ncf_accumulate(model, model.params, build_ncf_features(model, obs),
                                  obs.fit_triples(model.config.base.include_dev_in_loss), nullptr);
}

inline std::vector<double> ncf_gradients(const NcfModel& model, const ObservationSet& obs) {
    std::vector<double> grad;
    detail::ncf_accumulate(model, model.params, build_ncf_features(model, obs),
                           obs.fit_triples(model.config.base.include_dev_in_loss), &grad);
    return grad;
}

// Seeded initialization: N(0, 0.1^2) embeddings, He-style MLP weights, zero
// biases. Exposed so gradient tests can build an untrained network.
inline NcfModel ncf_init(const ObservationSet& obs, const NcfConfig& cfg) {
    cfg.base.validate();
    NcfModel model;
    model.config = cfg;

    std::set<std::string> model_ids, archs, benches;
    for (std::size_t u = 0; u < obs.n_models(); ++u) {
        if (obs.split[u] != Split::train &&
            !(cfg.base.include_dev_in_loss && obs.split[u] == Split::dev))
            continue;
        model_ids.insert(obs.models[u].model_id);
        archs.insert(obs.models[u].architecture_type);
    }
    for (const auto& t : obs.triples) {
        const Split s = obs.split[t.model];
        if (s == Split::train || (cfg.base.include_dev_in_loss && s == Split::dev))
            benches.insert(obs.instances[t.instance].benchmark_id);
    }
    std::set<std::string> instance_ids;
    for (const auto& r : obs.instances) instance_ids.insert(r.instance_id);
    model.model_vocab.assign(model_ids.begin(), model_ids.end());
    model.instance_vocab.assign(instance_ids.begin(), instance_ids.end());
    model.arch_vocab.assign(archs.begin(), archs.end());
    model.bench_vocab.assign(benches.begin(), benches.end());

    std::vector<double> sizes;
    for (std::size_t u = 0; u < obs.n_models(); ++u)
        if (obs.split[u] == Split::train && obs.models[u].parameter_size)
            sizes.push_back(*obs.models[u].parameter_size);
    if (!sizes.empty()) {
        std::sort(sizes.begin(), sizes.end());
        const std::size_t n = sizes.size();
        model.imputed_parameter_size =
            n % 2 == 1 ? sizes[n / 2] : 0.5 * (sizes[n / 2 - 1] + sizes[n / 2]);
    }

    model.params.assign(model.total_params(), 0.0);
    Rng rng(cfg.base.seed);
    for (std::size_t i = 0; i < model.off_w1(); ++i) model.params[i] = rng.gaussian(0.0, 0.1);
    const double s1 = std::sqrt(2.0 / static_cast<double>(model.input_dim()));
    for (std::size_t i = model.off_w1(); i < model.off_b1(); ++i)
        model.params[i] = rng.gaussian(0.0, s1);
    const double s2 = std::sqrt(2.0 / static_cast<double>(cfg.hidden_units));
    for (std::size_t i = model.off_w2(); i < model.off_b2(); ++i)
        model.params[i] = rng.gaussian(0.0, s2);
    for (std::size_t i = model.off_w3(); i < model.off_b3(); ++i)
        model.params[i] = rng.gaussian(0.0, s2);
    return model;
}

inline NcfModel ncf_train(const ObservationSet& obs, const NcfConfig& cfg) {
    NcfModel model = ncf_init(obs, cfg);
    const auto feats = build_ncf_features(model, obs);
    const auto fit = obs.fit_triples(cfg.base.include_dev_in_loss);
    if (fit.empty()) throw std::invalid_argument("no training observations");
    const auto dev = obs.split_triples(Split::dev);

    std::vector<double> grad;
    auto run_epoch = [&](std::vector<double>& params, Adam& adam) {
        const auto parts = detail::ncf_accumulate(model, params, feats, fit, &grad);
        adam.step(params, grad);
        return parts.total();
    };
    auto dev_metric = [&](const std::vector<double>& params) {
        bool has_pos = false, has_neg = false;
        for (const auto& t : dev) (t.score > 0.5 ? has_pos : has_neg) = true;
        if (has_pos && has_neg) {
            std::vector<double> preds;
            std::vector<int> labels;
            detail::NcfWork w;
            for (const auto& t : dev) {
                detail::ncf_assemble_input(model, params, feats.models[t.model],
                                           feats.instances[t.instance], w.x);
                preds.push_back(sigmoid(detail::ncf_forward(model, params, w)));
                labels.push_back(t.score > 0.5 ? 1 : 0);
            }
            return auc_roc(preds, labels);
        }
        return -detail::ncf_accumulate(model, params, feats, fit, nullptr).total();
    };
    auto outcome = run_training_loop(model.params, cfg.base, run_epoch, dev_metric);
    model.training_log = std::move(outcome.log);
    model.best_epoch = outcome.best_epoch;
    return model;
}

} // namespace lineage
