#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lineage/dataset.hpp"
#include "lineage/math.hpp"

namespace lineage {

// Synthetic lineage ecosystem with known ground truth. Each model carries a
// latent ability vector; roots are drawn fresh, fine-tuned children drift
// from one parent, merged children drift from the mean of two parents.
// Outcomes are Bernoulli(sigma(ability . difficulty)), so a rank-d sigmoid
// factorization is well-specified on this data.
struct SynthConfig {
    std::size_t n_roots = 4;
    std::size_t children_per_generation = 14;
    std::size_t generations = 4;  // 4 + 14*4 = 60 models
    double merge_fraction = 0.5;
    // Chance a fine-tuned child also tags its grandparent base model, the way
    // model cards usually carry the whole base_model chain.
    double base_tag_fraction = 1.0;
    std::size_t n_instances = 300;
    std::size_t n_benchmarks = 3;
    std::size_t latent_dim = 8;
    double drift_sigma = 0.3;
    std::uint64_t seed = 0;

    std::size_t n_models() const { return n_roots + children_per_generation * generations; }

    void validate() const {
        if (n_roots == 0 || n_instances == 0 || n_benchmarks == 0 || latent_dim == 0)
            throw std::invalid_argument("synth config counts must be positive");
        if (merge_fraction < 0.0 || merge_fraction > 1.0)
            throw std::invalid_argument("merge_fraction must lie in [0, 1]");
        if (base_tag_fraction < 0.0 || base_tag_fraction > 1.0)
            throw std::invalid_argument("base_tag_fraction must lie in [0, 1]");
        if (drift_sigma < 0.0) throw std::invalid_argument("drift_sigma must be nonnegative");
        if (n_benchmarks > n_instances)
            throw std::invalid_argument("need at least one instance per benchmark");
    }
};

struct SynthData {
    ObservationSet observations;
    Matrix ability;     // per model
    Matrix difficulty;  // per instance; also written as the instance embedding
};

namespace detail {

inline std::string padded_id(const char* prefix, std::size_t index, std::size_t total) {
    std::size_t width = 1;
    for (std::size_t v = total > 0 ? total - 1 : 0; v >= 10; v /= 10) ++width;
    if (width < 3) width = 3;
    std::string digits = std::to_string(index);
    return std::string(prefix) + std::string(width - digits.size(), '0') + digits;
}

} // namespace detail

inline SynthData generate(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const std::size_t n_models = cfg.n_models();
    const std::size_t d = cfg.latent_dim;

    SynthData data;
    data.ability = Matrix(n_models, d);
    data.difficulty = Matrix(cfg.n_instances, d);
    auto& set = data.observations;

    // Root ability scale sets the logit spread (and with it how discriminable
    // instances are) independent of the latent dimension.
    const double root_sigma = 3.0 / std::sqrt(static_cast<double>(d));
    const double kRootSizes[4] = {1.5, 3.0, 7.0, 14.0};

    for (std::size_t r = 0; r < cfg.n_roots; ++r) {
        ModelRecord m;
        m.model_id = detail::padded_id("m", r, n_models);
        m.architecture_type = "arch_" + std::to_string(r % 8);
        m.model_type = "other";
        m.parameter_size = kRootSizes[r % 4];
        set.models.push_back(std::move(m));
        for (std::size_t c = 0; c < d; ++c) data.ability.at(r, c) = rng.gaussian(0.0, root_sigma);
    }

    auto draw_parent = [&](std::size_t existing, std::size_t exclude) {
        std::size_t v = exclude;
        while (v == exclude) v = static_cast<std::size_t>(rng.below(existing));
        return v;
    };

    for (std::size_t g = 0; g < cfg.generations; ++g) {
        for (std::size_t k = 0; k < cfg.children_per_generation; ++k) {
            const std::size_t id = set.models.size();
            const std::size_t parent = draw_parent(id, id);
            const bool merged = rng.uniform() < cfg.merge_fraction && id >= 2;
            ModelRecord m;
            m.model_id = detail::padded_id("m", id, n_models);
            m.architecture_type = set.models[parent].architecture_type;
            if (merged) {
                const std::size_t second = draw_parent(id, parent);
                m.model_type = "merged";
                m.parents = {set.models[parent].model_id, set.models[second].model_id};
                m.parameter_size = 0.5 * (set.models[parent].parameter_size.value_or(1.0) +
                                          set.models[second].parameter_size.value_or(1.0));
                for (std::size_t c = 0; c < d; ++c)
                    data.ability.at(id, c) =
                        0.5 * (data.ability.at(parent, c) + data.ability.at(second, c)) +
                        rng.gaussian(0.0, cfg.drift_sigma);
            } else {
                m.model_type = "finetuned";
                m.parents = {set.models[parent].model_id};
                m.parameter_size = set.models[parent].parameter_size;
                // optionally tag the upstream base as well (ability unaffected)
                if (!set.models[parent].parents.empty() &&
                    rng.uniform() < cfg.base_tag_fraction)
                    m.parents.push_back(set.models[parent].parents[0]);
                for (std::size_t c = 0; c < d; ++c)
                    data.ability.at(id, c) =
                        data.ability.at(parent, c) + rng.gaussian(0.0, cfg.drift_sigma);
            }
            set.models.push_back(std::move(m));
        }
    }

    // Benchmarks get distinct difficulty centers so per-benchmark skill
    // profiles differ across models.
    Matrix bench_center(cfg.n_benchmarks, d);
    for (std::size_t b = 0; b < cfg.n_benchmarks; ++b)
        for (std::size_t c = 0; c < d; ++c) bench_center.at(b, c) = rng.gaussian(0.0, 1.0);

    for (std::size_t i = 0; i < cfg.n_instances; ++i) {
        const std::size_t b = i * cfg.n_benchmarks / cfg.n_instances;
        InstanceRecord r;
        r.instance_id = detail::padded_id("i", i, cfg.n_instances);
        r.benchmark_id = "bench_" + std::to_string(b);
        std::vector<double> vec(d);
        for (std::size_t c = 0; c < d; ++c) {
            vec[c] = bench_center.at(b, c) + rng.gaussian(0.0, 0.5);
            data.difficulty.at(i, c) = vec[c];
        }
        r.embedding = std::move(vec);
        set.instances.push_back(std::move(r));
    }

    for (std::size_t u = 0; u < n_models; ++u) {
        for (std::size_t i = 0; i < cfg.n_instances; ++i) {
            const double p = sigmoid(dot(data.ability.row(u), data.difficulty.row(i), d));
            Observation o;
            o.model_id = set.models[u].model_id;
            o.instance_id = set.instances[i].instance_id;
            o.score = rng.uniform() < p ? 1 : 0;
            set.observations.push_back(std::move(o));
        }
    }

    set.finalize();
    return data;
}

// True success probability of model u on instance i under the generator.
inline double synth_true_probability(const SynthData& data, std::size_t u, std::size_t i) {
    return sigmoid(dot(data.ability.row(u), data.difficulty.row(i), data.ability.cols));
}

// Writes the three dataset files plus a ground-truth sidecar.
inline void write_synth_files(const SynthData& data, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const auto path = [&](const char* name) {
        return (std::filesystem::path(dir) / name).string();
    };
    save_dataset(data.observations, path("models.jsonl"), path("instances.jsonl"),
                 path("observations.jsonl"));
    nlohmann::json truth;
    for (std::size_t u = 0; u < data.observations.n_models(); ++u) {
        std::vector<double> v(data.ability.row(u), data.ability.row(u) + data.ability.cols);
        truth["model_ability"][data.observations.models[u].model_id] = v;
    }
    for (std::size_t i = 0; i < data.observations.n_instances(); ++i) {
        std::vector<double> v(data.difficulty.row(i), data.difficulty.row(i) + data.difficulty.cols);
        truth["instance_difficulty"][data.observations.instances[i].instance_id] = v;
    }
    std::ofstream out(path("ground_truth.json"));
    if (!out) throw std::runtime_error("cannot write ground truth file");
    out << truth.dump(2) << '\n';
}

} // namespace lineage
