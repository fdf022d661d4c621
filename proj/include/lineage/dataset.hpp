#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "lineage/math.hpp"

namespace lineage {

enum class Split { train, dev, test };

inline std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        default: return "test";
    }
}

inline Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "dev") return Split::dev;
    if (s == "test") return Split::test;
    throw std::invalid_argument("unknown split: " + s);
}

struct ModelRecord {
    std::string model_id;
    std::string architecture_type;
    std::string model_type;  // finetuned | merged | other
    std::optional<double> parameter_size;  // billions; absent = unknown
    std::vector<std::string> parents;

    bool operator==(const ModelRecord&) const = default;
};

struct InstanceRecord {
    std::string instance_id;
    std::string benchmark_id;
    std::optional<std::vector<double>> embedding;

    bool operator==(const InstanceRecord&) const = default;
};

struct Observation {
    std::string model_id;
    std::string instance_id;
    int score = 0;  // 0 or 1

    bool operator==(const Observation&) const = default;
};

class DatasetError : public std::runtime_error {
public:
    explicit DatasetError(const std::string& what) : std::runtime_error(what) {}
};

// A (model index, instance index, score) triple resolved against the record
// tables; the working form of an observation.
struct ObsTriple {
    std::uint32_t model = 0;
    std::uint32_t instance = 0;
    double score = 0.0;
};

struct ObservationSet {
    std::vector<ModelRecord> models;
    std::vector<InstanceRecord> instances;
    std::vector<Observation> observations;
    std::vector<Split> split;  // per model index; defaults to train

    std::unordered_map<std::string, std::size_t> model_index;
    std::unordered_map<std::string, std::size_t> instance_index;
    std::vector<ObsTriple> triples;  // parallel to observations

    std::size_t n_models() const { return models.size(); }
    std::size_t n_instances() const { return instances.size(); }

    // Cross-references records, rejects duplicates, fills the index tables.
    void finalize() {
        model_index.clear();
        instance_index.clear();
        triples.clear();
        for (std::size_t u = 0; u < models.size(); ++u) {
            const auto& m = models[u];
            if (m.model_id.empty()) throw DatasetError("empty model_id");
            if (!model_index.emplace(m.model_id, u).second)
                throw DatasetError("duplicate model_id '" + m.model_id + "'");
            if (m.model_type != "finetuned" && m.model_type != "merged" && m.model_type != "other")
                throw DatasetError("model '" + m.model_id + "': model_type must be finetuned|merged|other");
            if (m.parameter_size && *m.parameter_size <= 0.0)
                throw DatasetError("model '" + m.model_id + "': parameter_size must be positive");
            for (const auto& p : m.parents)
                if (p == m.model_id)
                    throw DatasetError("model '" + m.model_id + "' lists itself as a parent");
        }
        std::size_t embedding_dim = 0;
        for (std::size_t i = 0; i < instances.size(); ++i) {
            const auto& r = instances[i];
            if (r.instance_id.empty()) throw DatasetError("empty instance_id");
            if (r.benchmark_id.empty())
                throw DatasetError("instance '" + r.instance_id + "': benchmark_id must be non-empty");
            if (!instance_index.emplace(r.instance_id, i).second)
                throw DatasetError("duplicate instance_id '" + r.instance_id + "'");
            if (r.embedding) {
                if (embedding_dim == 0) embedding_dim = r.embedding->size();
                if (r.embedding->empty() || r.embedding->size() != embedding_dim)
                    throw DatasetError("instance '" + r.instance_id + "': embedding dimension mismatch");
            }
        }
        std::unordered_set<std::uint64_t> seen;
        seen.reserve(observations.size() * 2);
        triples.reserve(observations.size());
        for (const auto& o : observations) {
            auto mu = model_index.find(o.model_id);
            if (mu == model_index.end())
                throw DatasetError("observation references unknown model '" + o.model_id + "'");
            auto xi = instance_index.find(o.instance_id);
            if (xi == instance_index.end())
                throw DatasetError("observation references unknown instance '" + o.instance_id + "'");
            if (o.score != 0 && o.score != 1)
                throw DatasetError("observation (" + o.model_id + ", " + o.instance_id + "): score must be 0 or 1");
            const std::uint64_t key =
                (static_cast<std::uint64_t>(mu->second) << 32) | static_cast<std::uint64_t>(xi->second);
            if (!seen.insert(key).second)
                throw DatasetError("duplicate observation for (" + o.model_id + ", " + o.instance_id + ")");
            triples.push_back({static_cast<std::uint32_t>(mu->second),
                               static_cast<std::uint32_t>(xi->second),
                               static_cast<double>(o.score)});
        }
        if (split.size() != models.size()) split.assign(models.size(), Split::train);
    }

    // Observation triples whose model sits in the fitting set; this is the
    // observed-pair set the BCE loss runs over.
    std::vector<ObsTriple> fit_triples(bool include_dev) const {
        std::vector<ObsTriple> out;
        for (const auto& t : triples) {
            const Split s = split[t.model];
            if (s == Split::train || (include_dev && s == Split::dev)) out.push_back(t);
        }
        return out;
    }

    std::vector<ObsTriple> split_triples(Split target) const {
        std::vector<ObsTriple> out;
        for (const auto& t : triples)
            if (split[t.model] == target) out.push_back(t);
        return out;
    }

    // Sorted unique benchmark ids.
    std::vector<std::string> benchmarks() const {
        std::set<std::string> b;
        for (const auto& r : instances) b.insert(r.benchmark_id);
        return {b.begin(), b.end()};
    }

    std::vector<std::size_t> models_in_split(Split target) const {
        std::vector<std::size_t> out;
        for (std::size_t u = 0; u < models.size(); ++u)
            if (split[u] == target) out.push_back(u);
        return out;
    }
};

namespace detail {

inline nlohmann::json parse_jsonl_line(const std::string& path, std::size_t line_no,
                                        const std::string& line) {
    try {
        return nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError(path + ":" + std::to_string(line_no) + ": parse error: " + e.what());
    }
}

template <typename Fn>
void for_each_jsonl(const std::string& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open '" + path + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        fn(line_no, parse_jsonl_line(path, line_no, line));
    }
}

inline std::string require_string(const nlohmann::json& j, const char* key,
                                  const std::string& path, std::size_t line_no) {
    if (!j.contains(key) || !j[key].is_string())
        throw DatasetError(path + ":" + std::to_string(line_no) + ": missing string field '" + key + "'");
    return j[key].get<std::string>();
}

} // namespace detail

inline ObservationSet load_dataset(const std::string& models_path,
                                   const std::string& instances_path,
                                   const std::string& observations_path) {
    ObservationSet set;
    detail::for_each_jsonl(models_path, [&](std::size_t ln, const nlohmann::json& j) {
        ModelRecord m;
        m.model_id = detail::require_string(j, "model_id", models_path, ln);
        m.architecture_type = detail::require_string(j, "architecture_type", models_path, ln);
        m.model_type = detail::require_string(j, "model_type", models_path, ln);
        if (j.contains("parameter_size") && !j["parameter_size"].is_null()) {
            if (!j["parameter_size"].is_number())
                throw DatasetError(models_path + ":" + std::to_string(ln) + ": parameter_size must be a number");
            m.parameter_size = j["parameter_size"].get<double>();
        }
        if (j.contains("parents")) {
            if (!j["parents"].is_array())
                throw DatasetError(models_path + ":" + std::to_string(ln) + ": parents must be an array");
            for (const auto& p : j["parents"]) m.parents.push_back(p.get<std::string>());
        }
        set.models.push_back(std::move(m));
    });
    detail::for_each_jsonl(instances_path, [&](std::size_t ln, const nlohmann::json& j) {
        InstanceRecord r;
        r.instance_id = detail::require_string(j, "instance_id", instances_path, ln);
        r.benchmark_id = detail::require_string(j, "benchmark_id", instances_path, ln);
        if (j.contains("embedding") && !j["embedding"].is_null()) {
            if (!j["embedding"].is_array())
                throw DatasetError(instances_path + ":" + std::to_string(ln) + ": embedding must be an array");
            r.embedding = j["embedding"].get<std::vector<double>>();
        }
        set.instances.push_back(std::move(r));
    });
    detail::for_each_jsonl(observations_path, [&](std::size_t ln, const nlohmann::json& j) {
        Observation o;
        o.model_id = detail::require_string(j, "model_id", observations_path, ln);
        o.instance_id = detail::require_string(j, "instance_id", observations_path, ln);
        if (!j.contains("score") || !j["score"].is_number_integer())
            throw DatasetError(observations_path + ":" + std::to_string(ln) + ": missing integer field 'score'");
        o.score = j["score"].get<int>();
        set.observations.push_back(std::move(o));
    });
    set.finalize();
    return set;
}

inline void save_dataset(const ObservationSet& set, const std::string& models_path,
                         const std::string& instances_path, const std::string& observations_path) {
    {
        std::ofstream out(models_path);
        if (!out) throw DatasetError("cannot write '" + models_path + "'");
        for (const auto& m : set.models) {
            nlohmann::json j;
            j["model_id"] = m.model_id;
            j["architecture_type"] = m.architecture_type;
            j["model_type"] = m.model_type;
            if (m.parameter_size) j["parameter_size"] = *m.parameter_size;
            j["parents"] = m.parents;
            out << j.dump() << '\n';
        }
    }
    {
        std::ofstream out(instances_path);
        if (!out) throw DatasetError("cannot write '" + instances_path + "'");
        for (const auto& r : set.instances) {
            nlohmann::json j;
            j["instance_id"] = r.instance_id;
            j["benchmark_id"] = r.benchmark_id;
            if (r.embedding) j["embedding"] = *r.embedding;
            out << j.dump() << '\n';
        }
    }
    {
        std::ofstream out(observations_path);
        if (!out) throw DatasetError("cannot write '" + observations_path + "'");
        for (const auto& o : set.observations) {
            nlohmann::json j;
            j["model_id"] = o.model_id;
            j["instance_id"] = o.instance_id;
            j["score"] = o.score;
            out << j.dump() << '\n';
        }
    }
}

// Deterministic model-level split. Sizes are floors of fraction*n with the
// remainder assigned train, then dev, then test.
inline ObservationSet split_models(const ObservationSet& set, double train_frac,
                                   double dev_frac, double test_frac, std::uint64_t seed) {
    if (train_frac <= 0 || dev_frac <= 0 || test_frac <= 0)
        throw std::invalid_argument("split fractions must be positive");
    if (std::abs(train_frac + dev_frac + test_frac - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must sum to 1");
    const std::size_t n = set.models.size();
    std::size_t counts[3] = {
        static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n))),
        static_cast<std::size_t>(std::floor(dev_frac * static_cast<double>(n))),
        static_cast<std::size_t>(std::floor(test_frac * static_cast<double>(n)))};
    std::size_t assigned = counts[0] + counts[1] + counts[2];
    for (std::size_t s = 0; assigned < n; s = (s + 1) % 3) {
        ++counts[s];
        ++assigned;
    }
    if (counts[0] == 0 || counts[1] == 0 || counts[2] == 0)
        throw DatasetError("too few models: every split needs at least one model");

    std::vector<std::size_t> order(n);
    for (std::size_t u = 0; u < n; ++u) order[u] = u;
    Rng rng(seed);
    rng.shuffle(order);

    ObservationSet out = set;
    out.split.assign(n, Split::train);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t k = 0; k < counts[s]; ++k)
            out.split[order[pos++]] = static_cast<Split>(s);
    return out;
}

// Keeps at most t observations per train-split model, chosen as a prefix of a
// single per-model shuffled order so retained sets are nested across t.
inline ObservationSet subsample_observations(const ObservationSet& set, std::size_t t,
                                             std::uint64_t seed) {
    if (t == 0) throw std::invalid_argument("t must be >= 1");
    std::vector<std::vector<std::size_t>> per_model(set.models.size());
    for (std::size_t k = 0; k < set.triples.size(); ++k) {
        const auto& tr = set.triples[k];
        if (set.split[tr.model] == Split::train) per_model[tr.model].push_back(k);
    }
    std::vector<bool> keep(set.observations.size(), true);
    for (std::size_t u = 0; u < per_model.size(); ++u) {
        auto& idxs = per_model[u];
        if (idxs.size() <= t) continue;
        Rng rng(mix_seed(seed, u));
        rng.shuffle(idxs);
        for (std::size_t k = t; k < idxs.size(); ++k) keep[idxs[k]] = false;
    }
    ObservationSet out;
    out.models = set.models;
    out.instances = set.instances;
    out.split = set.split;
    for (std::size_t k = 0; k < set.observations.size(); ++k)
        if (keep[k]) out.observations.push_back(set.observations[k]);
    out.finalize();
    return out;
}

struct CardLineage {
    std::vector<std::string> parents;
    std::string model_type = "other";
};

// Pulls parent links out of model-card metadata: tags prefixed
// base_model:finetune: or base_model:merge: name the parents.
inline CardLineage extract_lineage_from_card(const nlohmann::json& card) {
    static const std::string kFinetune = "base_model:finetune:";
    static const std::string kMerge = "base_model:merge:";
    CardLineage out;
    if (!card.contains("tags") || !card["tags"].is_array()) return out;
    bool merged = false, finetuned = false;
    for (const auto& tag : card["tags"]) {
        if (!tag.is_string()) continue;
        const std::string s = tag.get<std::string>();
        if (s.rfind(kFinetune, 0) == 0) {
            out.parents.push_back(s.substr(kFinetune.size()));
            finetuned = true;
        } else if (s.rfind(kMerge, 0) == 0) {
            out.parents.push_back(s.substr(kMerge.size()));
            merged = true;
        }
    }
    std::sort(out.parents.begin(), out.parents.end());
    out.parents.erase(std::unique(out.parents.begin(), out.parents.end()), out.parents.end());
    if (merged)
        out.model_type = "merged";
    else if (finetuned)
        out.model_type = "finetuned";
    return out;
}

} // namespace lineage
