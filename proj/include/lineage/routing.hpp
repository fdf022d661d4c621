#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lineage/dataset.hpp"
#include "lineage/io.hpp"
#include "lineage/math.hpp"
#include "lineage/metrics.hpp"

namespace lineage {

class MissingTrueScore : public std::runtime_error {
public:
    explicit MissingTrueScore(const std::string& what) : std::runtime_error(what) {}
};

// Outcome of one routing strategy over a fixed candidate pool and instance
// list. Realized scores are the true outcomes of the chosen models.
struct RoutingResult {
    std::string strategy;
    double overall_score = 0.0;
    std::size_t n_instances = 0;
    std::map<std::string, double> per_benchmark_score;
    std::map<std::string, std::size_t> assignment_counts;  // model_id -> count
    std::map<std::string, std::map<std::string, std::size_t>> per_benchmark_counts;
};

namespace detail {

// True-score table for candidates x instances; throws if any pair is missing.
class TruthTable {
public:
    TruthTable(const ObservationSet& obs, const std::vector<std::size_t>& candidates,
               const std::vector<std::size_t>& instance_idx) {
        table_.reserve(obs.triples.size());
        for (const auto& t : obs.triples)
            table_.emplace((static_cast<std::uint64_t>(t.model) << 32) | t.instance, t.score);
        std::string missing;
        std::size_t missing_count = 0;
        for (std::size_t u : candidates) {
            for (std::size_t i : instance_idx) {
                if (table_.count((static_cast<std::uint64_t>(u) << 32) | i)) continue;
                ++missing_count;
                if (missing_count <= 5)
                    missing += " (" + obs.models[u].model_id + ", " +
                               obs.instances[i].instance_id + ")";
            }
        }
        if (missing_count > 0)
            throw MissingTrueScore("missing true scores for " + std::to_string(missing_count) +
                                   " candidate-instance pairs:" + missing +
                                   (missing_count > 5 ? " ..." : ""));
    }

    double at(std::size_t u, std::size_t i) const {
        return table_.at((static_cast<std::uint64_t>(u) << 32) | i);
    }

private:
    std::unordered_map<std::uint64_t, double> table_;
};

inline RoutingResult realize(const ObservationSet& obs, const std::vector<std::size_t>& candidates,
                             const std::vector<std::size_t>& instance_idx,
                             const std::vector<std::size_t>& chosen, const TruthTable& truth,
                             const std::string& label) {
    RoutingResult r;
    r.strategy = label;
    r.n_instances = instance_idx.size();
    std::map<std::string, std::pair<double, std::size_t>> bench_sum;
    double total = 0.0;
    for (std::size_t k = 0; k < instance_idx.size(); ++k) {
        const std::size_t i = instance_idx[k];
        const std::size_t u = candidates[chosen[k]];
        const double z = truth.at(u, i);
        const std::string& bench = obs.instances[i].benchmark_id;
        const std::string& model_id = obs.models[u].model_id;
        total += z;
        auto& bs = bench_sum[bench];
        bs.first += z;
        bs.second += 1;
        r.assignment_counts[model_id] += 1;
        r.per_benchmark_counts[bench][model_id] += 1;
    }
    if (!instance_idx.empty()) r.overall_score = total / static_cast<double>(instance_idx.size());
    for (const auto& [bench, s] : bench_sum)
        r.per_benchmark_score[bench] = s.first / static_cast<double>(s.second);
    return r;
}

} // namespace detail

// Sends each instance to the candidate with the highest predicted score;
// ties go to the lexicographically smallest model_id.
inline RoutingResult route(const Predictor& predict, const ObservationSet& obs,
                           const std::vector<std::size_t>& candidates,
                           const std::vector<std::size_t>& instance_idx,
                           const std::string& label) {
    if (candidates.empty()) throw std::invalid_argument("candidate pool is empty");
    detail::TruthTable truth(obs, candidates, instance_idx);
    std::vector<std::size_t> chosen(instance_idx.size(), 0);
    for (std::size_t k = 0; k < instance_idx.size(); ++k) {
        const std::size_t i = instance_idx[k];
        std::size_t best = 0;
        double best_pred = predict(candidates[0], i);
        for (std::size_t c = 1; c < candidates.size(); ++c) {
            const double p = predict(candidates[c], i);
            if (p > best_pred ||
                (p == best_pred &&
                 obs.models[candidates[c]].model_id < obs.models[candidates[best]].model_id)) {
                best = c;
                best_pred = p;
            }
        }
        chosen[k] = best;
    }
    return detail::realize(obs, candidates, instance_idx, chosen, truth, label);
}

// All instances go to the candidate with the highest true mean, globally or
// per benchmark.
inline RoutingResult best_model_baseline(const ObservationSet& obs,
                                         const std::vector<std::size_t>& candidates,
                                         const std::vector<std::size_t>& instance_idx,
                                         bool per_benchmark = true,
                                         const std::string& label = "best_model") {
    if (candidates.empty()) throw std::invalid_argument("candidate pool is empty");
    detail::TruthTable truth(obs, candidates, instance_idx);

    auto pick_best = [&](const std::vector<std::size_t>& insts) {
        std::size_t best = 0;
        double best_mean = -1.0;
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            double sum = 0.0;
            for (std::size_t i : insts) sum += truth.at(candidates[c], i);
            const double mean = insts.empty() ? 0.0 : sum / static_cast<double>(insts.size());
            if (mean > best_mean ||
                (mean == best_mean &&
                 obs.models[candidates[c]].model_id < obs.models[candidates[best]].model_id)) {
                best = c;
                best_mean = mean;
            }
        }
        return best;
    };

    std::vector<std::size_t> chosen(instance_idx.size(), 0);
    if (!per_benchmark) {
        const std::size_t best = pick_best(instance_idx);
        for (auto& c : chosen) c = best;
    } else {
        std::map<std::string, std::vector<std::size_t>> groups;
        for (std::size_t i : instance_idx) groups[obs.instances[i].benchmark_id].push_back(i);
        std::map<std::string, std::size_t> winner;
        for (const auto& [bench, insts] : groups) winner[bench] = pick_best(insts);
        for (std::size_t k = 0; k < instance_idx.size(); ++k)
            chosen[k] = winner[obs.instances[instance_idx[k]].benchmark_id];
    }
    return detail::realize(obs, candidates, instance_idx, chosen, truth, label);
}

inline RoutingResult random_routing(const ObservationSet& obs,
                                    const std::vector<std::size_t>& candidates,
                                    const std::vector<std::size_t>& instance_idx,
                                    std::uint64_t seed, const std::string& label = "random") {
    if (candidates.empty()) throw std::invalid_argument("candidate pool is empty");
    detail::TruthTable truth(obs, candidates, instance_idx);
    Rng rng(seed);
    std::vector<std::size_t> chosen(instance_idx.size(), 0);
    for (auto& c : chosen) c = static_cast<std::size_t>(rng.below(candidates.size()));
    return detail::realize(obs, candidates, instance_idx, chosen, truth, label);
}

inline std::string routing_scores_csv(const std::vector<RoutingResult>& results) {
    std::string out = "benchmark,strategy,realized_score\n";
    for (const auto& r : results) {
        for (const auto& [bench, score] : r.per_benchmark_score)
            out += bench + "," + r.strategy + "," + fmt_g(score) + "\n";
        out += "overall," + r.strategy + "," + fmt_g(r.overall_score) + "\n";
    }
    return out;
}

inline std::string routing_assignments_csv(const std::vector<RoutingResult>& results) {
    std::string out = "strategy,model_id,count\n";
    for (const auto& r : results)
        for (const auto& [model_id, count] : r.assignment_counts)
            out += r.strategy + "," + model_id + "," + std::to_string(count) + "\n";
    return out;
}

} // namespace lineage
