#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lineage/dataset.hpp"
#include "lineage/io.hpp"

namespace lineage {

class DegenerateLabels : public std::runtime_error {
public:
    explicit DegenerateLabels(const std::string& what) : std::runtime_error(what) {}
};

// AUC-ROC by the Mann-Whitney rank statistic; tied predictions contribute 1/2.
inline double auc_roc(const std::vector<double>& preds, const std::vector<int>& labels) {
    if (preds.size() != labels.size())
        throw std::invalid_argument("auc_roc: size mismatch");
    std::size_t n_pos = 0, n_neg = 0;
    for (int y : labels) (y != 0 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0)
        throw DegenerateLabels("auc_roc: both classes must be present");

    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return preds[a] < preds[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && preds[order[j]] == preds[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] != 0) rank_sum_pos += avg_rank;
        i = j;
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

// Sample Pearson correlation; nullopt when either argument has zero variance.
inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: size mismatch");
    if (x.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

struct BenchmarkEval {
    std::optional<double> auc;
    std::optional<double> pearson;
    std::size_t n_pairs = 0;
    std::size_t n_models = 0;
};

struct EvalReport {
    std::string method;
    std::string split;
    std::map<std::string, BenchmarkEval> per_benchmark;
    BenchmarkEval overall;                       // pearson here is the micro variant
    std::optional<double> overall_pearson_macro; // mean of defined per-benchmark r
    std::size_t degenerate_auc = 0;
    std::size_t degenerate_pearson = 0;
};

using Predictor = std::function<double(std::size_t, std::size_t)>;

// Scores a predictor on the observations of one split. AUC runs over
// instance-level pairs; Pearson correlates per-model mean predictions with
// per-model mean true scores, per benchmark and pooled.
inline EvalReport evaluate(const Predictor& predict, const ObservationSet& obs, Split target,
                           const std::string& method_label = "") {
    struct ModelAgg {
        double pred_sum = 0.0;
        double true_sum = 0.0;
        std::size_t count = 0;
    };
    struct BenchAgg {
        std::vector<double> preds;
        std::vector<int> labels;
        std::map<std::size_t, ModelAgg> by_model;
    };
    std::map<std::string, BenchAgg> bench;
    std::map<std::size_t, ModelAgg> overall_by_model;
    std::vector<double> all_preds;
    std::vector<int> all_labels;

    for (const auto& t : obs.triples) {
        if (obs.split[t.model] != target) continue;
        const double p = predict(t.model, t.instance);
        const int y = t.score > 0.5 ? 1 : 0;
        auto& b = bench[obs.instances[t.instance].benchmark_id];
        b.preds.push_back(p);
        b.labels.push_back(y);
        auto& bm = b.by_model[t.model];
        bm.pred_sum += p;
        bm.true_sum += t.score;
        bm.count += 1;
        auto& om = overall_by_model[t.model];
        om.pred_sum += p;
        om.true_sum += t.score;
        om.count += 1;
        all_preds.push_back(p);
        all_labels.push_back(y);
    }

    EvalReport report;
    report.method = method_label;
    report.split = to_string(target);

    auto model_means = [](const std::map<std::size_t, ModelAgg>& agg,
                          std::vector<double>& mp, std::vector<double>& mt) {
        for (const auto& [u, a] : agg) {
            mp.push_back(a.pred_sum / static_cast<double>(a.count));
            mt.push_back(a.true_sum / static_cast<double>(a.count));
        }
    };

    std::vector<double> macro_rs;
    for (auto& [name, b] : bench) {
        BenchmarkEval e;
        e.n_pairs = b.preds.size();
        e.n_models = b.by_model.size();
        try {
            e.auc = auc_roc(b.preds, b.labels);
        } catch (const DegenerateLabels&) {
            ++report.degenerate_auc;
        }
        std::vector<double> mp, mt;
        model_means(b.by_model, mp, mt);
        if (mp.size() >= 2) {
            e.pearson = pearson(mp, mt);
            if (e.pearson)
                macro_rs.push_back(*e.pearson);
            else
                ++report.degenerate_pearson;
        } else {
            ++report.degenerate_pearson;
        }
        report.per_benchmark.emplace(name, std::move(e));
    }

    report.overall.n_pairs = all_preds.size();
    report.overall.n_models = overall_by_model.size();
    if (!all_preds.empty()) {
        try {
            report.overall.auc = auc_roc(all_preds, all_labels);
        } catch (const DegenerateLabels&) {
            ++report.degenerate_auc;
        }
        std::vector<double> mp, mt;
        model_means(overall_by_model, mp, mt);
        if (mp.size() >= 2) report.overall.pearson = pearson(mp, mt);
    }
    if (!macro_rs.empty()) {
        double s = 0.0;
        for (double r : macro_rs) s += r;
        report.overall_pearson_macro = s / static_cast<double>(macro_rs.size());
    }
    return report;
}

inline nlohmann::json eval_report_to_json(const EvalReport& r) {
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    nlohmann::json j;
    j["method"] = r.method;
    j["split"] = r.split;
    nlohmann::json per;
    for (const auto& [name, e] : r.per_benchmark) {
        per[name] = {{"auc", opt(e.auc)},
                     {"pearson", opt(e.pearson)},
                     {"n_pairs", e.n_pairs},
                     {"n_models", e.n_models}};
    }
    j["per_benchmark"] = per;
    j["overall"] = {{"auc", opt(r.overall.auc)},
                    {"pearson_micro", opt(r.overall.pearson)},
                    {"pearson_macro", opt(r.overall_pearson_macro)},
                    {"n_pairs", r.overall.n_pairs},
                    {"n_models", r.overall.n_models}};
    j["degenerate_auc"] = r.degenerate_auc;
    j["degenerate_pearson"] = r.degenerate_pearson;
    return j;
}

// Plot-ready long format: benchmark,method,metric,value.
inline std::string eval_report_to_csv(const EvalReport& r) {
    std::string out = "benchmark,method,metric,value\n";
    auto val = [](const std::optional<double>& v) { return v ? fmt_g(*v) : std::string("nan"); };
    for (const auto& [name, e] : r.per_benchmark) {
        out += name + "," + r.method + ",auc," + val(e.auc) + "\n";
        out += name + "," + r.method + ",pearson," + val(e.pearson) + "\n";
    }
    out += "overall," + r.method + ",auc," + val(r.overall.auc) + "\n";
    out += "overall," + r.method + ",pearson_micro," + val(r.overall.pearson) + "\n";
    out += "overall," + r.method + ",pearson_macro," + val(r.overall_pearson_macro) + "\n";
    return out;
}

} // namespace lineage
