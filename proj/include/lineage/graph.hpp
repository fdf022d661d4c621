#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lineage/dataset.hpp"
#include "lineage/math.hpp"

namespace lineage {

struct GraphEdge {
    std::size_t a = 0;  // a < b
    std::size_t b = 0;
    double weight = 1.0;
};

inline bool operator<(const GraphEdge& x, const GraphEdge& y) {
    return x.a != y.a ? x.a < y.a : x.b < y.b;
}

// Undirected simple graph over an ordered node-id list.
struct Graph {
    std::vector<std::string> node_ids;
    std::vector<GraphEdge> edges;  // sorted by (a, b), no duplicates, a < b

    std::size_t n_nodes() const { return node_ids.size(); }
    std::size_t n_edges() const { return edges.size(); }

    void add_edge(std::size_t u, std::size_t v, double w = 1.0) {
        if (u == v) throw std::invalid_argument("self-loops are not allowed");
        if (u >= node_ids.size() || v >= node_ids.size())
            throw std::out_of_range("edge endpoint out of range");
        if (u > v) std::swap(u, v);
        edges.push_back({u, v, w});
    }

    // Sorts and deduplicates the edge list (first weight wins).
    void normalize() {
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end(),
                                [](const GraphEdge& x, const GraphEdge& y) {
                                    return x.a == y.a && x.b == y.b;
                                }),
                    edges.end());
    }

    bool has_edge(std::size_t u, std::size_t v) const {
        if (u > v) std::swap(u, v);
        GraphEdge probe{u, v, 0.0};
        auto it = std::lower_bound(edges.begin(), edges.end(), probe);
        return it != edges.end() && it->a == u && it->b == v;
    }

    std::vector<std::vector<std::pair<std::size_t, double>>> adjacency() const {
        std::vector<std::vector<std::pair<std::size_t, double>>> adj(node_ids.size());
        for (const auto& e : edges) {
            adj[e.a].push_back({e.b, e.weight});
            adj[e.b].push_back({e.a, e.weight});
        }
        return adj;
    }
};

struct Laplacian {
    Graph graph;
    std::vector<double> degrees;  // weighted degree per node
};

// Lineage adjacency: one unit-weight edge between a derived model and each of
// its direct parents. Parents missing from the model table are skipped and
// counted.
inline Graph build_lineage_graph(const std::vector<ModelRecord>& models,
                                 std::size_t* missing_parent_count = nullptr) {
    Graph g;
    g.node_ids.reserve(models.size());
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t u = 0; u < models.size(); ++u) {
        g.node_ids.push_back(models[u].model_id);
        index.emplace(models[u].model_id, u);
    }
    std::size_t missing = 0;
    for (std::size_t u = 0; u < models.size(); ++u) {
        for (const auto& p : models[u].parents) {
            auto it = index.find(p);
            if (it == index.end()) {
                ++missing;
                continue;
            }
            g.add_edge(it->second, u);
        }
    }
    g.normalize();
    if (missing_parent_count) *missing_parent_count = missing;
    return g;
}

// Per-node top-k cosine neighbor lists, ties broken by ascending instance_id.
// When `active` is given, inactive nodes select nothing and are never selected.
inline std::vector<std::vector<std::size_t>> knn_neighbor_lists(
    const std::vector<InstanceRecord>& instances, std::size_t k,
    const std::vector<bool>* active = nullptr) {
    const std::size_t n = instances.size();
    if (k == 0) throw std::invalid_argument("k must be positive");
    if (k >= n) throw std::invalid_argument("k must be smaller than the number of instances");

    std::vector<const std::vector<double>*> vecs(n);
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!instances[i].embedding)
            throw DatasetError("instance '" + instances[i].instance_id + "' has no embedding");
        vecs[i] = &*instances[i].embedding;
        norms[i] = std::sqrt(squared_norm(vecs[i]->data(), vecs[i]->size()));
        if (norms[i] == 0.0)
            throw DatasetError("instance '" + instances[i].instance_id +
                               "' has a zero embedding; cosine similarity undefined");
    }

    std::vector<std::size_t> candidates;
    candidates.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (!active || (*active)[i]) candidates.push_back(i);
    if (active && candidates.size() > 0 && candidates.size() <= k)
        throw std::invalid_argument("k must be smaller than the number of active instances");

    std::vector<std::vector<std::size_t>> lists(n);
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i : candidates) {
        scored.clear();
        for (std::size_t j : candidates) {
            if (j == i) continue;
            const double sim =
                dot(vecs[i]->data(), vecs[j]->data(), vecs[i]->size()) / (norms[i] * norms[j]);
            scored.push_back({sim, j});
        }
        auto better = [&](const std::pair<double, std::size_t>& x,
                          const std::pair<double, std::size_t>& y) {
            if (x.first != y.first) return x.first > y.first;
            return instances[x.second].instance_id < instances[y.second].instance_id;
        };
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                          scored.end(), better);
        lists[i].reserve(k);
        for (std::size_t r = 0; r < k; ++r) lists[i].push_back(scored[r].second);
    }
    return lists;
}

// Directed kNN by cosine similarity, symmetrized by union.
inline Graph build_instance_knn_graph(const std::vector<InstanceRecord>& instances, std::size_t k,
                                      const std::vector<bool>* active = nullptr) {
    Graph g;
    g.node_ids.reserve(instances.size());
    for (const auto& r : instances) g.node_ids.push_back(r.instance_id);
    const auto lists = knn_neighbor_lists(instances, k, active);
    for (std::size_t i = 0; i < lists.size(); ++i)
        for (std::size_t j : lists[i]) g.add_edge(i, j);
    g.normalize();
    return g;
}

inline Laplacian laplacian(const Graph& g) {
    Laplacian l;
    l.graph = g;
    l.degrees.assign(g.n_nodes(), 0.0);
    for (const auto& e : g.edges) {
        l.degrees[e.a] += e.weight;
        l.degrees[e.b] += e.weight;
    }
    return l;
}

// Tr(M^T L M) via the equivalent edge-sum: sum over edges of w * |m_u - m_v|^2.
inline double laplacian_quadratic(const Laplacian& l, const ConstMatrixView& emb) {
    if (emb.rows != l.graph.n_nodes())
        throw std::invalid_argument("embedding row count does not match node count");
    double total = 0.0;
    for (const auto& e : l.graph.edges) {
        const double* mu = emb.row(e.a);
        const double* mv = emb.row(e.b);
        double d2 = 0.0;
        for (std::size_t c = 0; c < emb.cols; ++c) {
            const double d = mu[c] - mv[c];
            d2 += d * d;
        }
        total += e.weight * d2;
    }
    return total;
}

inline double laplacian_quadratic(const Laplacian& l, const Matrix& emb) {
    return laplacian_quadratic(l, ConstMatrixView{emb.data.data(), emb.rows, emb.cols});
}

// Removes floor(|fraction|*E) edges (fraction < 0) or adds that many uniformly
// chosen non-edges (fraction > 0). Deterministic per seed.
inline Graph perturb_lineage(const Graph& g, double fraction, std::uint64_t seed) {
    if (fraction < -1.0 || fraction > 1.0)
        throw std::invalid_argument("fraction must lie in [-1, 1]");
    Graph out = g;
    const std::size_t count =
        static_cast<std::size_t>(std::floor(std::abs(fraction) * static_cast<double>(g.n_edges())));
    if (count == 0) return out;
    Rng rng(seed);
    if (fraction < 0) {
        std::vector<std::size_t> order(out.edges.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        std::vector<bool> drop(out.edges.size(), false);
        for (std::size_t i = 0; i < count; ++i) drop[order[i]] = true;
        std::vector<GraphEdge> kept;
        kept.reserve(out.edges.size() - count);
        for (std::size_t i = 0; i < out.edges.size(); ++i)
            if (!drop[i]) kept.push_back(out.edges[i]);
        out.edges = std::move(kept);
    } else {
        const std::size_t n = g.n_nodes();
        const std::size_t max_edges = n * (n - 1) / 2;
        if (g.n_edges() + count > max_edges)
            throw std::invalid_argument("not enough non-edges to add");
        std::set<std::pair<std::size_t, std::size_t>> present;
        for (const auto& e : out.edges) present.insert({e.a, e.b});
        std::size_t added = 0;
        while (added < count) {
            std::size_t u = static_cast<std::size_t>(rng.below(n));
            std::size_t v = static_cast<std::size_t>(rng.below(n));
            if (u == v) continue;
            if (u > v) std::swap(u, v);
            if (!present.insert({u, v}).second) continue;
            out.edges.push_back({u, v, 1.0});
            ++added;
        }
        out.normalize();
    }
    return out;
}

inline void write_graph_csv(const Graph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "node_a,node_b,weight\n";
    for (const auto& e : g.edges)
        out << g.node_ids[e.a] << ',' << g.node_ids[e.b] << ',' << e.weight << '\n';
}

} // namespace lineage
