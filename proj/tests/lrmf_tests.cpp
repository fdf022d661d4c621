#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lineage/checkpoint.hpp"
#include "lineage/lrmf.hpp"
#include "test_util.hpp"

using namespace lineage;

namespace {

ObservationSet make_obs(std::size_t n_models, std::size_t n_instances,
                        const std::vector<std::tuple<std::size_t, std::size_t, int>>& obs,
                        const std::vector<Split>& split = {}) {
    ObservationSet set;
    for (std::size_t u = 0; u < n_models; ++u) {
        ModelRecord m;
        m.model_id = "m" + std::to_string(u);
        m.architecture_type = "a";
        m.model_type = "other";
        set.models.push_back(m);
    }
    for (std::size_t i = 0; i < n_instances; ++i)
        set.instances.push_back({"i" + std::to_string(i), "b", std::nullopt});
    for (const auto& [u, i, z] : obs)
        set.observations.push_back({"m" + std::to_string(u), "i" + std::to_string(i), z});
    set.finalize();
    if (!split.empty()) set.split = split;
    return set;
}

Laplacian empty_lap(std::size_t n, const char* prefix) {
    Graph g;
    for (std::size_t i = 0; i < n; ++i) g.node_ids.push_back(prefix + std::to_string(i));
    return laplacian(g);
}

LrmfModel make_model(std::size_t n_models, std::size_t n_instances, std::size_t dim,
                     TrainConfig cfg = {}) {
    cfg.latent_dim = dim;
    LrmfModel m;
    m.n_models = n_models;
    m.n_instances = n_instances;
    m.config = cfg;
    m.params.assign((n_models + n_instances) * dim, 0.0);
    return m;
}

void randomize(LrmfModel& m, Rng& rng, double scale = 0.5) {
    for (auto& p : m.params) p = rng.gaussian(0.0, scale);
}

Graph random_graph(Rng& rng, std::size_t n, double p, const char* prefix) {
    Graph g;
    for (std::size_t i = 0; i < n; ++i) g.node_ids.push_back(prefix + std::to_string(i));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.uniform() < p) g.add_edge(i, j);
    g.normalize();
    return g;
}

// Independent scalar-loop objective: plain exp/log, dense Laplacian trace.
double objective_oracle(const LrmfModel& m, const ObservationSet& obs, const Graph& gm,
                        const Graph& gx) {
    const std::size_t d = m.config.latent_dim;
    double bce = 0.0;
    std::size_t count = 0;
    for (const auto& t : obs.triples) {
        if (obs.split[t.model] != Split::train) continue;
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c)
            s += m.model_row(t.model)[c] * m.instance_row(t.instance)[c];
        double p = 1.0 / (1.0 + std::exp(-s));
        if (p < 1e-12) p = 1e-12;
        if (p > 1.0 - 1e-12) p = 1.0 - 1e-12;
        bce -= t.score * std::log(p) + (1.0 - t.score) * std::log(1.0 - p);
        ++count;
    }
    bce /= static_cast<double>(count);
    double l2 = 0.0;
    for (double p : m.params) l2 += p * p;
    l2 *= m.config.lambda_l2;
    auto half_sum = [&](const Graph& g, bool model_side) {
        double total = 0.0;
        for (std::size_t u = 0; u < g.n_nodes(); ++u) {
            for (std::size_t v = 0; v < g.n_nodes(); ++v) {
                if (!g.has_edge(u, v) || u == v) continue;
                const double* a = model_side ? m.model_row(u) : m.instance_row(u);
                const double* b = model_side ? m.model_row(v) : m.instance_row(v);
                for (std::size_t c = 0; c < d; ++c) total += 0.5 * (a[c] - b[c]) * (a[c] - b[c]);
            }
        }
        return total;
    };
    return bce + l2 + m.config.lambda_model * half_sum(gm, true) +
           m.config.lambda_instance * half_sum(gx, false);
}

// Central finite differences against the flat analytic gradient.
template <typename ObjFn>
void check_gradient(std::vector<double>& params, const std::vector<double>& analytic, ObjFn&& obj,
                    double tol = 1e-4) {
    REQUIRE(params.size() == analytic.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double orig = params[k];
        const double h = 1e-6 * std::max(1.0, std::abs(orig));
        params[k] = orig + h;
        const double up = obj();
        params[k] = orig - h;
        const double down = obj();
        params[k] = orig;
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(analytic[k]), 1e-2});
        CHECK(std::abs(fd - analytic[k]) / denom <= tol);
    }
}

} // namespace

TEST_CASE("predict applies the sigmoid link") {
    LrmfModel m = make_model(2, 2, 1);
    CHECK(m.predict(0, 0) == 0.5);  // zero embedding

    m.mutable_model_row(1)[0] = std::log(3.0);
    m.mutable_instance_row(1)[0] = 1.0;
    CHECK(m.predict(1, 1) == doctest::Approx(0.75).epsilon(1e-12));

    CHECK_THROWS_AS(m.predict(2, 0), std::out_of_range);
    CHECK_THROWS_AS(m.predict(0, 2), std::out_of_range);

    Rng rng(3);
    LrmfModel big = make_model(5, 5, 8);
    randomize(big, rng, 2.0);
    for (std::size_t u = 0; u < 5; ++u)
        for (std::size_t i = 0; i < 5; ++i) {
            const double p = big.predict(u, i);
            CHECK(p > 0.0);
            CHECK(p < 1.0);
        }
    CHECK(sigmoid(1000.0) == 1.0);  // clamped exponent, no overflow
    CHECK(sigmoid(-1000.0) == doctest::Approx(0.0));
}

TEST_CASE("objective at zero embeddings with balanced labels is ln 2") {
    const ObservationSet obs = make_obs(2, 2, {{0, 0, 1}, {0, 1, 0}, {1, 0, 0}, {1, 1, 1}});
    LrmfModel m = make_model(2, 2, 3);
    const auto parts = objective(m, obs, empty_lap(2, "m"), empty_lap(2, "i"));
    CHECK(parts.bce == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(parts.l2 == 0.0);
    CHECK(parts.lap_model == 0.0);
    CHECK(parts.lap_instance == 0.0);
    CHECK(parts.total() == parts.bce + parts.l2 + parts.lap_model + parts.lap_instance);
}

TEST_CASE("objective clamps perfect predictions instead of overflowing") {
    const ObservationSet obs = make_obs(1, 1, {{0, 0, 1}});
    LrmfModel m = make_model(1, 1, 1);
    m.mutable_model_row(0)[0] = 100.0;
    m.mutable_instance_row(0)[0] = 1.0;
    const auto parts = objective(m, obs, empty_lap(1, "m"), empty_lap(1, "i"));
    CHECK(parts.bce > 0.0);
    CHECK(parts.bce < 1.2e-11);
}

TEST_CASE("objective rejects an empty observed set") {
    const ObservationSet obs = make_obs(2, 2, {{0, 0, 1}}, {Split::test, Split::test});
    LrmfModel m = make_model(2, 2, 2);
    CHECK_THROWS_AS(objective(m, obs, empty_lap(2, "m"), empty_lap(2, "i")),
                    std::invalid_argument);
}

TEST_CASE("objective matches an independently coded scalar-loop oracle") {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::tuple<std::size_t, std::size_t, int>> triples;
        for (std::size_t u = 0; u < 5; ++u)
            for (std::size_t i = 0; i < 4; ++i)
                if (rng.uniform() < 0.8)
                    triples.push_back({u, i, rng.uniform() < 0.5 ? 1 : 0});
        if (triples.empty()) triples.push_back({0, 0, 1});
        const ObservationSet obs = make_obs(5, 4, triples);
        TrainConfig cfg;
        cfg.latent_dim = 3;
        cfg.lambda_l2 = 1e-3;
        cfg.lambda_model = 0.05;
        cfg.lambda_instance = 0.02;
        LrmfModel m = make_model(5, 4, 3, cfg);
        randomize(m, rng);
        const Graph gm = random_graph(rng, 5, 0.5, "m");
        const Graph gx = random_graph(rng, 4, 0.5, "i");
        const auto parts = objective(m, obs, laplacian(gm), laplacian(gx));
        CHECK(parts.total() ==
              doctest::Approx(objective_oracle(m, obs, gm, gx)).epsilon(1e-12));
    }
}

TEST_CASE("gradient of a single half-confident observation is -z/2 times x") {
    const ObservationSet obs = make_obs(1, 1, {{0, 0, 1}});
    TrainConfig cfg;
    cfg.latent_dim = 2;
    cfg.lambda_l2 = 0.0;
    cfg.lambda_model = 0.0;
    cfg.lambda_instance = 0.0;
    LrmfModel m = make_model(1, 1, 2, cfg);
    m.mutable_instance_row(0)[0] = 1.0;
    m.mutable_instance_row(0)[1] = 2.0;
    const auto [dm, dx] = gradients(m, obs, empty_lap(1, "m"), empty_lap(1, "i"));
    CHECK(dm.at(0, 0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(dm.at(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(dx.at(0, 0) == 0.0);  // model row is zero
}

TEST_CASE("edgeless graphs contribute exactly zero Laplacian gradient") {
    Rng rng(17);
    const ObservationSet obs = make_obs(3, 3, {{0, 0, 1}, {1, 1, 0}, {2, 2, 1}});
    TrainConfig cfg;
    cfg.latent_dim = 2;
    cfg.lambda_model = 5.0;
    cfg.lambda_instance = 5.0;
    cfg.lambda_l2 = 0.0;
    LrmfModel with_reg = make_model(3, 3, 2, cfg);
    randomize(with_reg, rng);
    LrmfModel without_reg = with_reg;
    without_reg.config.lambda_model = 0.0;
    without_reg.config.lambda_instance = 0.0;
    const auto [dm1, dx1] = gradients(with_reg, obs, empty_lap(3, "m"), empty_lap(3, "i"));
    const auto [dm2, dx2] = gradients(without_reg, obs, empty_lap(3, "m"), empty_lap(3, "i"));
    CHECK(dm1.data == dm2.data);
    CHECK(dx1.data == dx2.data);
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(2025);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n_m = 3 + rng.below(4);
        const std::size_t n_x = 3 + rng.below(4);
        const std::size_t d = 2 + rng.below(3);
        std::vector<std::tuple<std::size_t, std::size_t, int>> triples;
        for (std::size_t u = 0; u < n_m; ++u)
            for (std::size_t i = 0; i < n_x; ++i)
                if (rng.uniform() < 0.7)
                    triples.push_back({u, i, rng.uniform() < 0.5 ? 1 : 0});
        if (triples.empty()) triples.push_back({0, 0, 1});
        const ObservationSet obs = make_obs(n_m, n_x, triples);
        TrainConfig cfg;
        cfg.latent_dim = d;
        cfg.lambda_l2 = trial % 2 ? 1e-3 : 0.0;
        cfg.lambda_model = trial % 3 ? 0.03 : 0.0;
        cfg.lambda_instance = 0.01;
        LrmfModel m = make_model(n_m, n_x, d, cfg);
        randomize(m, rng);
        const Laplacian lm = laplacian(random_graph(rng, n_m, 0.5, "m"));
        const Laplacian lx = laplacian(random_graph(rng, n_x, 0.5, "i"));

        const auto [dm, dx] = gradients(m, obs, lm, lx);
        std::vector<double> flat = dm.data;
        flat.insert(flat.end(), dx.data.begin(), dx.data.end());
        check_gradient(m.params, flat, [&]() { return objective(m, obs, lm, lx).total(); });
    }
}

TEST_CASE("adam step: zero gradient leaves parameters unchanged") {
    Adam adam(3, AdamConfig{});
    std::vector<double> params{1.0, -2.0, 0.5};
    const std::vector<double> before = params;
    adam.step(params, {0.0, 0.0, 0.0});
    CHECK(params == before);
}

TEST_CASE("adam step: unit gradient from fresh state moves by ~lr") {
    Adam adam(1, AdamConfig{3e-3, 0.9, 0.999, 1e-8});
    std::vector<double> params{1.0};
    adam.step(params, {1.0});
    const double expected = 1.0 - 3e-3 * (1.0 / (1.0 + 1e-8));
    CHECK(params[0] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("training fits a rank-1 separable matrix to train AUC 1") {
    // labels from the sign pattern of an outer product
    const double s[4] = {-2, -1, 1, 2};
    std::vector<std::tuple<std::size_t, std::size_t, int>> triples;
    for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t i = 0; i < 4; ++i)
            triples.push_back({u, i, s[u] * s[i] > 0 ? 1 : 0});
    const ObservationSet obs = make_obs(4, 4, triples);
    TrainConfig cfg;
    cfg.latent_dim = 4;
    cfg.lambda_model = 0.0;
    cfg.lambda_instance = 0.0;
    cfg.max_epochs = 2000;
    cfg.patience = 2000;
    cfg.seed = 1;
    const LrmfModel model = train(obs, empty_lap(4, "m"), empty_lap(4, "i"), cfg);
    std::vector<double> preds;
    std::vector<int> labels;
    for (const auto& t : obs.triples) {
        preds.push_back(model.predict(t.model, t.instance));
        labels.push_back(t.score > 0.5 ? 1 : 0);
    }
    CHECK(auc_roc(preds, labels) == 1.0);
    CHECK(model.training_log.size() <= 2000);
}

TEST_CASE("huge lineage penalty pulls connected rows together") {
    const ObservationSet obs = make_obs(2, 2, {{0, 0, 1}, {0, 1, 0}});
    Graph gm;
    gm.node_ids = {"m0", "m1"};
    gm.add_edge(0, 1);
    gm.normalize();
    TrainConfig cfg;
    cfg.latent_dim = 4;
    cfg.lambda_model = 1e3;
    cfg.lambda_instance = 0.0;
    cfg.max_epochs = 3000;
    cfg.patience = 3000;
    cfg.seed = 2;
    const LrmfModel model = train(obs, laplacian(gm), empty_lap(2, "i"), cfg);
    double dist2 = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
        const double d = model.model_row(0)[c] - model.model_row(1)[c];
        dist2 += d * d;
    }
    CHECK(std::sqrt(dist2) < 1e-2);
}

TEST_CASE("early stopping keeps the best-epoch parameters") {
    Rng rng(6);
    std::vector<std::tuple<std::size_t, std::size_t, int>> triples;
    for (std::size_t u = 0; u < 8; ++u)
        for (std::size_t i = 0; i < 10; ++i)
            triples.push_back({u, i, rng.uniform() < 0.4 + 0.05 * u ? 1 : 0});
    std::vector<Split> split(8, Split::train);
    split[6] = Split::dev;
    split[7] = Split::test;
    const ObservationSet obs = make_obs(8, 10, triples, split);
    TrainConfig cfg;
    cfg.latent_dim = 3;
    cfg.max_epochs = 400;
    cfg.patience = 3;
    cfg.seed = 9;
    const Laplacian lm = empty_lap(8, "m");
    const Laplacian lx = empty_lap(10, "i");
    const LrmfModel model = train(obs, lm, lx, cfg);
    REQUIRE(model.training_log.size() < 400);  // patience fired
    CHECK(model.training_log.size() == model.best_epoch + cfg.patience);

    TrainConfig replay = cfg;
    replay.max_epochs = model.best_epoch;
    replay.patience = model.best_epoch;
    const LrmfModel truncated = train(obs, lm, lx, replay);
    CHECK(truncated.params == model.params);
}

TEST_CASE("patience 1 with a never-improving dev metric stops at epoch 2") {
    // dev AUC is 1.0 from the first epoch on this fixture, so it can never
    // improve; training must stop one epoch after the best.
    std::vector<std::tuple<std::size_t, std::size_t, int>> triples = {
        {0, 0, 1}, {0, 1, 0}, {1, 0, 1}, {1, 1, 0},  // train
        {2, 0, 1}, {2, 1, 0}};                       // dev
    const ObservationSet obs =
        make_obs(3, 2, triples, {Split::train, Split::train, Split::dev});
    TrainConfig cfg;
    cfg.latent_dim = 2;
    cfg.max_epochs = 100;
    cfg.patience = 1;
    cfg.seed = 1;
    const LrmfModel model = train(obs, empty_lap(3, "m"), empty_lap(2, "i"), cfg);
    REQUIRE(model.training_log[0].dev_metric == 1.0);
    CHECK(model.training_log.size() == 2);
    CHECK(model.best_epoch == 1);

    TrainConfig one = cfg;
    one.max_epochs = 1;
    one.patience = 1;
    const LrmfModel first = train(obs, empty_lap(3, "m"), empty_lap(2, "i"), one);
    CHECK(first.params == model.params);
}

TEST_CASE("training loop surfaces divergence") {
    std::vector<double> params{1.0};
    TrainConfig cfg;
    cfg.max_epochs = 10;
    cfg.patience = 10;
    CHECK_THROWS_AS(
        run_training_loop(
            params, cfg,
            [](std::vector<double>&, Adam&) { return std::numeric_limits<double>::quiet_NaN(); },
            [](const std::vector<double>&) { return 0.0; }),
        TrainingDiverged);
}

TEST_CASE("training is deterministic for a fixed seed") {
    Rng rng(30);
    std::vector<std::tuple<std::size_t, std::size_t, int>> triples;
    for (std::size_t u = 0; u < 5; ++u)
        for (std::size_t i = 0; i < 6; ++i)
            triples.push_back({u, i, rng.uniform() < 0.5 ? 1 : 0});
    const ObservationSet obs = make_obs(5, 6, triples);
    TrainConfig cfg;
    cfg.latent_dim = 3;
    cfg.max_epochs = 150;
    cfg.patience = 150;
    cfg.seed = 77;
    const Laplacian lm = empty_lap(5, "m");
    const Laplacian lx = empty_lap(6, "i");
    const LrmfModel a = train(obs, lm, lx, cfg);
    const LrmfModel b = train(obs, lm, lx, cfg);
    CHECK(a.params == b.params);
    REQUIRE(a.training_log.size() == b.training_log.size());
    for (std::size_t e = 0; e < a.training_log.size(); ++e) {
        CHECK(a.training_log[e].train_loss == b.training_log[e].train_loss);
        CHECK(a.training_log[e].dev_metric == b.training_log[e].dev_metric);
    }
}

TEST_CASE("zero lambdas reduce bit-exactly to plain MF regardless of graphs") {
    Rng rng(31);
    std::vector<std::tuple<std::size_t, std::size_t, int>> triples;
    for (std::size_t u = 0; u < 6; ++u)
        for (std::size_t i = 0; i < 6; ++i)
            triples.push_back({u, i, rng.uniform() < 0.5 ? 1 : 0});
    const ObservationSet obs = make_obs(6, 6, triples);
    TrainConfig cfg;
    cfg.latent_dim = 4;
    cfg.lambda_model = 0.0;
    cfg.lambda_instance = 0.0;
    cfg.max_epochs = 120;
    cfg.patience = 120;
    cfg.seed = 5;
    const Laplacian lm_real = laplacian(random_graph(rng, 6, 0.6, "m"));
    const Laplacian lx_real = laplacian(random_graph(rng, 6, 0.6, "i"));
    const LrmfModel with_graphs = train(obs, lm_real, lx_real, cfg);
    const LrmfModel without_graphs = train(obs, empty_lap(6, "m"), empty_lap(6, "i"), cfg);
    CHECK(with_graphs.params == without_graphs.params);
}

TEST_CASE("stronger lineage penalty weakly decreases the final quadratic") {
    Rng rng(32);
    std::vector<std::tuple<std::size_t, std::size_t, int>> triples;
    for (std::size_t u = 0; u < 8; ++u)
        for (std::size_t i = 0; i < 8; ++i)
            triples.push_back({u, i, rng.uniform() < 0.5 ? 1 : 0});
    const ObservationSet obs = make_obs(8, 8, triples);
    const Graph gm = random_graph(rng, 8, 0.5, "m");
    const Laplacian lm = laplacian(gm);
    const Laplacian lx = empty_lap(8, "i");
    double previous = std::numeric_limits<double>::infinity();
    for (double lambda : {0.0, 1e-4, 1e3}) {
        TrainConfig cfg;
        cfg.latent_dim = 3;
        cfg.lambda_model = lambda;
        cfg.lambda_instance = 0.0;
        cfg.max_epochs = 400;
        cfg.patience = 400;
        cfg.seed = 4;
        const LrmfModel model = train(obs, lm, lx, cfg);
        const double quad = laplacian_quadratic(lm, model.model_embeddings());
        CHECK(quad <= previous + 1e-9);
        previous = quad;
    }
}

TEST_CASE("minibatch mode runs and stays deterministic") {
    Rng rng(33);
    std::vector<std::tuple<std::size_t, std::size_t, int>> triples;
    for (std::size_t u = 0; u < 6; ++u)
        for (std::size_t i = 0; i < 8; ++i)
            triples.push_back({u, i, rng.uniform() < 0.5 ? 1 : 0});
    const ObservationSet obs = make_obs(6, 8, triples);
    TrainConfig cfg;
    cfg.latent_dim = 3;
    cfg.max_epochs = 60;
    cfg.patience = 60;
    cfg.seed = 8;
    cfg.minibatch_size = 16;
    const Laplacian lm = empty_lap(6, "m");
    const Laplacian lx = empty_lap(8, "i");
    const LrmfModel a = train(obs, lm, lx, cfg);
    const LrmfModel b = train(obs, lm, lx, cfg);
    CHECK(a.params == b.params);
    CHECK(std::isfinite(a.training_log.back().train_loss));
}

TEST_CASE("include_dev_in_loss widens the fitted observation set") {
    Rng rng(44);
    std::vector<std::tuple<std::size_t, std::size_t, int>> triples;
    for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t i = 0; i < 6; ++i)
            triples.push_back({u, i, rng.uniform() < 0.5 ? 1 : 0});
    const ObservationSet obs = make_obs(4, 6, triples,
                                        {Split::train, Split::train, Split::dev, Split::test});
    TrainConfig cfg;
    cfg.latent_dim = 3;
    cfg.max_epochs = 50;
    cfg.patience = 50;
    cfg.seed = 12;
    const Laplacian lm = empty_lap(4, "m");
    const Laplacian lx = empty_lap(6, "i");
    const LrmfModel without_dev = train(obs, lm, lx, cfg);
    cfg.include_dev_in_loss = true;
    const LrmfModel with_dev = train(obs, lm, lx, cfg);
    CHECK(without_dev.params != with_dev.params);
    CHECK(obs.fit_triples(true).size() == 18);
    CHECK(obs.fit_triples(false).size() == 12);
}

TEST_CASE("coldstart_embed closed form") {
    TrainConfig cfg;
    cfg.latent_dim = 2;
    cfg.lambda_model = 1e-4;
    cfg.lambda_l2 = 0.0;
    LrmfModel m = make_model(3, 1, 2, cfg);
    m.mutable_model_row(0)[0] = 1.0;
    m.mutable_model_row(0)[1] = 3.0;
    m.mutable_model_row(1)[0] = 5.0;
    m.mutable_model_row(1)[1] = -1.0;

    Graph g;
    g.node_ids = {"m0", "m1", "m2"};
    g.add_edge(0, 2);
    g.add_edge(1, 2);
    g.normalize();
    const Laplacian lap = laplacian(g);

    SUBCASE("two neighbors with zero l2 give the exact mean") {
        bool isolated = true;
        const auto row = coldstart_embed(m, lap, 2, &isolated);
        CHECK(!isolated);
        CHECK(row[0] == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(row[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("single neighbor with tiny l2 lands near the neighbor") {
        Graph single;
        single.node_ids = {"m0", "m1", "m2"};
        single.add_edge(0, 2);
        single.normalize();
        m.config.lambda_l2 = 1e-8;
        const auto row = coldstart_embed(m, laplacian(single), 2);
        CHECK(row[0] == doctest::Approx(1.0).epsilon(1e-3));
        CHECK(row[1] == doctest::Approx(3.0).epsilon(1e-3));
    }
    SUBCASE("isolated model falls back to the zero vector") {
        Graph none;
        none.node_ids = {"m0", "m1", "m2"};
        bool isolated = false;
        const auto row = coldstart_embed(m, laplacian(none), 2, &isolated);
        CHECK(isolated);
        CHECK(row == std::vector<double>{0.0, 0.0});
        m.params.assign(m.params.size(), 0.0);
        for (std::size_t c = 0; c < 2; ++c) m.mutable_model_row(2)[c] = row[c];
        CHECK(m.predict(2, 0) == 0.5);
    }
}

TEST_CASE("closed-form predictor replaces held-out rows") {
    const ObservationSet obs =
        make_obs(3, 2, {{0, 0, 1}, {0, 1, 0}, {1, 0, 1}, {1, 1, 1}},
                 {Split::train, Split::train, Split::test});
    Graph g;
    g.node_ids = {"m0", "m1", "m2"};
    g.add_edge(0, 2);
    g.add_edge(1, 2);
    g.normalize();
    TrainConfig cfg;
    cfg.latent_dim = 2;
    cfg.lambda_l2 = 0.0;
    cfg.lambda_model = 1e-4;
    cfg.coldstart_mode = ColdstartMode::closed_form;
    LrmfModel m = make_model(3, 2, 2, cfg);
    m.mutable_model_row(0)[0] = 2.0;
    m.mutable_model_row(1)[0] = 4.0;
    m.mutable_model_row(2)[0] = 100.0;  // ignored by the closed-form predictor
    m.mutable_instance_row(0)[0] = 1.0;
    const Laplacian lap = laplacian(g);
    const auto predict = make_lrmf_predictor(m, obs, lap);
    CHECK(predict(2, 0) == doctest::Approx(sigmoid(3.0)).epsilon(1e-12));
    CHECK(predict(0, 0) == doctest::Approx(sigmoid(2.0)).epsilon(1e-12));

    m.config.coldstart_mode = ColdstartMode::joint;
    const auto joint = make_lrmf_predictor(m, obs, lap);
    CHECK(joint(2, 0) == doctest::Approx(sigmoid(100.0)));
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    testutil::TempDir dir("ckpt");
    Rng rng(55);
    std::vector<std::tuple<std::size_t, std::size_t, int>> triples;
    for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t i = 0; i < 5; ++i)
            triples.push_back({u, i, rng.uniform() < 0.5 ? 1 : 0});
    const ObservationSet obs = make_obs(4, 5, triples,
                                        {Split::train, Split::train, Split::dev, Split::test});
    TrainConfig cfg;
    cfg.latent_dim = 3;
    cfg.max_epochs = 40;
    cfg.patience = 40;
    cfg.seed = 21;
    const LrmfModel model = train(obs, empty_lap(4, "m"), empty_lap(5, "i"), cfg);
    save_lrmf_checkpoint(dir.file("model.json"), model, obs);
    const LoadedLrmf loaded = load_lrmf_checkpoint(dir.file("model.json"));
    CHECK(loaded.model.params == model.params);
    CHECK(loaded.model.config.latent_dim == 3);
    CHECK(loaded.model.config.seed == 21);
    CHECK(loaded.model.best_epoch == model.best_epoch);
    CHECK(loaded.meta.split == obs.split);
    CHECK(loaded.meta.model_ids == std::vector<std::string>{"m0", "m1", "m2", "m3"});
    REQUIRE(loaded.model.training_log.size() == model.training_log.size());
    for (std::size_t e = 0; e < model.training_log.size(); ++e)
        CHECK(loaded.model.training_log[e].train_loss == model.training_log[e].train_loss);
}
