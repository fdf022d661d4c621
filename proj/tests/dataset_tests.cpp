#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "lineage/dataset.hpp"
#include "test_util.hpp"

using namespace lineage;

namespace {

const char* kModels3 = R"({"model_id":"m1","architecture_type":"a","model_type":"other","parameter_size":7.0,"parents":[]}
{"model_id":"m2","architecture_type":"a","model_type":"finetuned","parameter_size":7.0,"parents":["m1"]}
{"model_id":"m3","architecture_type":"b","model_type":"merged","parents":["m1","m2"]}
)";

const char* kInstances2 = R"({"instance_id":"i1","benchmark_id":"bench_a","embedding":[1.0,0.0]}
{"instance_id":"i2","benchmark_id":"bench_b","embedding":[0.0,1.0]}
)";

const char* kObs6 = R"({"model_id":"m1","instance_id":"i1","score":1}
{"model_id":"m1","instance_id":"i2","score":0}
{"model_id":"m2","instance_id":"i1","score":1}
{"model_id":"m2","instance_id":"i2","score":1}
{"model_id":"m3","instance_id":"i1","score":0}
{"model_id":"m3","instance_id":"i2","score":0}
)";

ObservationSet load_fixture(const testutil::TempDir& dir) {
    return load_dataset(dir.write("models.jsonl", kModels3),
                        dir.write("instances.jsonl", kInstances2),
                        dir.write("observations.jsonl", kObs6));
}

ObservationSet many_models(std::size_t n) {
    ObservationSet set;
    for (std::size_t u = 0; u < n; ++u) {
        ModelRecord m;
        m.model_id = "m" + std::to_string(u);
        m.architecture_type = "a";
        m.model_type = "other";
        set.models.push_back(m);
    }
    set.instances.push_back({"i0", "b", std::nullopt});
    set.finalize();
    return set;
}

} // namespace

TEST_CASE("load_dataset reads a complete 3x2 fixture") {
    testutil::TempDir dir("dataset");
    const ObservationSet set = load_fixture(dir);
    CHECK(set.n_models() == 3);
    CHECK(set.n_instances() == 2);
    CHECK(set.observations.size() == 6);
    CHECK(set.models[2].parents == std::vector<std::string>{"m1", "m2"});
    CHECK(!set.models[2].parameter_size.has_value());
    CHECK(set.model_index.at("m2") == 1);
    CHECK(set.triples[2].model == 1);
    CHECK(set.triples[2].score == 1.0);
}

TEST_CASE("load_dataset rejects dangling references") {
    testutil::TempDir dir("dataset");
    dir.write("models.jsonl", kModels3);
    dir.write("instances.jsonl", kInstances2);
    dir.write("observations.jsonl", R"({"model_id":"ghost","instance_id":"i1","score":1})");
    CHECK_THROWS_WITH_AS(load_dataset(dir.file("models.jsonl"), dir.file("instances.jsonl"),
                                      dir.file("observations.jsonl")),
                         doctest::Contains("ghost"), DatasetError);
}

TEST_CASE("load_dataset rejects duplicate pairs") {
    testutil::TempDir dir("dataset");
    dir.write("models.jsonl", kModels3);
    dir.write("instances.jsonl", kInstances2);
    dir.write("observations.jsonl",
              "{\"model_id\":\"m1\",\"instance_id\":\"i1\",\"score\":1}\n"
              "{\"model_id\":\"m1\",\"instance_id\":\"i1\",\"score\":0}\n");
    CHECK_THROWS_WITH_AS(load_dataset(dir.file("models.jsonl"), dir.file("instances.jsonl"),
                                      dir.file("observations.jsonl")),
                         doctest::Contains("duplicate"), DatasetError);
}

TEST_CASE("load_dataset reports parse errors with line numbers") {
    testutil::TempDir dir("dataset");
    dir.write("models.jsonl", kModels3);
    dir.write("instances.jsonl", kInstances2);
    dir.write("observations.jsonl",
              "{\"model_id\":\"m1\",\"instance_id\":\"i1\",\"score\":1}\nnot json\n");
    CHECK_THROWS_WITH_AS(load_dataset(dir.file("models.jsonl"), dir.file("instances.jsonl"),
                                      dir.file("observations.jsonl")),
                         doctest::Contains(":2:"), DatasetError);
}

TEST_CASE("dataset round-trips through save and load record for record") {
    testutil::TempDir dir("dataset");
    const ObservationSet a = load_fixture(dir);
    save_dataset(a, dir.file("m2.jsonl"), dir.file("i2.jsonl"), dir.file("o2.jsonl"));
    const ObservationSet b = load_dataset(dir.file("m2.jsonl"), dir.file("i2.jsonl"),
                                          dir.file("o2.jsonl"));
    CHECK(a.models == b.models);
    CHECK(a.instances == b.instances);
    CHECK(a.observations == b.observations);
}

TEST_CASE("split_models reproduces the 145-model partition sizes") {
    const ObservationSet set = many_models(145);
    const ObservationSet split = split_models(set, 0.724, 0.138, 0.138, 7);
    std::size_t counts[3] = {0, 0, 0};
    for (Split s : split.split) counts[static_cast<int>(s)]++;
    CHECK(counts[0] == 105);
    CHECK(counts[1] == 20);
    CHECK(counts[2] == 20);
}

TEST_CASE("split_models is deterministic and a partition") {
    const ObservationSet set = many_models(31);
    const ObservationSet s1 = split_models(set, 0.5, 0.25, 0.25, 42);
    const ObservationSet s2 = split_models(set, 0.5, 0.25, 0.25, 42);
    CHECK(s1.split == s2.split);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const ObservationSet s = split_models(set, 0.5, 0.25, 0.25, seed);
        CHECK(s.split.size() == set.n_models());  // every model exactly once by construction
    }
    const ObservationSet s3 = split_models(set, 0.5, 0.25, 0.25, 43);
    CHECK(s1.split != s3.split);
}

TEST_CASE("split_models handles 3 models with equal fractions") {
    const ObservationSet set = many_models(3);
    const ObservationSet s = split_models(set, 1.0 / 3, 1.0 / 3, 1.0 / 3, 0);
    std::set<Split> seen(s.split.begin(), s.split.end());
    CHECK(seen.size() == 3);
}

TEST_CASE("split_models rejects empty splits and bad fractions") {
    CHECK_THROWS_AS(split_models(many_models(2), 1.0 / 3, 1.0 / 3, 1.0 / 3, 0), DatasetError);
    CHECK_THROWS_AS(split_models(many_models(10), 0.5, 0.25, 0.3, 0), std::invalid_argument);
    CHECK_THROWS_AS(split_models(many_models(10), 0.5, -0.1, 0.6, 0), std::invalid_argument);
}

namespace {

ObservationSet wide_fixture() {
    // 2 train models with 40 observations each, 1 test model with 3.
    ObservationSet set;
    for (int u = 0; u < 3; ++u) {
        ModelRecord m;
        m.model_id = "m" + std::to_string(u);
        m.architecture_type = "a";
        m.model_type = "other";
        set.models.push_back(m);
    }
    for (int i = 0; i < 40; ++i)
        set.instances.push_back({"i" + std::to_string(i), "b", std::nullopt});
    for (int u = 0; u < 2; ++u)
        for (int i = 0; i < 40; ++i)
            set.observations.push_back(
                {"m" + std::to_string(u), "i" + std::to_string(i), (u + i) % 2});
    for (int i = 0; i < 3; ++i)
        set.observations.push_back({"m2", "i" + std::to_string(i), 1});
    set.finalize();
    set.split = {Split::train, Split::train, Split::test};
    return set;
}

std::set<std::pair<std::string, std::string>> retained_pairs(const ObservationSet& s,
                                                             const std::string& model) {
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& o : s.observations)
        if (o.model_id == model) out.insert({o.model_id, o.instance_id});
    return out;
}

} // namespace

TEST_CASE("subsample keeps min(t, available) per train model and leaves test alone") {
    const ObservationSet set = wide_fixture();
    const ObservationSet s10 = subsample_observations(set, 10, 99);
    CHECK(retained_pairs(s10, "m0").size() == 10);
    CHECK(retained_pairs(s10, "m1").size() == 10);
    CHECK(retained_pairs(s10, "m2").size() == 3);  // test split untouched

    const ObservationSet huge = subsample_observations(set, 5000, 99);
    CHECK(huge.observations.size() == set.observations.size());
}

TEST_CASE("subsample is deterministic and monotone in t") {
    const ObservationSet set = wide_fixture();
    const ObservationSet a = subsample_observations(set, 5, 7);
    const ObservationSet b = subsample_observations(set, 5, 7);
    CHECK(a.observations == b.observations);

    const ObservationSet big = subsample_observations(set, 10, 7);
    for (const auto& model : {"m0", "m1"}) {
        const auto small_set = retained_pairs(a, model);
        const auto big_set = retained_pairs(big, model);
        CHECK(std::includes(big_set.begin(), big_set.end(), small_set.begin(), small_set.end()));
    }
}

TEST_CASE("fit_triples selects the splits visible to the loss") {
    testutil::TempDir dir("dataset_fit");
    ObservationSet set = load_fixture(dir);
    set.split = {Split::train, Split::dev, Split::test};
    CHECK(set.fit_triples(false).size() == 2);  // m1 only
    CHECK(set.fit_triples(true).size() == 4);   // m1 + m2
    CHECK(set.split_triples(Split::test).size() == 2);
    for (const auto& t : set.fit_triples(false)) CHECK(set.split[t.model] == Split::train);
}

TEST_CASE("model card helper extracts finetune and merge parents") {
    const auto card = nlohmann::json::parse(R"({
        "license": "apache-2.0",
        "tags": ["base_model:finetune:org/base-7b", "region:us"]
    })");
    const CardLineage fin = extract_lineage_from_card(card);
    CHECK(fin.parents == std::vector<std::string>{"org/base-7b"});
    CHECK(fin.model_type == "finetuned");

    const auto merged = nlohmann::json::parse(R"({
        "tags": ["base_model:merge:org/a", "base_model:merge:org/b", "other"]
    })");
    const CardLineage mer = extract_lineage_from_card(merged);
    CHECK(mer.parents == std::vector<std::string>{"org/a", "org/b"});
    CHECK(mer.model_type == "merged");

    const CardLineage none = extract_lineage_from_card(nlohmann::json::object());
    CHECK(none.parents.empty());
    CHECK(none.model_type == "other");
}

TEST_CASE("finalize validates invariants") {
    ObservationSet set;
    ModelRecord m;
    m.model_id = "m1";
    m.architecture_type = "a";
    m.model_type = "weird";
    set.models.push_back(m);
    CHECK_THROWS_AS(set.finalize(), DatasetError);

    set.models[0].model_type = "other";
    set.models[0].parents = {"m1"};
    CHECK_THROWS_AS(set.finalize(), DatasetError);

    set.models[0].parents = {};
    set.models[0].parameter_size = -1.0;
    CHECK_THROWS_AS(set.finalize(), DatasetError);

    set.models[0].parameter_size = 1.0;
    set.instances.push_back({"i1", "b", std::vector<double>{1.0, 2.0}});
    set.instances.push_back({"i2", "b", std::vector<double>{1.0}});
    CHECK_THROWS_AS(set.finalize(), DatasetError);
}
