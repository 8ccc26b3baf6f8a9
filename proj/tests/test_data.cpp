#include "doctest.h"
#include "helpers.hpp"

#include "latentflow/data.hpp"
#include "latentflow/io.hpp"

#include <cmath>
#include <filesystem>
#include <set>

using namespace latentflow;

TEST_CASE("gaussian class means sit on the circle") {
    DatasetSpec spec;
    spec.classes = 4;
    spec.length = 2;
    spec.channels = 3;
    const auto m1 = gaussian_class_mean(spec, 1);
    CHECK(m1(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m1(1, 1) == doctest::Approx(4.0));
    CHECK(m1(0, 2) == 0.0);
}

TEST_CASE("class-0 sample mean") {
    DatasetSpec spec;
    spec.n_per_class = 10000;
    spec.seed = 1;
    const Batch b = make_dataset(spec);
    const auto mu = gaussian_class_mean(spec, 0);
    const auto xs = class_items(b, 0);
    REQUIRE(xs.size() == 10000);
    LatentSeq mean(1, 2);
    for (const auto& x : xs) mean += x;
    mean *= 1.0 / xs.size();
    CHECK(testutil::max_abs_diff(mean, mu) < 0.1);
    double var = 0.0;
    for (const auto& x : xs) var += (x[1] - mu[1]) * (x[1] - mu[1]);
    CHECK(std::sqrt(var / xs.size()) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("generation is deterministic, balanced and class-major") {
    for (auto kind : {DatasetSpec::Kind::Gaussians, DatasetSpec::Kind::MoonsLike, DatasetSpec::Kind::SeqSines}) {
        DatasetSpec spec;
        spec.kind = kind;
        spec.classes = 3;
        spec.length = 8;
        spec.channels = 2;
        spec.n_per_class = 50;
        spec.seed = 4;
        const Batch a = make_dataset(spec), b = make_dataset(spec);
        REQUIRE(a.size() == 150);
        for (std::size_t i = 0; i < a.size(); ++i) {
            REQUIRE(a[i].x == b[i].x);
            REQUIRE(a[i].c == Condition::label(i / 50));
            REQUIRE(a[i].x.all_finite());
        }
        spec.seed = 5;
        CHECK(make_dataset(spec)[0].x != a[0].x);
    }
}

TEST_CASE("seq_sines carries the class frequency") {
    DatasetSpec spec;
    spec.kind = DatasetSpec::Kind::SeqSines;
    spec.length = 16;
    spec.channels = 4;
    spec.n_per_class = 20;
    const Batch b = make_dataset(spec);
    // per-item energy close to 1/2 (unit sine) + noise variance
    for (const auto& it : b) {
        double e = 0.0;
        for (std::size_t i = 0; i < it.x.size(); ++i) e += it.x[i] * it.x[i];
        REQUIRE(e / it.x.size() == doctest::Approx(0.51).epsilon(0.2));
    }
}

TEST_CASE("dataset validation") {
    DatasetSpec spec;
    spec.classes = 1;
    CHECK_THROWS_AS(make_dataset(spec), InvalidConfig);
    spec = {};
    spec.n_per_class = 0;
    CHECK_THROWS_AS(spec.validate(), InvalidConfig);
    CHECK(DatasetSpec::parse_kind("moons_like") == DatasetSpec::Kind::MoonsLike);
    CHECK_THROWS_AS(DatasetSpec::parse_kind("mnist"), InvalidConfig);
}

TEST_CASE("split") {
    DatasetSpec spec;
    spec.n_per_class = 50;
    const Batch d = make_dataset(spec);
    const auto all = split(d, {1, 0, 0}, 3);
    CHECK(all.train.size() == d.size());
    CHECK(all.validation.empty());
    CHECK(all.eval.empty());

    const auto s = split(d, {0.6, 0.2, 0.2}, 9);
    CHECK(s.train.size() + s.validation.size() + s.eval.size() == d.size());
    std::multiset<std::vector<double>> seen;
    for (const Batch* part : {&s.train, &s.validation, &s.eval})
        for (const auto& it : *part) seen.insert(std::vector<double>(it.x.values().begin(), it.x.values().end()));
    std::multiset<std::vector<double>> orig;
    for (const auto& it : d) orig.insert(std::vector<double>(it.x.values().begin(), it.x.values().end()));
    CHECK(seen == orig);

    const auto again = split(d, {0.6, 0.2, 0.2}, 9);
    for (std::size_t i = 0; i < s.train.size(); ++i) REQUIRE(again.train[i].x == s.train[i].x);
    CHECK_THROWS_AS(split(d, {0.5, 0.2, 0.2}, 1), InvalidArgument);
    CHECK_THROWS_AS(split(d, {1.2, -0.2, 0.0}, 1), InvalidArgument);
}

TEST_CASE("persistence with sidecar") {
    DatasetSpec spec;
    spec.n_per_class = 5;
    spec.length = 2;
    Batch d = make_dataset(spec);
    const auto dir = std::filesystem::temp_directory_path() / "latentflow_test_data";
    std::filesystem::create_directories(dir);
    save_dataset(d, spec, dir / "d.lseq", dir / "d.json");
    const Batch back = load_dataset(dir / "d.lseq", dir / "d.json");
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(back[i].c == d[i].c);
        CHECK(testutil::max_abs_diff(back[i].x, d[i].x) < 1e-6);
    }
    CHECK_THROWS_AS(load_dataset(dir / "d.lseq", dir / "missing.json"), IoError);
    std::filesystem::remove_all(dir);
}
