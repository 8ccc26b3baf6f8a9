#include "doctest.h"
#include "helpers.hpp"

#include "latentflow/data.hpp"
#include "latentflow/metrics.hpp"

#include <algorithm>

using namespace latentflow;

namespace {
std::vector<LatentSeq> normal_set(std::size_t n, std::size_t dim, double shift, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LatentSeq> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto s = sample_noise(1, dim, rng);
        for (std::size_t j = 0; j < dim; ++j) s[j] += shift;
        out.push_back(s);
    }
    return out;
}
}  // namespace

TEST_CASE("frechet distance") {
    const auto a = normal_set(500, 3, 0.0, 1);
    CHECK(std::abs(frechet_gaussian(a, a)) < 1e-8);

    const auto x = normal_set(100000, 1, 0.0, 2), y = normal_set(100000, 1, 1.0, 3);
    CHECK(frechet_gaussian(x, y) == doctest::Approx(1.0).epsilon(0.05));

    const auto b = normal_set(400, 3, 0.5, 4);
    CHECK(std::abs(frechet_gaussian(a, b) - frechet_gaussian(b, a)) < 1e-10);

    // closed form for diagonal covariances: sum (m1 - m2)^2 + (s1 - s2)^2
    std::vector<LatentSeq> wide = normal_set(100000, 2, 0.0, 5);
    for (auto& s : wide) s *= 2.0;
    const auto unit = normal_set(100000, 2, 0.0, 6);
    CHECK(frechet_gaussian(wide, unit) == doctest::Approx(2.0).epsilon(0.05));

    // rank-deficient sets stay non-negative
    const std::vector<LatentSeq> few(3, LatentSeq(1, 5, 1.0));
    CHECK(frechet_gaussian(few, normal_set(3, 5, 0.0, 7)) >= 0.0);
    CHECK_THROWS_AS(frechet_gaussian(a, normal_set(10, 2, 0, 8)), InvalidArgument);
    CHECK_THROWS_AS(frechet_gaussian(std::vector<LatentSeq>{}, a), InvalidArgument);
}

TEST_CASE("lpaps") {
    Rng rng(1);
    const auto a = testutil::random_seq(6, 4, rng);
    CHECK(lpaps(a, a) == 0.0);
    LatentSeq b = a;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += 1.0;
    CHECK(lpaps(a, b) == doctest::Approx(2.0).epsilon(1e-14));
    for (int i = 0; i < 200; ++i) {
        const auto x = testutil::random_seq(3, 2, rng), y = testutil::random_seq(3, 2, rng), z = testutil::random_seq(3, 2, rng);
        REQUIRE(lpaps(x, z) <= lpaps(x, y) + lpaps(y, z) + 1e-12);
        REQUIRE(lpaps(x, y) == doctest::Approx(lpaps(y, x)));
    }
    CHECK_THROWS_AS(lpaps(a, LatentSeq(4, 6)), InvalidArgument);
}

TEST_CASE("adherence classifier") {
    DatasetSpec spec;
    spec.n_per_class = 300;
    spec.seed = 3;
    const Batch data = make_dataset(spec);
    const auto clf = LogisticClassifier::fit(data, 2);
    std::size_t confident = 0;
    for (const auto& it : data) {
        const auto p = clf.probabilities(it.x);
        REQUIRE(std::abs(p[0] + p[1] - 1.0) < 1e-6);
        if (adherence(it.x, it.c, clf) > 0.9) ++confident;
    }
    CHECK(confident > 0.95 * data.size());

    const double single = adherence(data[5].x, data[5].c, clf);
    std::vector<double> forward, backward;
    for (const auto& it : data) forward.push_back(adherence(it.x, it.c, clf));
    for (auto it = data.items().rbegin(); it != data.items().rend(); ++it) backward.push_back(adherence(it->x, it->c, clf));
    std::reverse(backward.begin(), backward.end());
    CHECK(forward == backward);
    CHECK(forward[5] == single);

    CHECK_THROWS_AS(adherence(data[0].x, Condition::null(), clf), InvalidArgument);
    CHECK_THROWS_AS(adherence(data[0].x, Condition::label(2), clf), InvalidArgument);
    CHECK_THROWS_AS(clf.predict(LatentSeq(1, 3)), InvalidArgument);
}

TEST_CASE("evaluate_run and JSON report") {
    const auto ref = normal_set(200, 2, 0.0, 9);
    RunInputs in;
    in.generated = ref;
    in.reference = ref;
    in.nfe = 64;
    in.config_hash = "abc";
    const auto r = evaluate_run(in);
    CHECK(r.frechet < 1e-8);
    CHECK(r.nfe == 64);
    CHECK(evaluate_run(in) == r);

    MetricsReport m{1.25, 0.5, 0.875, 0.0625, 12, "deadbeef"};
    CHECK(MetricsReport::from_json(m.to_json()) == m);
    MetricsReport odd{0.1, 1.0 / 3.0, 2.0 / 3.0, 1e-17, 7, "x"};
    CHECK(MetricsReport::from_json(odd.to_json()) == odd);
    CHECK_THROWS_AS(MetricsReport::from_json("not json"), InvalidArgument);

    RunInputs bad = in;
    const std::vector<LatentSeq> one(1, LatentSeq(1, 2));
    bad.originals = one;
    CHECK_THROWS_AS(evaluate_run(bad), InvalidArgument);
}
