#include "doctest.h"
#include "helpers.hpp"

#include "latentflow/core.hpp"

using namespace latentflow;

TEST_CASE("mix interpolates and hits both endpoints exactly") {
    const auto x = LatentSeq::from_rows({{1, 0}});
    const auto e = LatentSeq::from_rows({{0, 1}});
    CHECK(mix(x, e, FlowStep(0.5)) == LatentSeq::from_rows({{0.5, 0.5}}));

    Rng rng(3);
    const auto a = testutil::random_seq(5, 3, rng);
    const auto b = testutil::random_seq(5, 3, rng);
    CHECK(mix(a, b, FlowStep(0.0)) == b);
    CHECK(mix(a, b, FlowStep(1.0)) == a);
}

TEST_CASE("mix is affine in t") {
    Rng rng(4);
    const auto x = testutil::random_seq(4, 2, rng);
    const auto e = testutil::random_seq(4, 2, rng);
    for (double t : {0.1, 0.37, 0.9}) {
        const auto lhs = mix(x, e, FlowStep(t));
        const auto rhs = axpy(mix(x, e, FlowStep(0.0)), t, x - e);
        CHECK(testutil::max_abs_diff(lhs, rhs) < 1e-14);
    }
}

TEST_CASE("mix rejects shape mismatch") {
    CHECK_THROWS_AS(mix(LatentSeq(1, 2), LatentSeq(2, 1), FlowStep(0.5)), InvalidArgument);
    CHECK_THROWS_AS(target_velocity(LatentSeq(1, 2), LatentSeq(1, 3)), InvalidArgument);
}

TEST_CASE("target_velocity") {
    CHECK(target_velocity(LatentSeq::from_rows({{1, 2}}), LatentSeq::from_rows({{1, 2}})) == LatentSeq(1, 2, 0.0));
    CHECK(target_velocity(LatentSeq::from_rows({{3}}), LatentSeq::from_rows({{1}})) == LatentSeq::from_rows({{2}}));

    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = testutil::random_seq(3, 4, rng);
        const auto e = testutil::random_seq(3, 4, rng);
        const double t = rng.uniform();
        const auto back = axpy(mix(x, e, FlowStep(t)), 1.0 - t, target_velocity(x, e));
        CHECK(testutil::max_abs_diff(back, x) < 1e-12);
    }
}

TEST_CASE("sample_noise is deterministic and standard normal") {
    Rng a(7), b(7);
    CHECK(sample_noise(4, 3, a) == sample_noise(4, 3, b));

    Rng one(1);
    const auto s = sample_noise(1, 1, one);
    CHECK(s.size() == 1);
    CHECK(std::isfinite(s[0]));

    Rng rng(11);
    const std::size_t n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = sample_noise(1, 1, rng)[0];
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(sum2 / n - mean * mean - 1.0) < 0.02);
}

TEST_CASE("Rng streams") {
    Rng r(5);
    const Rng c1 = r.derive(1), c2 = r.derive(2);
    Rng x1 = c1, x2 = c2;
    CHECK(x1.next_u64() != x2.next_u64());
    Rng again = Rng(5).derive(1);
    Rng x1b = c1;
    CHECK(again.next_u64() == x1b.next_u64());

    Rng u(8);
    for (int i = 0; i < 10000; ++i) {
        const double v = u.uniform();
        REQUIRE(v > 0.0);
        REQUIRE(v < 1.0);
        REQUIRE(u.below(7) < 7);
    }
    CHECK_THROWS_AS(u.below(0), InvalidArgument);
}

TEST_CASE("LatentSeq construction and layout") {
    const auto s = LatentSeq::from_rows({{1, 2, 3}, {4, 5, 6}});
    CHECK(s.length() == 2);
    CHECK(s.channels() == 3);
    CHECK(s(1, 0) == 4);
    CHECK(s[4] == 5);
    CHECK_THROWS_AS(LatentSeq(0, 2), InvalidArgument);
    CHECK_THROWS_AS(LatentSeq(2, 2, std::vector<double>{1, 2, 3}), InvalidArgument);
    CHECK_THROWS_AS(LatentSeq::from_rows({{1, 2}, {3}}), InvalidArgument);

    LatentSeq bad(1, 2);
    bad[1] = std::nan("");
    CHECK_FALSE(bad.all_finite());
    CHECK(squared_distance(LatentSeq::from_rows({{0, 0}}), LatentSeq::from_rows({{3, 4}})) == 25.0);
}

TEST_CASE("FlowStep domain") {
    CHECK(FlowStep(0.0).value() == 0.0);
    CHECK(FlowStep(1.0).value() == 1.0);
    CHECK_THROWS_AS(FlowStep(-0.01), DomainError);
    CHECK_THROWS_AS(FlowStep(1.01), DomainError);
    CHECK_THROWS_AS(FlowStep(std::nan("")), DomainError);
}

TEST_CASE("Condition variants") {
    CHECK(Condition::null().is_null());
    CHECK(Condition::label(3).label_id() == 3);
    CHECK(Condition::embedding({1.0, 2.0}).embedding_vector().size() == 2);
    CHECK_THROWS_AS(Condition::null().label_id(), InvalidArgument);
    CHECK_THROWS_AS(Condition::label(1).embedding_vector(), InvalidArgument);
    CHECK_THROWS_AS(Condition::embedding({}), InvalidArgument);
    CHECK(Condition::label(2) != Condition::label(1));
}

TEST_CASE("Batch requires a shared shape") {
    Batch b;
    b.push_back({LatentSeq(2, 3), Condition::label(0)});
    CHECK_THROWS_AS(b.push_back({LatentSeq(3, 2), Condition::label(0)}), InvalidArgument);
    CHECK_THROWS_AS(Batch({{LatentSeq(1, 2), {}}, {LatentSeq(1, 3), {}}}), InvalidArgument);
    CHECK(b.length() == 2);
    CHECK(b.channels() == 3);
}
