#include "doctest.h"
#include "helpers.hpp"

#include "latentflow/ode.hpp"

#include <cmath>
#include <memory>

using namespace latentflow;

namespace {

const LambdaField zero_field([](const LatentSeq& z, double, const Condition&) {
    return LatentSeq(z.length(), z.channels(), 0.0);
});
const LambdaField identity_field([](const LatentSeq& z, double, const Condition&) { return z; });

Trajectory from_points(const std::vector<std::pair<double, double>>& pts) {
    Trajectory tr;
    double t = 0.0;
    for (auto [x, y] : pts) {
        tr.points.push_back({t, LatentSeq::from_rows({{x, y}})});
        t += 0.5;
    }
    return tr;
}

}  // namespace

TEST_CASE("zero field leaves the state unchanged") {
    Rng rng(1);
    const auto z = testutil::random_seq(3, 2, rng);
    for (auto m : {SolverMethod::Euler, SolverMethod::Midpoint}) {
        CHECK(integrate(zero_field, z, 0, 1, {m, 7}, {}).first == z);
        CHECK(integrate(zero_field, z, 1, 0.2, {m, 3}, {}).first == z);
    }
}

TEST_CASE("euler on dz/dt = z") {
    const LatentSeq one(1, 1, 1.0);
    CHECK(integrate(identity_field, one, 0, 1, {SolverMethod::Euler, 4}, {}).first[0] == 2.44140625);
    for (std::size_t n : {1, 2, 10, 100})
        CHECK(integrate(identity_field, one, 0, 1, {SolverMethod::Euler, n}, {}).first[0] ==
              doctest::Approx(std::pow(1.0 + 1.0 / n, static_cast<double>(n))).epsilon(1e-13));
    // midpoint: (1 + h + h^2/2)^n
    CHECK(integrate(identity_field, one, 0, 1, {SolverMethod::Midpoint, 4}, {}).first[0] ==
          doctest::Approx(std::pow(1.0 + 0.25 + 0.03125, 4.0)).epsilon(1e-13));
}

TEST_CASE("backward euler reads the field at the step's target time") {
    std::vector<double> seen;
    const LambdaField probe([&](const LatentSeq& z, double t, const Condition&) {
        seen.push_back(t);
        return LatentSeq(z.length(), z.channels(), 0.0);
    });
    integrate(probe, LatentSeq(1, 1), 1.0, 0.0, {SolverMethod::Euler, 4}, {});
    CHECK(seen == std::vector<double>{0.75, 0.5, 0.25, 0.0});
    seen.clear();
    integrate(probe, LatentSeq(1, 1), 0.0, 1.0, {SolverMethod::Euler, 4}, {});
    CHECK(seen == std::vector<double>{0.0, 0.25, 0.5, 0.75});
    seen.clear();
    integrate(probe, LatentSeq(1, 1), 0.0, 1.0, {SolverMethod::Midpoint, 2}, {});
    CHECK(seen == std::vector<double>{0.0, 0.25, 0.5, 0.75});
}

TEST_CASE("grid ends exactly on t_to") {
    CHECK(grid_time(1.0, 0.04, 25, 25) == 0.04);
    CHECK(grid_time(0.0, 1.0, 3, 3) == 1.0);
    CHECK(grid_time(1.0, 0.0, 4, 1) == 0.75);
}

TEST_CASE("NFE accounting") {
    const auto oracle = testutil::oracle_with_null(3.0, 0.5, 2);
    const GuidedField guided(oracle, 2.0);
    const LatentSeq z(1, 2, 0.0);
    const auto c = Condition::label(0);
    CHECK(integrate(*oracle, z, 0, 1, {SolverMethod::Midpoint, 32}, c).second.nfe == 64);
    CHECK(integrate(guided, z, 0, 1, {SolverMethod::Midpoint, 32}, c).second.nfe == 128);
    CHECK(integrate(*oracle, z, 0, 1, {SolverMethod::Euler, 32}, c).second.nfe == 32);
    CHECK(integrate(guided, z, 1, 0, {SolverMethod::Euler, 10}, c).second.nfe == 20);
}

TEST_CASE("recorded trajectories are monotone in t") {
    const auto oracle = GaussianOracleField::isotropic(3.0, 0.5, 1);
    const auto [z, tr] = integrate(oracle, LatentSeq(1, 1, 0.1), 0, 1, {SolverMethod::Midpoint, 8}, Condition::label(0), true);
    REQUIRE(tr.points.size() == 9);
    CHECK(tr.points.front().t == 0.0);
    CHECK(tr.points.back().t == 1.0);
    for (std::size_t i = 1; i < tr.points.size(); ++i) CHECK(tr.points[i].t > tr.points[i - 1].t);
    CHECK(tr.points.back().z == z);
    CHECK(integrate(oracle, LatentSeq(1, 1), 0, 1, {}, Condition::label(0)).second.points.empty());
}

TEST_CASE("integrate errors") {
    // doubles the state each step: 1e308 overflows on the first update
    const LambdaField blowup([](const LatentSeq& z, double, const Condition&) { return 4.0 * z; });
    try {
        integrate(blowup, LatentSeq(1, 1, 1e308), 0, 1, {SolverMethod::Euler, 4}, {});
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.step_index == 0);
    }
    CHECK_THROWS_AS(integrate(zero_field, LatentSeq(1, 1), 0.5, 0.5, {}, {}), InvalidArgument);
    CHECK_THROWS_AS(integrate(zero_field, LatentSeq(1, 1), 0, 1, {SolverMethod::Euler, 0}, {}), InvalidArgument);
    CHECK_THROWS_AS(integrate(zero_field, LatentSeq(1, 1), 0, 1.5, {}, {}), DomainError);
    CHECK_THROWS_AS(parse_solver_method("rk4"), InvalidConfig);
}

TEST_CASE("generate") {
    const auto oracle = GaussianOracleField::isotropic(3.0, 0.5, 1);
    Rng a(5), b(5);
    CHECK(generate(oracle, Condition::label(0), 2, 1, {}, a) == generate(oracle, Condition::label(0), 2, 1, {}, b));

    Rng r1(6), r2(6);
    const auto drawn = sample_noise(3, 2, r2);
    CHECK(generate(zero_field, {}, 3, 2, {}, r1) == drawn);

    Rng rng(7);
    const std::size_t n = 10000;
    double sum = 0, sum2 = 0;
    std::size_t nfe = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = generate(oracle, Condition::label(0), 1, 1, {SolverMethod::Midpoint, 32}, rng, &nfe)[0];
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean - 3.0) < 0.05);
    CHECK(std::abs(std::sqrt(sum2 / n - mean * mean) - 0.5) < 0.05);
    CHECK(nfe == 64 * n);
}

TEST_CASE("straightness") {
    CHECK(straightness(from_points({{0, 0}, {1, 1}, {2, 2}, {3, 3}})) == doctest::Approx(0.0));
    // quarter circle (1,0) -> (0,1) via (cos 45, sin 45): the midpoint sits 1 - sqrt(2)/2 off the chord
    const double r = std::sqrt(0.5);
    const auto quarter = from_points({{1, 0}, {r, r}, {0, 1}});
    CHECK(straightness(quarter) == doctest::Approx((1.0 - r) / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(straightness(quarter) == doctest::Approx(0.2071).epsilon(1e-4));

    const double a = 0.7;
    auto rot = [&](double x, double y) { return std::pair{std::cos(a) * x - std::sin(a) * y + 3, std::sin(a) * x + std::cos(a) * y - 1}; };
    const auto rotated = from_points({rot(1, 0), rot(r, r), rot(0, 1)});
    CHECK(straightness(rotated) == doctest::Approx(straightness(quarter)).epsilon(1e-12));

    CHECK_THROWS_AS(straightness(from_points({{0, 0}, {1, 1}})), InvalidArgument);
    try {
        straightness(from_points({{1, 1}, {2, 2}, {1, 1}}));
        FAIL("expected degenerate trajectory");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateTrajectory);
    }
}

TEST_CASE("euler forward then backward round trip") {
    // Exact only for fields that do not depend on z: with v = a z the round trip
    // picks up a factor (1 - h^2 a^2) per step.
    const LambdaField drift([](const LatentSeq& z, double t, const Condition&) {
        return LatentSeq(z.length(), z.channels(), 1.0 + t);
    });
    Rng rng(3);
    const auto z0 = testutil::random_seq(2, 2, rng);
    const auto z1 = integrate(drift, z0, 0, 1, {SolverMethod::Euler, 8}, {}).first;
    const auto back = integrate(drift, z1, 1, 0, {SolverMethod::Euler, 8}, {}).first;
    CHECK(testutil::max_abs_diff(back, z0) < 1e-12);

    const auto oracle = GaussianOracleField::isotropic(1.0, 0.7, 2);
    double prev = 1e9;
    for (std::size_t n : {16, 64, 256}) {
        const auto fwd = integrate(oracle, z0, 0, 1, {SolverMethod::Euler, n}, Condition::label(0)).first;
        const auto bwd = integrate(oracle, fwd, 1, 0, {SolverMethod::Euler, n}, Condition::label(0)).first;
        const double err = testutil::max_abs_diff(bwd, z0);
        CHECK(err < prev);
        prev = err;
    }
}
