#include "doctest.h"

#include "latentflow/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

using namespace latentflow;

namespace {

template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
    }
    return d;
}

std::vector<double> draws(const FlowStepSampler& s, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> out(n);
    for (auto& v : out) v = sample_flowstep(s, rng);
    return out;
}

}  // namespace

TEST_CASE("a zero normal draw maps to 0.5") {
    CHECK(flowstep_from_normal(FlowStepSampler::logit_normal(0, 1), 0.0).value() == 0.5);
    CHECK(flowstep_from_normal(FlowStepSampler::logit_normal(1, 2), -0.5).value() == doctest::Approx(0.5));
}

TEST_CASE("logit-normal KS against the analytic CDF") {
    const auto xs = draws(FlowStepSampler::logit_normal(0, 1), 100000, 21);
    CHECK(ks_statistic(xs, [](double t) { return logit_normal_cdf(t, 0, 1); }) < 0.01);
    double mean = 0.0;
    for (double t : xs) {
        REQUIRE(t > 0.0);
        REQUIRE(t < 1.0);
        mean += t;
    }
    CHECK(std::abs(mean / xs.size() - 0.5) < 0.005);
}

TEST_CASE("uniform KS") {
    const auto xs = draws(FlowStepSampler::uniform(), 100000, 22);
    CHECK(ks_statistic(xs, [](double t) { return t; }) < 0.01);
}

TEST_CASE("logit-normal pdf") {
    CHECK(logit_normal_pdf(0.5, 0, 1) == doctest::Approx(4.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-12));
    for (double t : {0.05, 0.2, 0.41}) CHECK(logit_normal_pdf(t, 0, 0.7) == doctest::Approx(logit_normal_pdf(1 - t, 0, 0.7)));
    CHECK_THROWS_AS(logit_normal_pdf(0.0, 0, 1), DomainError);
    CHECK_THROWS_AS(logit_normal_pdf(1.0, 0, 1), DomainError);
    CHECK_THROWS_AS(logit_normal_pdf(0.5, 0, 0), DomainError);
}

TEST_CASE("pdf integrates to one") {
    // substitute t = sigmoid(u): integrand becomes the normal density in u
    for (auto [m, s] : {std::pair{0.0, 1.0}, std::pair{0.5, 0.6}, std::pair{-1.0, 1.5}}) {
        const double lo = -40.0, hi = 40.0;
        const std::size_t n = 200000;
        const double h = (hi - lo) / n;
        double total = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            const double u = lo + i * h;
            const double t = sigmoid(u);
            const double w = (i == 0 || i == n) ? 0.5 : 1.0;
            if (t <= 0.0 || t >= 1.0) continue;
            total += w * logit_normal_pdf(t, m, s) * t * (1.0 - t);
        }
        CHECK(std::abs(total * h - 1.0) < 1e-6);
    }
}

TEST_CASE("kind parsing") {
    CHECK(FlowStepSampler::parse_kind("uniform") == FlowStepSampler::Kind::Uniform);
    CHECK(FlowStepSampler::parse_kind("logit-normal") == FlowStepSampler::Kind::LogitNormal);
    CHECK(FlowStepSampler::parse_kind("logit_normal") == FlowStepSampler::Kind::LogitNormal);
    CHECK_THROWS_AS(FlowStepSampler::parse_kind("beta"), InvalidConfig);
    CHECK_THROWS_AS(FlowStepSampler::logit_normal(0, -1), InvalidArgument);
    CHECK(logit(sigmoid(0.3)) == doctest::Approx(0.3));
}
