#include "latentflow/sampler.hpp"

#include <cmath>
#include <numbers>

namespace latentflow {

FlowStepSampler FlowStepSampler::logit_normal(double m, double s) {
    if (!(s > 0.0)) throw InvalidArgument("logit-normal scale must be positive");
    return {Kind::LogitNormal, m, s};
}

FlowStepSampler::Kind FlowStepSampler::parse_kind(const std::string& name) {
    if (name == "uniform") return Kind::Uniform;
    if (name == "logit_normal" || name == "logit-normal" || name == "logitnormal") return Kind::LogitNormal;
    throw InvalidConfig("unknown flowstep.kind '" + name + "'");
}

std::string FlowStepSampler::kind_name(Kind k) { return k == Kind::Uniform ? "uniform" : "logit_normal"; }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double t) { return std::log(t) - std::log1p(-t); }

FlowStep flowstep_from_normal(const FlowStepSampler& sampler, double standard_normal) {
    double t = sigmoid(sampler.m + sampler.s * standard_normal);
    // Keep the open interval in the far tails where the sigmoid rounds to an endpoint.
    if (t <= 0.0) t = std::numeric_limits<double>::min();
    if (t >= 1.0) t = std::nextafter(1.0, 0.0);
    return FlowStep(t);
}

FlowStep sample_flowstep(const FlowStepSampler& sampler, Rng& rng) {
    if (sampler.kind == FlowStepSampler::Kind::Uniform) return FlowStep(rng.uniform());
    if (!(sampler.s > 0.0)) throw InvalidArgument("logit-normal scale must be positive");
    return flowstep_from_normal(sampler, rng.normal());
}

double logit_normal_pdf(double t, double m, double s) {
    if (!(t > 0.0 && t < 1.0)) throw DomainError("logit_normal_pdf: t must lie in (0, 1)");
    if (!(s > 0.0)) throw DomainError("logit_normal_pdf: s must be positive");
    const double u = (logit(t) - m) / s;
    return std::exp(-0.5 * u * u) / (s * std::sqrt(2.0 * std::numbers::pi) * t * (1.0 - t));
}

double logit_normal_cdf(double t, double m, double s) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return 0.5 * std::erfc(-(logit(t) - m) / (s * std::numbers::sqrt2));
}

}  // namespace latentflow
