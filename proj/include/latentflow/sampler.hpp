#pragma once

// Flow-step distributions used during training.

#include "latentflow/core.hpp"

#include <string>

namespace latentflow {

struct FlowStepSampler {
    enum class Kind { Uniform, LogitNormal };

    Kind kind = Kind::LogitNormal;
    double m = 0.0;  // location of the underlying normal
    double s = 1.0;  // scale of the underlying normal, > 0

    static FlowStepSampler uniform() { return {Kind::Uniform, 0.0, 1.0}; }
    static FlowStepSampler logit_normal(double m = 0.0, double s = 1.0);

    /// Parses "uniform" / "logit_normal" (also "logit-normal").
    static Kind parse_kind(const std::string& name);
    static std::string kind_name(Kind k);
};

FlowStep sample_flowstep(const FlowStepSampler& sampler, Rng& rng);

/// Maps an already drawn standard-normal variate through the sampler: t = sigmoid(m + s n).
FlowStep flowstep_from_normal(const FlowStepSampler& sampler, double standard_normal);

/// Density of sigmoid(N(m, s^2)) at t; t must lie in (0, 1).
double logit_normal_pdf(double t, double m, double s);

/// CDF of sigmoid(N(m, s^2)); Phi((logit t - m) / s).
double logit_normal_cdf(double t, double m, double s);

double sigmoid(double x);
double logit(double t);

}  // namespace latentflow
