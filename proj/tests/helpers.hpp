#pragma once

#include "latentflow/core.hpp"

#include <cmath>
#include <vector>

namespace testutil {

inline latentflow::LatentSeq random_seq(std::size_t l, std::size_t d, latentflow::Rng& rng, double scale = 1.0) {
    latentflow::LatentSeq s = latentflow::sample_noise(l, d, rng);
    s *= scale;
    return s;
}

inline double max_abs_diff(const latentflow::LatentSeq& a, const latentflow::LatentSeq& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double rel_l2(const latentflow::LatentSeq& a, const latentflow::LatentSeq& ref) {
    return std::sqrt(latentflow::squared_distance(a, ref) / latentflow::squared_norm(ref));
}

}  // namespace testutil

#include "latentflow/velocity.hpp"

#include <memory>

namespace testutil {

/// One-class oracle that also answers Null (the unconditional law is the
/// class law), so it can sit inside a GuidedField.
inline latentflow::FieldPtr oracle_with_null(double mu, double sigma, std::size_t channels) {
    auto o = std::make_shared<latentflow::GaussianOracleField>(
        latentflow::GaussianOracleField::isotropic(mu, sigma, channels));
    return std::make_shared<latentflow::LambdaField>(
        [o](const latentflow::LatentSeq& z, double t, const latentflow::Condition& c) {
            const auto cc = c.is_null() ? latentflow::Condition::label(0) : c;
            return latentflow::oracle_eval(*o, z, latentflow::FlowStep(t), cc);
        });
}

}  // namespace testutil
