#include "latentflow/invert.hpp"

#include "latentflow/ode.hpp"

#include <cmath>
#include <numeric>

namespace latentflow {

std::vector<Patch> patch_partition(std::size_t length, std::size_t channels, PatchShape shape) {
    if (shape.rows == 0 || shape.cols == 0) throw InvalidArgument("patch_partition: patch dims must be >= 1");
    if (length * channels < shape.rows * shape.cols) return {Patch{0, 0, length, channels}};
    std::vector<Patch> out;
    for (std::size_t r = 0; r < length; r += shape.rows)
        for (std::size_t c = 0; c < channels; c += shape.cols)
            out.push_back({r, c, std::min(shape.rows, length - r), std::min(shape.cols, channels - c)});
    return out;
}

std::vector<Patch> patch_partition(const LatentSeq& a, PatchShape shape) {
    return patch_partition(a.length(), a.channels(), shape);
}

namespace {

struct Moments {
    double mean;
    double var;      // floored
    bool floored;
};

Moments patch_moments(const LatentSeq& a, const Patch& p) {
    double sum = 0.0;
    for (std::size_t r = p.row; r < p.row + p.rows; ++r)
        for (std::size_t c = p.col; c < p.col + p.cols; ++c) sum += a(r, c);
    const double n = static_cast<double>(p.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t r = p.row; r < p.row + p.rows; ++r)
        for (std::size_t c = p.col; c < p.col + p.cols; ++c) {
            const double d = a(r, c) - mean;
            ss += d * d;
        }
    const double var = ss / n;
    if (var < kPatchVarianceFloor) return {mean, kPatchVarianceFloor, true};
    return {mean, var, false};
}

double gaussian_kl(const Moments& p, const Moments& q) {
    const double dm = p.mean - q.mean;
    return 0.5 * std::log(q.var / p.var) + (p.var + dm * dm) / (2.0 * q.var) - 0.5;
}

}  // namespace

double patch_kl(const LatentSeq& delta, const LatentSeq& delta_ref, PatchShape shape) {
    require_same_shape(delta, delta_ref, "patch_kl");
    const auto patches = patch_partition(delta, shape);
    double total = 0.0;
    for (const auto& p : patches) total += gaussian_kl(patch_moments(delta, p), patch_moments(delta_ref, p));
    return total / static_cast<double>(patches.size());
}

LatentSeq patch_kl_grad(const LatentSeq& delta, const LatentSeq& delta_ref, PatchShape shape) {
    require_same_shape(delta, delta_ref, "patch_kl_grad");
    const auto patches = patch_partition(delta, shape);
    const double inv_patches = 1.0 / static_cast<double>(patches.size());
    LatentSeq grad(delta.length(), delta.channels(), 0.0);
    for (const auto& p : patches) {
        const Moments m1 = patch_moments(delta, p);
        const Moments m2 = patch_moments(delta_ref, p);
        const double n = static_cast<double>(p.size());
        const double d_mean = (m1.mean - m2.mean) / m2.var;
        const double d_var = m1.floored ? 0.0 : 0.5 * (1.0 / m2.var - 1.0 / m1.var);
        for (std::size_t r = p.row; r < p.row + p.rows; ++r)
            for (std::size_t c = p.col; c < p.col + p.cols; ++c)
                grad(r, c) = inv_patches * (d_mean / n + d_var * 2.0 * (delta(r, c) - m1.mean) / n);
    }
    return grad;
}

CondMode parse_cond_mode(const std::string& name) {
    if (name == "null") return CondMode::Null;
    if (name == "orig" || name == "original") return CondMode::Original;
    throw InvalidConfig("unknown condition mode '" + name + "' (expected null|orig)");
}

PredSpace parse_pred_space(const std::string& name) {
    if (name == "velocity") return PredSpace::Velocity;
    if (name == "noise") return PredSpace::Noise;
    throw InvalidConfig("unknown prediction space '" + name + "' (expected velocity|noise)");
}

std::string cond_mode_name(CondMode m) { return m == CondMode::Null ? "null" : "orig"; }
std::string pred_space_name(PredSpace p) { return p == PredSpace::Velocity ? "velocity" : "noise"; }

std::vector<double> InversionConfig::linear_weights(std::size_t k) {
    std::vector<double> w(k);
    for (std::size_t i = 0; i < k; ++i) w[i] = static_cast<double>(i);
    return w;
}

void InversionConfig::validate() const {
    if (!(t_edit >= 0.0 && t_edit < 1.0)) throw InvalidConfig("inversion: T_edit must lie in [0, 1)");
    if (steps == 0) throw InvalidConfig("inversion: S must be >= 1");
    if (weights.empty()) throw InvalidConfig("inversion: K must be >= 1");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw InvalidConfig("inversion: weights must be non-negative");
        sum += w;
    }
    if (!(sum > 0.0)) throw InvalidConfig("inversion: weights must not all be zero");
    if (!(lambda_kl >= 0.0)) throw InvalidConfig("inversion: lambda_kl must be non-negative");
    if (patch.rows == 0 || patch.cols == 0) throw InvalidConfig("inversion: patch dims must be >= 1");
}

std::size_t regularized_nfe_per_call(const InversionConfig& cfg) {
    std::size_t per_step = cfg.weights.size();
    for (double w : cfg.weights)
        if (w > 0.0) ++per_step;
    return per_step * cfg.steps;
}

Condition inversion_condition(CondMode mode, const Condition& c_orig) {
    return mode == CondMode::Null ? Condition::null() : c_orig;
}

LatentSeq ddim_invert(const VelocityField& field, const LatentSeq& x, const Condition& c, double t_edit,
                      std::size_t num_steps, std::size_t* nfe) {
    if (!x.all_finite()) throw InvalidArgument("ddim_invert: input is not finite");
    if (!(t_edit >= 0.0 && t_edit < 1.0)) throw InvalidArgument("ddim_invert: T_edit must lie in [0, 1)");
    if (num_steps == 0) return x;
    const VelocityField& f = field_for_condition(field, c);
    auto [z, traj] = integrate(f, x, 1.0, t_edit, SolverConfig{SolverMethod::Euler, num_steps}, c);
    if (nfe) *nfe += traj.nfe;
    return z;
}

LatentSeq regularized_invert(const VelocityField& field, const LatentSeq& x, const Condition& c,
                             const InversionConfig& cfg, Rng& rng, std::size_t* nfe) {
    cfg.validate();
    if (!x.all_finite()) throw InvalidArgument("regularized_invert: input is not finite");
    const VelocityField& f = field_for_condition(field, c);
    const std::size_t steps = cfg.steps;
    const double dt = (1.0 - cfg.t_edit) / static_cast<double>(steps);
    const double weight_sum = std::accumulate(cfg.weights.begin(), cfg.weights.end(), 0.0);

    NfeCounter counter;
    LatentSeq z = x;
    for (std::size_t s = 0; s < steps; ++s) {
        const double t = grid_time(1.0, cfg.t_edit, steps, s);
        const double t_next = grid_time(1.0, cfg.t_edit, steps, s + 1);
        const LatentSeq z_t = z;
        LatentSeq candidate = z_t;
        LatentSeq acc(z.length(), z.channels(), 0.0);
        for (double w : cfg.weights) {
            LatentSeq delta = f.eval(candidate, FlowStep(t_next), c, counter);
            if (w > 0.0) {
                const LatentSeq eps = sample_noise(x.length(), x.channels(), rng);
                const LatentSeq z_ref = mix(x, eps, FlowStep(cfg.literal_mixture ? t : t_next));
                const LatentSeq delta_ref = f.eval(z_ref, FlowStep(t_next), c, counter);
                if (cfg.pred_space == PredSpace::Velocity) {
                    const LatentSeq g = patch_kl_grad(delta, delta_ref, cfg.patch);
                    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= cfg.lambda_kl * g[i];
                } else {
                    // Descend in eps = x - delta; the step maps back to delta with a flipped sign.
                    const LatentSeq g = patch_kl_grad(to_noise_prediction(delta, x), to_noise_prediction(delta_ref, x),
                                                      cfg.patch);
                    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] += cfg.lambda_kl * g[i];
                }
            }
            for (std::size_t i = 0; i < candidate.size(); ++i) candidate[i] = z_t[i] - dt * delta[i];
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * candidate[i];
        }
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = acc[i] / weight_sum;
        if (!z.all_finite())
            throw DivergenceError("regularized_invert: non-finite state at step " + std::to_string(s), s);
    }
    if (nfe) *nfe += counter.count;
    return z;
}

LatentSeq to_noise_prediction(const LatentSeq& v, const LatentSeq& x_orig) {
    require_same_shape(v, x_orig, "to_noise_prediction");
    return x_orig - v;
}

LatentSeq from_noise_prediction(const LatentSeq& eps, const LatentSeq& x_orig) {
    require_same_shape(eps, x_orig, "from_noise_prediction");
    return x_orig - eps;
}

}  // namespace latentflow
