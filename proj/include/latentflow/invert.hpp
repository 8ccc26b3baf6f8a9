#pragma once

// Latent inversion: naive backward-Euler (DDIM-style) inversion and the
// regularized iterative inversion with a patch-wise Gaussian KL correction.

#include "latentflow/core.hpp"
#include "latentflow/velocity.hpp"

#include <string>
#include <vector>

namespace latentflow {

struct PatchShape {
    std::size_t rows = 4;  // frames
    std::size_t cols = 4;  // channels
};

/// A rectangular block of an L x d grid: frames [row, row + rows), channels [col, col + cols).
struct Patch {
    std::size_t row, col, rows, cols;
    std::size_t size() const { return rows * cols; }
};

/// Tiles the grid into patch blocks; edge blocks keep their natural smaller
/// size. Grids with fewer than rows*cols elements form a single patch.
std::vector<Patch> patch_partition(std::size_t length, std::size_t channels, PatchShape shape = {});
std::vector<Patch> patch_partition(const LatentSeq& a, PatchShape shape = {});

inline constexpr double kPatchVarianceFloor = 1e-6;

/// Mean over corresponding patches of KL(N(mu_1, s_1^2) || N(mu_2, s_2^2)),
/// where each patch is fitted by its sample mean and (population) variance,
/// floored at kPatchVarianceFloor.
double patch_kl(const LatentSeq& delta, const LatentSeq& delta_ref, PatchShape shape = {});

/// Gradient of patch_kl with respect to delta; delta_ref is held constant.
LatentSeq patch_kl_grad(const LatentSeq& delta, const LatentSeq& delta_ref, PatchShape shape = {});

enum class CondMode { Null, Original };
enum class PredSpace { Velocity, Noise };
CondMode parse_cond_mode(const std::string& name);
PredSpace parse_pred_space(const std::string& name);
std::string cond_mode_name(CondMode m);
std::string pred_space_name(PredSpace p);

struct InversionConfig {
    double t_edit = 0.04;
    std::size_t steps = 25;                       // S backward steps
    std::vector<double> weights{0.0, 1.0, 2.0, 3.0};  // w_k, one per inner iteration (K = size)
    double lambda_kl = 0.2;
    CondMode cond_mode = CondMode::Original;
    PredSpace pred_space = PredSpace::Velocity;
    bool literal_mixture = true;  // build the reference point with the step's start time
    PatchShape patch{};

    std::size_t inner_iterations() const { return weights.size(); }
    /// Sets K inner iterations with w_k = k - 1.
    static std::vector<double> linear_weights(std::size_t k);
    void validate() const;
};

/// Field evaluations (unguided count) one regularized inversion performs.
std::size_t regularized_nfe_per_call(const InversionConfig& cfg);

/// Condition used during inversion: Null, or the original condition.
Condition inversion_condition(CondMode mode, const Condition& c_orig);

/// Backward Euler solve from t = 1 down to t_edit on `num_steps` uniform steps.
LatentSeq ddim_invert(const VelocityField& field, const LatentSeq& x, const Condition& c, double t_edit,
                      std::size_t num_steps, std::size_t* nfe = nullptr);

/// Regularized iterative inversion. For each backward step t -> t - dt it runs
/// K fixed-point iterations delta = v(z^(k-1), t - dt, c); for every k with
/// w_k > 0 it draws fresh noise, evaluates the reference prediction on the
/// re-noised input and steps delta against the patch-KL gradient; candidates
/// z^(k) = z_t - dt delta are averaged with weights w_k.
/// `c` is used as-is; a GuidedField with a Null condition falls back to its inner field.
LatentSeq regularized_invert(const VelocityField& field, const LatentSeq& x, const Condition& c,
                             const InversionConfig& cfg, Rng& rng, std::size_t* nfe = nullptr);

/// Noise estimate implied by a velocity estimate when the clean latent is
/// known: eps = x_orig - v. `from_noise_prediction` is its exact inverse.
LatentSeq to_noise_prediction(const LatentSeq& v, const LatentSeq& x_orig);
LatentSeq from_noise_prediction(const LatentSeq& eps, const LatentSeq& x_orig);

}  // namespace latentflow
