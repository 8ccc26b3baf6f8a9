#pragma once

// Velocity fields v(z, t, c): closed-form Gaussian oracle, a small trainable
// MLP with hand-written backprop, and a classifier-free-guidance wrapper.

#include "latentflow/core.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace latentflow {

/// Function-evaluation counter owned by the caller (one per solve).
struct NfeCounter {
    std::size_t count = 0;
};

class VelocityField {
public:
    virtual ~VelocityField() = default;

    /// Output has the shape of z. Every call adds the number of underlying
    /// network evaluations to `nfe`.
    virtual LatentSeq eval(const LatentSeq& z, FlowStep t, const Condition& c, NfeCounter& nfe) const = 0;

    /// Evaluations accounted per eval() call.
    virtual std::size_t evals_per_call() const { return 1; }

    /// Convenience overload for callers that do not track NFE.
    LatentSeq operator()(const LatentSeq& z, FlowStep t, const Condition& c) const {
        NfeCounter scratch;
        return eval(z, t, c, scratch);
    }
};

using FieldPtr = std::shared_ptr<const VelocityField>;

/// Wraps an arbitrary callable; used for analytic test fields.
class LambdaField final : public VelocityField {
public:
    using Fn = std::function<LatentSeq(const LatentSeq&, double, const Condition&)>;
    explicit LambdaField(Fn fn) : fn_(std::move(fn)) {}
    LatentSeq eval(const LatentSeq& z, FlowStep t, const Condition& c, NfeCounter& nfe) const override;

private:
    Fn fn_;
};

// ---------------------------------------------------------------------------
// Gaussian oracle

/// Exact marginal velocity for per-class Gaussian data N(mu_k, diag sigma_k^2)
/// under the straight path z_t = t x + (1 - t) eps. Channel j of every frame
/// uses mu_k[j] and sigma_k[j].
class GaussianOracleField final : public VelocityField {
public:
    GaussianOracleField(std::vector<std::vector<double>> mu, std::vector<std::vector<double>> sigma);
    /// Single-class convenience: every channel shares (mu, sigma).
    static GaussianOracleField isotropic(double mu, double sigma, std::size_t channels);

    LatentSeq eval(const LatentSeq& z, FlowStep t, const Condition& c, NfeCounter& nfe) const override;

    std::size_t num_classes() const { return mu_.size(); }
    std::size_t channels() const { return mu_.front().size(); }
    const std::vector<double>& mu(std::size_t k) const { return mu_.at(k); }
    const std::vector<double>& sigma(std::size_t k) const { return sigma_.at(k); }

    /// v for a scalar coordinate with data N(mu, sigma^2).
    static double velocity(double z, double t, double mu, double sigma);

private:
    std::vector<std::vector<double>> mu_;
    std::vector<std::vector<double>> sigma_;
};

LatentSeq oracle_eval(const GaussianOracleField& field, const LatentSeq& z, FlowStep t, const Condition& c);

/// Monte-Carlo regression check of the oracle at flow step t: draws (x, eps)
/// for class 0 channel 0, bins z_t into `bins` equal-width bins over
/// E[z] +/- 3 sd, and returns the largest |mean(x - eps) - mean(oracle)| over
/// bins holding at least max(10, n / 200) samples.
double oracle_validate(const GaussianOracleField& field, double t, std::size_t num_samples, Rng& rng,
                       std::size_t bins = 20);

// ---------------------------------------------------------------------------
// MLP field

struct MlpConfig {
    std::size_t length = 1;
    std::size_t channels = 2;
    std::size_t num_classes = 2;
    std::size_t embed_dim = 16;
    std::size_t time_features = 16;  // even; sin/cos pairs
    std::vector<std::size_t> hidden{256, 256, 256};

    std::size_t input_dim() const { return length * channels + time_features + embed_dim; }
    std::size_t output_dim() const { return length * channels; }
    std::size_t parameter_count() const;
    friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

/// Sinusoidal flow-step features: sin/cos(2 pi f_i t) with f_i = 2^i / 2.
std::vector<double> time_features(double t, std::size_t count);

/// One training sample for the MLP; `target` and `weight` are only read by
/// loss_and_grad.
struct MlpSample {
    const LatentSeq* z;
    double t;
    const Condition* c;
    const LatentSeq* target;
    double weight = 1.0;
};

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

class MlpField final : public VelocityField {
public:
    /// Fresh network: W ~ N(0, 1/fan_in), b = 0, embeddings ~ N(0, 1).
    MlpField(MlpConfig cfg, std::uint64_t init_seed);
    MlpField(MlpConfig cfg, std::vector<double> params);

    LatentSeq eval(const LatentSeq& z, FlowStep t, const Condition& c, NfeCounter& nfe) const override;

    /// Batched forward pass, one output per input.
    std::vector<LatentSeq> eval_batch(std::span<const LatentSeq> z, std::span<const double> t,
                                      std::span<const Condition> c) const;

    /// Weighted flow-matching loss  mean_i w_i ||v_i - target_i||^2 / (L d)
    /// and its exact gradient with respect to every parameter.
    LossAndGrad loss_and_grad(std::span<const MlpSample> samples) const;

    /// Gradient of <cotangent, v(z, t, c)> with respect to the parameters.
    std::vector<double> output_vjp(const LatentSeq& z, double t, const Condition& c, const LatentSeq& cotangent) const;

    const MlpConfig& config() const { return cfg_; }
    std::span<const double> parameters() const { return params_; }
    std::span<double> parameters() { return params_; }
    void set_parameters(std::vector<double> p);

    /// Row of the embedding table for the condition (the null row for Null).
    std::vector<double> embedding_of(const Condition& c) const;

private:
    struct Forward;
    void validate(const LatentSeq& z, const Condition& c) const;
    Forward forward(std::span<const LatentSeq* const> z, std::span<const double> t,
                    std::span<const Condition* const> c) const;
    // d_out is column-major (output_dim x batch).
    std::vector<double> backward(const Forward& f, std::span<const Condition* const> c,
                                 std::span<const double> d_out) const;

    MlpConfig cfg_;
    std::vector<double> params_;
};

// ---------------------------------------------------------------------------
// Guidance

/// v_null + gamma (v_c - v_null); two inner evaluations per call.
class GuidedField final : public VelocityField {
public:
    GuidedField(FieldPtr inner, double gamma);

    LatentSeq eval(const LatentSeq& z, FlowStep t, const Condition& c, NfeCounter& nfe) const override;
    std::size_t evals_per_call() const override { return 2 * inner_->evals_per_call(); }

    const VelocityField& inner() const { return *inner_; }
    FieldPtr inner_ptr() const { return inner_; }
    double gamma() const { return gamma_; }

private:
    FieldPtr inner_;
    double gamma_;
};

LatentSeq guided_eval(const GuidedField& field, const LatentSeq& z, FlowStep t, const Condition& c, NfeCounter& nfe);

/// Field to use under condition c: a GuidedField queried with Null falls back
/// to its unguided inner field, everything else is returned unchanged.
const VelocityField& field_for_condition(const VelocityField& field, const Condition& c);

// ---------------------------------------------------------------------------
// Checkpoints
//
// MLPF layout (little-endian):
//   "MLPF", u8 version (1),
//   u32 L, d, num_classes, embed_dim, time_features, hidden_count, hidden[...],
//   u32 parameter_count, f32 raw[parameter_count], f32 ema[parameter_count]

struct Checkpoint {
    MlpConfig config;
    std::vector<double> raw;
    std::vector<double> ema;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace latentflow
