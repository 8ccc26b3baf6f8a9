#pragma once

// Flow-matching training: loss, condition dropout, minibatch coupling, AdamW, EMA.

#include "latentflow/core.hpp"
#include "latentflow/coupling.hpp"
#include "latentflow/sampler.hpp"
#include "latentflow/velocity.hpp"

#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace latentflow {

enum class LossWeighting { None, LogitNormalPdf };
LossWeighting parse_loss_weighting(const std::string& name);
std::string loss_weighting_name(LossWeighting w);

struct OptimizerConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 0.1;
    double clip_norm = 0.2;    // global gradient-norm clip; <= 0 disables
    std::size_t warmup = 100;  // linear warmup, then constant
};

struct EmaConfig {
    double decay = 0.99;
    std::size_t interval = 10;
};

struct TrainConfig {
    std::size_t steps = 5000;
    std::size_t batch_size = 256;
    OptimizerConfig optimizer{};
    double dropout_p = 0.2;
    FlowStepSampler sampler{};
    CouplingKind coupling = CouplingKind::Independent;
    EmaConfig ema{};
    LossWeighting loss_weighting = LossWeighting::None;
    MlpConfig model{};
    std::uint64_t seed = 0;
    std::size_t log_every = 100;  // 0 disables logging

    void validate() const;
};

struct TrainState {
    MlpField field;
    std::vector<double> ema;
    std::vector<double> adam_m;
    std::vector<double> adam_v;
    std::size_t step = 0;
    std::size_t ema_updates = 0;
    Rng rng;
};

TrainState init_train_state(const TrainConfig& cfg);

struct StepStats {
    std::size_t step = 0;
    double loss = 0.0;
    double pair_cost = 0.0;         // cost of the pairing actually used
    double independent_cost = 0.0;  // cost of the identity pairing of the same draws
    std::size_t null_conditions = 0;
    bool ema_updated = false;
    double grad_norm = 0.0;
};

/// Raised when a gradient turns non-finite.
struct TrainingDiverged : Error {
    TrainingDiverged(const std::string& w, std::size_t step) : Error(ErrorCode::TrainingDiverged, w), step_index(step) {}
    std::size_t step_index;
};

/// mean_i w(t_i) ||v(mix(x_i, eps_i, t_i), t_i, c_i) - (x_i - eps_i)||^2 / (L d),
/// with w = 1 or the logit-normal density at t_i.
double fm_loss(const VelocityField& field, const Batch& batch, std::span<const LatentSeq> eps,
               std::span<const FlowStep> t, LossWeighting weighting, const FlowStepSampler& sampler = {});

/// One optimisation step on `data_batch` (already drawn from the dataset).
StepStats train_step(TrainState& state, const Batch& data_batch, const TrainConfig& cfg);

/// EMA mean squared error of `params` on a batch prepared with fixed draws.
struct PreparedBatch {
    std::vector<LatentSeq> z;
    std::vector<LatentSeq> target;
    std::vector<double> t;
    std::vector<Condition> c;
    std::vector<double> weight;

    std::vector<MlpSample> samples() const;
};

struct TrainLogRow {
    std::size_t step;
    double loss;
    double pair_cost;
    double ema_loss;
};

struct TrainResult {
    TrainState state;
    std::vector<TrainLogRow> log;
    std::vector<double> losses;  // every step
};

/// Full loop: each step draws batch_size items uniformly (with replacement)
/// from `dataset`. Log rows are also written as CSV to `log_csv` when given.
TrainResult train(const TrainConfig& cfg, const Batch& dataset, std::ostream* log_csv = nullptr);

void write_train_log_header(std::ostream& os);

/// Max relative error between backprop and central differences over a random
/// subset of `num_params` parameters. Noise and flow steps are drawn once from rng.
double grad_check(const MlpField& field, const Batch& batch, Rng& rng, std::size_t num_params = 100,
                  double step = 1e-5);

Checkpoint make_checkpoint(const TrainState& state);

}  // namespace latentflow
