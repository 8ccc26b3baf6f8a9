#include "latentflow/train.hpp"

#include <cmath>
#include <ostream>

namespace latentflow {

LossWeighting parse_loss_weighting(const std::string& name) {
    if (name == "none") return LossWeighting::None;
    if (name == "logit_normal_pdf" || name == "logit-normal-pdf") return LossWeighting::LogitNormalPdf;
    throw InvalidConfig("unknown train.loss_weighting '" + name + "'");
}

std::string loss_weighting_name(LossWeighting w) { return w == LossWeighting::None ? "none" : "logit_normal_pdf"; }

void TrainConfig::validate() const {
    if (batch_size == 0) throw InvalidConfig("train: batch_size must be >= 1");
    if (!(dropout_p >= 0.0 && dropout_p <= 1.0)) throw InvalidConfig("train: dropout_p must lie in [0, 1]");
    if (!(ema.decay > 0.0 && ema.decay < 1.0)) throw InvalidConfig("train: ema decay must lie in (0, 1)");
    if (ema.interval == 0) throw InvalidConfig("train: ema interval must be >= 1");
    if (!(optimizer.lr > 0.0)) throw InvalidConfig("train: lr must be positive");
    if (sampler.kind == FlowStepSampler::Kind::LogitNormal && !(sampler.s > 0.0))
        throw InvalidConfig("train: flowstep.s must be positive");
}

TrainState init_train_state(const TrainConfig& cfg) {
    cfg.validate();
    Rng root(cfg.seed);
    MlpField field(cfg.model, root.derive(1).next_u64());
    std::vector<double> ema(field.parameters().begin(), field.parameters().end());
    const std::size_t n = ema.size();
    return TrainState{std::move(field), std::move(ema), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0, 0,
                      root.derive(2)};
}

double fm_loss(const VelocityField& field, const Batch& batch, std::span<const LatentSeq> eps,
               std::span<const FlowStep> t, LossWeighting weighting, const FlowStepSampler& sampler) {
    if (batch.empty() || batch.size() != eps.size() || batch.size() != t.size())
        throw InvalidArgument("fm_loss: batch, noise and flow steps must align");
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& x = batch[i].x;
        require_same_shape(x, eps[i], "fm_loss");
        const LatentSeq z = mix(x, eps[i], t[i]);
        const LatentSeq v = field(z, t[i], batch[i].c);
        const double err = squared_distance(v, target_velocity(x, eps[i])) / static_cast<double>(x.size());
        const double w = weighting == LossWeighting::None ? 1.0 : logit_normal_pdf(t[i], sampler.m, sampler.s);
        total += w * err;
    }
    return total / static_cast<double>(batch.size());
}

std::vector<MlpSample> PreparedBatch::samples() const {
    std::vector<MlpSample> out;
    out.reserve(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out.push_back({&z[i], t[i], &c[i], &target[i], weight[i]});
    return out;
}

namespace {

PreparedBatch prepare(TrainState& state, const Batch& data, const TrainConfig& cfg, StepStats& stats) {
    const std::size_t b = data.size();
    if (b == 0) throw InvalidArgument("train_step: empty batch");
    const auto xs = data.latents();
    std::vector<LatentSeq> eps;
    eps.reserve(b);
    for (std::size_t i = 0; i < b; ++i) eps.push_back(sample_noise(data.length(), data.channels(), state.rng));

    const Permutation identity = Permutation::identity(b);
    stats.independent_cost = pair_cost(xs, eps, identity);
    if (cfg.coupling == CouplingKind::Ot) {
        const Permutation p = ot_couple(xs, eps);
        std::vector<LatentSeq> reordered;
        reordered.reserve(b);
        for (std::size_t i = 0; i < b; ++i) reordered.push_back(eps[p[i]]);
        eps = std::move(reordered);
    }
    stats.pair_cost = pair_cost(xs, eps, identity);

    PreparedBatch pb;
    for (std::size_t i = 0; i < b; ++i) {
        const bool drop = state.rng.uniform() < cfg.dropout_p;
        pb.c.push_back(drop ? Condition::null() : data[i].c);
        if (drop) ++stats.null_conditions;
        const FlowStep t = sample_flowstep(cfg.sampler, state.rng);
        pb.t.push_back(t);
        pb.z.push_back(mix(xs[i], eps[i], t));
        pb.target.push_back(target_velocity(xs[i], eps[i]));
        pb.weight.push_back(cfg.loss_weighting == LossWeighting::None
                                ? 1.0
                                : logit_normal_pdf(t, cfg.sampler.m, cfg.sampler.s));
    }
    return pb;
}

void apply_update(TrainState& state, const PreparedBatch& pb, const TrainConfig& cfg, StepStats& stats) {
    const auto samples = pb.samples();
    LossAndGrad lg = state.field.loss_and_grad(samples);
    double norm2 = 0.0;
    for (double g : lg.grad) norm2 += g * g;
    const std::size_t step_index = state.step + 1;
    if (!std::isfinite(norm2) || !std::isfinite(lg.loss))
        throw TrainingDiverged("training diverged: non-finite gradient at step " + std::to_string(step_index),
                               step_index);
    stats.loss = lg.loss;
    stats.grad_norm = std::sqrt(norm2);

    const auto& o = cfg.optimizer;
    const double clip = (o.clip_norm > 0.0 && stats.grad_norm > o.clip_norm) ? o.clip_norm / stats.grad_norm : 1.0;
    const double warm = o.warmup == 0 ? 1.0
                                      : std::min(1.0, static_cast<double>(step_index) / static_cast<double>(o.warmup));
    const double lr = o.lr * warm;
    const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(step_index));
    const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(step_index));
    auto p = state.field.parameters();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = lg.grad[i] * clip;
        state.adam_m[i] = o.beta1 * state.adam_m[i] + (1.0 - o.beta1) * g;
        state.adam_v[i] = o.beta2 * state.adam_v[i] + (1.0 - o.beta2) * g * g;
        const double mhat = state.adam_m[i] / bc1;
        const double vhat = state.adam_v[i] / bc2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + o.eps) + o.weight_decay * p[i]);
    }
    state.step = step_index;
    if (state.step % cfg.ema.interval == 0) {
        const double d = cfg.ema.decay;
        for (std::size_t i = 0; i < p.size(); ++i) state.ema[i] = d * state.ema[i] + (1.0 - d) * p[i];
        ++state.ema_updates;
        stats.ema_updated = true;
    }
    stats.step = state.step;
}

}  // namespace

StepStats train_step(TrainState& state, const Batch& data_batch, const TrainConfig& cfg) {
    StepStats stats;
    const PreparedBatch pb = prepare(state, data_batch, cfg, stats);
    apply_update(state, pb, cfg, stats);
    return stats;
}

void write_train_log_header(std::ostream& os) { os << "step,loss,pair_cost,ema_loss\n"; }

TrainResult train(const TrainConfig& cfg, const Batch& dataset, std::ostream* log_csv) {
    if (dataset.empty()) throw InvalidArgument("train: empty dataset");
    TrainResult result{init_train_state(cfg), {}, {}};
    TrainState& state = result.state;
    if (state.field.config().length != dataset.length() || state.field.config().channels != dataset.channels())
        throw InvalidConfig("train: model shape does not match the dataset");
    if (log_csv) write_train_log_header(*log_csv);
    result.losses.reserve(cfg.steps);
    for (std::size_t s = 0; s < cfg.steps; ++s) {
        Batch batch;
        for (std::size_t i = 0; i < cfg.batch_size; ++i) batch.push_back(dataset[state.rng.below(dataset.size())]);
        StepStats stats;
        const PreparedBatch pb = prepare(state, batch, cfg, stats);
        apply_update(state, pb, cfg, stats);
        result.losses.push_back(stats.loss);
        if (cfg.log_every > 0 && (state.step % cfg.log_every == 0 || state.step == 1 || s + 1 == cfg.steps)) {
            const MlpField ema_field(cfg.model, state.ema);
            const double ema_loss = ema_field.loss_and_grad(pb.samples()).loss;
            TrainLogRow row{state.step, stats.loss, stats.pair_cost, ema_loss};
            result.log.push_back(row);
            if (log_csv)
                *log_csv << row.step << ',' << row.loss << ',' << row.pair_cost << ',' << row.ema_loss << '\n';
        }
    }
    return result;
}

double grad_check(const MlpField& field, const Batch& batch, Rng& rng, std::size_t num_params, double step) {
    if (batch.empty()) throw InvalidArgument("grad_check: empty batch");
    PreparedBatch pb;
    for (const auto& item : batch) {
        const LatentSeq eps = sample_noise(item.x.length(), item.x.channels(), rng);
        const double t = rng.uniform();
        pb.z.push_back(mix(item.x, eps, FlowStep(t)));
        pb.target.push_back(target_velocity(item.x, eps));
        pb.t.push_back(t);
        pb.c.push_back(item.c);
        pb.weight.push_back(1.0);
    }
    const auto samples = pb.samples();
    const std::vector<double> analytic = field.loss_and_grad(samples).grad;
    MlpField probe = field;
    const std::size_t n = analytic.size();
    double worst = 0.0;
    for (std::size_t k = 0; k < std::min(num_params, n); ++k) {
        const std::size_t i = num_params >= n ? k : rng.below(n);
        auto p = probe.parameters();
        const double orig = p[i];
        p[i] = orig + step;
        const double up = probe.loss_and_grad(samples).loss;
        p[i] = orig - step;
        const double down = probe.loss_and_grad(samples).loss;
        p[i] = orig;
        const double fd = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(analytic[i]), std::abs(fd), 1e-6});
        worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
    }
    return worst;
}

Checkpoint make_checkpoint(const TrainState& state) {
    const auto p = state.field.parameters();
    return Checkpoint{state.field.config(), std::vector<double>(p.begin(), p.end()), state.ema};
}

}  // namespace latentflow
