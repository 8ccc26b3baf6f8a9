#include "latentflow/velocity.hpp"

#include "latentflow/io.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <numbers>

namespace latentflow {

LatentSeq LambdaField::eval(const LatentSeq& z, FlowStep t, const Condition& c, NfeCounter& nfe) const {
    ++nfe.count;
    LatentSeq out = fn_(z, t.value(), c);
    require_same_shape(z, out, "LambdaField");
    return out;
}

// ---------------------------------------------------------------------------
// Gaussian oracle

GaussianOracleField::GaussianOracleField(std::vector<std::vector<double>> mu, std::vector<std::vector<double>> sigma)
    : mu_(std::move(mu)), sigma_(std::move(sigma)) {
    if (mu_.empty() || mu_.size() != sigma_.size()) throw InvalidArgument("GaussianOracleField: need mu/sigma per class");
    for (std::size_t k = 0; k < mu_.size(); ++k) {
        if (mu_[k].empty() || mu_[k].size() != mu_.front().size() || sigma_[k].size() != mu_[k].size())
            throw InvalidArgument("GaussianOracleField: inconsistent channel counts");
        for (double s : sigma_[k])
            if (!(s > 0.0)) throw InvalidArgument("GaussianOracleField: sigma must be positive");
    }
}

GaussianOracleField GaussianOracleField::isotropic(double mu, double sigma, std::size_t channels) {
    return GaussianOracleField({std::vector<double>(channels, mu)}, {std::vector<double>(channels, sigma)});
}

double GaussianOracleField::velocity(double z, double t, double mu, double sigma) {
    const double s2 = sigma * sigma;
    const double u = 1.0 - t;
    return mu + (t * s2 - u) * (z - t * mu) / (t * t * s2 + u * u);
}

LatentSeq GaussianOracleField::eval(const LatentSeq& z, FlowStep t, const Condition& c, NfeCounter& nfe) const {
    if (c.kind() != Condition::Kind::ClassLabel)
        throw UnsupportedCondition("GaussianOracleField supports class-label conditions only, got " + c.describe());
    const std::size_t k = c.label_id();
    if (k >= mu_.size()) throw InvalidArgument("GaussianOracleField: class id out of range");
    if (z.channels() != channels()) throw InvalidArgument("GaussianOracleField: channel count mismatch");
    ++nfe.count;
    LatentSeq out = z;
    for (std::size_t f = 0; f < z.length(); ++f)
        for (std::size_t j = 0; j < z.channels(); ++j) out(f, j) = velocity(z(f, j), t, mu_[k][j], sigma_[k][j]);
    return out;
}

LatentSeq oracle_eval(const GaussianOracleField& field, const LatentSeq& z, FlowStep t, const Condition& c) {
    NfeCounter n;
    return field.eval(z, t, c, n);
}

double oracle_validate(const GaussianOracleField& field, double t, std::size_t num_samples, Rng& rng,
                       std::size_t bins) {
    if (!(t > 0.0 && t < 1.0)) throw DomainError("oracle_validate: t must lie in (0, 1)");
    if (bins == 0 || num_samples == 0) throw InvalidArgument("oracle_validate: need samples and bins");
    const double mu = field.mu(0)[0];
    const double sigma = field.sigma(0)[0];
    const double center = t * mu;
    const double sd = std::sqrt(t * t * sigma * sigma + (1.0 - t) * (1.0 - t));
    const double lo = center - 3.0 * sd;
    const double width = 6.0 * sd / static_cast<double>(bins);

    std::vector<double> sum_target(bins, 0.0), sum_oracle(bins, 0.0);
    std::vector<std::size_t> count(bins, 0);
    for (std::size_t i = 0; i < num_samples; ++i) {
        const double x = mu + sigma * rng.normal();
        const double e = rng.normal();
        const double z = t * x + (1.0 - t) * e;
        const double pos = (z - lo) / width;
        if (pos < 0.0 || pos >= static_cast<double>(bins)) continue;
        const auto b = static_cast<std::size_t>(pos);
        sum_target[b] += x - e;
        sum_oracle[b] += GaussianOracleField::velocity(z, t, mu, sigma);
        ++count[b];
    }
    const std::size_t min_count = std::max<std::size_t>(10, num_samples / 200);
    double worst = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        if (count[b] < min_count) continue;
        const double n = static_cast<double>(count[b]);
        worst = std::max(worst, std::abs(sum_target[b] / n - sum_oracle[b] / n));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// MLP field

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using CMap = Eigen::Map<const MatrixXd>;
using Map = Eigen::Map<MatrixXd>;

struct LayerShape {
    std::size_t in, out, w_offset, b_offset;
};

std::size_t embedding_size(const MlpConfig& cfg) { return (cfg.num_classes + 1) * cfg.embed_dim; }

std::vector<LayerShape> layer_shapes(const MlpConfig& cfg) {
    std::vector<LayerShape> out;
    std::size_t offset = embedding_size(cfg);
    std::size_t in = cfg.input_dim();
    std::vector<std::size_t> outs = cfg.hidden;
    outs.push_back(cfg.output_dim());
    for (std::size_t o : outs) {
        LayerShape s{in, o, offset, offset + in * o};
        offset = s.b_offset + o;
        out.push_back(s);
        in = o;
    }
    return out;
}

double silu(double a) { return a / (1.0 + std::exp(-a)); }
double silu_grad(double a) {
    const double s = 1.0 / (1.0 + std::exp(-a));
    return s * (1.0 + a * (1.0 - s));
}

void check_config(const MlpConfig& cfg) {
    if (cfg.length == 0 || cfg.channels == 0) throw InvalidConfig("MlpConfig: L and d must be >= 1");
    if (cfg.num_classes == 0) throw InvalidConfig("MlpConfig: num_classes must be >= 1");
    if (cfg.embed_dim == 0) throw InvalidConfig("MlpConfig: embed_dim must be >= 1");
    if (cfg.time_features == 0 || cfg.time_features % 2 != 0)
        throw InvalidConfig("MlpConfig: time_features must be a positive even number");
    for (std::size_t h : cfg.hidden)
        if (h == 0) throw InvalidConfig("MlpConfig: hidden widths must be positive");
}

}  // namespace

std::size_t MlpConfig::parameter_count() const {
    auto shapes = layer_shapes(*this);
    return shapes.back().b_offset + shapes.back().out;
}

std::vector<double> time_features(double t, std::size_t count) {
    std::vector<double> f(count);
    double freq = 0.5;
    for (std::size_t i = 0; i + 1 < count; i += 2) {
        const double a = 2.0 * std::numbers::pi * freq * t;
        f[i] = std::sin(a);
        f[i + 1] = std::cos(a);
        freq *= 2.0;
    }
    return f;
}

struct MlpField::Forward {
    std::vector<MatrixXd> pre;   // pre-activations per layer
    std::vector<MatrixXd> post;  // post[0] is the input, post[l + 1] the output of layer l
};

MlpField::MlpField(MlpConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
    check_config(cfg_);
    params_.assign(cfg_.parameter_count(), 0.0);
    Rng rng(init_seed);
    for (std::size_t i = 0; i < embedding_size(cfg_); ++i) params_[i] = rng.normal();
    for (const auto& s : layer_shapes(cfg_)) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(s.in));
        for (std::size_t i = 0; i < s.in * s.out; ++i) params_[s.w_offset + i] = scale * rng.normal();
    }
}

MlpField::MlpField(MlpConfig cfg, std::vector<double> params) : cfg_(std::move(cfg)) {
    check_config(cfg_);
    set_parameters(std::move(params));
}

void MlpField::set_parameters(std::vector<double> p) {
    if (p.size() != cfg_.parameter_count()) throw InvalidArgument("MlpField: parameter count mismatch");
    params_ = std::move(p);
}

void MlpField::validate(const LatentSeq& z, const Condition& c) const {
    if (z.length() != cfg_.length || z.channels() != cfg_.channels)
        throw InvalidArgument("MlpField: input shape " + std::to_string(z.length()) + "x" +
                              std::to_string(z.channels()) + " does not match the configured " +
                              std::to_string(cfg_.length) + "x" + std::to_string(cfg_.channels));
    if (c.kind() == Condition::Kind::ClassLabel && c.label_id() >= cfg_.num_classes)
        throw InvalidArgument("MlpField: class id " + std::to_string(c.label_id()) + " out of range");
    if (c.kind() == Condition::Kind::Embedding && c.embedding_vector().size() != cfg_.embed_dim)
        throw InvalidArgument("MlpField: embedding width mismatch");
}

std::vector<double> MlpField::embedding_of(const Condition& c) const {
    if (c.kind() == Condition::Kind::Embedding) return c.embedding_vector();
    const std::size_t row = c.is_null() ? cfg_.num_classes : c.label_id();
    if (row > cfg_.num_classes) throw InvalidArgument("MlpField: class id out of range");
    const auto* p = params_.data() + row * cfg_.embed_dim;
    return std::vector<double>(p, p + cfg_.embed_dim);
}

MlpField::Forward MlpField::forward(std::span<const LatentSeq* const> z, std::span<const double> t,
                                    std::span<const Condition* const> c) const {
    const std::size_t batch = z.size();
    const std::size_t zd = cfg_.output_dim();
    Forward f;
    MatrixXd x(cfg_.input_dim(), batch);
    for (std::size_t b = 0; b < batch; ++b) {
        validate(*z[b], *c[b]);
        for (std::size_t i = 0; i < zd; ++i) x(i, b) = (*z[b])[i];
        const auto tf = time_features(t[b], cfg_.time_features);
        for (std::size_t i = 0; i < tf.size(); ++i) x(zd + i, b) = tf[i];
        const auto e = embedding_of(*c[b]);
        for (std::size_t i = 0; i < e.size(); ++i) x(zd + tf.size() + i, b) = e[i];
    }
    f.post.push_back(std::move(x));
    const auto shapes = layer_shapes(cfg_);
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        const auto& s = shapes[l];
        CMap w(params_.data() + s.w_offset, static_cast<Eigen::Index>(s.out), static_cast<Eigen::Index>(s.in));
        Eigen::Map<const VectorXd> bias(params_.data() + s.b_offset, static_cast<Eigen::Index>(s.out));
        MatrixXd a = w * f.post.back();
        a.colwise() += bias;
        if (l + 1 < shapes.size()) {
            MatrixXd h = a.unaryExpr([](double v) { return silu(v); });
            f.pre.push_back(std::move(a));
            f.post.push_back(std::move(h));
        } else {
            f.pre.push_back(a);
            f.post.push_back(std::move(a));
        }
    }
    return f;
}

std::vector<double> MlpField::backward(const Forward& f, std::span<const Condition* const> c,
                                       std::span<const double> d_out) const {
    const auto shapes = layer_shapes(cfg_);
    const auto batch = static_cast<Eigen::Index>(c.size());
    std::vector<double> grad(params_.size(), 0.0);
    MatrixXd delta = CMap(d_out.data(), static_cast<Eigen::Index>(cfg_.output_dim()), batch);
    for (std::size_t li = shapes.size(); li-- > 0;) {
        const auto& s = shapes[li];
        if (li + 1 < shapes.size()) delta.array() *= f.pre[li].unaryExpr([](double v) { return silu_grad(v); }).array();
        Map gw(grad.data() + s.w_offset, static_cast<Eigen::Index>(s.out), static_cast<Eigen::Index>(s.in));
        gw.noalias() = delta * f.post[li].transpose();
        Eigen::Map<VectorXd> gb(grad.data() + s.b_offset, static_cast<Eigen::Index>(s.out));
        gb = delta.rowwise().sum();
        CMap w(params_.data() + s.w_offset, static_cast<Eigen::Index>(s.out), static_cast<Eigen::Index>(s.in));
        MatrixXd next = w.transpose() * delta;
        delta = std::move(next);
    }
    // delta now holds d loss / d input; route the embedding slice to the table.
    const std::size_t e_off = cfg_.output_dim() + cfg_.time_features;
    for (Eigen::Index b = 0; b < batch; ++b) {
        const Condition& cond = *c[static_cast<std::size_t>(b)];
        if (cond.kind() == Condition::Kind::Embedding) continue;
        const std::size_t row = cond.is_null() ? cfg_.num_classes : cond.label_id();
        for (std::size_t i = 0; i < cfg_.embed_dim; ++i)
            grad[row * cfg_.embed_dim + i] += delta(static_cast<Eigen::Index>(e_off + i), b);
    }
    return grad;
}

LatentSeq MlpField::eval(const LatentSeq& z, FlowStep t, const Condition& c, NfeCounter& nfe) const {
    const LatentSeq* zp = &z;
    const double tv = t.value();
    const Condition* cp = &c;
    const auto f = forward({&zp, 1}, {&tv, 1}, {&cp, 1});
    ++nfe.count;
    LatentSeq out(z.length(), z.channels());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f.post.back()(static_cast<Eigen::Index>(i), 0);
    return out;
}

std::vector<LatentSeq> MlpField::eval_batch(std::span<const LatentSeq> z, std::span<const double> t,
                                            std::span<const Condition> c) const {
    if (z.size() != t.size() || z.size() != c.size()) throw InvalidArgument("eval_batch: size mismatch");
    std::vector<const LatentSeq*> zp;
    std::vector<const Condition*> cp;
    for (std::size_t i = 0; i < z.size(); ++i) {
        zp.push_back(&z[i]);
        cp.push_back(&c[i]);
    }
    const auto f = forward(zp, t, cp);
    std::vector<LatentSeq> out;
    out.reserve(z.size());
    for (std::size_t b = 0; b < z.size(); ++b) {
        LatentSeq o(cfg_.length, cfg_.channels);
        for (std::size_t i = 0; i < o.size(); ++i)
            o[i] = f.post.back()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
        out.push_back(std::move(o));
    }
    return out;
}

LossAndGrad MlpField::loss_and_grad(std::span<const MlpSample> samples) const {
    if (samples.empty()) throw InvalidArgument("loss_and_grad: empty batch");
    std::vector<const LatentSeq*> zp;
    std::vector<double> ts;
    std::vector<const Condition*> cp;
    for (const auto& s : samples) {
        require_same_shape(*s.z, *s.target, "loss_and_grad");
        zp.push_back(s.z);
        ts.push_back(s.t);
        cp.push_back(s.c);
    }
    const auto f = forward(zp, ts, cp);
    const auto& out = f.post.back();
    const std::size_t od = cfg_.output_dim();
    const double norm = 1.0 / (static_cast<double>(samples.size()) * static_cast<double>(od));
    std::vector<double> d_out(od * samples.size());
    LossAndGrad r;
    for (std::size_t b = 0; b < samples.size(); ++b) {
        const auto& tgt = *samples[b].target;
        double sq = 0.0;
        for (std::size_t i = 0; i < od; ++i) {
            const double diff = out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) - tgt[i];
            sq += diff * diff;
            d_out[b * od + i] = 2.0 * samples[b].weight * diff * norm;
        }
        r.loss += samples[b].weight * sq * norm;
    }
    r.grad = backward(f, cp, d_out);
    return r;
}

std::vector<double> MlpField::output_vjp(const LatentSeq& z, double t, const Condition& c,
                                         const LatentSeq& cotangent) const {
    require_same_shape(z, cotangent, "output_vjp");
    const LatentSeq* zp = &z;
    const Condition* cp = &c;
    const auto f = forward({&zp, 1}, {&t, 1}, {&cp, 1});
    return backward(f, {&cp, 1}, cotangent.values());
}

// ---------------------------------------------------------------------------
// Guidance

GuidedField::GuidedField(FieldPtr inner, double gamma) : inner_(std::move(inner)), gamma_(gamma) {
    if (!inner_) throw InvalidArgument("GuidedField: null inner field");
    if (!(gamma >= 0.0)) throw InvalidArgument("GuidedField: gamma must be >= 0");
}

LatentSeq GuidedField::eval(const LatentSeq& z, FlowStep t, const Condition& c, NfeCounter& nfe) const {
    if (c.is_null()) throw InvalidArgument("GuidedField: guidance needs a non-null condition");
    const LatentSeq v_null = inner_->eval(z, t, Condition::null(), nfe);
    const LatentSeq v_cond = inner_->eval(z, t, c, nfe);
    LatentSeq out = v_null;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v_null[i] + gamma_ * (v_cond[i] - v_null[i]);
    return out;
}

LatentSeq guided_eval(const GuidedField& field, const LatentSeq& z, FlowStep t, const Condition& c, NfeCounter& nfe) {
    return field.eval(z, t, c, nfe);
}

const VelocityField& field_for_condition(const VelocityField& field, const Condition& c) {
    if (c.is_null())
        if (const auto* g = dynamic_cast<const GuidedField*>(&field)) return field_for_condition(g->inner(), c);
    return field;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    const std::size_t n = ckpt.config.parameter_count();
    if (ckpt.raw.size() != n || ckpt.ema.size() != n) throw InvalidArgument("checkpoint: parameter count mismatch");
    const auto& c = ckpt.config;
    std::vector<std::uint8_t> out{'M', 'L', 'P', 'F', 1};
    for (std::size_t v : {c.length, c.channels, c.num_classes, c.embed_dim, c.time_features, c.hidden.size()})
        io::put_u32(out, static_cast<std::uint32_t>(v));
    for (std::size_t h : c.hidden) io::put_u32(out, static_cast<std::uint32_t>(h));
    io::put_u32(out, static_cast<std::uint32_t>(n));
    for (double v : ckpt.raw) io::put_f32(out, static_cast<float>(v));
    for (double v : ckpt.ema) io::put_f32(out, static_cast<float>(v));
    return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 5 || std::memcmp(bytes.data(), "MLPF", 4) != 0) throw IoError("not an MLPF checkpoint");
    if (bytes[4] != 1) throw IoError("unsupported MLPF version " + std::to_string(bytes[4]));
    std::size_t pos = 5;
    Checkpoint ck;
    ck.config.length = io::get_u32(bytes, pos);
    ck.config.channels = io::get_u32(bytes, pos);
    ck.config.num_classes = io::get_u32(bytes, pos);
    ck.config.embed_dim = io::get_u32(bytes, pos);
    ck.config.time_features = io::get_u32(bytes, pos);
    const std::uint32_t nh = io::get_u32(bytes, pos);
    if (nh > 64) throw IoError("MLPF: implausible hidden layer count");
    ck.config.hidden.clear();
    for (std::uint32_t i = 0; i < nh; ++i) ck.config.hidden.push_back(io::get_u32(bytes, pos));
    try {
        check_config(ck.config);
    } catch (const Error& e) {
        throw IoError(std::string("MLPF: bad layer dims: ") + e.what());
    }
    const std::uint32_t n = io::get_u32(bytes, pos);
    if (n != ck.config.parameter_count()) throw IoError("MLPF: parameter count does not match layer dims");
    if (bytes.size() - pos != 8ull * n) throw IoError("MLPF: payload size mismatch");
    ck.raw.resize(n);
    ck.ema.resize(n);
    for (auto& v : ck.raw) v = io::get_f32(bytes, pos);
    for (auto& v : ck.ema) v = io::get_f32(bytes, pos);
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    io::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace latentflow
