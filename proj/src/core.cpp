#include "latentflow/core.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace latentflow {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

// ---------------------------------------------------------------------------
// Rng

std::uint64_t Rng::mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() {
    ++counter_;
    return mix(key_ + counter_ * kGolden);
}

double Rng::uniform() {
    // 53 random bits, shifted by half an ulp so 0 and 1 are never produced.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw InvalidArgument("Rng::below: n must be positive");
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % n;
}

Rng Rng::derive(std::uint64_t stream) const {
    Rng child(0);
    child.key_ = mix(key_ ^ mix(stream + kGolden));
    return child;
}

// ---------------------------------------------------------------------------
// LatentSeq

LatentSeq::LatentSeq(std::size_t length, std::size_t channels, double fill)
    : length_(length), channels_(channels), values_(length * channels, fill) {
    if (length == 0 || channels == 0) throw InvalidArgument("LatentSeq: L and d must be >= 1");
}

LatentSeq::LatentSeq(std::size_t length, std::size_t channels, std::vector<double> values)
    : length_(length), channels_(channels), values_(std::move(values)) {
    if (length == 0 || channels == 0) throw InvalidArgument("LatentSeq: L and d must be >= 1");
    if (values_.size() != length * channels) throw InvalidArgument("LatentSeq: value count does not match L*d");
}

LatentSeq LatentSeq::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.front().empty()) throw InvalidArgument("LatentSeq::from_rows: empty input");
    const std::size_t d = rows.front().size();
    std::vector<double> v;
    v.reserve(rows.size() * d);
    for (const auto& r : rows) {
        if (r.size() != d) throw InvalidArgument("LatentSeq::from_rows: ragged rows");
        v.insert(v.end(), r.begin(), r.end());
    }
    return LatentSeq(rows.size(), d, std::move(v));
}

bool LatentSeq::all_finite() const {
    for (double v : values_)
        if (!std::isfinite(v)) return false;
    return true;
}

LatentSeq& LatentSeq::operator+=(const LatentSeq& o) {
    require_same_shape(*this, o, "operator+=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
}

LatentSeq& LatentSeq::operator-=(const LatentSeq& o) {
    require_same_shape(*this, o, "operator-=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
}

LatentSeq& LatentSeq::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

LatentSeq operator+(LatentSeq a, const LatentSeq& b) { return a += b; }
LatentSeq operator-(LatentSeq a, const LatentSeq& b) { return a -= b; }
LatentSeq operator*(double s, LatentSeq a) { return a *= s; }

void require_same_shape(const LatentSeq& a, const LatentSeq& b, const char* what) {
    if (!a.same_shape(b)) {
        std::ostringstream os;
        os << what << ": shape mismatch (" << a.length() << "x" << a.channels() << " vs " << b.length() << "x"
           << b.channels() << ")";
        throw InvalidArgument(os.str());
    }
}

LatentSeq axpy(const LatentSeq& a, double s, const LatentSeq& b) {
    require_same_shape(a, b, "axpy");
    LatentSeq out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + s * b[i];
    return out;
}

double squared_norm(const LatentSeq& a) {
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    return s;
}

double squared_distance(const LatentSeq& a, const LatentSeq& b) {
    require_same_shape(a, b, "squared_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        s += diff * diff;
    }
    return s;
}

// ---------------------------------------------------------------------------
// FlowStep / Condition / Batch

FlowStep::FlowStep(double t) : t_(t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("FlowStep: t must lie in [0, 1], got " + std::to_string(t));
}

Condition Condition::label(std::size_t id) {
    Condition c;
    c.kind_ = Kind::ClassLabel;
    c.id_ = id;
    return c;
}

Condition Condition::embedding(std::vector<double> v) {
    if (v.empty()) throw InvalidArgument("Condition::embedding: empty vector");
    Condition c;
    c.kind_ = Kind::Embedding;
    c.embedding_ = std::move(v);
    return c;
}

std::size_t Condition::label_id() const {
    if (kind_ != Kind::ClassLabel) throw InvalidArgument("Condition is not a class label");
    return id_;
}

const std::vector<double>& Condition::embedding_vector() const {
    if (kind_ != Kind::Embedding) throw InvalidArgument("Condition is not an embedding");
    return embedding_;
}

std::string Condition::describe() const {
    switch (kind_) {
        case Kind::Null: return "null";
        case Kind::ClassLabel: return "class:" + std::to_string(id_);
        case Kind::Embedding: return "embedding[" + std::to_string(embedding_.size()) + "]";
    }
    return "?";
}

Batch::Batch(std::vector<Item> items) : items_(std::move(items)) {
    for (const auto& it : items_)
        if (!it.x.same_shape(items_.front().x)) throw InvalidArgument("Batch: items must share (L, d)");
}

void Batch::push_back(Item item) {
    if (!items_.empty() && !item.x.same_shape(items_.front().x))
        throw InvalidArgument("Batch: items must share (L, d)");
    items_.push_back(std::move(item));
}

std::vector<LatentSeq> Batch::latents() const {
    std::vector<LatentSeq> out;
    out.reserve(items_.size());
    for (const auto& it : items_) out.push_back(it.x);
    return out;
}

// ---------------------------------------------------------------------------
// Mixture algebra

LatentSeq mix(const LatentSeq& x, const LatentSeq& eps, FlowStep t) {
    require_same_shape(x, eps, "mix");
    const double tv = t.value();
    const double sv = 1.0 - tv;
    LatentSeq out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = tv * x[i] + sv * eps[i];
    return out;
}

LatentSeq target_velocity(const LatentSeq& x, const LatentSeq& eps) {
    require_same_shape(x, eps, "target_velocity");
    return x - eps;
}

LatentSeq sample_noise(std::size_t length, std::size_t channels, Rng& rng) {
    LatentSeq out(length, channels);
    for (double& v : out.values()) v = rng.normal();
    return out;
}

}  // namespace latentflow
