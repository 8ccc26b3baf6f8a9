#pragma once

// Domain types and the flow-matching mixture algebra.
//
// Latents are stored row-major, time-by-channel: element (frame, channel) of
// an L x d sequence lives at data[frame * d + channel].

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace latentflow {

// ---------------------------------------------------------------------------
// Errors

enum class ErrorCode : int {
    Ok = 0,
    InvalidArgument = 1,
    Domain = 2,
    UnsupportedCondition = 3,
    Divergence = 4,
    TrainingDiverged = 5,
    InvalidConfig = 6,
    Io = 7,
    DegenerateTrajectory = 8,
    Internal = 99,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& w) : Error(ErrorCode::InvalidArgument, w) {}
};
struct DomainError : Error {
    explicit DomainError(const std::string& w) : Error(ErrorCode::Domain, w) {}
};
struct UnsupportedCondition : Error {
    explicit UnsupportedCondition(const std::string& w) : Error(ErrorCode::UnsupportedCondition, w) {}
};
struct InvalidConfig : Error {
    explicit InvalidConfig(const std::string& w) : Error(ErrorCode::InvalidConfig, w) {}
};
struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorCode::Io, w) {}
};

/// Raised by the ODE solvers when the state becomes non-finite.
struct DivergenceError : Error {
    DivergenceError(const std::string& w, std::size_t step) : Error(ErrorCode::Divergence, w), step_index(step) {}
    std::size_t step_index;
};

// ---------------------------------------------------------------------------
// Random numbers
//
// Counter-based generator: the k-th 64-bit output is splitmix64(key + k * golden),
// so a stream is fully described by (key, counter) and is identical on every
// platform. Normals use the Box-Muller transform on pairs of open-interval
// uniforms; the second variate of each pair is cached.

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6c61746e74666c77ULL)) {}

    std::uint64_t next_u64();
    /// Uniform on the open interval (0, 1).
    double uniform();
    double normal();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    /// Independent child stream for a worker or sweep cell.
    Rng derive(std::uint64_t stream) const;

    std::uint64_t counter() const { return counter_; }

private:
    static std::uint64_t mix(std::uint64_t z);

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

// ---------------------------------------------------------------------------
// LatentSeq

class LatentSeq {
public:
    LatentSeq() = default;
    LatentSeq(std::size_t length, std::size_t channels, double fill = 0.0);
    LatentSeq(std::size_t length, std::size_t channels, std::vector<double> values);
    /// Nested-list construction, one inner list per frame.
    static LatentSeq from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t length() const { return length_; }
    std::size_t channels() const { return channels_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double& operator()(std::size_t frame, std::size_t channel) { return values_[frame * channels_ + channel]; }
    double operator()(std::size_t frame, std::size_t channel) const { return values_[frame * channels_ + channel]; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    bool same_shape(const LatentSeq& o) const { return length_ == o.length_ && channels_ == o.channels_; }
    bool all_finite() const;

    LatentSeq& operator+=(const LatentSeq& o);
    LatentSeq& operator-=(const LatentSeq& o);
    LatentSeq& operator*=(double s);

    friend bool operator==(const LatentSeq&, const LatentSeq&) = default;

private:
    std::size_t length_ = 0;
    std::size_t channels_ = 0;
    std::vector<double> values_;
};

LatentSeq operator+(LatentSeq a, const LatentSeq& b);
LatentSeq operator-(LatentSeq a, const LatentSeq& b);
LatentSeq operator*(double s, LatentSeq a);

/// Throws InvalidArgument naming `what` if shapes differ.
void require_same_shape(const LatentSeq& a, const LatentSeq& b, const char* what);

/// z = a + s * b, element-wise.
LatentSeq axpy(const LatentSeq& a, double s, const LatentSeq& b);

double squared_norm(const LatentSeq& a);
double squared_distance(const LatentSeq& a, const LatentSeq& b);

// ---------------------------------------------------------------------------
// FlowStep

class FlowStep {
public:
    FlowStep() = default;
    explicit FlowStep(double t);
    double value() const { return t_; }
    operator double() const { return t_; }

private:
    double t_ = 0.0;
};

// ---------------------------------------------------------------------------
// Condition

class Condition {
public:
    enum class Kind { Null, ClassLabel, Embedding };

    Condition() = default;
    static Condition null() { return {}; }
    static Condition label(std::size_t id);
    static Condition embedding(std::vector<double> v);

    Kind kind() const { return kind_; }
    bool is_null() const { return kind_ == Kind::Null; }
    std::size_t label_id() const;
    const std::vector<double>& embedding_vector() const;

    std::string describe() const;

    friend bool operator==(const Condition&, const Condition&) = default;

private:
    Kind kind_ = Kind::Null;
    std::size_t id_ = 0;
    std::vector<double> embedding_;
};

// ---------------------------------------------------------------------------
// Batch

struct Item {
    LatentSeq x;
    Condition c;
};

class Batch {
public:
    Batch() = default;
    explicit Batch(std::vector<Item> items);

    void push_back(Item item);
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    const Item& operator[](std::size_t i) const { return items_[i]; }
    Item& operator[](std::size_t i) { return items_[i]; }
    const std::vector<Item>& items() const { return items_; }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

    std::size_t length() const { return items_.empty() ? 0 : items_.front().x.length(); }
    std::size_t channels() const { return items_.empty() ? 0 : items_.front().x.channels(); }

    std::vector<LatentSeq> latents() const;

private:
    std::vector<Item> items_;
};

// ---------------------------------------------------------------------------
// Mixture algebra

/// z_t = t x + (1 - t) eps.
LatentSeq mix(const LatentSeq& x, const LatentSeq& eps, FlowStep t);

/// Regression target of the velocity field along the straight path: x - eps.
LatentSeq target_velocity(const LatentSeq& x, const LatentSeq& eps);

/// i.i.d. standard normal sequence.
LatentSeq sample_noise(std::size_t length, std::size_t channels, Rng& rng);

}  // namespace latentflow
