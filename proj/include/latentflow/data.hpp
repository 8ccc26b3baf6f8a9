#pragma once

// Deterministic synthetic datasets.
//
//   gaussians   class k ~ N(mu_k, sigma^2 I) per element; mu_k puts
//               (r cos a_k, r sin a_k) in channels 0 and 1 of every frame,
//               a_k = 2 pi k / classes, remaining channels zero-mean.
//   moons_like  interleaved half circles (scaled by 2) in channels 0/1, one
//               arc per class, element noise N(0, 0.1^2).
//   seq_sines   class k is sin(2 pi (k + 1) n / (L d) + phase) over the
//               L*d samples n = frame * d + channel, random phase, plus N(0, 0.1^2).

#include "latentflow/core.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace latentflow {

struct DatasetSpec {
    enum class Kind { Gaussians, MoonsLike, SeqSines };

    Kind kind = Kind::Gaussians;
    std::size_t classes = 2;
    std::size_t length = 1;
    std::size_t channels = 2;
    std::size_t n_per_class = 1000;
    std::uint64_t seed = 0;
    double radius = 4.0;  // gaussians
    double sigma = 0.5;   // gaussians

    void validate() const;
    static Kind parse_kind(const std::string& name);
    static std::string kind_name(Kind k);
};

/// Per-class mean of the gaussians kind, as an L x d sequence.
LatentSeq gaussian_class_mean(const DatasetSpec& spec, std::size_t k);

/// Items are ordered class-major (all of class 0, then class 1, ...), each
/// class generated from its own stream rng.derive(k).
Batch make_dataset(const DatasetSpec& spec, Rng& rng);
Batch make_dataset(const DatasetSpec& spec);

struct Splits {
    Batch train;
    Batch validation;
    Batch eval;
};

/// Deterministic shuffled split by fractions (train, validation, eval).
Splits split(const Batch& dataset, std::array<double, 3> fractions, std::uint64_t seed);

/// Items of `dataset` carrying class label k.
std::vector<LatentSeq> class_items(const Batch& dataset, std::size_t k);

/// Latents as LSEQ plus a JSON sidecar with labels and the generating spec.
void save_dataset(const Batch& dataset, const DatasetSpec& spec, const std::filesystem::path& lseq_path,
                  const std::filesystem::path& sidecar_path);
Batch load_dataset(const std::filesystem::path& lseq_path, const std::filesystem::path& sidecar_path);

}  // namespace latentflow
