#pragma once

// Toy-scale objective metrics: Gaussian Frechet distance on flattened
// latents, mean per-frame L2 consistency, and classifier-based adherence.

#include "latentflow/core.hpp"

#include <span>
#include <string>
#include <vector>

namespace latentflow {

/// ||mu_A - mu_B||^2 + Tr(S_A + S_B - 2 (S_A S_B)^{1/2}) on flattened
/// latents, covariances regularised by 1e-6 I. Never negative.
double frechet_gaussian(std::span<const LatentSeq> a, std::span<const LatentSeq> b);

/// Mean over frames of the per-frame Euclidean distance.
double lpaps(const LatentSeq& a, const LatentSeq& b);

/// Multinomial logistic regression on flattened latents, used as the
/// adherence oracle. Fitted on data held out from the generative model.
class LogisticClassifier {
public:
    struct FitOptions {
        std::size_t iterations = 500;
        double learning_rate = 0.5;
        double l2 = 1e-4;
    };

    LogisticClassifier() = default;
    static LogisticClassifier fit(const Batch& labelled, std::size_t num_classes, const FitOptions& opts);
    static LogisticClassifier fit(const Batch& labelled, std::size_t num_classes) { return fit(labelled, num_classes, {}); }

    std::vector<double> probabilities(const LatentSeq& x) const;
    std::size_t predict(const LatentSeq& x) const;
    std::size_t num_classes() const { return num_classes_; }
    std::size_t feature_dim() const { return dim_; }

private:
    std::size_t num_classes_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> feature_mean_, feature_scale_;
    std::vector<double> weights_;  // num_classes x (dim + 1), bias last
};

/// Classifier probability of class c for x. Null conditions are rejected.
double adherence(const LatentSeq& x, const Condition& c, const LogisticClassifier& classifier);

struct MetricsReport {
    double frechet = 0.0;
    double lpaps = 0.0;
    double adherence = 0.0;
    double straightness = 0.0;
    std::size_t nfe = 0;
    std::string config_hash;

    std::string to_json() const;
    static MetricsReport from_json(const std::string& text);
    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

struct RunInputs {
    std::span<const LatentSeq> generated;
    std::span<const LatentSeq> reference;
    std::span<const Condition> conditions;         // per generated item, for adherence
    const LogisticClassifier* classifier = nullptr;
    std::span<const LatentSeq> originals = {};     // paired with generated for lpaps, optional
    std::span<const double> straightness = {};     // per-trajectory values, optional
    std::size_t nfe = 0;
    std::string config_hash;
};

MetricsReport evaluate_run(const RunInputs& in);

}  // namespace latentflow
