#include "latentflow/metrics.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace latentflow {

namespace {

Eigen::MatrixXd stack(std::span<const LatentSeq> set) {
    const auto n = static_cast<Eigen::Index>(set.size());
    const auto dim = static_cast<Eigen::Index>(set.front().size());
    Eigen::MatrixXd m(n, dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        require_same_shape(set.front(), set[static_cast<std::size_t>(i)], "frechet_gaussian");
        for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = set[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return m;
}

void fit_gaussian(const Eigen::MatrixXd& x, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
    mean = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
    const double denom = x.rows() > 1 ? static_cast<double>(x.rows() - 1) : 1.0;
    cov = (centered.transpose() * centered) / denom;
    cov = 0.5 * (cov + cov.transpose());
    cov.diagonal().array() += 1e-6;
}

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_gaussian(std::span<const LatentSeq> a, std::span<const LatentSeq> b) {
    if (a.empty() || b.empty()) throw InvalidArgument("frechet_gaussian: empty sample set");
    if (a.front().size() != b.front().size()) throw InvalidArgument("frechet_gaussian: dimension mismatch");
    Eigen::VectorXd mu_a, mu_b;
    Eigen::MatrixXd cov_a, cov_b;
    fit_gaussian(stack(a), mu_a, cov_a);
    fit_gaussian(stack(b), mu_b, cov_b);
    // Tr (S_A S_B)^{1/2} = Tr (S_A^{1/2} S_B S_A^{1/2})^{1/2}; the inner product is symmetric PSD.
    const Eigen::MatrixXd ra = sym_sqrt(cov_a);
    Eigen::MatrixXd inner = ra * cov_b * ra;
    inner = 0.5 * (inner + inner.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
    const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    const double d = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
    return std::max(0.0, d);
}

double lpaps(const LatentSeq& a, const LatentSeq& b) {
    require_same_shape(a, b, "lpaps");
    double total = 0.0;
    for (std::size_t f = 0; f < a.length(); ++f) {
        double s = 0.0;
        for (std::size_t c = 0; c < a.channels(); ++c) {
            const double d = a(f, c) - b(f, c);
            s += d * d;
        }
        total += std::sqrt(s);
    }
    return total / static_cast<double>(a.length());
}

// ---------------------------------------------------------------------------
// Logistic classifier

LogisticClassifier LogisticClassifier::fit(const Batch& labelled, std::size_t num_classes, const FitOptions& opts) {
    if (labelled.empty()) throw InvalidArgument("LogisticClassifier: empty training set");
    if (num_classes < 2) throw InvalidArgument("LogisticClassifier: need at least two classes");
    LogisticClassifier clf;
    clf.num_classes_ = num_classes;
    clf.dim_ = labelled[0].x.size();
    const auto n = labelled.size();
    const auto dim = clf.dim_;

    // Standardise features so a fixed step size works across datasets.
    clf.feature_mean_.assign(dim, 0.0);
    clf.feature_scale_.assign(dim, 0.0);
    for (const auto& it : labelled)
        for (std::size_t j = 0; j < dim; ++j) clf.feature_mean_[j] += it.x[j];
    for (auto& m : clf.feature_mean_) m /= static_cast<double>(n);
    for (const auto& it : labelled)
        for (std::size_t j = 0; j < dim; ++j) {
            const double d = it.x[j] - clf.feature_mean_[j];
            clf.feature_scale_[j] += d * d;
        }
    for (auto& s : clf.feature_scale_) s = 1.0 / std::sqrt(s / static_cast<double>(n) + 1e-12);

    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim + 1));
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(num_classes));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& it = labelled[i];
        if (it.c.kind() != Condition::Kind::ClassLabel || it.c.label_id() >= num_classes)
            throw InvalidArgument("LogisticClassifier: every item needs a class label below num_classes");
        for (std::size_t j = 0; j < dim; ++j)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                (it.x[j] - clf.feature_mean_[j]) * clf.feature_scale_[j];
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(dim)) = 1.0;
        y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(it.c.label_id())) = 1.0;
    }
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim + 1), static_cast<Eigen::Index>(num_classes));
    for (std::size_t it = 0; it < opts.iterations; ++it) {
        Eigen::MatrixXd logits = x * w;
        for (Eigen::Index r = 0; r < logits.rows(); ++r) {
            const double mx = logits.row(r).maxCoeff();
            logits.row(r) = (logits.row(r).array() - mx).exp();
            logits.row(r) /= logits.row(r).sum();
        }
        Eigen::MatrixXd grad = x.transpose() * (logits - y) / static_cast<double>(n) + opts.l2 * w;
        w -= opts.learning_rate * grad;
    }
    clf.weights_.resize((dim + 1) * num_classes);
    for (std::size_t k = 0; k < num_classes; ++k)
        for (std::size_t j = 0; j <= dim; ++j)
            clf.weights_[k * (dim + 1) + j] = w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
    return clf;
}

std::vector<double> LogisticClassifier::probabilities(const LatentSeq& x) const {
    if (x.size() != dim_) throw InvalidArgument("LogisticClassifier: feature dimension mismatch");
    std::vector<double> logits(num_classes_, 0.0);
    for (std::size_t k = 0; k < num_classes_; ++k) {
        const double* w = weights_.data() + k * (dim_ + 1);
        double s = w[dim_];
        for (std::size_t j = 0; j < dim_; ++j) s += w[j] * (x[j] - feature_mean_[j]) * feature_scale_[j];
        logits[k] = s;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (auto& l : logits) z += (l = std::exp(l - mx));
    for (auto& l : logits) l /= z;
    return logits;
}

std::size_t LogisticClassifier::predict(const LatentSeq& x) const {
    const auto p = probabilities(x);
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

double adherence(const LatentSeq& x, const Condition& c, const LogisticClassifier& classifier) {
    if (c.kind() != Condition::Kind::ClassLabel)
        throw InvalidArgument("adherence: needs a class-label condition, got " + c.describe());
    if (c.label_id() >= classifier.num_classes()) throw InvalidArgument("adherence: class id out of range");
    return classifier.probabilities(x)[c.label_id()];
}

// ---------------------------------------------------------------------------
// Reports

std::string MetricsReport::to_json() const {
    nlohmann::json j{{"frechet", frechet},   {"lpaps", lpaps}, {"adherence", adherence},
                     {"straightness", straightness}, {"nfe", nfe},     {"config_hash", config_hash}};
    return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        MetricsReport r;
        r.frechet = j.at("frechet").get<double>();
        r.lpaps = j.at("lpaps").get<double>();
        r.adherence = j.at("adherence").get<double>();
        r.straightness = j.at("straightness").get<double>();
        r.nfe = j.at("nfe").get<std::size_t>();
        r.config_hash = j.at("config_hash").get<std::string>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("MetricsReport::from_json: ") + e.what());
    }
}

MetricsReport evaluate_run(const RunInputs& in) {
    if (in.generated.empty() || in.reference.empty()) throw InvalidArgument("evaluate_run: empty sample set");
    MetricsReport r;
    r.frechet = frechet_gaussian(in.generated, in.reference);
    if (!in.originals.empty()) {
        if (in.originals.size() != in.generated.size()) throw InvalidArgument("evaluate_run: originals must pair with generated");
        double s = 0.0;
        for (std::size_t i = 0; i < in.generated.size(); ++i) s += lpaps(in.generated[i], in.originals[i]);
        r.lpaps = s / static_cast<double>(in.generated.size());
    }
    if (in.classifier) {
        if (in.conditions.size() != in.generated.size()) throw InvalidArgument("evaluate_run: one condition per sample");
        double s = 0.0;
        for (std::size_t i = 0; i < in.generated.size(); ++i) s += adherence(in.generated[i], in.conditions[i], *in.classifier);
        r.adherence = s / static_cast<double>(in.generated.size());
    }
    if (!in.straightness.empty()) {
        double s = 0.0;
        for (double v : in.straightness) s += v;
        r.straightness = s / static_cast<double>(in.straightness.size());
    }
    r.nfe = in.nfe;
    r.config_hash = in.config_hash;
    return r;
}

}  // namespace latentflow
