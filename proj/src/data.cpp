#include "latentflow/data.hpp"

#include "latentflow/io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>

namespace latentflow {

void DatasetSpec::validate() const {
    if (classes < 2) throw InvalidConfig("dataset: classes must be >= 2");
    if (length == 0 || channels == 0 || n_per_class == 0) throw InvalidConfig("dataset: counts must be positive");
    if (kind == Kind::MoonsLike && channels < 2) throw InvalidConfig("dataset: moons_like needs d >= 2");
    if (!(sigma > 0.0)) throw InvalidConfig("dataset: sigma must be positive");
}

DatasetSpec::Kind DatasetSpec::parse_kind(const std::string& name) {
    if (name == "gaussians") return Kind::Gaussians;
    if (name == "moons_like" || name == "moons") return Kind::MoonsLike;
    if (name == "seq_sines" || name == "sines") return Kind::SeqSines;
    throw InvalidConfig("unknown data.kind '" + name + "'");
}

std::string DatasetSpec::kind_name(Kind k) {
    switch (k) {
        case Kind::Gaussians: return "gaussians";
        case Kind::MoonsLike: return "moons_like";
        case Kind::SeqSines: return "seq_sines";
    }
    return "?";
}

LatentSeq gaussian_class_mean(const DatasetSpec& spec, std::size_t k) {
    LatentSeq mu(spec.length, spec.channels, 0.0);
    const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(spec.classes);
    for (std::size_t f = 0; f < spec.length; ++f) {
        mu(f, 0) = spec.radius * std::cos(a);
        if (spec.channels > 1) mu(f, 1) = spec.radius * std::sin(a);
    }
    return mu;
}

namespace {

LatentSeq draw_item(const DatasetSpec& spec, std::size_t k, Rng& rng) {
    LatentSeq x(spec.length, spec.channels, 0.0);
    switch (spec.kind) {
        case DatasetSpec::Kind::Gaussians: {
            const LatentSeq mu = gaussian_class_mean(spec, k);
            for (std::size_t i = 0; i < x.size(); ++i) x[i] = mu[i] + spec.sigma * rng.normal();
            break;
        }
        case DatasetSpec::Kind::MoonsLike: {
            for (std::size_t f = 0; f < spec.length; ++f) {
                const double theta = std::numbers::pi * rng.uniform();
                double px = std::cos(theta), py = std::sin(theta);
                if (k % 2 == 1) {
                    px = 1.0 - px;
                    py = 0.5 - py;
                }
                px += 2.5 * static_cast<double>(k / 2);
                x(f, 0) = 2.0 * px + 0.1 * rng.normal();
                x(f, 1) = 2.0 * py + 0.1 * rng.normal();
                for (std::size_t c = 2; c < spec.channels; ++c) x(f, c) = 0.1 * rng.normal();
            }
            break;
        }
        case DatasetSpec::Kind::SeqSines: {
            const double phase = 2.0 * std::numbers::pi * rng.uniform();
            const double n_total = static_cast<double>(x.size());
            const double freq = static_cast<double>(k + 1);
            for (std::size_t i = 0; i < x.size(); ++i)
                x[i] = std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / n_total + phase) +
                       0.1 * rng.normal();
            break;
        }
    }
    return x;
}

}  // namespace

Batch make_dataset(const DatasetSpec& spec, Rng& rng) {
    spec.validate();
    Batch out;
    for (std::size_t k = 0; k < spec.classes; ++k) {
        Rng stream = rng.derive(k);
        for (std::size_t i = 0; i < spec.n_per_class; ++i) out.push_back({draw_item(spec, k, stream), Condition::label(k)});
    }
    return out;
}

Batch make_dataset(const DatasetSpec& spec) {
    Rng rng(spec.seed);
    return make_dataset(spec, rng);
}

Splits split(const Batch& dataset, std::array<double, 3> fractions, std::uint64_t seed) {
    double sum = 0.0;
    for (double f : fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw InvalidArgument("split: fractions must lie in [0, 1]");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("split: fractions must sum to 1");
    const std::size_t n = dataset.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
    const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n))));
    Splits s;
    for (std::size_t i = 0; i < n; ++i) {
        const Item& it = dataset[order[i]];
        if (i < n_train)
            s.train.push_back(it);
        else if (i < n_train + n_val)
            s.validation.push_back(it);
        else
            s.eval.push_back(it);
    }
    return s;
}

std::vector<LatentSeq> class_items(const Batch& dataset, std::size_t k) {
    std::vector<LatentSeq> out;
    for (const auto& it : dataset)
        if (it.c.kind() == Condition::Kind::ClassLabel && it.c.label_id() == k) out.push_back(it.x);
    return out;
}

void save_dataset(const Batch& dataset, const DatasetSpec& spec, const std::filesystem::path& lseq_path,
                  const std::filesystem::path& sidecar_path) {
    io::write_lseq(lseq_path, dataset.latents());
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& it : dataset) {
        if (it.c.kind() == Condition::Kind::ClassLabel)
            labels.push_back(it.c.label_id());
        else
            labels.push_back(nullptr);
    }
    nlohmann::json j{{"labels", labels},
                     {"spec",
                      {{"kind", DatasetSpec::kind_name(spec.kind)},
                       {"classes", spec.classes},
                       {"L", spec.length},
                       {"d", spec.channels},
                       {"n_per_class", spec.n_per_class},
                       {"seed", spec.seed},
                       {"radius", spec.radius},
                       {"sigma", spec.sigma}}}};
    std::ofstream f(sidecar_path);
    if (!f) throw IoError("cannot write " + sidecar_path.string());
    f << j.dump(2) << '\n';
}

Batch load_dataset(const std::filesystem::path& lseq_path, const std::filesystem::path& sidecar_path) {
    const auto latents = io::read_lseq(lseq_path);
    std::ifstream f(sidecar_path);
    if (!f) throw IoError("cannot open " + sidecar_path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad dataset sidecar: ") + e.what());
    }
    const auto& labels = j.at("labels");
    if (labels.size() != latents.size()) throw IoError("dataset sidecar label count does not match the LSEQ file");
    Batch out;
    for (std::size_t i = 0; i < latents.size(); ++i)
        out.push_back({latents[i], labels[i].is_null() ? Condition::null() : Condition::label(labels[i].get<std::size_t>())});
    return out;
}

}  // namespace latentflow
