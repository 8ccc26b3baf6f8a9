#include "latentflow/config.hpp"

#include "latentflow/io.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <sstream>

namespace latentflow {

namespace {

std::string fmt(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string fmt(std::size_t v) { return std::to_string(v); }

template <class T>
std::string join(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += fmt(v[i]);
    }
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

void flatten(const nlohmann::json& j, const std::string& prefix, Config& out) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
            flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
        return;
    }
    if (prefix.empty()) throw InvalidConfig("config: JSON document must be an object");
    std::string value;
    if (j.is_string())
        value = j.get<std::string>();
    else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) value += ',';
            value += j[i].is_string() ? j[i].get<std::string>() : j[i].dump();
        }
    } else
        value = j.dump();
    out.set(prefix, value);
}

}  // namespace

Config Config::defaults() {
    const TrainConfig t{};
    const DatasetSpec d{};
    const InversionConfig inv{};
    const SolverConfig s{};
    Config c;
    auto& v = c.values_;
    v["seed"] = "0";
    v["data.kind"] = DatasetSpec::kind_name(d.kind);
    v["data.classes"] = fmt(d.classes);
    v["data.L"] = fmt(d.length);
    v["data.d"] = fmt(d.channels);
    v["data.n_per_class"] = fmt(d.n_per_class);
    v["data.radius"] = fmt(d.radius);
    v["data.sigma"] = fmt(d.sigma);
    v["model.embed_dim"] = fmt(t.model.embed_dim);
    v["model.time_features"] = fmt(t.model.time_features);
    v["model.hidden"] = join(t.model.hidden);
    v["train.steps"] = fmt(t.steps);
    v["train.batch_size"] = fmt(t.batch_size);
    v["train.lr"] = fmt(t.optimizer.lr);
    v["train.beta1"] = fmt(t.optimizer.beta1);
    v["train.beta2"] = fmt(t.optimizer.beta2);
    v["train.eps"] = fmt(t.optimizer.eps);
    v["train.weight_decay"] = fmt(t.optimizer.weight_decay);
    v["train.clip_norm"] = fmt(t.optimizer.clip_norm);
    v["train.warmup"] = fmt(t.optimizer.warmup);
    v["train.dropout_p"] = fmt(t.dropout_p);
    v["train.ema_decay"] = fmt(t.ema.decay);
    v["train.ema_interval"] = fmt(t.ema.interval);
    v["train.loss_weighting"] = loss_weighting_name(t.loss_weighting);
    v["train.log_every"] = fmt(t.log_every);
    v["flowstep.kind"] = FlowStepSampler::kind_name(t.sampler.kind);
    v["flowstep.m"] = fmt(t.sampler.m);
    v["flowstep.s"] = fmt(t.sampler.s);
    v["coupling.kind"] = coupling_kind_name(t.coupling);
    v["solver.method"] = solver_method_name(s.method);
    v["solver.num_steps"] = fmt(s.num_steps);
    v["invert.t_edit"] = fmt(inv.t_edit);
    v["invert.steps"] = fmt(inv.steps);
    v["invert.k"] = fmt(inv.weights.size());
    v["invert.weights"] = "";  // empty: w_k = k - 1
    v["invert.lambda_kl"] = fmt(inv.lambda_kl);
    v["invert.cond"] = cond_mode_name(inv.cond_mode);
    v["invert.pred_space"] = pred_space_name(inv.pred_space);
    v["invert.literal_mixture"] = inv.literal_mixture ? "true" : "false";
    v["invert.patch_rows"] = fmt(inv.patch.rows);
    v["invert.patch_cols"] = fmt(inv.patch.cols);
    v["guidance.scale"] = "1";
    return c;
}

bool Config::known_key(const std::string& key) {
    static const Config d = defaults();
    return d.has(key);
}

void Config::set(const std::string& key, const std::string& value) {
    if (!known_key(key)) throw InvalidConfig("config: unknown key '" + key + "'");
    values_[key] = value;
}

void Config::merge(const Config& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
}

Config Config::parse(std::string_view text) {
    Config out;
    const std::string body = trim(text);
    if (!body.empty() && body.front() == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            throw InvalidConfig(std::string("config: bad JSON: ") + e.what());
        }
        flatten(j, "", out);
        return out;
    }
    std::istringstream is{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string l = trim(line);
        if (l.empty()) continue;
        auto sep = l.find('=');
        if (sep == std::string::npos) sep = l.find(':');
        if (sep == std::string::npos)
            throw InvalidConfig("config: line " + std::to_string(lineno) + ": expected key=value");
        out.set(trim(std::string_view(l).substr(0, sep)), trim(std::string_view(l).substr(sep + 1)));
    }
    return out;
}

Config Config::load(const std::filesystem::path& path) {
    std::string text;
    try {
        const auto bytes = io::read_file(path);
        text.assign(bytes.begin(), bytes.end());
    } catch (const IoError&) {
        throw InvalidConfig("config: cannot read " + path.string());
    }
    return parse(text);
}

std::string Config::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    if (!known_key(key)) throw InvalidConfig("config: unknown key '" + key + "'");
    return defaults().values_.at(key);
}

double Config::get_double(const std::string& key) const {
    const std::string s = get(key);
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(v))
        throw InvalidConfig("config: " + key + " expects a number, got '" + s + "'");
    return v;
}

std::uint64_t Config::get_u64(const std::string& key) const {
    const std::string s = get(key);
    std::uint64_t v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw InvalidConfig("config: " + key + " expects a non-negative integer, got '" + s + "'");
    return v;
}

std::size_t Config::get_size(const std::string& key) const { return static_cast<std::size_t>(get_u64(key)); }

bool Config::get_bool(const std::string& key) const {
    const std::string s = get(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw InvalidConfig("config: " + key + " expects true/false, got '" + s + "'");
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        double v = 0.0;
        auto r = std::from_chars(t.data(), t.data() + t.size(), v);
        if (t.empty() || r.ec != std::errc{} || r.ptr != t.data() + t.size())
            throw InvalidConfig("bad number '" + t + "' in list '" + text + "'");
        out.push_back(v);
    }
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> out;
    for (double v : parse_double_list(text)) {
        if (v < 0 || v != std::floor(v)) throw InvalidConfig("expected non-negative integers in '" + text + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::vector<double> Config::get_doubles(const std::string& key) const { return parse_double_list(get(key)); }
std::vector<std::size_t> Config::get_sizes(const std::string& key) const { return parse_size_list(get(key)); }

std::string Config::to_json() const {
    Config full = defaults();
    full.merge(*this);
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : full.values_) {
        nlohmann::json leaf;
        double num = 0.0;
        std::int64_t whole = 0;
        auto r = std::from_chars(v.data(), v.data() + v.size(), num);
        auto ri = std::from_chars(v.data(), v.data() + v.size(), whole);
        if (v == "true" || v == "false")
            leaf = (v == "true");
        else if (!v.empty() && ri.ec == std::errc{} && ri.ptr == v.data() + v.size())
            leaf = whole;
        else if (!v.empty() && r.ec == std::errc{} && r.ptr == v.data() + v.size())
            leaf = num;
        else
            leaf = v;
        j[nlohmann::json::json_pointer("/" + [&] {
            std::string p = k;
            for (auto& ch : p)
                if (ch == '.') ch = '/';
            return p;
        }())] = leaf;
    }
    return j.dump(2);
}

std::string Config::to_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
}

DatasetSpec dataset_spec(const Config& cfg) {
    DatasetSpec d;
    d.kind = DatasetSpec::parse_kind(cfg.get("data.kind"));
    d.classes = cfg.get_size("data.classes");
    d.length = cfg.get_size("data.L");
    d.channels = cfg.get_size("data.d");
    d.n_per_class = cfg.get_size("data.n_per_class");
    d.radius = cfg.get_double("data.radius");
    d.sigma = cfg.get_double("data.sigma");
    d.seed = cfg.get_u64("seed");
    d.validate();
    return d;
}

TrainConfig train_config(const Config& cfg) {
    TrainConfig t;
    t.steps = cfg.get_size("train.steps");
    t.batch_size = cfg.get_size("train.batch_size");
    t.optimizer.lr = cfg.get_double("train.lr");
    t.optimizer.beta1 = cfg.get_double("train.beta1");
    t.optimizer.beta2 = cfg.get_double("train.beta2");
    t.optimizer.eps = cfg.get_double("train.eps");
    t.optimizer.weight_decay = cfg.get_double("train.weight_decay");
    t.optimizer.clip_norm = cfg.get_double("train.clip_norm");
    t.optimizer.warmup = cfg.get_size("train.warmup");
    t.dropout_p = cfg.get_double("train.dropout_p");
    t.ema.decay = cfg.get_double("train.ema_decay");
    t.ema.interval = cfg.get_size("train.ema_interval");
    t.loss_weighting = parse_loss_weighting(cfg.get("train.loss_weighting"));
    t.log_every = cfg.get_size("train.log_every");
    t.sampler.kind = FlowStepSampler::parse_kind(cfg.get("flowstep.kind"));
    t.sampler.m = cfg.get_double("flowstep.m");
    t.sampler.s = cfg.get_double("flowstep.s");
    t.coupling = parse_coupling_kind(cfg.get("coupling.kind"));
    t.model.length = cfg.get_size("data.L");
    t.model.channels = cfg.get_size("data.d");
    t.model.num_classes = cfg.get_size("data.classes");
    t.model.embed_dim = cfg.get_size("model.embed_dim");
    t.model.time_features = cfg.get_size("model.time_features");
    t.model.hidden = cfg.get_sizes("model.hidden");
    t.seed = cfg.get_u64("seed");
    t.validate();
    return t;
}

InversionConfig inversion_config(const Config& cfg) {
    InversionConfig inv;
    inv.t_edit = cfg.get_double("invert.t_edit");
    inv.steps = cfg.get_size("invert.steps");
    const std::string w = cfg.get("invert.weights");
    inv.weights = w.empty() ? InversionConfig::linear_weights(cfg.get_size("invert.k")) : parse_double_list(w);
    inv.lambda_kl = cfg.get_double("invert.lambda_kl");
    inv.cond_mode = parse_cond_mode(cfg.get("invert.cond"));
    inv.pred_space = parse_pred_space(cfg.get("invert.pred_space"));
    inv.literal_mixture = cfg.get_bool("invert.literal_mixture");
    inv.patch.rows = cfg.get_size("invert.patch_rows");
    inv.patch.cols = cfg.get_size("invert.patch_cols");
    inv.validate();
    return inv;
}

SolverConfig solver_config(const Config& cfg) {
    SolverConfig s;
    s.method = parse_solver_method(cfg.get("solver.method"));
    s.num_steps = cfg.get_size("solver.num_steps");
    if (s.num_steps == 0) throw InvalidConfig("solver.num_steps must be >= 1");
    return s;
}

double guidance_scale(const Config& cfg) {
    const double g = cfg.get_double("guidance.scale");
    if (!(g >= 0.0)) throw InvalidConfig("guidance.scale must be >= 0");
    return g;
}

std::string content_hash(std::string_view bytes) {
    const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw Error(ErrorCode::Internal, "content_hash: out of memory");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                    EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 && EVP_DigestFinal_ex(ctx, md, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw Error(ErrorCode::Internal, "content_hash: digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string content_hash_file(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    return content_hash(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string RunManifest::to_json() const {
    nlohmann::json metrics;
    try {
        metrics = nlohmann::json::parse(metrics_json);
    } catch (const nlohmann::json::exception&) {
        metrics = metrics_json;
    }
    nlohmann::json j{{"command", command},
                     {"config", nlohmann::json::parse(config.to_json())},
                     {"seed", seed},
                     {"input_hash", input_hash},
                     {"metrics", metrics},
                     {"wall_clock_s", wall_clock_s},
                     {"nfe_total", nfe_total}};
    return j.dump(2);
}

}  // namespace latentflow
