#include "latentflow/latentflow.h"

#include "latentflow/config.hpp"
#include "latentflow/data.hpp"
#include "latentflow/edit.hpp"
#include "latentflow/io.hpp"
#include "latentflow/metrics.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <new>

using namespace latentflow;
using nlohmann::json;

struct lf_latents {
    std::vector<LatentSeq> items;
    std::size_t length = 0;
    std::size_t channels = 0;
};

struct lf_field {
    FieldPtr field;
};

namespace {

thread_local std::string g_last_error;

template <class F>
lf_status guard(F&& f) {
    try {
        f();
        return LF_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return static_cast<lf_status>(e.code());
    } catch (const nlohmann::json::exception& e) {
        g_last_error = e.what();
        return LF_INVALID_ARGUMENT;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return LF_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return LF_INTERNAL;
    }
}

char* dup(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

template <class T>
void need(T* p, const char* what) {
    if (!p) throw InvalidArgument(std::string(what) + " must not be NULL");
}

Config config_of(const char* text) { return text ? Config::parse(text) : Config{}; }

Condition condition_of(int64_t label) {
    if (label == LF_NULL_LABEL) return Condition::null();
    if (label < 0) throw InvalidArgument("labels must be >= 0 or LF_NULL_LABEL");
    return Condition::label(static_cast<std::size_t>(label));
}

lf_latents* wrap(std::vector<LatentSeq> items) {
    auto out = std::make_unique<lf_latents>();
    if (!items.empty()) {
        out->length = items.front().length();
        out->channels = items.front().channels();
    }
    out->items = std::move(items);
    return out.release();
}

void put(char** report, const json& j) {
    if (report) *report = dup(j.dump(2));
}

int64_t* labels_of(const Batch& b) {
    auto* out = static_cast<int64_t*>(std::malloc(sizeof(int64_t) * std::max<std::size_t>(1, b.size())));
    if (!out) throw std::bad_alloc();
    for (std::size_t i = 0; i < b.size(); ++i)
        out[i] = b[i].c.is_null() ? LF_NULL_LABEL : static_cast<int64_t>(b[i].c.label_id());
    return out;
}

EditMethod method_of(const char* m) { return parse_edit_method(m ? m : "regularized"); }

}  // namespace

extern "C" {

const char* lf_last_error(void) { return g_last_error.c_str(); }

const char* lf_status_name(lf_status s) {
    switch (s) {
        case LF_OK: return "ok";
        case LF_INVALID_ARGUMENT: return "invalid_argument";
        case LF_DOMAIN: return "domain_error";
        case LF_UNSUPPORTED_CONDITION: return "unsupported_condition";
        case LF_DIVERGENCE: return "divergence";
        case LF_TRAINING_DIVERGED: return "training_diverged";
        case LF_INVALID_CONFIG: return "invalid_config";
        case LF_IO: return "io_error";
        case LF_DEGENERATE_TRAJECTORY: return "degenerate_trajectory";
        case LF_INTERNAL: return "internal";
    }
    return "unknown";
}

void lf_string_free(char* s) { std::free(s); }
void lf_labels_free(int64_t* labels) { std::free(labels); }

// ---------------------------------------------------------------------------
// Latents

lf_status lf_latents_create(size_t count, size_t length, size_t channels, const double* values, lf_latents** out) {
    return guard([&] {
        need(out, "out");
        std::vector<LatentSeq> items;
        for (std::size_t i = 0; i < count; ++i) {
            LatentSeq s(length, channels, 0.0);
            if (values)
                for (std::size_t j = 0; j < s.size(); ++j) s[j] = values[i * length * channels + j];
            items.push_back(std::move(s));
        }
        *out = wrap(std::move(items));
        (*out)->length = length;
        (*out)->channels = channels;
    });
}

lf_status lf_latents_load(const char* path, lf_latents** out) {
    return guard([&] {
        need(path, "path");
        need(out, "out");
        *out = wrap(io::read_latents(path));
    });
}

lf_status lf_latents_save(const lf_latents* latents, const char* path) {
    return guard([&] {
        need(latents, "latents");
        need(path, "path");
        io::write_latents(path, latents->items);
    });
}

void lf_latents_destroy(lf_latents* latents) { delete latents; }
size_t lf_latents_count(const lf_latents* l) { return l ? l->items.size() : 0; }
size_t lf_latents_length(const lf_latents* l) { return l ? l->length : 0; }
size_t lf_latents_channels(const lf_latents* l) { return l ? l->channels : 0; }
const double* lf_latents_item(const lf_latents* l, size_t i) {
    if (!l || i >= l->items.size()) return nullptr;
    return l->items[i].values().data();
}

// ---------------------------------------------------------------------------
// Fields

lf_status lf_field_create_oracle(size_t classes, size_t channels, const double* mu, const double* sigma,
                                 lf_field** out) {
    return guard([&] {
        need(mu, "mu");
        need(sigma, "sigma");
        need(out, "out");
        std::vector<std::vector<double>> m(classes), s(classes);
        for (std::size_t k = 0; k < classes; ++k) {
            m[k].assign(mu + k * channels, mu + (k + 1) * channels);
            s[k].assign(sigma + k * channels, sigma + (k + 1) * channels);
        }
        *out = new lf_field{std::make_shared<GaussianOracleField>(std::move(m), std::move(s))};
    });
}

lf_status lf_field_load_checkpoint(const char* path, int use_ema, lf_field** out) {
    return guard([&] {
        need(path, "path");
        need(out, "out");
        Checkpoint ck = load_checkpoint(path);
        *out = new lf_field{std::make_shared<MlpField>(ck.config, use_ema ? std::move(ck.ema) : std::move(ck.raw))};
    });
}

lf_status lf_field_create_guided(const lf_field* inner, double gamma, lf_field** out) {
    return guard([&] {
        need(inner, "inner");
        need(out, "out");
        *out = new lf_field{std::make_shared<GuidedField>(inner->field, gamma)};
    });
}

void lf_field_destroy(lf_field* field) { delete field; }

lf_status lf_field_shape(const lf_field* field, size_t* length, size_t* channels) {
    return guard([&] {
        need(field, "field");
        need(length, "length");
        need(channels, "channels");
        const VelocityField* f = field->field.get();
        while (const auto* g = dynamic_cast<const GuidedField*>(f)) f = &g->inner();
        const auto* mlp = dynamic_cast<const MlpField*>(f);
        if (!mlp) throw InvalidArgument("field has no fixed sequence shape");
        *length = mlp->config().length;
        *channels = mlp->config().channels;
    });
}

lf_status lf_field_eval(const lf_field* field, const double* z, size_t length, size_t channels, double t,
                        int64_t label, double* out, size_t* nfe) {
    return guard([&] {
        need(field, "field");
        need(z, "z");
        need(out, "out");
        LatentSeq zz(length, channels, std::vector<double>(z, z + length * channels));
        NfeCounter counter;
        const LatentSeq v = field->field->eval(zz, FlowStep(t), condition_of(label), counter);
        std::copy(v.values().begin(), v.values().end(), out);
        if (nfe) *nfe += counter.count;
    });
}

// ---------------------------------------------------------------------------
// Config and provenance

lf_status lf_config_resolve(const char* config_text, const char* const* overrides, size_t n, char** resolved_text) {
    return guard([&] {
        need(resolved_text, "resolved_text");
        Config cfg = config_of(config_text);
        for (std::size_t i = 0; i < n; ++i) {
            const std::string o = overrides[i];
            const auto eq = o.find('=');
            if (eq == std::string::npos || eq == 0) throw InvalidConfig("override '" + o + "' is not key=value");
            cfg.set(o.substr(0, eq), o.substr(eq + 1));
        }
        Config full = Config::defaults();
        full.merge(cfg);
        *resolved_text = dup(full.to_text());
    });
}

lf_status lf_config_has(const char* config_text, const char* key, int* has) {
    return guard([&] {
        need(key, "key");
        need(has, "has");
        *has = config_of(config_text).has(key) ? 1 : 0;
    });
}

lf_status lf_config_to_json(const char* config_text, char** out) {
    return guard([&] {
        need(out, "json");
        *out = dup(config_of(config_text).to_json());
    });
}

lf_status lf_content_hash(const void* bytes, size_t size, char** hex) {
    return guard([&] {
        need(hex, "hex");
        if (size) need(bytes, "bytes");
        *hex = dup(content_hash(std::string_view(static_cast<const char*>(bytes), size)));
    });
}

lf_status lf_content_hash_file(const char* path, char** hex) {
    return guard([&] {
        need(path, "path");
        need(hex, "hex");
        *hex = dup(content_hash_file(path));
    });
}

lf_status lf_manifest(const char* command, const char* config_text, const char* const* input_paths, size_t n_inputs,
                      const char* metrics_json, double wall_clock_s, size_t nfe_total, char** out) {
    return guard([&] {
        need(out, "json");
        RunManifest m;
        m.command = command ? command : "";
        m.config = config_of(config_text);
        m.seed = m.config.get_u64("seed");
        std::string joined;
        for (std::size_t i = 0; i < n_inputs; ++i) joined += content_hash_file(input_paths[i]) + "\n";
        m.input_hash = n_inputs == 1 ? content_hash_file(input_paths[0]) : (n_inputs ? content_hash(joined) : "");
        if (metrics_json) m.metrics_json = metrics_json;
        m.wall_clock_s = wall_clock_s;
        m.nfe_total = nfe_total;
        *out = dup(m.to_json());
    });
}

lf_status lf_make_dataset(const char* config_text, lf_latents** out, int64_t** labels, const char* lseq_path,
                          const char* sidecar_path) {
    return guard([&] {
        const Config cfg = config_of(config_text);
        const DatasetSpec spec = dataset_spec(cfg);
        const Batch b = make_dataset(spec);
        if (lseq_path) {
            need(sidecar_path, "sidecar_path");
            save_dataset(b, spec, lseq_path, sidecar_path);
        }
        if (out) *out = wrap(b.latents());
        if (labels) *labels = labels_of(b);
    });
}

lf_status lf_load_dataset(const char* lseq_path, const char* sidecar_path, lf_latents** out, int64_t** labels) {
    return guard([&] {
        need(lseq_path, "lseq_path");
        need(sidecar_path, "sidecar_path");
        const Batch b = load_dataset(lseq_path, sidecar_path);
        if (out) *out = wrap(b.latents());
        if (labels) *labels = labels_of(b);
    });
}

// ---------------------------------------------------------------------------
// Pipelines

lf_status lf_train(const char* config_text, const char* data_path, const char* sidecar_path,
                   const char* checkpoint_out, const char* log_csv_path, char** report) {
    return guard([&] {
        need(checkpoint_out, "checkpoint_out");
        const Config cfg = config_of(config_text);
        TrainConfig tc = train_config(cfg);
        Batch data;
        if (data_path) {
            need(sidecar_path, "sidecar_path");
            data = load_dataset(data_path, sidecar_path);
        } else {
            data = make_dataset(dataset_spec(cfg));
        }
        if (data.empty()) throw InvalidArgument("train: empty dataset");
        tc.model.length = data.length();
        tc.model.channels = data.channels();
        std::ofstream log;
        if (log_csv_path) {
            log.open(log_csv_path);
            if (!log) throw IoError(std::string("cannot write ") + log_csv_path);
        }
        TrainResult r = train(tc, data, log_csv_path ? &log : nullptr);
        save_checkpoint(checkpoint_out, make_checkpoint(r.state));
        json j{{"steps", r.state.step},
               {"final_loss", r.losses.empty() ? 0.0 : r.losses.back()},
               {"parameters", r.state.field.parameters().size()},
               {"nfe_total", 0}};
        if (!r.log.empty()) j["final_ema_loss"] = r.log.back().ema_loss;
        put(report, j);
    });
}

lf_status lf_generate(const lf_field* field, const char* config_text, int64_t label, size_t count, size_t length,
                      size_t channels, const char* trajectory_csv, lf_latents** out, char** report) {
    return guard([&] {
        need(field, "field");
        need(out, "out");
        const Config cfg = config_of(config_text);
        const SolverConfig solver = solver_config(cfg);
        const Condition c = condition_of(label);
        const VelocityField& f = field_for_condition(*field->field, c);
        Rng rng(cfg.get_u64("seed"));
        std::ofstream traj_out;
        if (trajectory_csv) {
            traj_out.open(trajectory_csv);
            if (!traj_out) throw IoError(std::string("cannot write ") + trajectory_csv);
            traj_out << "sample,step,t";
            for (std::size_t j = 0; j < length * channels; ++j) traj_out << ",z" << j;
            traj_out << '\n' << std::setprecision(9);
        }
        std::vector<LatentSeq> samples;
        std::size_t nfe = 0;
        double straight = 0.0;
        std::size_t straight_n = 0;
        for (std::size_t i = 0; i < count; ++i) {
            const LatentSeq z0 = sample_noise(length, channels, rng);
            auto [x, traj] = integrate(f, z0, 0.0, 1.0, solver, c, true);
            nfe += traj.nfe;
            if (traj.points.size() >= 3) {
                try {
                    straight += straightness(traj);
                    ++straight_n;
                } catch (const Error&) {
                }
            }
            if (trajectory_csv)
                for (std::size_t k = 0; k < traj.points.size(); ++k) {
                    traj_out << i << ',' << k << ',' << traj.points[k].t;
                    for (double v : traj.points[k].z.values()) traj_out << ',' << v;
                    traj_out << '\n';
                }
            samples.push_back(std::move(x));
        }
        *out = wrap(std::move(samples));
        (*out)->length = length;
        (*out)->channels = channels;
        put(report, json{{"count", count},
                         {"nfe_total", nfe},
                         {"nfe_per_sample", count ? nfe / count : 0},
                         {"straightness", straight_n ? straight / static_cast<double>(straight_n) : 0.0}});
    });
}

lf_status lf_invert(const lf_field* field, const char* config_text, const lf_latents* input, int64_t label,
                    const char* method, lf_latents** out, char** report) {
    return guard([&] {
        need(field, "field");
        need(input, "input");
        need(out, "out");
        const Config cfg = config_of(config_text);
        const InversionConfig inv = inversion_config(cfg);
        const EditMethod m = method_of(method);
        const Condition c = inversion_condition(inv.cond_mode, condition_of(label));
        const Rng root(cfg.get_u64("seed"));
        std::vector<LatentSeq> latents;
        std::size_t nfe = 0;
        for (std::size_t i = 0; i < input->items.size(); ++i) {
            if (m == EditMethod::Ddim) {
                latents.push_back(ddim_invert(*field->field, input->items[i], c, inv.t_edit, inv.steps, &nfe));
            } else {
                Rng rng = root.derive(i);
                latents.push_back(regularized_invert(*field->field, input->items[i], c, inv, rng, &nfe));
            }
        }
        *out = wrap(std::move(latents));
        put(report, json{{"method", edit_method_name(m)}, {"t_edit", inv.t_edit}, {"nfe_total", nfe}});
    });
}

lf_status lf_edit(const lf_field* field, const char* config_text, const lf_latents* input, int64_t label_orig,
                  int64_t label_edit, const char* method, lf_latents** out, char** report) {
    return guard([&] {
        need(field, "field");
        need(input, "input");
        need(out, "out");
        const Config cfg = config_of(config_text);
        EditRequest req;
        req.c_orig = condition_of(label_orig);
        req.c_edit = condition_of(label_edit);
        req.inversion = inversion_config(cfg);
        req.solver = SolverConfig{SolverMethod::Euler, req.inversion.steps};
        if (cfg.has("solver.method")) req.solver.method = parse_solver_method(cfg.get("solver.method"));
        if (cfg.has("solver.num_steps")) req.solver.num_steps = cfg.get_size("solver.num_steps");
        req.method = method_of(method);
        const Rng root(cfg.get_u64("seed"));
        std::vector<LatentSeq> edits;
        std::size_t nb = 0, nf = 0;
        double lp = 0.0;
        for (std::size_t i = 0; i < input->items.size(); ++i) {
            req.x_orig = input->items[i];
            Rng rng = root.derive(i);
            EditResult r = edit(*field->field, req, rng);
            nb += r.nfe_backward;
            nf += r.nfe_forward;
            lp += lpaps(r.x_edit, req.x_orig);
            edits.push_back(std::move(r.x_edit));
        }
        const std::size_t n = edits.size();
        *out = wrap(std::move(edits));
        put(report, json{{"method", edit_method_name(req.method)},
                         {"t_edit", req.inversion.t_edit},
                         {"lpaps", n ? lp / static_cast<double>(n) : 0.0},
                         {"nfe_backward", nb},
                         {"nfe_forward", nf},
                         {"nfe_total", nb + nf}});
    });
}

lf_status lf_eval(const lf_latents* generated, const lf_latents* reference, const lf_latents* originals,
                  const lf_latents* classifier_data, const int64_t* classifier_labels, const int64_t* gen_labels,
                  size_t n_gen_labels, char** report) {
    return guard([&] {
        need(generated, "generated");
        need(reference, "reference");
        RunInputs in;
        in.generated = generated->items;
        in.reference = reference->items;
        if (originals) in.originals = originals->items;
        LogisticClassifier clf;
        std::vector<Condition> conditions;
        if (classifier_data) {
            need(classifier_labels, "classifier_labels");
            need(gen_labels, "gen_labels");
            Batch b;
            std::size_t classes = 0;
            for (std::size_t i = 0; i < classifier_data->items.size(); ++i) {
                b.push_back({classifier_data->items[i], condition_of(classifier_labels[i])});
                classes = std::max<std::size_t>(classes, static_cast<std::size_t>(classifier_labels[i]) + 1);
            }
            clf = LogisticClassifier::fit(b, std::max<std::size_t>(classes, 2));
            in.classifier = &clf;
            if (n_gen_labels != 1 && n_gen_labels != in.generated.size())
                throw InvalidArgument("eval: need one target label or one per generated item");
            for (std::size_t i = 0; i < in.generated.size(); ++i)
                conditions.push_back(condition_of(gen_labels[n_gen_labels == 1 ? 0 : i]));
            in.conditions = conditions;
        }
        const MetricsReport r = evaluate_run(in);
        put(report, json::parse(r.to_json()));
    });
}

lf_status lf_ablate(const lf_field* field, const char* config_text, const char* sweep, const char* grid,
                    size_t samples, size_t threads, const char* csv_path, const char* svg_path, char** report) {
    return guard([&] {
        need(field, "field");
        need(sweep, "sweep");
        need(grid, "grid");
        need(csv_path, "csv_path");
        const Config cfg = config_of(config_text);
        const std::string kind = sweep;
        const std::uint64_t seed = cfg.get_u64("seed");
        DatasetSpec spec = dataset_spec(cfg);
        const Splits sp = split(make_dataset(spec), {0.5, 0.0, 0.5}, seed);
        const LogisticClassifier clf = LogisticClassifier::fit(sp.train, spec.classes);
        const SolverConfig solver = solver_config(cfg);
        SweepTable table;
        std::string metric = "frechet";
        if (kind == "cfg") {
            std::vector<std::vector<LatentSeq>> ref(spec.classes);
            for (std::size_t k = 0; k < spec.classes; ++k) ref[k] = class_items(sp.eval, k);
            table = sweep_cfg(field->field, ref, &clf, parse_double_list(grid), samples, solver, seed);
        } else {
            const EditBenchmark bench = make_swap_benchmark(sp.eval, spec.classes, samples, &clf);
            const GuidedField guided(field->field, guidance_scale(cfg));
            const InversionConfig inv = inversion_config(cfg);
            InversionConfig ddim_inv = inv;
            ddim_inv.cond_mode = CondMode::Null;
            SweepOptions opts;
            opts.nfe_reference = inv;
            opts.seed = seed;
            opts.threads = std::max<std::size_t>(1, threads);
            const SweepMethod reg{"regularized", EditMethod::Regularized, inv};
            const SweepMethod dd{"ddim", EditMethod::Ddim, ddim_inv};
            if (kind == "t-edit") {
                table = sweep_t_edit(guided, bench, parse_double_list(grid), {dd, reg}, opts);
            } else if (kind == "nfe") {
                table = sweep_nfe(guided, bench, parse_size_list(grid), {dd, reg}, opts);
            } else if (kind == "lambda-kl") {
                table = sweep_lambda_kl(guided, bench, parse_double_list(grid), {reg}, opts);
            } else {
                throw InvalidConfig("unknown sweep '" + kind + "' (expected t-edit|nfe|lambda-kl|cfg)");
            }
        }
        {
            std::ofstream f(csv_path);
            if (!f) throw IoError(std::string("cannot write ") + csv_path);
            table.write_csv(f);
        }
        if (svg_path) {
            std::ofstream f(svg_path);
            if (!f) throw IoError(std::string("cannot write ") + svg_path);
            f << render_sweep_svg(table, metric, kind + " sweep");
        }
        json rows = json::array();
        std::size_t nfe = 0;
        for (const auto& r : table.rows) {
            rows.push_back({{"method", r.method}, {"param", r.param}, {"frechet", r.frechet}, {"adherence", r.adherence},
                            {"lpaps", r.lpaps}, {"nfe", r.nfe}, {"warning", r.warning}});
            nfe += r.nfe * (kind == "cfg" ? samples * spec.classes : samples);
        }
        put(report, json{{"sweep", kind}, {"rows", rows}, {"nfe_total", nfe}});
    });
}

lf_status lf_oracle_check(double mu, double sigma, size_t samples, uint64_t seed, double* max_deviation) {
    return guard([&] {
        need(max_deviation, "max_deviation");
        const GaussianOracleField f = GaussianOracleField::isotropic(mu, sigma, 1);
        Rng root(seed);
        double worst = 0.0;
        for (int i = 1; i <= 9; ++i) {
            Rng rng = root.derive(static_cast<std::uint64_t>(i));
            worst = std::max(worst, oracle_validate(f, 0.1 * i, samples, rng));
        }
        *max_deviation = worst;
    });
}

}  // extern "C"
