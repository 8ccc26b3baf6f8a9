// latentflow command-line tool. Talks to the library only through the C API.

#include "latentflow/latentflow.h"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Runtime failure reported through lf_last_error; maps to exit 1, or exit 2
// for configuration problems.
struct Failure {
    lf_status status;
    std::string message;
};

void check(lf_status s) {
    if (s != LF_OK) throw Failure{s, lf_last_error()};
}

struct Str {
    char* p = nullptr;
    ~Str() { lf_string_free(p); }
    std::string str() const { return p ? p : ""; }
};

struct Latents {
    lf_latents* p = nullptr;
    ~Latents() { lf_latents_destroy(p); }
};

struct Field {
    lf_field* p = nullptr;
    ~Field() { lf_field_destroy(p); }
};

struct Labels {
    int64_t* p = nullptr;
    ~Labels() { lf_labels_free(p); }
};

std::string read_text(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Failure{LF_INVALID_CONFIG, "cannot read config file " + path};
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// Shared options: config file, key=value overrides, seed, output directory.
struct Common {
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::vector<std::string> overrides;  // filled from subcommand flags
    std::vector<std::string> inputs;     // hashed into the manifest

    void add(CLI::App* app) {
        app->add_option("--config", config_path, "Config file (key=value or JSON)")->check(CLI::ExistingFile);
        app->add_option("--set", sets, "Override a config key, key=value (repeatable)");
        app->add_option("--seed", seed, "Global seed (default: config, then LATENTFLOW_SEED, then 0)");
        app->add_option("--out-dir", out_dir, "Write manifest.json and metrics.csv here");
    }

    void set(const std::string& key, const std::string& value) { overrides.push_back(key + "=" + value); }

    std::string resolve() const {
        const std::string text = config_path.empty() ? std::string() : read_text(config_path);
        std::vector<std::string> all;
        int has_seed = 0;
        check(lf_config_has(text.c_str(), "seed", &has_seed));
        if (!has_seed)
            if (const char* env = std::getenv("LATENTFLOW_SEED")) all.push_back(std::string("seed=") + env);
        all.insert(all.end(), sets.begin(), sets.end());
        all.insert(all.end(), overrides.begin(), overrides.end());
        if (seed) all.push_back("seed=" + std::to_string(*seed));
        std::vector<const char*> ptrs;
        for (const auto& s : all) ptrs.push_back(s.c_str());
        Str out;
        const lf_status st = lf_config_resolve(text.c_str(), ptrs.data(), ptrs.size(), &out.p);
        if (st != LF_OK) throw Failure{LF_INVALID_CONFIG, lf_last_error()};
        return out.str();
    }
};

void write_metrics_csv(const fs::path& path, const json& report) {
    std::ofstream f(path);
    if (!f) throw Failure{LF_IO, "cannot write " + path.string()};
    f << "metric,value\n";
    for (auto it = report.begin(); it != report.end(); ++it)
        if (it.value().is_number() || it.value().is_string()) f << it.key() << ',' << it.value() << '\n';
}

void finish(const Common& common, const std::string& command, const std::string& config, const std::string& report,
            double seconds, bool write_metrics = true) {
    std::cout << report << '\n';
    if (common.out_dir.empty()) return;
    fs::create_directories(common.out_dir);
    const json r = json::parse(report);
    const std::size_t nfe = r.value("nfe_total", r.value("nfe", std::size_t{0}));
    std::vector<const char*> inputs;
    for (const auto& s : common.inputs) inputs.push_back(s.c_str());
    Str manifest;
    check(lf_manifest(command.c_str(), config.c_str(), inputs.data(), inputs.size(), report.c_str(), seconds, nfe,
                      &manifest.p));
    std::ofstream f(fs::path(common.out_dir) / "manifest.json");
    if (!f) throw Failure{LF_IO, "cannot write manifest.json in " + common.out_dir};
    f << manifest.str() << '\n';
    if (write_metrics) write_metrics_csv(fs::path(common.out_dir) / "metrics.csv", r);
}

std::string join_command(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        s += argv[i];
    }
    return s;
}

void load_field(const std::string& checkpoint, bool raw, std::optional<double> guidance, Field& base, Field& guided) {
    check(lf_field_load_checkpoint(checkpoint.c_str(), raw ? 0 : 1, &base.p));
    if (guidance) check(lf_field_create_guided(base.p, *guidance, &guided.p));
}

// Flags shared by invert and edit, mapped onto invert.* keys.
struct InvertFlags {
    std::optional<double> t_edit, lambda_kl;
    std::optional<std::size_t> s, k;
    std::string cond, pred_space, weights;

    void add(CLI::App* app) {
        app->add_option("--t-edit", t_edit, "Flow step where inversion stops");
        app->add_option("--s", s, "Backward steps S");
        app->add_option("--k", k, "Inner iterations K (weights w_k = k - 1)");
        app->add_option("--weights", weights, "Explicit inner-iteration weights, comma separated");
        app->add_option("--lambda-kl", lambda_kl, "Patch-KL regularisation strength");
        app->add_option("--cond", cond, "Inversion condition")->check(CLI::IsMember({"null", "orig"}));
        app->add_option("--pred-space", pred_space, "Regularisation space")->check(CLI::IsMember({"velocity", "noise"}));
    }

    void apply(Common& c) const {
        if (t_edit) c.set("invert.t_edit", fmt(*t_edit));
        if (s) c.set("invert.steps", std::to_string(*s));
        if (k) c.set("invert.k", std::to_string(*k));
        if (!weights.empty()) c.set("invert.weights", weights);
        if (lambda_kl) c.set("invert.lambda_kl", fmt(*lambda_kl));
        if (!cond.empty()) c.set("invert.cond", cond);
        if (!pred_space.empty()) c.set("invert.pred_space", pred_space);
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latentflow: flow-matching generation, inversion and editing on latent sequences"};
    app.require_subcommand(1);
    const std::string command = join_command(argc, argv);

    // train
    Common train_c;
    std::string train_out, train_data, train_labels, train_log, train_coupling, train_flowstep;
    std::optional<std::size_t> train_steps, train_batch;
    auto* train = app.add_subcommand("train", "Train a conditional velocity field");
    train_c.add(train);
    train->add_option("--out", train_out, "Checkpoint path")->required();
    train->add_option("--data", train_data, "Dataset LSEQ file (default: synthetic from data.* keys)");
    train->add_option("--labels", train_labels, "Label sidecar JSON for --data");
    train->add_option("--log", train_log, "Training log CSV");
    train->add_option("--steps", train_steps, "Optimisation steps");
    train->add_option("--batch-size", train_batch, "Minibatch size");
    train->add_option("--coupling", train_coupling, "Noise coupling")->check(CLI::IsMember({"independent", "ot"}));
    train->add_option("--flowstep", train_flowstep, "Flow-step sampler")->check(CLI::IsMember({"uniform", "logit_normal"}));

    // generate
    Common gen_c;
    std::string gen_ckpt, gen_out, gen_traj, gen_method;
    long long gen_class = 0;
    std::size_t gen_n = 100;
    std::optional<std::size_t> gen_steps;
    std::optional<double> gen_guidance;
    bool gen_raw = false;
    auto* gen = app.add_subcommand("generate", "Sample from a trained field");
    gen_c.add(gen);
    gen->add_option("--checkpoint", gen_ckpt, "Checkpoint path")->required();
    gen->add_option("--out", gen_out, "Output latents (.lseq or .csv)")->required();
    gen->add_option("--class", gen_class, "Class label, -1 for unconditional");
    gen->add_option("--n", gen_n, "Number of samples");
    gen->add_option("--guidance", gen_guidance, "Classifier-free guidance scale");
    gen->add_option("--steps", gen_steps, "Solver steps");
    gen->add_option("--method", gen_method, "Solver")->check(CLI::IsMember({"euler", "midpoint"}));
    gen->add_option("--record-trajectory", gen_traj, "Write (t, z) rows of every trajectory to CSV");
    gen->add_flag("--raw", gen_raw, "Use raw rather than EMA weights");

    // invert
    Common inv_c;
    InvertFlags inv_f;
    std::string inv_ckpt, inv_in, inv_out, inv_method = "regularized";
    long long inv_class = 0;
    std::optional<double> inv_guidance;
    auto* inv = app.add_subcommand("invert", "Invert latents back to flow step T_edit");
    inv_c.add(inv);
    inv_f.add(inv);
    inv->add_option("--checkpoint", inv_ckpt, "Checkpoint path")->required();
    inv->add_option("--input", inv_in, "Input latents")->required()->check(CLI::ExistingFile);
    inv->add_option("--out", inv_out, "Inverted latents")->required();
    inv->add_option("--class", inv_class, "Class of the input latents");
    inv->add_option("--method", inv_method, "Inversion method")->check(CLI::IsMember({"ddim", "regularized"}));
    inv->add_option("--guidance", inv_guidance, "Guidance scale during inversion");

    // edit
    Common edit_c;
    InvertFlags edit_f;
    std::string edit_ckpt, edit_in, edit_out, edit_method = "regularized", edit_solver;
    long long edit_from = 0, edit_to = 1;
    std::optional<double> edit_guidance;
    std::optional<std::size_t> edit_steps;
    auto* ed = app.add_subcommand("edit", "Invert then regenerate under a new condition");
    edit_c.add(ed);
    edit_f.add(ed);
    ed->add_option("--checkpoint", edit_ckpt, "Checkpoint path")->required();
    ed->add_option("--input", edit_in, "Input latents")->required()->check(CLI::ExistingFile);
    ed->add_option("--out", edit_out, "Edited latents")->required();
    ed->add_option("--class", edit_from, "Original class");
    ed->add_option("--target", edit_to, "Target class");
    ed->add_option("--method", edit_method, "Inversion method")->check(CLI::IsMember({"ddim", "regularized"}));
    ed->add_option("--guidance", edit_guidance, "Guidance scale (both directions for --cond orig)");
    ed->add_option("--solver", edit_solver, "Forward solver")->check(CLI::IsMember({"euler", "midpoint"}));
    ed->add_option("--solver-steps", edit_steps, "Forward solver steps (default S)");

    // eval
    Common eval_c;
    std::string ev_gen, ev_ref, ev_orig, ev_clf, ev_clf_labels;
    std::vector<long long> ev_class;
    auto* ev = app.add_subcommand("eval", "Score generated latents");
    eval_c.add(ev);
    ev->add_option("--generated", ev_gen, "Generated latents")->required()->check(CLI::ExistingFile);
    ev->add_option("--reference", ev_ref, "Reference latents")->required()->check(CLI::ExistingFile);
    ev->add_option("--originals", ev_orig, "Originals paired with --generated, for lpaps")->check(CLI::ExistingFile);
    ev->add_option("--classifier-data", ev_clf, "Labelled LSEQ to fit the adherence classifier")->check(CLI::ExistingFile);
    ev->add_option("--classifier-labels", ev_clf_labels, "Label sidecar for --classifier-data")->check(CLI::ExistingFile);
    ev->add_option("--class", ev_class, "Target class (one, or one per generated item)")->delimiter(',');

    // ablate
    Common abl_c;
    std::string abl_ckpt, abl_sweep, abl_grid, abl_out;
    std::size_t abl_samples = 100, abl_threads = 1;
    std::optional<double> abl_guidance;
    auto* abl = app.add_subcommand("ablate", "Parameter sweeps over editing and guidance");
    abl_c.add(abl);
    abl->add_option("--checkpoint", abl_ckpt, "Checkpoint path")->required();
    abl->add_option("--sweep", abl_sweep, "Sweep kind")->required()->check(CLI::IsMember({"t-edit", "nfe", "lambda-kl", "cfg"}));
    abl->add_option("--grid", abl_grid, "Comma-separated grid values");
    abl->add_option("--out", abl_out, "Sweep CSV path");
    abl->add_option("--samples", abl_samples, "Benchmark samples (per class for cfg)");
    abl->add_option("--threads", abl_threads, "Worker threads");
    abl->add_option("--guidance", abl_guidance, "Guidance scale for editing sweeps");

    // oracle-check
    Common orc_c;
    double orc_mu = 3.0, orc_sigma = 0.5;
    std::size_t orc_samples = 1000000;
    double orc_tol = 0.05;
    auto* orc = app.add_subcommand("oracle-check", "Monte-Carlo check of the closed-form Gaussian velocity");
    orc_c.add(orc);
    orc->add_option("--mu", orc_mu, "Data mean");
    orc->add_option("--sigma", orc_sigma, "Data standard deviation")->check(CLI::PositiveNumber);
    orc->add_option("--samples", orc_samples, "Monte-Carlo draws per flow step");
    orc->add_option("--tolerance", orc_tol, "Pass threshold on the max binned deviation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    try {
        if (*train) {
            if (train_steps) train_c.set("train.steps", std::to_string(*train_steps));
            if (train_batch) train_c.set("train.batch_size", std::to_string(*train_batch));
            if (!train_coupling.empty()) train_c.set("coupling.kind", train_coupling);
            if (!train_flowstep.empty()) train_c.set("flowstep.kind", train_flowstep);
            if (!train_data.empty() && train_labels.empty()) throw Failure{LF_INVALID_CONFIG, "--data needs --labels"};
            if (!train_data.empty()) train_c.inputs = {train_data, train_labels};
            if (!train_c.config_path.empty()) train_c.inputs.push_back(train_c.config_path);
            const std::string cfg = train_c.resolve();
            Str report;
            check(lf_train(cfg.c_str(), train_data.empty() ? nullptr : train_data.c_str(),
                           train_labels.empty() ? nullptr : train_labels.c_str(), train_out.c_str(),
                           train_log.empty() ? nullptr : train_log.c_str(), &report.p));
            finish(train_c, command, cfg, report.str(), elapsed());
        } else if (*gen) {
            if (gen_steps) gen_c.set("solver.num_steps", std::to_string(*gen_steps));
            if (!gen_method.empty()) gen_c.set("solver.method", gen_method);
            if (gen_guidance) gen_c.set("guidance.scale", fmt(*gen_guidance));
            gen_c.inputs = {gen_ckpt};
            const std::string cfg = gen_c.resolve();
            Field base, guided;
            load_field(gen_ckpt, gen_raw, gen_guidance, base, guided);
            std::size_t L = 0, d = 0;
            check(lf_field_shape(base.p, &L, &d));
            Latents out;
            Str report;
            check(lf_generate(guided.p ? guided.p : base.p, cfg.c_str(), gen_class, gen_n, L, d,
                              gen_traj.empty() ? nullptr : gen_traj.c_str(), &out.p, &report.p));
            check(lf_latents_save(out.p, gen_out.c_str()));
            finish(gen_c, command, cfg, report.str(), elapsed());
        } else if (*inv) {
            inv_f.apply(inv_c);
            if (inv_guidance) inv_c.set("guidance.scale", fmt(*inv_guidance));
            inv_c.inputs = {inv_ckpt, inv_in};
            const std::string cfg = inv_c.resolve();
            Field base, guided;
            load_field(inv_ckpt, false, inv_guidance, base, guided);
            Latents in, out;
            check(lf_latents_load(inv_in.c_str(), &in.p));
            Str report;
            check(lf_invert(guided.p ? guided.p : base.p, cfg.c_str(), in.p, inv_class, inv_method.c_str(), &out.p,
                            &report.p));
            check(lf_latents_save(out.p, inv_out.c_str()));
            finish(inv_c, command, cfg, report.str(), elapsed());
        } else if (*ed) {
            edit_f.apply(edit_c);
            if (edit_guidance) edit_c.set("guidance.scale", fmt(*edit_guidance));
            if (!edit_solver.empty()) edit_c.set("solver.method", edit_solver);
            if (edit_steps) edit_c.set("solver.num_steps", std::to_string(*edit_steps));
            edit_c.inputs = {edit_ckpt, edit_in};
            std::string cfg = edit_c.resolve();
            // The forward phase reuses S unless a solver was requested explicitly.
            std::string fwd_cfg = cfg;
            if (edit_solver.empty()) fwd_cfg += "solver.method=euler\n";
            if (!edit_steps) {
                Str j;
                check(lf_config_to_json(cfg.c_str(), &j.p));
                fwd_cfg += "solver.num_steps=" + std::to_string(json::parse(j.str())["invert"]["steps"].get<std::size_t>()) + "\n";
            }
            Field base, guided;
            load_field(edit_ckpt, false, edit_guidance, base, guided);
            Latents in, out;
            check(lf_latents_load(edit_in.c_str(), &in.p));
            Str report;
            check(lf_edit(guided.p ? guided.p : base.p, fwd_cfg.c_str(), in.p, edit_from, edit_to, edit_method.c_str(),
                          &out.p, &report.p));
            check(lf_latents_save(out.p, edit_out.c_str()));
            finish(edit_c, command, fwd_cfg, report.str(), elapsed());
        } else if (*ev) {
            eval_c.inputs = {ev_gen, ev_ref};
            if (!ev_orig.empty()) eval_c.inputs.push_back(ev_orig);
            const std::string cfg = eval_c.resolve();
            Latents g, r, o, c;
            Labels cl;
            check(lf_latents_load(ev_gen.c_str(), &g.p));
            check(lf_latents_load(ev_ref.c_str(), &r.p));
            if (!ev_orig.empty()) check(lf_latents_load(ev_orig.c_str(), &o.p));
            std::vector<int64_t> targets(ev_class.begin(), ev_class.end());
            if (!ev_clf.empty()) {
                if (ev_clf_labels.empty() || targets.empty())
                    throw Failure{LF_INVALID_CONFIG, "--classifier-data needs --classifier-labels and --class"};
                check(lf_load_dataset(ev_clf.c_str(), ev_clf_labels.c_str(), &c.p, &cl.p));
            }
            Str report;
            check(lf_eval(g.p, r.p, o.p, c.p, cl.p, targets.empty() ? nullptr : targets.data(), targets.size(),
                          &report.p));
            finish(eval_c, command, cfg, report.str(), elapsed());
        } else if (*abl) {
            if (abl_guidance) abl_c.set("guidance.scale", fmt(*abl_guidance));
            if (abl_grid.empty()) {
                if (abl_sweep == "t-edit") abl_grid = "0,0.04,0.08,0.12,0.16,0.2";
                else if (abl_sweep == "nfe") abl_grid = "50,100,200,400";
                else if (abl_sweep == "lambda-kl") abl_grid = "0,0.05,0.1,0.15,0.2,0.3,0.5";
                else abl_grid = "0,1,2,3,5,8";
            }
            abl_c.inputs = {abl_ckpt};
            const std::string cfg = abl_c.resolve();
            Field base;
            check(lf_field_load_checkpoint(abl_ckpt.c_str(), 1, &base.p));
            std::string csv = abl_out;
            std::string svg;
            if (!abl_c.out_dir.empty()) {
                fs::create_directories(abl_c.out_dir);
                if (csv.empty()) csv = (fs::path(abl_c.out_dir) / "metrics.csv").string();
                svg = (fs::path(abl_c.out_dir) / "sweep.svg").string();
            }
            if (csv.empty()) throw Failure{LF_INVALID_CONFIG, "ablate needs --out or --out-dir"};
            Str report;
            check(lf_ablate(base.p, cfg.c_str(), abl_sweep.c_str(), abl_grid.c_str(), abl_samples, abl_threads,
                            csv.c_str(), svg.empty() ? nullptr : svg.c_str(), &report.p));
            if (!abl_c.out_dir.empty() && csv != (fs::path(abl_c.out_dir) / "metrics.csv").string())
                fs::copy_file(csv, fs::path(abl_c.out_dir) / "metrics.csv", fs::copy_options::overwrite_existing);
            finish(abl_c, command, cfg, report.str(), elapsed(), false);
        } else if (*orc) {
            const std::string cfg = orc_c.resolve();
            Str j;
            check(lf_config_to_json(cfg.c_str(), &j.p));
            const auto seed = json::parse(j.str())["seed"].get<std::uint64_t>();
            double dev = 0.0;
            check(lf_oracle_check(orc_mu, orc_sigma, orc_samples, seed, &dev));
            const bool pass = dev < orc_tol;
            const json report{{"mu", orc_mu}, {"sigma", orc_sigma}, {"samples", orc_samples},
                              {"max_deviation", dev}, {"tolerance", orc_tol}, {"pass", pass}};
            std::cout << "max binned deviation " << dev << (pass ? " (pass)" : " (FAIL)") << '\n';
            finish(orc_c, command, cfg, report.dump(2), elapsed());
            return pass ? 0 : 1;
        }
    } catch (const Failure& f) {
        std::cerr << "error [" << lf_status_name(f.status) << "]: " << f.message << '\n';
        return f.status == LF_INVALID_CONFIG ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error [internal]: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
