#include "latentflow/edit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

namespace latentflow {

EditMethod parse_edit_method(const std::string& name) {
    if (name == "ddim") return EditMethod::Ddim;
    if (name == "regularized" || name == "reg") return EditMethod::Regularized;
    throw InvalidConfig("unknown edit method '" + name + "' (expected ddim|regularized)");
}

std::string edit_method_name(EditMethod m) { return m == EditMethod::Ddim ? "ddim" : "regularized"; }

EditResult edit(const VelocityField& field, const EditRequest& req, Rng& rng) {
    if (req.c_edit.is_null()) throw InvalidArgument("edit: c_edit must not be null");
    req.inversion.validate();
    const Condition c_inv = inversion_condition(req.inversion.cond_mode, req.c_orig);
    EditResult r;
    if (req.method == EditMethod::Ddim) {
        const std::size_t steps = req.ddim_steps ? req.ddim_steps : req.inversion.steps;
        r.z_edit = ddim_invert(field, req.x_orig, c_inv, req.inversion.t_edit, steps, &r.nfe_backward);
    } else {
        r.z_edit = regularized_invert(field, req.x_orig, c_inv, req.inversion, rng, &r.nfe_backward);
    }
    auto [x_edit, traj] = integrate(field, r.z_edit, req.inversion.t_edit, 1.0, req.solver, req.c_edit);
    r.x_edit = std::move(x_edit);
    r.nfe_forward = traj.nfe;
    r.nfe_total = r.nfe_backward + r.nfe_forward;
    return r;
}

Condition blend_conditions(const MlpField& field, const Condition& a, const Condition& b, double alpha) {
    const auto ea = field.embedding_of(a);
    const auto eb = field.embedding_of(b);
    std::vector<double> e(ea.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = (1.0 - alpha) * ea[i] + alpha * eb[i];
    return Condition::embedding(std::move(e));
}

// ---------------------------------------------------------------------------
// Sweeps

EditBenchmark make_swap_benchmark(const Batch& pool, std::size_t num_classes, std::size_t count,
                                  const LogisticClassifier* classifier) {
    if (num_classes < 2 || count == 0) throw InvalidArgument("make_swap_benchmark: need >= 2 classes and count >= 1");
    std::vector<std::vector<LatentSeq>> by_class(num_classes);
    for (std::size_t k = 0; k < num_classes; ++k) by_class[k] = class_items(pool, k);
    EditBenchmark b;
    b.classifier = classifier;
    std::vector<std::size_t> used(num_classes, 0), targets(num_classes, 0);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t k = i % num_classes;
        if (used[k] >= by_class[k].size()) throw InvalidArgument("make_swap_benchmark: pool too small for class " + std::to_string(k));
        b.originals.push_back(by_class[k][used[k]++]);
        b.c_orig.push_back(Condition::label(k));
        b.c_edit.push_back(Condition::label((k + 1) % num_classes));
        ++targets[(k + 1) % num_classes];
    }
    std::size_t mult = std::numeric_limits<std::size_t>::max();
    for (std::size_t k = 0; k < num_classes; ++k)
        if (targets[k]) mult = std::min(mult, (by_class[k].size() - used[k]) / targets[k]);
    if (mult == 0) throw InvalidArgument("make_swap_benchmark: no items left for the reference set");
    for (std::size_t k = 0; k < num_classes; ++k)
        for (std::size_t j = 0; j < mult * targets[k]; ++j) b.reference.push_back(by_class[k][used[k] + j]);
    return b;
}

void SweepTable::write_csv(std::ostream& os) const {
    os << "sweep,method,param,frechet,adherence,lpaps,lpaps_median,nfe,warning\n";
    os << std::setprecision(10);
    for (const auto& r : rows)
        os << r.sweep << ',' << r.method << ',' << r.param << ',' << r.frechet << ',' << r.adherence << ',' << r.lpaps
           << ',' << r.lpaps_median << ',' << r.nfe << ',' << r.warning << '\n';
}

std::vector<const SweepRow*> SweepTable::select(const std::string& method) const {
    std::vector<const SweepRow*> out;
    for (const auto& r : rows)
        if (r.method == method) out.push_back(&r);
    return out;
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::uint64_t cell_seed(std::uint64_t seed, std::size_t cell) { return Rng(seed).derive(cell).next_u64(); }

// Runs fn(i) for i in [0, n) on up to `threads` workers; results land in index order.
template <class Fn>
std::vector<SweepRow> run_cells(std::size_t n, std::size_t threads, Fn fn) {
    std::vector<SweepRow> rows(n);
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) rows[i] = fn(i);
        return rows;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += threads) rows[i] = fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return rows;
}

void check_bench(const EditBenchmark& bench) {
    const std::size_t n = bench.originals.size();
    if (n == 0) throw InvalidArgument("sweep: empty benchmark");
    if (bench.c_orig.size() != n || bench.c_edit.size() != n) throw InvalidArgument("sweep: conditions must pair with originals");
    if (bench.reference.empty()) throw InvalidArgument("sweep: benchmark needs reference samples");
}

// DDIM backward steps whose field evaluations match the reference
// regularized inversion, guidance factors of both condition modes included.
std::size_t ddim_steps_for(const VelocityField& field, const EditBenchmark& bench, const SweepOptions& opts,
                           const SweepMethod& m, std::string* warning) {
    if (m.method != EditMethod::Ddim) return 0;
    if (!opts.equal_nfe) return m.inversion.steps;
    const Condition& c0 = bench.c_orig.front();
    const std::size_t ref_factor =
        field_for_condition(field, inversion_condition(opts.nfe_reference.cond_mode, c0)).evals_per_call();
    const std::size_t own_factor = field_for_condition(field, inversion_condition(m.inversion.cond_mode, c0)).evals_per_call();
    const std::size_t target = regularized_nfe_per_call(opts.nfe_reference) * ref_factor;
    if (target % own_factor != 0 && warning)
        *warning = "backward nfe " + std::to_string(target) + " not reachable; rounded";
    return std::max<std::size_t>(1, (target + own_factor / 2) / own_factor);
}

SolverConfig forward_for(const SweepOptions& opts, const InversionConfig& inv) {
    SolverConfig s = opts.forward;
    if (s.num_steps == 0) s.num_steps = inv.steps;
    return s;
}

}  // namespace

SweepRow run_edit_cell(const VelocityField& field, const EditBenchmark& bench, const SweepMethod& method,
                       const SolverConfig& forward, std::size_t ddim_steps, std::uint64_t seed) {
    check_bench(bench);
    const Rng root(seed);
    std::vector<LatentSeq> edits;
    std::vector<double> dists;
    double adh = 0.0;
    SweepRow row;
    row.method = method.name;
    for (std::size_t i = 0; i < bench.originals.size(); ++i) {
        EditRequest req{bench.originals[i], bench.c_orig[i], bench.c_edit[i], method.inversion, forward, method.method,
                        ddim_steps};
        Rng rng = root.derive(i);
        EditResult r = edit(field, req, rng);
        dists.push_back(lpaps(r.x_edit, bench.originals[i]));
        if (bench.classifier) adh += adherence(r.x_edit, bench.c_edit[i], *bench.classifier);
        row.nfe = r.nfe_total;
        edits.push_back(std::move(r.x_edit));
    }
    const double n = static_cast<double>(edits.size());
    row.frechet = frechet_gaussian(edits, bench.reference);
    row.adherence = bench.classifier ? adh / n : 0.0;
    double s = 0.0;
    for (double d : dists) s += d;
    row.lpaps = s / n;
    row.lpaps_median = median(dists);
    return row;
}

SweepTable sweep_t_edit(const VelocityField& field, const EditBenchmark& bench, const std::vector<double>& grid,
                        const std::vector<SweepMethod>& methods, const SweepOptions& opts) {
    if (grid.empty() || methods.empty()) throw InvalidArgument("sweep_t_edit: empty grid or method list");
    check_bench(bench);
    const std::size_t n = grid.size() * methods.size();
    SweepTable table;
    table.rows = run_cells(n, opts.threads, [&](std::size_t cell) {
        const SweepMethod& base = methods[cell / grid.size()];
        SweepMethod m = base;
        m.inversion.t_edit = grid[cell % grid.size()];
        InversionConfig ref = opts.nfe_reference;
        ref.t_edit = m.inversion.t_edit;
        SweepOptions o = opts;
        o.nfe_reference = ref;
        std::string warning;
        const std::size_t dsteps = ddim_steps_for(field, bench, o, m, &warning);
        SweepRow row = run_edit_cell(field, bench, m, forward_for(opts, m.inversion), dsteps, cell_seed(opts.seed, cell));
        row.sweep = "t-edit";
        row.warning = warning;
        row.param = m.inversion.t_edit;
        return row;
    });
    return table;
}

SweepTable sweep_nfe(const VelocityField& field, const EditBenchmark& bench, const std::vector<std::size_t>& budgets,
                     const std::vector<SweepMethod>& methods, const SweepOptions& opts) {
    if (budgets.empty() || methods.empty()) throw InvalidArgument("sweep_nfe: empty budget or method list");
    for (std::size_t b : budgets)
        if (b == 0) throw InvalidArgument("sweep_nfe: budgets must be positive");
    check_bench(bench);
    const std::size_t n = budgets.size() * methods.size();
    SweepTable table;
    table.rows = run_cells(n, opts.threads, [&](std::size_t cell) {
        SweepMethod m = methods[cell / budgets.size()];
        const std::size_t budget = budgets[cell % budgets.size()];
        m.inversion.t_edit = 0.0;
        const Condition c_inv = inversion_condition(m.inversion.cond_mode, bench.c_orig.front());
        const std::size_t back_factor = field_for_condition(field, c_inv).evals_per_call();
        const std::size_t fwd_factor = field.evals_per_call();
        std::size_t back_per_step = 1;
        if (m.method == EditMethod::Regularized) {
            InversionConfig one = m.inversion;
            one.steps = 1;
            back_per_step = regularized_nfe_per_call(one);
        }
        const std::size_t fwd_per_step = opts.forward.method == SolverMethod::Midpoint ? 2 : 1;
        const std::size_t per_step = back_factor * back_per_step + fwd_factor * fwd_per_step;
        std::size_t steps = budget / per_step;
        std::string warning;
        if (budget % per_step != 0 || steps == 0) {
            steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(budget) /
                                                                                  static_cast<double>(per_step))));
            warning = "budget " + std::to_string(budget) + " rounded to " + std::to_string(steps * per_step);
        }
        m.inversion.steps = steps;
        SolverConfig fwd = opts.forward;
        fwd.num_steps = steps;
        SweepRow row = run_edit_cell(field, bench, m, fwd, m.method == EditMethod::Ddim ? steps : 0,
                                     cell_seed(opts.seed, cell));
        row.sweep = "nfe";
        row.param = static_cast<double>(budget);
        row.warning = warning;
        return row;
    });
    return table;
}

SweepTable sweep_lambda_kl(const VelocityField& field, const EditBenchmark& bench, const std::vector<double>& grid,
                           const std::vector<SweepMethod>& methods, const SweepOptions& opts) {
    if (grid.empty() || methods.empty()) throw InvalidArgument("sweep_lambda_kl: empty grid or method list");
    check_bench(bench);
    const std::size_t n = grid.size() * methods.size();
    SweepTable table;
    table.rows = run_cells(n, opts.threads, [&](std::size_t cell) {
        SweepMethod m = methods[cell / grid.size()];
        m.inversion.lambda_kl = grid[cell % grid.size()];
        std::string warning;
        const std::size_t dsteps = ddim_steps_for(field, bench, opts, m, &warning);
        SweepRow row = run_edit_cell(field, bench, m, forward_for(opts, m.inversion), dsteps, cell_seed(opts.seed, cell));
        row.sweep = "lambda-kl";
        row.warning = warning;
        row.param = m.inversion.lambda_kl;
        return row;
    });
    return table;
}

SweepTable sweep_cfg(FieldPtr unguided, const std::vector<std::vector<LatentSeq>>& reference_by_class,
                     const LogisticClassifier* classifier, const std::vector<double>& grid, std::size_t per_class,
                     const SolverConfig& solver, std::uint64_t seed) {
    if (!unguided) throw InvalidArgument("sweep_cfg: null field");
    if (grid.empty() || reference_by_class.empty() || per_class == 0) throw InvalidArgument("sweep_cfg: empty input");
    const auto& shape = reference_by_class.front().front();
    SweepTable table;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const GuidedField guided(unguided, grid[g]);
        SweepRow row;
        row.sweep = "cfg";
        row.method = "generate";
        row.param = grid[g];
        double fd = 0.0, adh = 0.0;
        std::size_t nfe = 0;
        for (std::size_t k = 0; k < reference_by_class.size(); ++k) {
            // Same noise for every guidance scale so the curve reflects guidance alone.
            Rng rng = Rng(seed).derive(k);
            std::vector<LatentSeq> samples;
            for (std::size_t i = 0; i < per_class; ++i) {
                samples.push_back(generate(guided, Condition::label(k), shape.length(), shape.channels(), solver, rng, &nfe));
                if (classifier) adh += adherence(samples.back(), Condition::label(k), *classifier);
            }
            fd += frechet_gaussian(samples, reference_by_class[k]);
        }
        const double total = static_cast<double>(per_class * reference_by_class.size());
        row.frechet = fd / static_cast<double>(reference_by_class.size());
        row.adherence = classifier ? adh / total : 0.0;
        row.nfe = nfe / (per_class * reference_by_class.size());
        table.rows.push_back(row);
    }
    return table;
}

std::string render_sweep_svg(const SweepTable& table, const std::string& metric, const std::string& title) {
    auto value = [&](const SweepRow& r) {
        if (metric == "frechet") return r.frechet;
        if (metric == "lpaps") return r.lpaps;
        if (metric == "adherence") return r.adherence;
        throw InvalidArgument("render_sweep_svg: unknown metric '" + metric + "'");
    };
    std::vector<std::string> methods;
    for (const auto& r : table.rows)
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);

    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (!table.rows.empty()) {
        xmin = xmax = table.rows.front().param;
        ymin = ymax = value(table.rows.front());
        for (const auto& r : table.rows) {
            xmin = std::min(xmin, r.param);
            xmax = std::max(xmax, r.param);
            ymin = std::min(ymin, value(r));
            ymax = std::max(ymax, value(r));
        }
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;

    constexpr double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
    auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

    std::ostringstream os;
    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << xv << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << yv << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">"
       << (table.rows.empty() ? std::string("param") : table.rows.front().sweep) << "</text>\n";
    os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
       << ")\" text-anchor=\"middle\">" << metric << "</text>\n";
    for (std::size_t m = 0; m < methods.size(); ++m) {
        const char* color = colors[m % 6];
        auto rows = table.select(methods[m]);
        std::sort(rows.begin(), rows.end(), [](const SweepRow* a, const SweepRow* b) { return a->param < b->param; });
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto* r : rows) os << px(r->param) << ',' << py(value(*r)) << ' ';
        os << "\"/>\n";
        for (const auto* r : rows)
            os << "<circle cx=\"" << px(r->param) << "\" cy=\"" << py(value(*r)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        os << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (m + 1) << "\" fill=\"" << color << "\">" << methods[m]
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace latentflow
