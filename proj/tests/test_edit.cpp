#include "doctest.h"
#include "helpers.hpp"

#include "latentflow/edit.hpp"
#include "latentflow/train.hpp"

#include <memory>
#include <sstream>

using namespace latentflow;

namespace {

// Two-class oracle; Null is answered with the exact velocity of the equal-weight
// mixture, the posterior-weighted average of the class velocities.
std::shared_ptr<const VelocityField> two_class_oracle() {
    const auto o = std::make_shared<GaussianOracleField>(std::vector<std::vector<double>>{{4.0, 0.0}, {-4.0, 0.0}},
                                                         std::vector<std::vector<double>>{{0.5, 0.5}, {0.5, 0.5}});
    return std::make_shared<LambdaField>([o](const LatentSeq& z, double t, const Condition& c) {
        if (!c.is_null()) return oracle_eval(*o, z, FlowStep(t), c);
        std::vector<double> logp(2, 0.0);
        for (std::size_t k = 0; k < 2; ++k)
            for (std::size_t f = 0; f < z.length(); ++f)
                for (std::size_t j = 0; j < z.channels(); ++j) {
                    const double s = o->sigma(k)[j];
                    const double var = t * t * s * s + (1 - t) * (1 - t);
                    const double dz = z(f, j) - t * o->mu(k)[j];
                    logp[k] += -0.5 * dz * dz / var - 0.5 * std::log(var);
                }
        const double m = std::max(logp[0], logp[1]);
        const double w0 = std::exp(logp[0] - m), w1 = std::exp(logp[1] - m);
        const auto v0 = oracle_eval(*o, z, FlowStep(t), Condition::label(0));
        const auto v1 = oracle_eval(*o, z, FlowStep(t), Condition::label(1));
        return (w0 / (w0 + w1)) * v0 + (w1 / (w0 + w1)) * v1;
    });
}

EditBenchmark oracle_bench(std::size_t count, std::uint64_t seed = 1) {
    DatasetSpec spec;
    spec.n_per_class = 200;
    spec.seed = seed;
    static Batch pool;
    pool = make_dataset(spec);
    return make_swap_benchmark(pool, 2, count);
}

std::vector<SweepMethod> both_methods() {
    InversionConfig dd;
    dd.cond_mode = CondMode::Null;
    return {{"ddim", EditMethod::Ddim, dd}, {"regularized", EditMethod::Regularized, {}}};
}

}  // namespace

TEST_CASE("identity edit reconstructs on the oracle") {
    const auto f = two_class_oracle();
    Rng rng(2);
    std::size_t ok = 0;
    for (int i = 0; i < 50; ++i) {
        LatentSeq x = testutil::random_seq(1, 2, rng, 0.5);
        x[0] += 4.0;
        EditRequest req{x, Condition::label(0), Condition::label(0)};
        Rng r = rng.derive(i);
        const auto res = edit(*f, req, r);
        if (testutil::rel_l2(res.x_edit, x) < 0.05) ++ok;
        CHECK(res.nfe_total == res.nfe_backward + res.nfe_forward);
        CHECK(res.nfe_backward == 175);
        CHECK(res.nfe_forward == 25);
    }
    CHECK(ok >= 48);
}

TEST_CASE("T_edit near 1 keeps the original whatever the target") {
    const auto f = two_class_oracle();
    Rng rng(3);
    const LatentSeq x = LatentSeq::from_rows({{4.2, -0.3}});
    EditRequest req{x, Condition::label(0), Condition::label(1)};
    req.inversion.t_edit = 0.999;
    req.inversion.steps = 1;
    req.solver.num_steps = 1;
    const auto res = edit(*f, req, rng);
    CHECK(lpaps(res.x_edit, x) < 0.05);
}

TEST_CASE("collapsed regularized edit equals the ddim edit") {
    const auto f = two_class_oracle();
    const GuidedField g(f, 3.0);
    EditRequest a{LatentSeq::from_rows({{3.7, 0.4}}), Condition::label(0), Condition::label(1)};
    a.inversion.weights = {1.0};
    a.inversion.lambda_kl = 0.0;
    EditRequest b = a;
    b.method = EditMethod::Ddim;
    Rng r1(1), r2(2);
    const auto ra = edit(g, a, r1), rb = edit(g, b, r2);
    CHECK(ra.x_edit == rb.x_edit);
    // guidance doubles both phases; the regularized pass also pays for the reference prediction
    CHECK(rb.nfe_backward == 50);
    CHECK(ra.nfe_backward == 100);
    CHECK(ra.nfe_forward == 50);
    CHECK(rb.nfe_forward == 50);
}

TEST_CASE("edit errors and parsing") {
    const auto f = two_class_oracle();
    Rng rng(1);
    EditRequest req{LatentSeq(1, 2), Condition::label(0), Condition::null()};
    CHECK_THROWS_AS(edit(*f, req, rng), InvalidArgument);
    CHECK(parse_edit_method("ddim") == EditMethod::Ddim);
    CHECK(parse_edit_method("regularized") == EditMethod::Regularized);
    CHECK_THROWS_AS(parse_edit_method("ddpm"), InvalidConfig);
}

TEST_CASE("blend conditions interpolate embeddings") {
    MlpConfig cfg;
    cfg.hidden = {8};
    cfg.embed_dim = 3;
    const MlpField m(cfg, 1);
    const auto c = blend_conditions(m, Condition::label(0), Condition::label(1), 0.25);
    const auto e0 = m.embedding_of(Condition::label(0)), e1 = m.embedding_of(Condition::label(1));
    for (std::size_t i = 0; i < 3; ++i) CHECK(c.embedding_vector()[i] == doctest::Approx(0.75 * e0[i] + 0.25 * e1[i]));
    const LatentSeq z(1, 2, 0.3);
    CHECK(m(z, FlowStep(0.5), blend_conditions(m, Condition::label(0), Condition::label(1), 0.0)) ==
          m(z, FlowStep(0.5), Condition::label(0)));
}

TEST_CASE("swap benchmark") {
    DatasetSpec spec;
    spec.classes = 3;
    spec.n_per_class = 40;
    const Batch pool = make_dataset(spec);
    const auto b = make_swap_benchmark(pool, 3, 30);
    REQUIRE(b.originals.size() == 30);
    for (std::size_t i = 0; i < 30; ++i) {
        CHECK(b.c_edit[i].label_id() == (b.c_orig[i].label_id() + 1) % 3);
        CHECK(b.c_orig[i].label_id() == i % 3);
    }
    CHECK(b.reference.size() >= 30);
    for (const auto& r : b.reference)
        for (const auto& o : b.originals) REQUIRE(r != o);
}

TEST_CASE("t_edit sweep shape, CSV and SVG") {
    const auto f = two_class_oracle();
    const auto bench = oracle_bench(10);
    SweepOptions o;
    o.seed = 4;
    const std::vector<double> grid{0.0, 0.04, 0.5, 0.98};
    const auto table = sweep_t_edit(*f, bench, grid, both_methods(), o);
    REQUIRE(table.rows.size() == 8);
    std::ostringstream csv;
    table.write_csv(csv);
    std::size_t lines = 0;
    for (char ch : csv.str()) lines += ch == '\n';
    CHECK(lines == 9);
    CHECK(csv.str().rfind("sweep,method,param,frechet,adherence,lpaps,lpaps_median,nfe,warning\n", 0) == 0);

    for (const std::string m : {"ddim", "regularized"}) {
        const auto rows = table.select(m);
        REQUIRE(rows.size() == 4);
        CHECK(rows.back()->lpaps < 0.2 * rows.front()->lpaps);
        CHECK(rows.back()->lpaps < 0.5);
    }
    // equal backward NFE: 175 regularized evaluations, so 175 ddim steps
    CHECK(table.select("ddim").front()->nfe == table.select("regularized").front()->nfe);

    const auto svg = render_sweep_svg(table, "lpaps", "lpaps vs T_edit");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("regularized") != std::string::npos);
}

TEST_CASE("sweeps are deterministic across thread counts") {
    const auto f = two_class_oracle();
    const auto bench = oracle_bench(6);
    SweepOptions a, b;
    a.threads = 1;
    b.threads = 3;
    const auto ta = sweep_lambda_kl(*f, bench, {0.0, 0.2, 0.5}, {both_methods()[1]}, a);
    const auto tb = sweep_lambda_kl(*f, bench, {0.0, 0.2, 0.5}, {both_methods()[1]}, b);
    REQUIRE(ta.rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(ta.rows[i].frechet == tb.rows[i].frechet);
        CHECK(ta.rows[i].lpaps == tb.rows[i].lpaps);
        CHECK(ta.rows[i].param == tb.rows[i].param);
    }
}

TEST_CASE("nfe sweep hits the budgets") {
    const auto f = two_class_oracle();
    const auto bench = oracle_bench(10);
    const std::vector<std::size_t> budgets{16, 32, 64, 128, 256};
    const auto table = sweep_nfe(*f, bench, budgets, both_methods());
    REQUIRE(table.rows.size() == 10);
    for (const auto& r : table.rows) {
        if (r.warning.empty()) CHECK(r.nfe == static_cast<std::size_t>(r.param));
        else CHECK(r.warning.find("rounded") != std::string::npos);
    }
    // ddim: 2 evaluations per step, every budget divides
    for (const auto* r : table.select("ddim")) CHECK(r->warning.empty());
    // regularized: 8 per step; 16 and up divide
    for (const auto* r : table.select("regularized")) CHECK(r->warning.empty());
    for (const std::string m : {"ddim", "regularized"}) {
        const auto rows = table.select(m);
        CHECK(rows.back()->frechet <= rows.front()->frechet);
    }
    const auto odd = sweep_nfe(*f, bench, {20}, {both_methods()[1]});
    CHECK_FALSE(odd.rows[0].warning.empty());
    CHECK(odd.rows[0].nfe == 24);
}

TEST_CASE("cfg sweep on the oracle") {
    const auto f = two_class_oracle();
    DatasetSpec spec;
    spec.n_per_class = 300;
    const Batch d = make_dataset(spec);
    std::vector<std::vector<LatentSeq>> ref{class_items(d, 0), class_items(d, 1)};
    const auto t = sweep_cfg(f, ref, nullptr, {1.0}, 200, {SolverMethod::Midpoint, 16}, 3);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].frechet < 0.05);
    CHECK(t.rows[0].nfe == 64);
}

TEST_CASE("trained toy model edits across classes") {
    DatasetSpec spec;
    spec.n_per_class = 2000;
    spec.seed = 1;
    const Splits sp = split(make_dataset(spec), {0.5, 0.0, 0.5}, 7);
    TrainConfig tc;
    tc.steps = 3000;
    tc.batch_size = 128;
    tc.model.hidden = {64, 64, 64};
    tc.seed = 3;
    tc.log_every = 0;
    const auto r = train(tc, sp.train);
    const auto field = std::make_shared<MlpField>(tc.model, r.state.ema);
    const auto clf = LogisticClassifier::fit(sp.train, 2);
    Rng rng(5);
    double adh = 0.0, edit_l2 = 0.0, resample_l2 = 0.0;
    std::size_t n = 0;
    for (const auto& it : sp.eval) {
        if (it.c.label_id() != 0) continue;
        EditRequest req{it.x, it.c, Condition::label(1)};
        Rng er = rng.derive(n);
        const auto res = edit(*field, req, er);
        adh += adherence(res.x_edit, Condition::label(1), clf);
        edit_l2 += lpaps(res.x_edit, it.x);
        const auto fresh = generate(*field, Condition::label(1), 1, 2, {SolverMethod::Euler, 25}, er);
        resample_l2 += lpaps(fresh, it.x);
        if (++n == 100) break;
    }
    CHECK(adh / n > 0.9);
    CHECK(edit_l2 < resample_l2);
}
