#include "doctest.h"
#include "helpers.hpp"

#include "latentflow/data.hpp"
#include "latentflow/train.hpp"

#include <numeric>
#include <sstream>

using namespace latentflow;

namespace {

TrainConfig small_train(std::size_t steps = 20) {
    TrainConfig cfg;
    cfg.steps = steps;
    cfg.batch_size = 16;
    cfg.model.hidden = {16, 16};
    cfg.model.embed_dim = 4;
    cfg.model.time_features = 4;
    cfg.log_every = 0;
    cfg.seed = 1;
    return cfg;
}

Batch toy(std::size_t n_per_class = 200) {
    DatasetSpec spec;
    spec.n_per_class = n_per_class;
    spec.seed = 2;
    return make_dataset(spec);
}

}  // namespace

TEST_CASE("fm_loss hand-computed MSE") {
    // v(z, t, c) = 2 z, B = 2, L = 1, d = 2
    const LambdaField f([](const LatentSeq& z, double, const Condition&) { return 2.0 * z; });
    Batch b({{LatentSeq::from_rows({{1, 2}}), {}}, {LatentSeq::from_rows({{0, -1}}), {}}});
    const std::vector<LatentSeq> eps{LatentSeq::from_rows({{0.5, 0}}), LatentSeq::from_rows({{1, 1}})};
    const std::vector<FlowStep> t{FlowStep(0.5), FlowStep(0.25)};
    // item 0: z = (0.75, 1), v = (1.5, 2), target = (0.5, 2) -> (1 + 0) / 2 = 0.5
    // item 1: z = (0.75, 0.5), v = (1.5, 1), target = (-1, -2) -> (6.25 + 9) / 2 = 7.625
    CHECK(fm_loss(f, b, eps, t, LossWeighting::None) == doctest::Approx((0.5 + 7.625) / 2).epsilon(1e-14));
    const double w0 = logit_normal_pdf(0.5, 0, 1), w1 = logit_normal_pdf(0.25, 0, 1);
    CHECK(fm_loss(f, b, eps, t, LossWeighting::LogitNormalPdf) ==
          doctest::Approx((w0 * 0.5 + w1 * 7.625) / 2).epsilon(1e-14));
    CHECK_THROWS_AS(fm_loss(f, b, std::vector<LatentSeq>{eps[0]}, t, LossWeighting::None), InvalidArgument);
}

TEST_CASE("fm_loss degenerate cases") {
    const LambdaField zero([](const LatentSeq& z, double, const Condition&) { return LatentSeq(z.length(), z.channels()); });
    Rng rng(1);
    const auto x = testutil::random_seq(1, 2, rng);
    Batch b({{x, {}}});
    CHECK(fm_loss(zero, b, std::vector<LatentSeq>{x}, std::vector<FlowStep>{FlowStep(0.3)}, LossWeighting::None) == 0.0);

    const auto oracle = GaussianOracleField::isotropic(0.0, 1.0, 2);
    Batch lb({{x, Condition::label(0)}});
    const auto e = testutil::random_seq(1, 2, rng);
    CHECK(fm_loss(oracle, lb, std::vector<LatentSeq>{e}, std::vector<FlowStep>{FlowStep(0.6)}, LossWeighting::None) >= 0.0);
}

TEST_CASE("loss_and_grad matches fm_loss and zero weights give zero gradient") {
    const MlpField f(small_train().model, 3);
    Rng rng(2);
    const Batch data = toy(10);
    PreparedBatch pb;
    std::vector<LatentSeq> eps;
    std::vector<FlowStep> ts;
    Batch used;
    for (std::size_t i = 0; i < 6; ++i) {
        const auto& it = data[i * 3];
        eps.push_back(sample_noise(1, 2, rng));
        ts.push_back(FlowStep(rng.uniform()));
        used.push_back(it);
        pb.z.push_back(mix(it.x, eps.back(), ts.back()));
        pb.target.push_back(target_velocity(it.x, eps.back()));
        pb.t.push_back(ts.back());
        pb.c.push_back(it.c);
        pb.weight.push_back(1.0);
    }
    CHECK(f.loss_and_grad(pb.samples()).loss == doctest::Approx(fm_loss(f, used, eps, ts, LossWeighting::None)).epsilon(1e-12));
    for (auto& w : pb.weight) w = 0.0;
    const auto g = f.loss_and_grad(pb.samples()).grad;
    CHECK(std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("grad_check on a fresh network") {
    const MlpField f(small_train().model, 4);
    const Batch data = toy(10);
    Batch b;
    for (std::size_t i = 0; i < 4; ++i) b.push_back(data[i * 5]);
    b[1].c = Condition::null();
    Rng rng(5);
    CHECK(grad_check(f, b, rng) < 1e-4);
}

TEST_CASE("central differences are second order") {
    TrainConfig cfg = small_train();
    cfg.model.hidden = {6};
    const MlpField f(cfg.model, 8);
    const Batch data = toy(10);
    Batch b;
    for (std::size_t i = 0; i < 4; ++i) b.push_back(data[i * 5]);
    // same draws for both step sizes, every parameter checked
    Rng r1(3), r2(3);
    const double e1 = grad_check(f, b, r1, 100000, 2e-2);
    const double e2 = grad_check(f, b, r2, 100000, 4e-2);
    CHECK(e2 / e1 > 3.0);
    CHECK(e2 / e1 < 5.0);
}

TEST_CASE("dropout_p = 1 nulls every condition") {
    TrainConfig cfg = small_train();
    cfg.dropout_p = 1.0;
    TrainState s = init_train_state(cfg);
    const Batch data = toy(20);
    const auto stats = train_step(s, data, cfg);
    CHECK(stats.null_conditions == data.size());
    cfg.dropout_p = 0.0;
    CHECK(train_step(s, data, cfg).null_conditions == 0);
}

TEST_CASE("EMA updates every interval") {
    TrainConfig cfg = small_train();
    TrainState s = init_train_state(cfg);
    const std::vector<double> init = s.ema;
    const Batch data = toy(10);
    for (int i = 0; i < 9; ++i) CHECK_FALSE(train_step(s, data, cfg).ema_updated);
    CHECK(s.ema == init);
    CHECK(train_step(s, data, cfg).ema_updated);
    CHECK(s.ema_updates == 1);
    const auto p = s.field.parameters();
    for (std::size_t i = 0; i < p.size(); ++i) REQUIRE(s.ema[i] == doctest::Approx(0.99 * init[i] + 0.01 * p[i]).epsilon(1e-14));
}

TEST_CASE("ot pairing never costs more than the independent pairing") {
    TrainConfig cfg = small_train();
    cfg.coupling = CouplingKind::Ot;
    TrainState s = init_train_state(cfg);
    const Batch data = toy(30);
    for (int i = 0; i < 10; ++i) {
        const auto st = train_step(s, data, cfg);
        CHECK(st.pair_cost <= st.independent_cost);
    }
    cfg.coupling = CouplingKind::Independent;
    const auto st = train_step(s, data, cfg);
    CHECK(st.pair_cost == st.independent_cost);
}

TEST_CASE("training is deterministic and logs CSV") {
    TrainConfig cfg = small_train(30);
    cfg.log_every = 10;
    const Batch data = toy(50);
    std::ostringstream log;
    const auto a = train(cfg, data, &log);
    const auto b = train(cfg, data);
    CHECK(std::equal(a.state.field.parameters().begin(), a.state.field.parameters().end(), b.state.field.parameters().begin()));
    CHECK(a.state.ema == b.state.ema);
    CHECK(log.str().rfind("step,loss,pair_cost,ema_loss\n", 0) == 0);
    CHECK(a.log.size() == 4);  // steps 1, 10, 20, 30
    CHECK(a.losses.size() == 30);

    const auto ck = make_checkpoint(a.state);
    CHECK(ck.ema == a.state.ema);
}

TEST_CASE("training halves the loss on the 2-class task") {
    TrainConfig cfg;
    cfg.steps = 5000;
    cfg.batch_size = 64;
    cfg.model.hidden = {64, 64, 64};
    cfg.seed = 3;
    cfg.log_every = 0;
    DatasetSpec spec;
    spec.seed = 1;
    const auto r = train(cfg, make_dataset(spec));
    const auto& l = r.losses;
    const double first = std::accumulate(l.begin(), l.begin() + 50, 0.0) / 50;
    const double last = std::accumulate(l.end() - 200, l.end(), 0.0) / 200;
    CHECK(last < 0.5 * first);
}

TEST_CASE("training errors") {
    TrainConfig cfg = small_train();
    TrainState s = init_train_state(cfg);
    Batch bad({{LatentSeq(1, 2, std::nan("")), Condition::label(0)}});
    try {
        train_step(s, bad, cfg);
        FAIL("expected divergence");
    } catch (const TrainingDiverged& e) {
        CHECK(e.step_index == 1);
        CHECK(e.code() == ErrorCode::TrainingDiverged);
    }
    cfg.dropout_p = 1.5;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    cfg = small_train();
    cfg.ema.interval = 0;
    CHECK_THROWS_AS(init_train_state(cfg), InvalidConfig);
    cfg = small_train();
    cfg.model.channels = 3;
    CHECK_THROWS_AS(train(cfg, toy(5)), InvalidConfig);
    CHECK(parse_loss_weighting("logit_normal_pdf") == LossWeighting::LogitNormalPdf);
}
