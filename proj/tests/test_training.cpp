#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <limits>
#include <sstream>

#include "support.hpp"
#include "timo/training.hpp"

using namespace timo;

TEST_CASE("adam_step examples") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    AdamState st(3);
    std::vector<double> p = {1.0, -2.0, 0.5};
    const std::vector<double> before = p;
    adam_step(st, p, std::vector<double>(3, 0.0));
    CHECK(p == before);
    CHECK(st.step == 1);
  }
  SUBCASE("first step moves by the learning rate") {
    AdamState st(1);
    std::vector<double> p = {0.0};
    adam_step(st, p, std::vector<double>{1.0});
    CHECK(std::abs(p[0] + 0.0005) <= 1e-7);
  }
  SUBCASE("constant gradient gives steps of size lr") {
    AdamState st(2);
    std::vector<double> p = {0.0, 0.0};
    double last0 = 0.0, last1 = 0.0;
    for (int i = 0; i < 5000; ++i) {
      last0 = p[0];
      last1 = p[1];
      adam_step(st, p, std::vector<double>{3.0, -0.01});
    }
    CHECK((p[0] - last0) == doctest::Approx(-0.0005).epsilon(1e-6));
    CHECK((p[1] - last1) == doctest::Approx(0.0005).epsilon(1e-4));
  }
  SUBCASE("non-finite gradient aborts without touching anything") {
    AdamState st(2);
    std::vector<double> p = {1.0, 2.0};
    CHECK_THROWS_AS(adam_step(st, p, std::vector<double>{0.1, std::nan("")}), std::domain_error);
    CHECK(p == std::vector<double>{1.0, 2.0});
    CHECK(st.step == 0);
    CHECK_THROWS_AS(adam_step(st, p, std::vector<double>{0.1}), std::invalid_argument);
  }
}

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.layers = LayerSpec{{2, 5, 4}};
  cfg.collocation = {10, 10, 10};
  cfg.epochs = 3;
  return cfg;
}

TrainConfig manufactured(TrainConfig cfg) {
  cfg.physics.mu = 1.0;
  cfg.physics.damping = DampingKind::Linear;
  cfg.use_sources = true;
  return cfg;
}

FieldModel model_of(const NetworkParams& params) {
  return [&params](double x, double t) { return forward(params, x, t); };
}

std::vector<TrainConfig> config_variants() {
  std::vector<TrainConfig> out;
  for (DampingKind kind : {DampingKind::None, DampingKind::Linear, DampingKind::Quadratic, DampingKind::SingularExp}) {
    TrainConfig cfg = small_config();
    cfg.physics.rho1 = 2.0;
    cfg.physics.delta = 0.8;
    cfg.physics.tau = 3.0;
    cfg.physics.mu = 1.3;
    cfg.physics.damping = kind;
    cfg.physics.T = 5.0;
    out.push_back(cfg);
  }
  TrainConfig mixed = manufactured(small_config());
  mixed.boundary = BoundarySpec{BoundaryKind::MixedPaper, {0.1, -0.2, 0.3}, {0.0, 0.5, -0.4}};
  mixed.initial.theta0.offset = 0.5;
  mixed.initial.phi1.amplitude = -2.0;
  out.push_back(mixed);
  TrainConfig literal = manufactured(small_config());
  literal.paper_literal_aggregation = true;
  out.push_back(literal);
  return out;
}

}  // namespace

TEST_CASE("tape loss equals the pointwise loss") {
  int variant = 0;
  for (TrainConfig cfg : config_variants()) {
    CAPTURE(variant++);
    cfg.layers = LayerSpec{{2, 8, 8, 4}};
    cfg.collocation = {37, 23, 19};
    cfg.chunk_size = 7;
    const NetworkParams params = init_params(cfg.layers, 4);
    const CollocationSet batch = sample_collocation(cfg.collocation, cfg.physics.T, 5);
    const LossBreakdown tape = compute_loss(params, batch, cfg).loss;
    const LossBreakdown point = evaluate_loss(model_of(params), batch, cfg);
    for (std::size_t i = 0; i < 8; ++i) {
      CAPTURE(i);
      CHECK(tape.mse[i] == doctest::Approx(point.mse[i]).epsilon(1e-11));
      CHECK(tape.mse[i] >= 0.0);
    }
    double sum = 0.0;
    for (double m : tape.mse) sum += m;
    CHECK(tape.total == sum);
  }
}

TEST_CASE("chunking changes only the reduction order") {
  TrainConfig cfg = manufactured(small_config());
  cfg.collocation = {50, 50, 50};
  const NetworkParams params = init_params(cfg.layers, 2);
  const CollocationSet batch = sample_collocation(cfg.collocation, 1.0, 3);
  cfg.chunk_size = 1000;
  const LossGradient one = compute_loss(params, batch, cfg);
  cfg.chunk_size = 6;
  const LossGradient many = compute_loss(params, batch, cfg);
  CHECK(many.loss.total == doctest::Approx(one.loss.total).epsilon(1e-13));
  for (std::size_t i = 0; i < one.grad.size(); ++i) {
    CHECK(many.grad[i] == doctest::Approx(one.grad[i]).epsilon(1e-11).scale(1e-11));
  }
  CHECK(compute_loss(params, batch, cfg).grad == many.grad);
}

TEST_CASE("loss gradient matches finite differences on a 2-5-4 network") {
  int variant = 0;
  for (const TrainConfig& cfg : config_variants()) {
    CAPTURE(variant++);
    const NetworkParams params = init_params(cfg.layers, 17);
    const CollocationSet batch = sample_collocation(cfg.collocation, cfg.physics.T, 18);
    const std::vector<double> g = compute_loss(params, batch, cfg).grad;
    std::vector<double> probe(params.flat().begin(), params.flat().end());
    const std::vector<double> want = test::fd_gradient(
        [&] { return evaluate_loss(model_of(NetworkParams(cfg.layers, probe)), batch, cfg).total; }, probe, 1e-4);
    for (std::size_t i = 0; i < g.size(); ++i) {
      CAPTURE(i);
      CHECK(test::rel_err(g[i], want[i], 1e-6) <= 1e-4);
    }
  }
}

TEST_CASE("exact solution has zero manufactured loss") {
  const TrainConfig cfg = manufactured(small_config());
  const CollocationSet batch = sample_collocation(500, 1.0, 9);
  const LossBreakdown loss = evaluate_loss(exact_solution, batch, cfg);
  CHECK(loss.total <= 1e-20);
}

TEST_CASE("zero network against the default initial data") {
  TrainConfig cfg = manufactured(small_config());
  cfg.collocation = {10, 10, 20000};
  const NetworkParams zero(cfg.layers, std::vector<double>(cfg.layers.param_count(), 0.0));
  const CollocationSet batch = sample_collocation(cfg.collocation, 1.0, 10);
  const LossBreakdown loss = compute_loss(zero, batch, cfg).loss;

  double want = 0.0;
  for (double x : batch.initial_xs) want += 4.0 * std::pow(4.0 * x * (1.0 - x), 2);
  want /= static_cast<double>(batch.initial_xs.size());
  CHECK(loss.mse[6] == doctest::Approx(want).epsilon(1e-12));
  CHECK(loss.mse[6] == doctest::Approx(4.0 * 8.0 / 15.0).epsilon(0.02));
  CHECK(loss.mse[7] == doctest::Approx(want / 2.0).epsilon(1e-12));

  cfg.paper_literal_aggregation = true;
  const LossBreakdown lit = compute_loss(zero, batch, cfg).loss;
  CHECK(lit.mse[6] == doctest::Approx(4.0 * want).epsilon(1e-12));  // (4 d)^2 = 16 d^2
  CHECK(lit.mse[7] == doctest::Approx(2.0 * want / 2.0).epsilon(1e-12));
}

TEST_CASE("train") {
  TrainConfig cfg = manufactured(small_config());
  cfg.epochs = 1;
  const TrainResult one = train(cfg);
  CHECK(one.history.size() == 1);
  CHECK(one.history[0].epoch == 0);
  CHECK(!(one.params == init_params(cfg.layers, cfg.init_seed())));
  CHECK(one.batch == sample_collocation(cfg.collocation, cfg.physics.T, cfg.sampling_seed()));

  cfg.epochs = 25;
  cfg.log_every = 4;
  std::vector<std::int64_t> seen;
  const TrainResult a = train(cfg, [&](std::int64_t e, const LossBreakdown&) { seen.push_back(e); });
  const TrainResult b = train(cfg);
  CHECK(seen.size() == 25);
  REQUIRE(a.history.size() == 7);
  CHECK(a.history.back().epoch == 24);
  CHECK(a.params == b.params);
  for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].loss.mse == b.history[i].loss.mse);
  CHECK(a.history.front().loss.total == one.history.front().loss.total);

  cfg.epochs = 0;
  CHECK_THROWS_AS(train(cfg), std::invalid_argument);
}

TEST_CASE("non-finite loss aborts with the last good parameters") {
  TrainConfig cfg = small_config();
  cfg.epochs = 50;
  cfg.adam.lr = 1e305;
  cfg.physics.mu = 1.0;
  cfg.physics.damping = DampingKind::Quadratic;
  try {
    train(cfg);
    FAIL("expected TrainingAborted");
  } catch (const TrainingAborted& e) {
    CHECK(e.epoch() >= 1);
    CHECK(e.history().size() >= static_cast<std::size_t>(e.epoch()));
    for (double v : e.last_good().flat()) REQUIRE(std::isfinite(v));
    const CollocationSet batch = sample_collocation(cfg.collocation, cfg.physics.T, cfg.sampling_seed());
    CHECK(std::isfinite(compute_loss(e.last_good(), batch, cfg).loss.total));
  }
}

TEST_CASE("loss history csv") {
  std::vector<HistoryRow> rows(2);
  rows[1].epoch = 10;
  rows[1].loss.total = 0.1;
  rows[1].loss.mse[7] = 1.0 / 3.0;
  std::ostringstream os;
  write_loss_history_csv(os, rows);
  std::istringstream is(os.str());
  std::string header, r0, r1;
  std::getline(is, header);
  std::getline(is, r0);
  std::getline(is, r1);
  CHECK(header == "epoch,total,mse_pde1,mse_pde2,mse_pde3,mse_pde4,mse_bc0,mse_bc1,mse_ic_val,mse_ic_vel");
  CHECK(r0 == "0,0,0,0,0,0,0,0,0,0");
  CHECK(r1 == "10,0.10000000000000001,0,0,0,0,0,0,0,0.33333333333333331");
}
