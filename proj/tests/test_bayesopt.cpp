#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "datasel/bayesopt.hpp"

using namespace datasel;

namespace {

ObservationSet observations_1d(const std::vector<double>& xs, const std::vector<double>& ys) {
  ObservationSet obs;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Eigen::VectorXd x(1);
    x << xs[i];
    obs.push_back(Observation{x, ys[i], false});
  }
  return obs;
}

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

}  // namespace

TEST_CASE("gp interpolates noiseless observations") {
  std::vector<double> xs{0.0, 0.25, 0.5, 0.75, 1.0}, ys;
  for (double x : xs) ys.push_back(x);  // f(x) = x
  KernelParams params{0.3, 1.0, 0.0};
  const GpModel model(observations_1d(xs, ys), params);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto [mean, var] = model.posterior(vec1(xs[i]));
    CHECK(mean == Catch::Approx(ys[i]).margin(1e-6));
    CHECK(var >= 0.0);
    CHECK(var <= 1e-6);
  }
}

TEST_CASE("single observation with vanishing noise reproduces its value") {
  const auto obs = observations_1d({0.3}, {4.2});
  const GpModel model(obs, KernelParams{1.0, 1.0, 0.0});
  const auto [mean, var] = model.posterior(vec1(0.3));
  CHECK(mean == Catch::Approx(4.2).margin(1e-9));
}

TEST_CASE("duplicate inputs with different values exercise the jitter path") {
  const auto obs = observations_1d({0.5, 0.5}, {0.0, 1.0});
  const GpModel model(obs, KernelParams{1.0, 1.0, 0.0});
  CHECK(model.jitter() > 0.0);
  const auto [mean, var] = model.posterior(vec1(0.5));
  CHECK(std::isfinite(mean));
}

TEST_CASE("posterior reverts to the prior far from the data") {
  // y values are already standardized (mean 0, population sd 1)
  const auto obs = observations_1d({0.0, 0.2}, {-1.0, 1.0});
  const GpModel model(obs, KernelParams{0.5, 1.0, 1e-6});
  const auto [mean, var] = model.posterior(vec1(50.0));
  CHECK(mean == Catch::Approx(0.0).margin(1e-3));
  CHECK(var == Catch::Approx(1.0).margin(1e-3));
}

TEST_CASE("posterior mean at the midpoint of symmetric observations is their average") {
  const auto obs = observations_1d({-1.0, 1.0}, {2.0, 4.0});
  const GpModel model(obs, KernelParams{1.0, 1.0, 1e-8});
  const auto [mean, var] = model.posterior(vec1(0.0));
  CHECK(mean == Catch::Approx(3.0).margin(1e-6));
}

TEST_CASE("gp_fit requires at least one observation") {
  CHECK_THROWS(GpModel(ObservationSet{}, KernelParams{}));
}

TEST_CASE("expected improvement closed form") {
  CHECK(expected_improvement(1.0, 0.0, 1.0, true) == 0.0);
  CHECK(expected_improvement(0.5, 0.0, 1.0, true) == 0.0);
  CHECK(expected_improvement(2.0, 0.0, 1.0, true) == Catch::Approx(1.0));
  // mean == best with unit sigma: EI = phi(0) = 1/sqrt(2*pi)
  CHECK(expected_improvement(1.0, 1.0, 1.0, true) ==
        Catch::Approx(0.3989422804014327).margin(1e-9));
  CHECK(expected_improvement(1.0, 1.0, 1.0, false) ==
        Catch::Approx(0.3989422804014327).margin(1e-9));
  // EI grows with variance at equal mean
  double prev = 0.0;
  for (double var : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    const double ei = expected_improvement(0.0, var, 0.0, true);
    CHECK(ei > prev);
    prev = ei;
  }
  // minimization mirrors maximization
  CHECK(expected_improvement(-2.0, 0.0, -1.0, false) == Catch::Approx(1.0));
}

TEST_CASE("propose_next returns the EI argmax over candidates") {
  const auto obs = observations_1d({0.0, 0.5, 1.0}, {0.0, 1.0, 0.2});
  const GpModel model(obs, KernelParams{0.2, 1.0, 1e-6});
  Bounds bounds = Bounds::cube(1, 0.0, 1.0);

  SECTION("degenerate candidate set returns that point") {
    BoConfig cfg;
    cfg.candidates = 1;
    cfg.perturbations = 0;
    Rng rng(1);
    const auto x = propose_next(model, Bounds::cube(1, 0.7, 0.7), cfg, 1.0, vec1(0.5), rng);
    CHECK(x(0) == Catch::Approx(0.7));
  }

  SECTION("proposal quality approaches a dense random sweep") {
    BoConfig cfg;
    cfg.candidates = 2000;
    cfg.perturbations = 20;
    Rng rng(2);
    const auto x = propose_next(model, bounds, cfg, 1.0, vec1(0.5), rng);
    const auto [mean, var] = model.posterior(x);
    const double ei_chosen = expected_improvement(mean, var, 1.0, true);

    Rng probe_rng(97);
    double ei_best_probe = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const auto probe = vec1(uniform_real(probe_rng, 0.0, 1.0));
      const auto [m, v] = model.posterior(probe);
      ei_best_probe = std::max(ei_best_probe, expected_improvement(m, v, 1.0, true));
    }
    CHECK(ei_chosen >= 0.99 * ei_best_probe);
  }
}

TEST_CASE("optimize on a constant objective records every iteration") {
  BoConfig cfg;
  cfg.iterations = 15;
  cfg.initial = 5;
  cfg.candidates = 50;
  cfg.perturbations = 4;
  cfg.seed = 3;
  const auto result = optimize([](const Eigen::VectorXd&) { return 2.5; },
                               Bounds::cube(2, -1.0, 1.0), cfg);
  CHECK(result.history.size() == 15);
  CHECK(result.best.value == 2.5);
}

TEST_CASE("optimize locates a 2-d quadratic optimum") {
  Eigen::VectorXd target(2);
  target << 0.3, -0.5;
  BoConfig cfg;
  cfg.iterations = 45;
  cfg.initial = 10;
  cfg.candidates = 1500;
  cfg.perturbations = 30;
  cfg.seed = 11;
  const auto result = optimize(
      [&](const Eigen::VectorXd& w) { return -(w - target).squaredNorm(); },
      Bounds::cube(2, -1.0, 1.0), cfg);
  CHECK((result.best.input - target).norm() < 0.15);
}

TEST_CASE("best-so-far is non-decreasing under maximization") {
  BoConfig cfg;
  cfg.iterations = 25;
  cfg.initial = 6;
  cfg.candidates = 200;
  cfg.perturbations = 10;
  cfg.seed = 5;
  const auto result = optimize(
      [](const Eigen::VectorXd& w) { return std::sin(3.0 * w(0)) * std::cos(2.0 * w(1)); },
      Bounds::cube(2, -1.0, 1.0), cfg);
  double best = result.history.front().value;
  for (const auto& o : result.history) {
    best = std::max(best, o.value);
  }
  CHECK(best == result.best.value);

  // the exported table's best column is non-decreasing
  const auto tsv = history_to_tsv(result.history, true);
  std::istringstream in(tsv);
  std::string line;
  std::getline(in, line);  // header
  double prev = -1e300;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, '\t')) cells.push_back(cell);
    const double running_best = std::stod(cells[cells.size() - 2]);
    CHECK(running_best >= prev);
    prev = running_best;
  }
}

TEST_CASE("non-finite objective values are penalized and flagged") {
  BoConfig cfg;
  cfg.iterations = 12;
  cfg.initial = 4;
  cfg.candidates = 100;
  cfg.perturbations = 4;
  cfg.seed = 8;
  int calls = 0;
  const auto result = optimize(
      [&calls](const Eigen::VectorXd& w) {
        ++calls;
        if (calls == 6) return std::numeric_limits<double>::quiet_NaN();
        return -w.squaredNorm();
      },
      Bounds::cube(2, -1.0, 1.0), cfg);
  REQUIRE(result.history.size() == 12);
  CHECK(result.history[5].penalized);
  CHECK(std::isfinite(result.history[5].value));
  // the penalty sits at or below the worst honest value
  double worst = 1e300;
  for (std::size_t i = 0; i < 5; ++i) worst = std::min(worst, result.history[i].value);
  CHECK(result.history[5].value <= worst);
  CHECK_FALSE(result.best.penalized);
}

TEST_CASE("optimize is bit-reproducible for a fixed seed") {
  BoConfig cfg;
  cfg.iterations = 20;
  cfg.initial = 5;
  cfg.candidates = 300;
  cfg.perturbations = 10;
  cfg.seed = 1234;
  auto objective = [](const Eigen::VectorXd& w) { return -(w.array() - 0.2).matrix().squaredNorm(); };
  const auto a = optimize(objective, Bounds::cube(3, -1.0, 1.0), cfg);
  const auto b = optimize(objective, Bounds::cube(3, -1.0, 1.0), cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].value == b.history[i].value);
    CHECK(a.history[i].input == b.history[i].input);
  }
}

TEST_CASE("BoConfig validation") {
  BoConfig cfg;
  cfg.iterations = 5;
  cfg.initial = 10;
  CHECK_THROWS(cfg.validate());
  cfg.iterations = 20;
  cfg.candidates = 0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("log marginal likelihood prefers sane hyperparameters") {
  // data drawn from a smooth function: tiny length-scales should not win
  std::vector<double> xs, ys;
  for (int i = 0; i <= 10; ++i) {
    xs.push_back(i / 10.0);
    ys.push_back(std::sin(3.0 * xs.back()));
  }
  const auto obs = observations_1d(xs, ys);
  const double good = log_marginal_likelihood(obs, KernelParams{0.5, 1.0, 1e-4});
  const double bad = log_marginal_likelihood(obs, KernelParams{0.001, 1.0, 1e-4});
  CHECK(good > bad);

  // the incumbent is always a candidate, so fitting can only improve on it
  Rng rng(4);
  const KernelParams start{1.0, 1.0, 1e-4};
  const auto fitted = fit_kernel_params(obs, start, rng, 40);
  CHECK(log_marginal_likelihood(obs, fitted) >= log_marginal_likelihood(obs, start));
  CHECK(log_marginal_likelihood(obs, fitted) > bad);
}
