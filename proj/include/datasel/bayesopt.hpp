#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "datasel/util.hpp"

namespace datasel {

struct Observation {
  Eigen::VectorXd input;
  double value = 0.0;
  bool penalized = false;  // objective returned a non-finite value
};

using ObservationSet = std::vector<Observation>;

struct KernelParams {
  double length_scale = 1.0;
  double signal_var = 1.0;
  double noise_var = 1e-4;

  void validate() const {
    require(length_scale > 0.0 && signal_var > 0.0 && noise_var >= 0.0,
            "KernelParams: hyperparameters must be positive");
  }
};

struct Bounds {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  static Bounds cube(int dim, double lo_v, double hi_v) {
    Bounds b;
    b.lo = Eigen::VectorXd::Constant(dim, lo_v);
    b.hi = Eigen::VectorXd::Constant(dim, hi_v);
    return b;
  }

  int dim() const { return static_cast<int>(lo.size()); }

  Eigen::VectorXd clamp(Eigen::VectorXd x) const {
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = std::min(hi(i), std::max(lo(i), x(i)));
    return x;
  }
};

inline double matern52(double r, const KernelParams& k) {
  const double s = std::sqrt(5.0) * r / k.length_scale;
  return k.signal_var * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

namespace detail {

struct StandardizedData {
  Eigen::MatrixXd X;  // t x d
  Eigen::VectorXd y;  // standardized
  double y_mean = 0.0;
  double y_sd = 1.0;
};

inline StandardizedData standardize(const ObservationSet& obs) {
  require(!obs.empty(), "gp: need at least one observation");
  const auto t = static_cast<Eigen::Index>(obs.size());
  const auto d = static_cast<Eigen::Index>(obs[0].input.size());
  StandardizedData data;
  data.X.resize(t, d);
  data.y.resize(t);
  for (Eigen::Index i = 0; i < t; ++i) {
    require(obs[static_cast<std::size_t>(i)].input.size() == d, "gp: inconsistent input dimension");
    data.X.row(i) = obs[static_cast<std::size_t>(i)].input;
    data.y(i) = obs[static_cast<std::size_t>(i)].value;
  }
  data.y_mean = data.y.mean();
  const double var = (data.y.array() - data.y_mean).square().sum() / static_cast<double>(t);
  data.y_sd = std::sqrt(var);
  if (data.y_sd < 1e-12) data.y_sd = 1.0;
  data.y = (data.y.array() - data.y_mean) / data.y_sd;
  return data;
}

inline Eigen::MatrixXd gram(const Eigen::MatrixXd& X, const KernelParams& k) {
  const Eigen::Index t = X.rows();
  Eigen::MatrixXd K(t, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    K(i, i) = k.signal_var;
    for (Eigen::Index j = i + 1; j < t; ++j) {
      const double r = (X.row(i) - X.row(j)).norm();
      K(i, j) = K(j, i) = matern52(r, k);
    }
  }
  return K;
}

// Cholesky with an escalating jitter ladder up to 1e-6.
inline std::pair<Eigen::LLT<Eigen::MatrixXd>, double> chol_with_jitter(Eigen::MatrixXd K) {
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() == Eigen::Success) return {std::move(llt), 0.0};
  for (double jitter = 1e-12; jitter <= 1e-6 + 1e-18; jitter *= 10.0) {
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += jitter;
    llt.compute(Kj);
    if (llt.info() == Eigen::Success) return {std::move(llt), jitter};
  }
  fail("gp: kernel matrix is not positive definite even with jitter 1e-6");
}

}  // namespace detail

// Zero-mean GP over standardized objective values with a Matern-5/2 kernel.
class GpModel {
 public:
  GpModel(const ObservationSet& obs, KernelParams params) : params_(params) {
    params_.validate();
    data_ = detail::standardize(obs);
    Eigen::MatrixXd K = detail::gram(data_.X, params_);
    K.diagonal().array() += params_.noise_var;
    auto [llt, jitter] = detail::chol_with_jitter(std::move(K));
    llt_ = std::move(llt);
    jitter_ = jitter;
    alpha_ = llt_.solve(data_.y);
  }

  int dim() const { return static_cast<int>(data_.X.cols()); }
  std::size_t num_observations() const { return static_cast<std::size_t>(data_.X.rows()); }
  const KernelParams& params() const { return params_; }
  double jitter() const { return jitter_; }
  double y_mean() const { return data_.y_mean; }
  double y_sd() const { return data_.y_sd; }

  // Predictive mean and variance in original objective units.
  std::pair<double, double> posterior(const Eigen::VectorXd& x) const {
    Eigen::VectorXd mean, var;
    Eigen::MatrixXd X(1, x.size());
    X.row(0) = x;
    posterior_batch(X, mean, var);
    return {mean(0), var(0)};
  }

  void posterior_batch(const Eigen::MatrixXd& Xq, Eigen::VectorXd& mean,
                       Eigen::VectorXd& var) const {
    require(Xq.cols() == data_.X.cols(), "gp_posterior: query dimension mismatch");
    const Eigen::Index m = Xq.rows();
    const Eigen::Index t = data_.X.rows();
    Eigen::MatrixXd Ks(t, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < t; ++i) {
        Ks(i, j) = matern52((data_.X.row(i) - Xq.row(j)).norm(), params_);
      }
    }
    mean = (Ks.transpose() * alpha_).array() * data_.y_sd + data_.y_mean;
    Eigen::MatrixXd V = llt_.matrixL().solve(Ks);
    var.resize(m);
    const double scale = data_.y_sd * data_.y_sd;
    for (Eigen::Index j = 0; j < m; ++j) {
      var(j) = std::max(0.0, params_.signal_var - V.col(j).squaredNorm()) * scale;
    }
  }

 private:
  KernelParams params_;
  detail::StandardizedData data_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
};

inline GpModel gp_fit(const ObservationSet& obs, const KernelParams& params) {
  return GpModel(obs, params);
}

inline std::pair<double, double> gp_posterior(const GpModel& model, const Eigen::VectorXd& x) {
  return model.posterior(x);
}

// Log marginal likelihood of the standardized observations; -inf when the
// Gram matrix cannot be factorized.
inline double log_marginal_likelihood(const ObservationSet& obs, const KernelParams& params) {
  const auto data = detail::standardize(obs);
  Eigen::MatrixXd K = detail::gram(data.X, params);
  K.diagonal().array() += params.noise_var;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd alpha = llt.solve(data.y);
  double log_det = 0.0;
  const auto& L = llt.matrixLLT();
  for (Eigen::Index i = 0; i < L.rows(); ++i) log_det += std::log(L(i, i));
  const double n = static_cast<double>(data.y.size());
  return -0.5 * data.y.dot(alpha) - log_det - 0.5 * n * std::log(2.0 * M_PI);
}

// Multi-start point-estimate MLE over (length_scale, signal_var, noise_var)
// followed by stochastic local refinement around the incumbent; the incumbent
// is always a candidate. Noise is bounded below by 1e-6.
inline KernelParams fit_kernel_params(const ObservationSet& obs, const KernelParams& current,
                                      Rng& rng, int restarts = 30) {
  auto log_uniform = [&](double lo, double hi) {
    return std::exp(uniform_real(rng, std::log(lo), std::log(hi)));
  };
  KernelParams best = current;
  best.noise_var = std::max(best.noise_var, 1e-6);
  double best_lml = log_marginal_likelihood(obs, best);
  auto consider = [&](const KernelParams& cand) {
    const double lml = log_marginal_likelihood(obs, cand);
    if (lml > best_lml) {
      best_lml = lml;
      best = cand;
    }
  };
  for (int i = 0; i < restarts; ++i) {
    KernelParams cand;
    cand.length_scale = log_uniform(0.05, 10.0);
    cand.signal_var = log_uniform(0.05, 5.0);
    cand.noise_var = log_uniform(1e-6, 0.5);
    consider(cand);
  }
  for (int i = 0; i < restarts; ++i) {
    KernelParams cand = best;
    cand.length_scale = std::clamp(cand.length_scale * std::exp(gaussian(rng, 0.0, 0.3)), 1e-3, 1e3);
    cand.signal_var = std::clamp(cand.signal_var * std::exp(gaussian(rng, 0.0, 0.3)), 1e-3, 1e3);
    cand.noise_var = std::clamp(cand.noise_var * std::exp(gaussian(rng, 0.0, 0.5)), 1e-6, 1.0);
    consider(cand);
  }
  return best;
}

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Closed-form EI. At zero variance it degenerates to max(improvement, 0).
inline double expected_improvement(double mean, double variance, double best_observed,
                                   bool maximize = true) {
  const double delta = maximize ? mean - best_observed : best_observed - mean;
  if (variance <= 0.0) return std::max(delta, 0.0);
  const double sigma = std::sqrt(variance);
  const double z = delta / sigma;
  return sigma * (z * normal_cdf(z) + normal_pdf(z));
}

struct BoConfig {
  int iterations = 300;
  int initial = 10;
  int candidates = 5000;
  int perturbations = 50;
  bool maximize = true;
  std::uint64_t seed = 1;
  int refit_every = 10;
  int hyper_restarts = 30;

  void validate() const {
    require(iterations > initial, "BoConfig: iterations must exceed initial designs");
    require(initial >= 1, "BoConfig: need at least one initial design");
    require(candidates >= 1, "BoConfig: need at least one candidate");
    require(perturbations >= 0, "BoConfig: perturbations must be >= 0");
  }
};

// Random candidate search over the box plus Gaussian perturbations of the
// incumbent; returns the candidate with maximal EI, ties going to the lowest
// candidate index.
inline Eigen::VectorXd propose_next(const GpModel& model, const Bounds& bounds,
                                    const BoConfig& cfg, double best_value,
                                    const Eigen::VectorXd& best_input, Rng& rng) {
  const int d = bounds.dim();
  const Eigen::Index m = cfg.candidates + cfg.perturbations;
  Eigen::MatrixXd cand(m, d);
  for (int c = 0; c < cfg.candidates; ++c) {
    for (int j = 0; j < d; ++j) cand(c, j) = uniform_real(rng, bounds.lo(j), bounds.hi(j));
  }
  for (int p = 0; p < cfg.perturbations; ++p) {
    // alternate wide and narrow local moves around the incumbent
    const double rel = (p % 2 == 0) ? 0.05 : 0.005;
    Eigen::VectorXd x = best_input;
    for (int j = 0; j < d; ++j) {
      x(j) += gaussian(rng, 0.0, rel * (bounds.hi(j) - bounds.lo(j)));
    }
    cand.row(cfg.candidates + p) = bounds.clamp(std::move(x));
  }
  Eigen::VectorXd mean, var;
  model.posterior_batch(cand, mean, var);
  Eigen::Index arg = 0;
  double best_ei = -1.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double ei = expected_improvement(mean(i), var(i), best_value, cfg.maximize);
    if (ei > best_ei) {
      best_ei = ei;
      arg = i;
    }
  }
  return cand.row(arg);
}

struct BoResult {
  Observation best;
  ObservationSet history;
};

using BlackBoxObjective = std::function<double(const Eigen::VectorXd&)>;

// Initial uniform designs, then fit -> propose -> evaluate -> append until
// `iterations` total evaluations. Kernel hyperparameters are refit every
// refit_every iterations. Non-finite objective values are recorded with a
// penalty of (worst observed so far) minus/plus one standard deviation and
// flagged in the history.
inline BoResult optimize(const BlackBoxObjective& objective, const Bounds& bounds,
                         const BoConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  ObservationSet history;
  history.reserve(static_cast<std::size_t>(cfg.iterations));

  auto better = [&](double a, double b) { return cfg.maximize ? a > b : a < b; };

  auto record = [&](const Eigen::VectorXd& x) {
    double y = objective(x);
    bool penalized = false;
    if (!std::isfinite(y)) {
      penalized = true;
      if (history.empty()) {
        y = 0.0;
      } else {
        std::vector<double> values;
        values.reserve(history.size());
        for (const auto& o : history) values.push_back(o.value);
        const double worst = cfg.maximize ? *std::min_element(values.begin(), values.end())
                                          : *std::max_element(values.begin(), values.end());
        const double sd = population_stddev(values);
        y = cfg.maximize ? worst - sd : worst + sd;
      }
    }
    history.push_back(Observation{x, y, penalized});
  };

  const int d = bounds.dim();
  for (int i = 0; i < cfg.initial; ++i) {
    Eigen::VectorXd x(d);
    for (int j = 0; j < d; ++j) x(j) = uniform_real(rng, bounds.lo(j), bounds.hi(j));
    record(x);
  }

  KernelParams params;
  params.length_scale = 0.5 * std::sqrt(static_cast<double>(d));
  params.signal_var = 1.0;
  params.noise_var = 1e-4;

  for (int t = cfg.initial; t < cfg.iterations; ++t) {
    if ((t - cfg.initial) % cfg.refit_every == 0) {
      params = fit_kernel_params(history, params, rng, cfg.hyper_restarts);
    }
    const GpModel model(history, params);
    std::size_t best_idx = 0;
    for (std::size_t i = 1; i < history.size(); ++i) {
      if (better(history[i].value, history[best_idx].value)) best_idx = i;
    }
    const Eigen::VectorXd x = propose_next(model, bounds, cfg, history[best_idx].value,
                                           history[best_idx].input, rng);
    record(x);
  }

  std::size_t best_idx = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (better(history[i].value, history[best_idx].value)) best_idx = i;
  }
  return BoResult{history[best_idx], std::move(history)};
}

// Row-per-iteration table: iteration, input coordinates, objective value,
// best-so-far, penalty flag.
inline std::string history_to_tsv(const ObservationSet& history, bool maximize = true) {
  std::ostringstream os;
  os.precision(17);
  const int d = history.empty() ? 0 : static_cast<int>(history[0].input.size());
  os << "iteration";
  for (int j = 0; j < d; ++j) os << "\tw" << j;
  os << "\ty\tbest\tpenalized\n";
  double best = 0.0;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& o = history[i];
    if (i == 0 || (maximize ? o.value > best : o.value < best)) best = o.value;
    os << i;
    for (int j = 0; j < d; ++j) os << '\t' << o.input(j);
    os << '\t' << o.value << '\t' << best << '\t' << (o.penalized ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace datasel
