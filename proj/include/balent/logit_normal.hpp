#pragma once
// Logit-normal law of P = sigmoid(G) for a Gaussian reward gap
// G ~ N(mu, sigma^2): density, CDF, moment expectations, and the
// differential entropy of the posterior-tilted density
// f+(p) = p f(p) / E[P].
//
// Two quadrature routes are used deliberately:
//  - moment expectations integrate in the Gaussian domain (trapezoid on
//    z in [mu - L*sigma, mu + L*sigma]), which stays well conditioned for
//    extreme sigma where the p-domain density turns spiky or bimodal;
//  - posterior entropies integrate on a uniform p grid over [0,1] with the
//    endpoint integrand values fixed to 0, their continuous-extension limit.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "balent/errors.hpp"
#include "balent/math.hpp"

namespace balent {

// Gaussian law of the reward gap R_chosen - R_rejected.
struct GapPosterior {
  double mu = 0.0;       // reward units
  double sigma = 1.0;    // reward units, > 0
  bool clamped = false;  // true when sigma was raised to the floor
};

struct QuadratureConfig {
  int n_steps = 10000;       // trapezoid intervals
  double z_halfwidth = 8.0;  // Gaussian-domain half-width, in sigma units
  double sigma_min = 1e-6;   // posterior sigma floor

  void validate() const {
    if (n_steps < 100)
      throw Error(errc::invalid_argument, "quadrature n_steps must be >= 100");
    if (!(z_halfwidth >= 4.0))
      throw Error(errc::invalid_argument, "quadrature z_halfwidth must be >= 4");
    if (!(sigma_min > 0.0) || !std::isfinite(sigma_min))
      throw Error(errc::invalid_argument, "sigma_min must be a positive real");
  }
};

namespace detail {

inline void check_posterior(const GapPosterior& g) {
  if (!std::isfinite(g.mu) || !(g.sigma > 0.0) || !std::isfinite(g.sigma))
    throw Error(errc::invalid_argument, "gap posterior requires finite mu and sigma > 0");
}

// Fixed interior-grid values for the p-domain trapezoid, cached per n_steps.
struct PGrid {
  std::vector<double> logit;  // logit(i/n), i = 1..n-1
  std::vector<double> log_q;  // log(1 - i/n)
};

inline const PGrid& p_grid(int n_steps) {
  static std::mutex guard;
  static std::map<int, std::unique_ptr<PGrid>> cache;
  std::scoped_lock lock(guard);
  auto& slot = cache[n_steps];
  if (!slot) {
    auto g = std::make_unique<PGrid>();
    g->logit.resize(static_cast<std::size_t>(n_steps) - 1);
    g->log_q.resize(static_cast<std::size_t>(n_steps) - 1);
    for (int i = 1; i < n_steps; ++i) {
      const double p = static_cast<double>(i) / n_steps;
      const double lp = std::log(p);
      const double lq = std::log1p(-p);
      g->logit[i - 1] = lp - lq;
      g->log_q[i - 1] = lq;
    }
    slot = std::move(g);
  }
  return *slot;
}

struct ZMoments {
  double mean;     // E[P]
  double entropy;  // E[-(P log P + (1-P) log(1-P))]
};

// Single pass over the Gaussian-domain grid, accumulating both moments with
// trapezoid weights. Both callers must see identical mean values, so the
// accumulation lives in exactly one place.
inline ZMoments z_moments(const GapPosterior& g, const QuadratureConfig& cfg) {
  const int n = cfg.n_steps;
  const double lo = g.mu - cfg.z_halfwidth * g.sigma;
  const double h = 2.0 * cfg.z_halfwidth * g.sigma / n;
  double sum_mean = 0.0;
  double sum_ent = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double z = lo + i * h;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    const double dens = w * norm_pdf(z, g.mu, g.sigma);
    sum_mean += dens * sigmoid(z);
    sum_ent += dens * binary_entropy_logit(z);
  }
  return {sum_mean * h, sum_ent * h};
}

inline double clamp_prob(double p) { return std::clamp(p, 1e-15, 1.0 - 1e-15); }

}  // namespace detail

// f(p) = exp(-(logit(p)-mu)^2 / (2 sigma^2)) / (sqrt(2 pi) sigma p (1-p));
// 0 at p in {0,1} by continuous extension.
inline double density(double p, const GapPosterior& g) {
  detail::check_posterior(g);
  if (!(p >= 0.0 && p <= 1.0))
    throw Error(errc::domain_error, "density: p outside [0,1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  const double q = 1.0 - p;
  const double t = ((std::log(p) - std::log(q)) - g.mu) / g.sigma;
  return std::exp(-0.5 * t * t) / (kSqrt2Pi * g.sigma * (p * q));
}

// P[P <= p] = Phi((logit(p) - mu) / sigma)
inline double cdf(double p, const GapPosterior& g) {
  detail::check_posterior(g);
  if (!(p >= 0.0 && p <= 1.0))
    throw Error(errc::domain_error, "cdf: p outside [0,1]");
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  return norm_cdf(((std::log(p) - std::log1p(-p)) - g.mu) / g.sigma);
}

enum class Integrand {
  identity,            // E[P]
  neg_binary_entropy,  // E[-(P log P + (1-P) log(1-P))], the aleatoric term
};

inline double expect(Integrand which, const GapPosterior& g,
                     const QuadratureConfig& cfg = {}) {
  detail::check_posterior(g);
  cfg.validate();
  const auto m = detail::z_moments(g, cfg);
  if (which == Integrand::identity) return detail::clamp_prob(m.mean);
  return std::clamp(m.entropy, 0.0, kLn2);
}

enum class Orientation { chosen_wins, rejected_wins };

// Differential entropy h(P+) = -int f+(p) log f+(p) dp in nats, where
// f+(p) = p f(p) / E[P]. rejected_wins evaluates the same expression with mu
// negated, since 1-P is logit-normal with negated location. The true value
// is bounded above by the uniform law's 0; quadrature overshoot is clamped.
inline double posterior_entropy(Orientation o, const GapPosterior& g,
                                const QuadratureConfig& cfg = {}) {
  detail::check_posterior(g);
  cfg.validate();
  GapPosterior gg = g;
  if (o == Orientation::rejected_wins) gg.mu = -gg.mu;
  const double mean_p = detail::clamp_prob(detail::z_moments(gg, cfg).mean);
  const double log_norm = std::log(kSqrt2Pi * gg.sigma) + std::log(mean_p);
  const double inv_two_var = 0.5 / (gg.sigma * gg.sigma);
  const auto& grid = detail::p_grid(cfg.n_steps);
  double sum = 0.0;  // endpoints contribute 0
  for (std::size_t i = 0; i < grid.logit.size(); ++i) {
    const double d = grid.logit[i] - gg.mu;
    const double log_fp = -grid.log_q[i] - d * d * inv_two_var - log_norm;
    sum -= std::exp(log_fp) * log_fp;  // exp underflow makes the term 0
  }
  return std::min(sum / cfg.n_steps, 0.0);
}

}  // namespace balent
