#pragma once
// Gap-posterior fitting from MC reward samples and the full uncertainty
// profile: mean preference probability, Shannon entropy of the mean, the
// epistemic/aleatoric split, balanced entropy and its exponentiated form
// u in [0, e]. mc_profile is the brute-force sampling oracle for the
// quadrature path and also reports delta-method standard errors.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "balent/errors.hpp"
#include "balent/logit_normal.hpp"
#include "balent/math.hpp"
#include "balent/model.hpp"
#include "balent/rng.hpp"

namespace balent {

struct UncertaintyRecord {
  double mean_prob = 0.0;  // E[P], in (0,1)
  double shannon = 0.0;    // H(E[P]) in nats, (0, log 2]
  double epistemic = 0.0;  // shannon - aleatoric, floored at 0
  double aleatoric = 0.0;  // E[H(P)] in nats, [0, log 2]
  double balent = 0.0;     // normalized balanced-entropy ratio, <= 1
  double u = 0.0;          // exp(balent), clamped to [0, e]
  // byproducts of the balent numerator; not part of the annotated schema
  double post_entropy_chosen = 0.0;
  double post_entropy_rejected = 0.0;
};

enum class GapEstimator {
  independent,  // variances of the two MC sample sets add
  paired,       // per-index differences (draws share dropout masks)
};

namespace detail {

inline GapPosterior clamp_sigma(double mu, double sigma, double sigma_min) {
  if (!std::isfinite(mu) || !std::isfinite(sigma))
    throw Error(errc::invalid_sample, "non-finite gap estimate");
  if (sigma < sigma_min) return {mu, sigma_min, true};
  return {mu, sigma, false};
}

inline void check_samples_finite(std::span<const double> v, const std::string& id) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw Error(errc::invalid_sample,
                  "record \"" + id + "\": non-finite sample at index " + std::to_string(i));
}

}  // namespace detail

// mu = mean(chosen) - mean(rejected); sigma^2 adds the two unbiased sample
// variances (independent mode) or is the variance of per-index differences
// (paired mode). A present gap_override wins, modulo the sigma floor.
inline GapPosterior fit_gap_posterior(const PreferencePair& pair,
                                      const QuadratureConfig& cfg = {},
                                      GapEstimator estimator = GapEstimator::independent) {
  cfg.validate();
  if (pair.gap_override)
    return detail::clamp_sigma(pair.gap_override->mu, pair.gap_override->sigma, cfg.sigma_min);
  const auto& c = pair.reward_samples_chosen;
  const auto& r = pair.reward_samples_rejected;
  if (c.size() < 2 || r.size() < 2)
    throw Error(errc::insufficient_samples,
                "record \"" + pair.id + "\": need >= 2 reward samples on each side");
  detail::check_samples_finite(c, pair.id);
  detail::check_samples_finite(r, pair.id);
  if (estimator == GapEstimator::paired) {
    if (c.size() != r.size())
      throw Error(errc::shape_error,
                  "record \"" + pair.id + "\": paired estimator needs equal-length sample lists");
    std::vector<double> diff(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) diff[i] = c[i] - r[i];
    return detail::clamp_sigma(sample_mean(diff), std::sqrt(sample_var(diff)), cfg.sigma_min);
  }
  const double mu = sample_mean(c) - sample_mean(r);
  const double var = sample_var(c) + sample_var(r);
  return detail::clamp_sigma(mu, std::sqrt(var), cfg.sigma_min);
}

// Baseline standing in for the rejected reward of a single-response record.
struct SftBaseline {
  // empty: R_rejected degenerate at 0 (zero_constant); otherwise the given
  // draws are treated as the rejected sample set
  std::optional<std::vector<double>> samples;

  static SftBaseline zero_constant() { return {}; }
  static SftBaseline supplied(std::vector<double> s) { return {std::move(s)}; }
};

inline GapPosterior sft_gap_posterior(const PreferencePair& pair,
                                      const SftBaseline& baseline = {},
                                      const QuadratureConfig& cfg = {}) {
  cfg.validate();
  const auto& c = pair.reward_samples_chosen;
  if (c.size() < 2)
    throw Error(errc::insufficient_samples,
                "record \"" + pair.id + "\": need >= 2 chosen reward samples");
  detail::check_samples_finite(c, pair.id);
  if (baseline.samples) {
    const auto& b = *baseline.samples;
    if (b.size() < 2)
      throw Error(errc::insufficient_samples,
                  "record \"" + pair.id + "\": need >= 2 baseline samples");
    detail::check_samples_finite(b, pair.id);
    return detail::clamp_sigma(sample_mean(c) - sample_mean(b),
                               std::sqrt(sample_var(c) + sample_var(b)), cfg.sigma_min);
  }
  return detail::clamp_sigma(sample_mean(c), std::sqrt(sample_var(c)), cfg.sigma_min);
}

inline UncertaintyRecord uncertainty_profile(const GapPosterior& g,
                                             const QuadratureConfig& cfg = {}) {
  detail::check_posterior(g);
  cfg.validate();
  if (g.sigma < cfg.sigma_min)
    throw Error(errc::invalid_argument, "posterior sigma below the sigma_min floor");

  const auto zm = detail::z_moments(g, cfg);
  UncertaintyRecord rec;
  rec.mean_prob = detail::clamp_prob(zm.mean);
  rec.aleatoric = std::clamp(zm.entropy, 0.0, kLn2);
  rec.shannon = binary_entropy(rec.mean_prob);
  rec.epistemic = std::max(0.0, rec.shannon - rec.aleatoric);
  rec.post_entropy_chosen = posterior_entropy(Orientation::chosen_wins, g, cfg);
  rec.post_entropy_rejected = posterior_entropy(Orientation::rejected_wins, g, cfg);
  rec.balent = (rec.mean_prob * rec.post_entropy_chosen +
                (1.0 - rec.mean_prob) * rec.post_entropy_rejected + rec.shannon) /
               (rec.shannon + kLn2);
  rec.u = std::clamp(std::exp(rec.balent), 0.0, kEuler);
  return rec;
}

struct McProfile {
  UncertaintyRecord record;
  // Monte-Carlo standard errors (delta method for the derived fields)
  double se_mean_prob = 0.0;
  double se_aleatoric = 0.0;
  double se_post_chosen = 0.0;
  double se_post_rejected = 0.0;
  double se_balent = 0.0;
  double se_u = 0.0;
};

// Sampling estimator of the same quantities: draws Z ~ N(mu, sigma^2),
// P = sigmoid(Z), and uses the identity
//   h(P+) = -E[P log P + P log f(P)] / E[P] + log E[P]
// with the density evaluated analytically at each draw. Deterministic given
// the seed.
inline McProfile mc_profile(const GapPosterior& g, std::size_t n_draws, std::uint64_t seed) {
  detail::check_posterior(g);
  if (n_draws < 10000)
    throw Error(errc::invalid_argument, "mc_profile: n_draws must be >= 10000");

  Rng rng(seed);
  const double log_norm_const = std::log(kSqrt2Pi * g.sigma);
  double sp = 0, sq = 0, sh = 0, sx = 0, sy = 0;
  double spp = 0, sqq = 0, shh = 0, sxx = 0, syy = 0;
  double spx = 0, spy = 0, sqy = 0, sxy = 0;
  for (std::size_t k = 0; k < n_draws; ++k) {
    const double z = g.mu + g.sigma * rng.next_normal();
    const double p = sigmoid(z);
    const double q = sigmoid(-z);
    const double lp = log_sigmoid(z);
    const double lq = log_sigmoid(-z);
    const double t = (z - g.mu) / g.sigma;
    const double lf = -log_norm_const - lp - lq - 0.5 * t * t;  // log f(p)
    const double hent = -(p * lp + q * lq);
    const double x = p * (lp + lf);  // P log P + P log f(P)
    const double y = q * (lq + lf);  // same with the reflected density
    sp += p; sq += q; sh += hent; sx += x; sy += y;
    spp += p * p; sqq += q * q; shh += hent * hent; sxx += x * x; syy += y * y;
    spx += p * x; spy += p * y; sqy += q * y; sxy += x * y;
  }

  const double n = static_cast<double>(n_draws);
  const double A = sp / n;    // E[P]
  const double Aq = sq / n;   // E[1-P]
  const double B = sh / n;    // aleatoric
  const double C = sx / n;
  const double D = sy / n;
  const auto cov = [n](double sab, double sa, double sb) {
    return (sab - sa * sb / n) / (n - 1.0);
  };
  const double var_p = cov(spp, sp, sp);
  const double var_q = cov(sqq, sq, sq);
  const double var_h = cov(shh, sh, sh);
  const double var_x = cov(sxx, sx, sx);
  const double var_y = cov(syy, sy, sy);
  const double cov_px = cov(spx, sp, sx);
  const double cov_py = cov(spy, sp, sy);
  const double cov_qy = cov(sqy, sq, sy);
  const double cov_xy = cov(sxy, sx, sy);

  McProfile out;
  auto& rec = out.record;
  rec.mean_prob = detail::clamp_prob(A);
  rec.aleatoric = B;
  rec.shannon = binary_entropy(rec.mean_prob);
  rec.epistemic = std::max(0.0, rec.shannon - rec.aleatoric);
  rec.post_entropy_chosen = -C / A + std::log(A);
  rec.post_entropy_rejected = -D / Aq + std::log(Aq);
  const double denom = rec.shannon + kLn2;
  rec.balent = (rec.mean_prob * rec.post_entropy_chosen +
                (1.0 - rec.mean_prob) * rec.post_entropy_rejected + rec.shannon) /
               denom;
  rec.u = std::clamp(std::exp(rec.balent), 0.0, kEuler);

  out.se_mean_prob = std::sqrt(var_p / n);
  out.se_aleatoric = std::sqrt(var_h / n);
  const auto quad2 = [](double ga, double gb, double vaa, double vbb, double vab) {
    return ga * ga * vaa + 2.0 * ga * gb * vab + gb * gb * vbb;
  };
  const double gA_hc = C / (A * A) + 1.0 / A;
  out.se_post_chosen = std::sqrt(std::max(0.0, quad2(gA_hc, -1.0 / A, var_p, var_x, cov_px)) / n);
  const double gA_hr = D / (Aq * Aq) + 1.0 / Aq;
  out.se_post_rejected = std::sqrt(std::max(0.0, quad2(gA_hr, -1.0 / Aq, var_q, var_y, cov_qy)) / n);
  // numerator of balent collapses to -(C + D); only (A, C, D) carry noise
  const double N = -(C + D);
  const double dA = N * (std::log(A) - std::log1p(-A)) / (denom * denom);
  const double dC = -1.0 / denom;
  double var_bal = dA * dA * var_p + dC * dC * (var_x + var_y) +
                   2.0 * (dA * dC * (cov_px + cov_py) + dC * dC * cov_xy);
  var_bal = std::max(var_bal, 0.0);
  out.se_balent = std::sqrt(var_bal / n);
  out.se_u = rec.u * out.se_balent;
  return out;
}

struct AnnotatedRecord {
  PreferencePair pair;
  GapPosterior posterior;
  UncertaintyRecord uncertainty;
};

// Posterior dispatch: override wins, then paired samples, then the class
// baseline route for single-response records.
inline AnnotatedRecord annotate(const PreferencePair& pair, const QuadratureConfig& cfg = {},
                                GapEstimator estimator = GapEstimator::independent) {
  AnnotatedRecord rec{pair, {}, {}};
  if (pair.gap_override || !pair.reward_samples_rejected.empty()) {
    rec.posterior = fit_gap_posterior(pair, cfg, estimator);
  } else if (pair.source_class != SourceClass::unlabeled) {
    rec.posterior = sft_gap_posterior(pair, SftBaseline::zero_constant(), cfg);
  } else {
    throw Error(errc::unresolvable, "record \"" + pair.id + "\": no gap source");
  }
  rec.uncertainty = uncertainty_profile(rec.posterior, cfg);
  return rec;
}

inline std::vector<AnnotatedRecord> annotate_all(std::span<const PreferencePair> pairs,
                                                 const QuadratureConfig& cfg = {},
                                                 GapEstimator estimator = GapEstimator::independent) {
  std::vector<AnnotatedRecord> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(annotate(p, cfg, estimator));
  return out;
}

inline void write_annotated(std::span<const AnnotatedRecord> records, std::ostream& out) {
  for (const auto& r : records) {
    json j = pair_to_json(r.pair);
    j["mu"] = r.posterior.mu;
    j["sigma"] = r.posterior.sigma;
    j["clamped"] = r.posterior.clamped;
    j["mean_prob"] = r.uncertainty.mean_prob;
    j["shannon"] = r.uncertainty.shannon;
    j["epistemic"] = r.uncertainty.epistemic;
    j["aleatoric"] = r.uncertainty.aleatoric;
    j["balent"] = r.uncertainty.balent;
    j["u"] = r.uncertainty.u;
    out << j.dump() << '\n';
  }
  out.flush();
  if (!out) throw Error(errc::io_error, "write failure");
}

// Reads records previously written by write_annotated. The posterior
// entropies are not part of the schema and come back as NaN.
inline std::vector<AnnotatedRecord> read_annotated(std::istream& in) {
  std::vector<PreferencePair> pairs = parse_dataset(in);
  std::vector<AnnotatedRecord> out;
  out.reserve(pairs.size());
  for (auto& p : pairs) {
    AnnotatedRecord rec;
    const auto take = [&](const char* key) {
      const auto it = p.extra.find(key);
      if (it == p.extra.end() || !it->is_number())
        throw Error(errc::invalid_input,
                    "record \"" + p.id + "\" is not annotated (missing \"" + std::string(key) + "\")");
      const double v = it->get<double>();
      p.extra.erase(it);
      return v;
    };
    rec.posterior.mu = take("mu");
    rec.posterior.sigma = take("sigma");
    if (const auto it = p.extra.find("clamped"); it != p.extra.end()) {
      rec.posterior.clamped = it->is_boolean() && it->get<bool>();
      p.extra.erase(it);
    }
    rec.uncertainty.mean_prob = take("mean_prob");
    rec.uncertainty.shannon = take("shannon");
    rec.uncertainty.epistemic = take("epistemic");
    rec.uncertainty.aleatoric = take("aleatoric");
    rec.uncertainty.balent = take("balent");
    rec.uncertainty.u = take("u");
    rec.uncertainty.post_entropy_chosen = std::numeric_limits<double>::quiet_NaN();
    rec.uncertainty.post_entropy_rejected = std::numeric_limits<double>::quiet_NaN();
    rec.pair = std::move(p);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace balent
