#pragma once
// Reference implementations of the four training losses with analytic
// gradients, plus a small tabular softmax policy and a deterministic trainer
// that exercises them end to end. The loss functions consume caller-supplied
// log-probabilities, so any policy implementation can provide them; the toy
// policy below is one provider.

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "balent/curation.hpp"
#include "balent/errors.hpp"
#include "balent/math.hpp"

namespace balent {

struct UdpoConfig {
  double beta = 0.1;  // implicit-reward temperature

  void validate() const {
    if (!(beta >= 0.0) || !std::isfinite(beta))
      throw Error(errc::invalid_argument, "beta must be a non-negative real");
  }
};

struct DpoTerms {
  double logp_theta_chosen = 0.0;
  double logp_theta_rejected = 0.0;
  double logp_ref_chosen = 0.0;
  double logp_ref_rejected = 0.0;
};

namespace detail {

inline void check_finite_logp(double v) {
  if (!std::isfinite(v)) throw Error(errc::invalid_input, "non-finite log-probability");
}

}  // namespace detail

// -log sigmoid(beta * [(logp_t_c - logp_r_c) - (logp_t_r - logp_r_r)])
inline double dpo_pair_loss(const DpoTerms& t, double beta) {
  detail::check_finite_logp(t.logp_theta_chosen);
  detail::check_finite_logp(t.logp_theta_rejected);
  detail::check_finite_logp(t.logp_ref_chosen);
  detail::check_finite_logp(t.logp_ref_rejected);
  const double gap = (t.logp_theta_chosen - t.logp_ref_chosen) -
                     (t.logp_theta_rejected - t.logp_ref_rejected);
  return softplus(-(beta * gap));
}

inline double dpo_loss(std::span<const DpoTerms> batch, const UdpoConfig& cfg = {}) {
  cfg.validate();
  if (batch.empty()) throw Error(errc::empty_dataset, "dpo_loss: empty batch");
  double s = 0.0;
  for (const auto& t : batch) s += dpo_pair_loss(t, cfg.beta);
  return s / static_cast<double>(batch.size());
}

// per-pair DPO loss scaled by c_u; reduces to dpo_loss bit-exactly when
// every weight is 1
inline double udpo_loss(std::span<const DpoTerms> batch, std::span<const double> c_u,
                        const UdpoConfig& cfg = {}) {
  cfg.validate();
  if (batch.empty()) throw Error(errc::empty_dataset, "udpo_loss: empty batch");
  if (batch.size() != c_u.size())
    throw Error(errc::shape_error, "udpo_loss: batch and weight sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!(c_u[i] >= 0.0) || !std::isfinite(c_u[i]))
      throw Error(errc::invalid_weight, "udpo_loss: c_u must be a non-negative real");
    s += c_u[i] * dpo_pair_loss(batch[i], cfg.beta);
  }
  return s / static_cast<double>(batch.size());
}

struct CrlftTerm {
  double logp = 0.0;
  double class_reward = 0.0;
};

inline double crlft_loss(std::span<const CrlftTerm> batch) {
  if (batch.empty()) throw Error(errc::empty_dataset, "crlft_loss: empty batch");
  double s = 0.0;
  for (const auto& t : batch) {
    detail::check_finite_logp(t.logp);
    if (!std::isfinite(t.class_reward))
      throw Error(errc::invalid_input, "crlft_loss: non-finite class reward");
    s += -(t.class_reward * t.logp);
  }
  return s / static_cast<double>(batch.size());
}

struct UcpoTerm {
  double logp = 0.0;
  double class_reward = 0.0;
  double u_tilde = 0.0;  // in [0,1]
};

// -(class_reward + gamma * (1 - u_tilde)) * logp; equals crlft_loss bit-exactly
// at gamma = 0
inline double ucpo_loss(std::span<const UcpoTerm> batch, const UcpoConfig& cfg = {}) {
  if (batch.empty()) throw Error(errc::empty_dataset, "ucpo_loss: empty batch");
  double s = 0.0;
  for (const auto& t : batch) {
    detail::check_finite_logp(t.logp);
    if (!(t.u_tilde >= 0.0 && t.u_tilde <= 1.0))
      throw Error(errc::invalid_weight, "ucpo_loss: u_tilde outside [0,1]");
    const double w = t.class_reward + cfg.gamma * (1.0 - t.u_tilde);
    s += -(w * t.logp);
  }
  return s / static_cast<double>(batch.size());
}

// Tabular softmax policy over a discrete (prompt, class, response) space.
// ref holds the frozen reference logits; class index 0 is used when the
// policy is not class-conditioned.
struct ToyPolicy {
  int n_prompts = 0;
  int n_classes = 1;
  int n_responses = 0;
  std::vector<double> theta;
  std::vector<double> ref;

  static ToyPolicy uniform(int prompts, int classes, int responses) {
    if (prompts < 1 || classes < 1 || responses < 2)
      throw Error(errc::invalid_argument, "policy needs >= 1 prompt, >= 1 class, >= 2 responses");
    ToyPolicy p;
    p.n_prompts = prompts;
    p.n_classes = classes;
    p.n_responses = responses;
    p.theta.assign(static_cast<std::size_t>(prompts) * classes * responses, 0.0);
    p.ref = p.theta;
    return p;
  }

  std::size_t index(int prompt, int cls, int response) const {
    if (prompt < 0 || prompt >= n_prompts || cls < 0 || cls >= n_classes || response < 0 ||
        response >= n_responses)
      throw Error(errc::missing_entry, "policy has no entry for (prompt " + std::to_string(prompt) +
                                           ", class " + std::to_string(cls) + ", response " +
                                           std::to_string(response) + ")");
    return (static_cast<std::size_t>(prompt) * n_classes + cls) * n_responses + response;
  }

  double row_logsumexp(const std::vector<double>& table, int prompt, int cls) const {
    const std::size_t base = index(prompt, cls, 0);
    double hi = table[base];
    for (int r = 1; r < n_responses; ++r) hi = std::max(hi, table[base + r]);
    double s = 0.0;
    for (int r = 0; r < n_responses; ++r) s += std::exp(table[base + r] - hi);
    return hi + std::log(s);
  }

  double log_prob(int prompt, int cls, int response) const {
    return theta[index(prompt, cls, response)] - row_logsumexp(theta, prompt, cls);
  }

  double log_prob_ref(int prompt, int cls, int response) const {
    return ref[index(prompt, cls, response)] - row_logsumexp(ref, prompt, cls);
  }

  // softmax of a theta row; sums to 1 by construction
  std::vector<double> probs(int prompt, int cls) const {
    const double lse = row_logsumexp(theta, prompt, cls);
    const std::size_t base = index(prompt, cls, 0);
    std::vector<double> out(n_responses);
    for (int r = 0; r < n_responses; ++r) out[r] = std::exp(theta[base + r] - lse);
    return out;
  }
};

struct PairExample {
  int prompt = 0;
  int chosen = 0;
  int rejected = 0;
  double weight = 1.0;  // c_u; 1 for plain DPO
};

struct SftExample {
  int prompt = 0;
  int cls = 0;  // class-conditioned table row
  int response = 0;
  double class_reward = 1.0;
  double u_tilde = 0.0;
};

inline double pair_batch_loss(const ToyPolicy& pol, std::span<const PairExample> batch,
                              const UdpoConfig& cfg = {}) {
  cfg.validate();
  if (batch.empty()) throw Error(errc::empty_dataset, "pair_batch_loss: empty batch");
  double s = 0.0;
  for (const auto& e : batch) {
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight))
      throw Error(errc::invalid_weight, "pair weight must be a non-negative real");
    const DpoTerms t{pol.log_prob(e.prompt, 0, e.chosen), pol.log_prob(e.prompt, 0, e.rejected),
                     pol.log_prob_ref(e.prompt, 0, e.chosen),
                     pol.log_prob_ref(e.prompt, 0, e.rejected)};
    s += e.weight * dpo_pair_loss(t, cfg.beta);
  }
  return s / static_cast<double>(batch.size());
}

// The softmax terms cancel between the chosen and rejected response of the
// same row, so the gradient touches exactly two entries per pair.
inline void pair_batch_grad(const ToyPolicy& pol, std::span<const PairExample> batch,
                            const UdpoConfig& cfg, std::span<double> grad) {
  if (grad.size() != pol.theta.size())
    throw Error(errc::shape_error, "gradient buffer size mismatch");
  std::fill(grad.begin(), grad.end(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& e : batch) {
    const double gap = (pol.log_prob(e.prompt, 0, e.chosen) - pol.log_prob_ref(e.prompt, 0, e.chosen)) -
                       (pol.log_prob(e.prompt, 0, e.rejected) - pol.log_prob_ref(e.prompt, 0, e.rejected));
    const double d = e.weight * cfg.beta * (sigmoid(cfg.beta * gap) - 1.0) * inv_n;
    grad[pol.index(e.prompt, 0, e.chosen)] += d;
    grad[pol.index(e.prompt, 0, e.rejected)] -= d;
  }
}

inline double sft_batch_loss(const ToyPolicy& pol, std::span<const SftExample> batch,
                             const UcpoConfig& cfg = {}) {
  if (batch.empty()) throw Error(errc::empty_dataset, "sft_batch_loss: empty batch");
  double s = 0.0;
  for (const auto& e : batch) {
    if (!(e.u_tilde >= 0.0 && e.u_tilde <= 1.0))
      throw Error(errc::invalid_weight, "u_tilde outside [0,1]");
    const double w = e.class_reward + cfg.gamma * (1.0 - e.u_tilde);
    s += -(w * pol.log_prob(e.prompt, e.cls, e.response));
  }
  return s / static_cast<double>(batch.size());
}

inline void sft_batch_grad(const ToyPolicy& pol, std::span<const SftExample> batch,
                           const UcpoConfig& cfg, std::span<double> grad) {
  if (grad.size() != pol.theta.size())
    throw Error(errc::shape_error, "gradient buffer size mismatch");
  std::fill(grad.begin(), grad.end(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& e : batch) {
    const double w = e.class_reward + cfg.gamma * (1.0 - e.u_tilde);
    const auto pi = pol.probs(e.prompt, e.cls);
    const std::size_t base = pol.index(e.prompt, e.cls, 0);
    for (int r = 0; r < pol.n_responses; ++r) {
      const double indicator = r == e.response ? 1.0 : 0.0;
      grad[base + r] += w * (pi[r] - indicator) * inv_n;
    }
  }
}

namespace detail {

template <class LossFn>
double grad_check_impl(const ToyPolicy& pol, std::span<const double> analytic, double step,
                       LossFn&& loss_of) {
  if (!(step >= 1e-7 && step <= 1e-3))
    throw Error(errc::invalid_argument, "grad_check: step outside [1e-7, 1e-3]");
  ToyPolicy probe = pol;
  double worst = 0.0;
  for (std::size_t i = 0; i < pol.theta.size(); ++i) {
    const double saved = probe.theta[i];
    probe.theta[i] = saved + step;
    const double up = loss_of(probe);
    probe.theta[i] = saved - step;
    const double down = loss_of(probe);
    probe.theta[i] = saved;
    const double fd = (up - down) / (2.0 * step);
    const double scale = std::max({std::abs(analytic[i]), std::abs(fd), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - fd) / scale);
  }
  return worst;
}

}  // namespace detail

// max relative error of the analytic batch gradient against central finite
// differences, over every theta entry
inline double grad_check(const ToyPolicy& pol, std::span<const PairExample> batch,
                         const UdpoConfig& cfg, double step) {
  std::vector<double> analytic(pol.theta.size());
  pair_batch_grad(pol, batch, cfg, analytic);
  return detail::grad_check_impl(pol, analytic, step, [&](const ToyPolicy& probe) {
    return pair_batch_loss(probe, batch, cfg);
  });
}

inline double grad_check(const ToyPolicy& pol, std::span<const SftExample> batch,
                         const UcpoConfig& cfg, double step) {
  std::vector<double> analytic(pol.theta.size());
  sft_batch_grad(pol, batch, cfg, analytic);
  return detail::grad_check_impl(pol, analytic, step, [&](const ToyPolicy& probe) {
    return sft_batch_loss(probe, batch, cfg);
  });
}

struct PolicyTrainConfig {
  double learning_rate = 0.5;
  int epochs = 100;
  std::uint64_t seed = 0;   // provenance only; the trainer itself is deterministic
  bool constant_lr = true;  // cosine decay to 0 when false
};

struct PolicyTrainResult {
  ToyPolicy policy;
  std::vector<double> epoch_loss;  // mean pre-update loss per epoch
};

namespace detail {

inline double step_lr(const PolicyTrainConfig& cfg, std::size_t step, std::size_t total) {
  if (cfg.constant_lr) return cfg.learning_rate;
  return cfg.learning_rate * 0.5 *
         (1.0 + std::cos(3.141592653589793 * static_cast<double>(step) / static_cast<double>(total)));
}

}  // namespace detail

// Online gradient descent, one example per step, consumed strictly in the
// order given: curricula are honored by not shuffling. Each epoch repeats
// the same order.
inline PolicyTrainResult train_toy_policy(ToyPolicy policy, std::span<const PairExample> data,
                                          const UdpoConfig& obj, const PolicyTrainConfig& cfg) {
  obj.validate();
  if (data.empty()) throw Error(errc::empty_dataset, "train_toy_policy: empty dataset");
  PolicyTrainResult out;
  const std::size_t total = static_cast<std::size_t>(cfg.epochs) * data.size();
  std::size_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto& e : data) {
      const double lp_c = policy.log_prob(e.prompt, 0, e.chosen);
      const double lp_r = policy.log_prob(e.prompt, 0, e.rejected);
      const double gap = (lp_c - policy.log_prob_ref(e.prompt, 0, e.chosen)) -
                         (lp_r - policy.log_prob_ref(e.prompt, 0, e.rejected));
      loss_sum += e.weight * softplus(-(obj.beta * gap));
      const double d = e.weight * obj.beta * (sigmoid(obj.beta * gap) - 1.0);
      const double lr = detail::step_lr(cfg, step++, total);
      policy.theta[policy.index(e.prompt, 0, e.chosen)] -= lr * d;
      policy.theta[policy.index(e.prompt, 0, e.rejected)] += lr * d;
    }
    out.epoch_loss.push_back(loss_sum / static_cast<double>(data.size()));
  }
  out.policy = std::move(policy);
  return out;
}

inline PolicyTrainResult train_toy_policy(ToyPolicy policy, std::span<const SftExample> data,
                                          const UcpoConfig& obj, const PolicyTrainConfig& cfg) {
  if (data.empty()) throw Error(errc::empty_dataset, "train_toy_policy: empty dataset");
  PolicyTrainResult out;
  const std::size_t total = static_cast<std::size_t>(cfg.epochs) * data.size();
  std::size_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto& e : data) {
      if (!(e.u_tilde >= 0.0 && e.u_tilde <= 1.0))
        throw Error(errc::invalid_weight, "u_tilde outside [0,1]");
      const double w = e.class_reward + obj.gamma * (1.0 - e.u_tilde);
      loss_sum += -(w * policy.log_prob(e.prompt, e.cls, e.response));
      const auto pi = policy.probs(e.prompt, e.cls);
      const std::size_t base = policy.index(e.prompt, e.cls, 0);
      const double lr = detail::step_lr(cfg, step++, total);
      for (int r = 0; r < policy.n_responses; ++r) {
        const double indicator = r == e.response ? 1.0 : 0.0;
        policy.theta[base + r] -= lr * w * (pi[r] - indicator);
      }
    }
    out.epoch_loss.push_back(loss_sum / static_cast<double>(data.size()));
  }
  out.policy = std::move(policy);
  return out;
}

inline void save_policy(const ToyPolicy& pol, std::ostream& out) {
  const json j{{"version", 1},
               {"n_prompts", pol.n_prompts},
               {"n_classes", pol.n_classes},
               {"n_responses", pol.n_responses},
               {"theta", pol.theta},
               {"ref", pol.ref}};
  out << j.dump() << '\n';
  out.flush();
  if (!out) throw Error(errc::io_error, "write failure");
}

inline ToyPolicy load_policy(std::istream& in) {
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(errc::parse_error, std::string("policy checkpoint: ") + e.what());
  }
  ToyPolicy pol;
  try {
    pol.n_prompts = j.at("n_prompts").get<int>();
    pol.n_classes = j.at("n_classes").get<int>();
    pol.n_responses = j.at("n_responses").get<int>();
    pol.theta = j.at("theta").get<std::vector<double>>();
    pol.ref = j.at("ref").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(errc::parse_error, std::string("policy checkpoint: ") + e.what());
  }
  const std::size_t want =
      static_cast<std::size_t>(pol.n_prompts) * pol.n_classes * pol.n_responses;
  if (pol.theta.size() != want || pol.ref.size() != want)
    throw Error(errc::invalid_input, "policy checkpoint: table size does not match dims");
  return pol;
}

inline void write_trace_csv(std::span<const double> epoch_loss, std::ostream& out) {
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < epoch_loss.size(); ++i)
    out << i << ',' << fmt_double(epoch_loss[i]) << '\n';
  out.flush();
  if (!out) throw Error(errc::io_error, "write failure");
}

}  // namespace balent
