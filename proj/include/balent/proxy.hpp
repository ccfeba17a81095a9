#pragma once
// Desk-scale uncertainty-aware reward model: features -> linear(hidden) ->
// tanh -> dropout -> scalar head, trained with the pairwise loss
// -log sigmoid(score(chosen) - score(rejected)). Inverted dropout keeps the
// deterministic pass equal to the dropout expectation, and inference-time
// dropout supplies the MC reward samples the rest of the pipeline consumes.
//
// Also hosts the synthetic preference-pair generator: latent response
// qualities live on a fixed direction in feature space, pairs within a
// prompt are separated by at least the quality margin, and a configurable
// fraction of pairs is mislabeled by swapping the two sides.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "balent/errors.hpp"
#include "balent/math.hpp"
#include "balent/model.hpp"
#include "balent/rng.hpp"

namespace balent {

struct ProxyModel {
  int input_dim = 0;
  int hidden_dim = 0;
  double dropout_rate = 0.1;
  std::vector<double> params;  // W1 (hidden x input), b1, w2, b2 — flat

  static std::size_t param_count(int input_dim, int hidden_dim) {
    return static_cast<std::size_t>(hidden_dim) * input_dim + 2 * hidden_dim + 1;
  }

  static ProxyModel init(int input_dim, int hidden_dim, double dropout_rate, std::uint64_t seed) {
    if (input_dim < 1 || hidden_dim < 1)
      throw Error(errc::invalid_argument, "proxy dims must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw Error(errc::invalid_argument, "dropout_rate must be in [0,1)");
    ProxyModel m;
    m.input_dim = input_dim;
    m.hidden_dim = hidden_dim;
    m.dropout_rate = dropout_rate;
    m.params.assign(param_count(input_dim, hidden_dim), 0.0);
    Rng rng(seed);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (int i = 0; i < hidden_dim * input_dim; ++i)
      m.params[i] = (2.0 * rng.next_unit() - 1.0) * s1;
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    for (int i = 0; i < hidden_dim; ++i)
      m.params[m.w2_off() + i] = (2.0 * rng.next_unit() - 1.0) * s2;
    return m;
  }

  std::size_t b1_off() const { return static_cast<std::size_t>(hidden_dim) * input_dim; }
  std::size_t w2_off() const { return b1_off() + hidden_dim; }
  std::size_t b2_off() const { return w2_off() + hidden_dim; }

  void check_features(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != input_dim)
      throw Error(errc::shape_error, "feature vector length " + std::to_string(x.size()) +
                                         " does not match input_dim " + std::to_string(input_dim));
  }

  // tanh(W1 x + b1)
  void hidden_units(std::span<const double> x, std::span<double> out) const {
    for (int i = 0; i < hidden_dim; ++i) {
      double pre = params[b1_off() + i];
      const double* row = params.data() + static_cast<std::size_t>(i) * input_dim;
      for (int j = 0; j < input_dim; ++j) pre += row[j] * x[j];
      out[i] = std::tanh(pre);
    }
  }

  // deterministic pass (dropout disabled)
  double score(std::span<const double> x) const {
    check_features(x);
    std::vector<double> h(hidden_dim);
    hidden_units(x, h);
    double out = params[b2_off()];
    for (int i = 0; i < hidden_dim; ++i) out += params[w2_off() + i] * h[i];
    return out;
  }

  // keep holds a per-unit multiplier: 0 (dropped) or 1/(1-rate); empty
  // means no dropout
  double score_masked(std::span<const double> x, std::span<const double> keep) const {
    check_features(x);
    std::vector<double> h(hidden_dim);
    hidden_units(x, h);
    double out = params[b2_off()];
    for (int i = 0; i < hidden_dim; ++i) {
      const double k = keep.empty() ? 1.0 : keep[i];
      out += params[w2_off() + i] * h[i] * k;
    }
    return out;
  }
};

inline std::vector<double> draw_keep_mask(int hidden_dim, double rate, Rng& rng) {
  std::vector<double> keep(hidden_dim);
  const double scale = 1.0 / (1.0 - rate);
  for (int i = 0; i < hidden_dim; ++i) keep[i] = rng.next_unit() >= rate ? scale : 0.0;
  return keep;
}

// k_passes stochastic forward passes, dropout sampled per pass; with
// dropout_rate = 0 every pass equals the deterministic score
inline std::vector<double> mc_rewards(const ProxyModel& model, std::span<const double> features,
                                      int k_passes, std::uint64_t seed) {
  if (k_passes < 1) throw Error(errc::invalid_argument, "k_passes must be >= 1");
  model.check_features(features);
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(k_passes);
  for (int k = 0; k < k_passes; ++k) {
    if (model.dropout_rate > 0.0) {
      const auto keep = draw_keep_mask(model.hidden_dim, model.dropout_rate, rng);
      out.push_back(model.score_masked(features, keep));
    } else {
      out.push_back(model.score(features));
    }
  }
  return out;
}

struct SynthConfig {
  std::size_t n_pairs = 0;
  int feature_dim = 16;
  double quality_margin = 1.0;
  double noise_sigma = 0.25;
  double flip_rate = 0.0;  // mislabel probability, at most 0.5
  std::uint64_t seed = 42;
  // discrete prompt/response universe so pairs share responses and the
  // tabular toy policy can generalize within a prompt
  int n_prompts = 100;
  int n_responses_per_prompt = 8;

  void validate() const {
    if (feature_dim < 1 || n_prompts < 1 || n_responses_per_prompt < 2)
      throw Error(errc::invalid_argument, "synthetic dims must be positive (>= 2 responses)");
    if (!(quality_margin > 0.0) || !(noise_sigma >= 0.0))
      throw Error(errc::invalid_argument, "need quality_margin > 0 and noise_sigma >= 0");
    if (!(flip_rate >= 0.0 && flip_rate <= 0.5))
      throw Error(errc::invalid_argument, "flip_rate must be in [0, 0.5]");
  }
};

// Deterministic given the seed. Every record carries, in its extra payload:
// prompt_id, chosen_rid, rejected_rid, features_chosen, features_rejected,
// the signed true quality gap of the stored orientation, and the flip flag.
inline std::vector<PreferencePair> gen_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  std::vector<double> direction(cfg.feature_dim);
  double norm = 0.0;
  for (auto& d : direction) {
    d = rng.next_normal();
    norm += d * d;
  }
  norm = std::sqrt(norm);
  for (auto& d : direction) d /= norm;

  const int n_resp = cfg.n_responses_per_prompt;
  std::vector<double> quality(static_cast<std::size_t>(cfg.n_prompts) * n_resp);
  std::vector<double> feats(quality.size() * cfg.feature_dim);
  for (int p = 0; p < cfg.n_prompts; ++p) {
    // adjacent responses are at least quality_margin apart, so every
    // within-prompt pair is separated by at least the margin
    double q = rng.next_normal();
    double mean_q = 0.0;
    for (int r = 0; r < n_resp; ++r) {
      quality[static_cast<std::size_t>(p) * n_resp + r] = q;
      mean_q += q;
      q += cfg.quality_margin + 0.5 * std::abs(rng.next_normal());
    }
    mean_q /= n_resp;
    for (int r = 0; r < n_resp; ++r) {
      const std::size_t qi = static_cast<std::size_t>(p) * n_resp + r;
      quality[qi] -= mean_q;
      double* f = feats.data() + qi * cfg.feature_dim;
      for (int j = 0; j < cfg.feature_dim; ++j)
        f[j] = quality[qi] * direction[j] + cfg.noise_sigma * rng.next_normal();
    }
  }

  const auto feat_vec = [&](int p, int r) {
    const double* f = feats.data() + (static_cast<std::size_t>(p) * n_resp + r) * cfg.feature_dim;
    return std::vector<double>(f, f + cfg.feature_dim);
  };

  std::vector<PreferencePair> out;
  out.reserve(cfg.n_pairs);
  for (std::size_t k = 0; k < cfg.n_pairs; ++k) {
    const int p = static_cast<int>(rng.next_below(cfg.n_prompts));
    const int a = static_cast<int>(rng.next_below(n_resp));
    int b = static_cast<int>(rng.next_below(n_resp - 1));
    if (b >= a) ++b;
    const std::size_t qa = static_cast<std::size_t>(p) * n_resp + a;
    const std::size_t qb = static_cast<std::size_t>(p) * n_resp + b;
    int chosen = quality[qa] > quality[qb] ? a : b;
    int rejected = chosen == a ? b : a;
    const bool flip = rng.next_unit() < cfg.flip_rate;
    if (flip) std::swap(chosen, rejected);

    PreferencePair pair;
    char id[24];
    std::snprintf(id, sizeof id, "synth-%06zu", k);
    pair.id = id;
    const std::size_t qc = static_cast<std::size_t>(p) * n_resp + chosen;
    const std::size_t qr = static_cast<std::size_t>(p) * n_resp + rejected;
    pair.extra = json{{"prompt_id", p},
                      {"chosen_rid", chosen},
                      {"rejected_rid", rejected},
                      {"features_chosen", feat_vec(p, chosen)},
                      {"features_rejected", feat_vec(p, rejected)},
                      {"true_gap", quality[qc] - quality[qr]},
                      {"flipped", flip}};
    out.push_back(std::move(pair));
  }
  return out;
}

struct FeatPair {
  std::vector<double> chosen, rejected;
};

inline std::vector<double> features_from_extra(const PreferencePair& pair, const char* key) {
  const auto it = pair.extra.find(key);
  if (it == pair.extra.end() || !it->is_array())
    throw Error(errc::invalid_input, "record \"" + pair.id + "\" has no \"" + key + "\" payload");
  return it->get<std::vector<double>>();
}

inline std::vector<FeatPair> feature_pairs(std::span<const PreferencePair> data) {
  std::vector<FeatPair> out;
  out.reserve(data.size());
  for (const auto& p : data)
    out.push_back({features_from_extra(p, "features_chosen"),
                   features_from_extra(p, "features_rejected")});
  return out;
}

// per-example dropout masks; an empty vector means no dropout on that side
struct DropoutMasks {
  std::vector<std::vector<double>> chosen, rejected;
};

inline DropoutMasks draw_masks(const ProxyModel& model, std::size_t n_examples, Rng& rng) {
  DropoutMasks m;
  m.chosen.resize(n_examples);
  m.rejected.resize(n_examples);
  if (model.dropout_rate <= 0.0) return m;
  for (std::size_t i = 0; i < n_examples; ++i) {
    m.chosen[i] = draw_keep_mask(model.hidden_dim, model.dropout_rate, rng);
    m.rejected[i] = draw_keep_mask(model.hidden_dim, model.dropout_rate, rng);
  }
  return m;
}

// mean over the batch of -log sigmoid(score(chosen) - score(rejected)),
// with the given fixed masks
namespace detail {

inline std::span<const double> mask_of(const std::vector<std::vector<double>>& side,
                                       std::size_t i) {
  if (side.empty() || side[i].empty()) return {};
  return side[i];
}

}  // namespace detail

inline double urm_batch_loss(const ProxyModel& model, std::span<const FeatPair> batch,
                             const DropoutMasks& masks) {
  if (batch.empty()) throw Error(errc::empty_dataset, "urm_batch_loss: empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double d = model.score_masked(batch[i].chosen, detail::mask_of(masks.chosen, i)) -
                     model.score_masked(batch[i].rejected, detail::mask_of(masks.rejected, i));
    s += softplus(-d);
  }
  return s / static_cast<double>(batch.size());
}

inline std::vector<double> urm_batch_grad(const ProxyModel& model, std::span<const FeatPair> batch,
                                          const DropoutMasks& masks) {
  if (batch.empty()) throw Error(errc::empty_dataset, "urm_batch_grad: empty batch");
  std::vector<double> grad(model.params.size(), 0.0);
  std::vector<double> h_c(model.hidden_dim), h_r(model.hidden_dim);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch[i];
    model.check_features(ex.chosen);
    model.check_features(ex.rejected);
    model.hidden_units(ex.chosen, h_c);
    model.hidden_units(ex.rejected, h_r);
    const auto keep_c = detail::mask_of(masks.chosen, i);
    const auto keep_r = detail::mask_of(masks.rejected, i);
    const auto masked = [](std::span<const double> keep, const std::vector<double>& h, int u) {
      return keep.empty() ? h[u] : h[u] * keep[u];
    };
    double d = 0.0;
    for (int u = 0; u < model.hidden_dim; ++u)
      d += model.params[model.w2_off() + u] * (masked(keep_c, h_c, u) - masked(keep_r, h_r, u));
    const double g = (sigmoid(d) - 1.0) * inv_n;  // dL/dd; the b2 terms cancel
    for (int u = 0; u < model.hidden_dim; ++u) {
      grad[model.w2_off() + u] += g * (masked(keep_c, h_c, u) - masked(keep_r, h_r, u));
      const double w2u = model.params[model.w2_off() + u];
      const double kc = keep_c.empty() ? 1.0 : keep_c[u];
      const double kr = keep_r.empty() ? 1.0 : keep_r[u];
      const double dc = g * w2u * kc * (1.0 - h_c[u] * h_c[u]);
      const double dr = -g * w2u * kr * (1.0 - h_r[u] * h_r[u]);
      grad[model.b1_off() + u] += dc + dr;
      double* row = grad.data() + static_cast<std::size_t>(u) * model.input_dim;
      for (int j = 0; j < model.input_dim; ++j)
        row[j] += dc * ex.chosen[j] + dr * ex.rejected[j];
    }
  }
  return grad;
}

struct UrmHyper {
  double learning_rate = 0.05;
  int epochs = 20;
  int batch_size = 32;
  std::uint64_t seed = 1;
};

struct UrmTrainResult {
  ProxyModel model;
  std::vector<double> epoch_loss;  // mean pre-update minibatch loss
};

// Plain minibatch SGD with training-time dropout; bit-identical final
// parameters for identical (data, hyper, seed).
inline UrmTrainResult train_urm(std::span<const PreferencePair> data, ProxyModel model,
                                const UrmHyper& hyper = {}) {
  if (data.empty()) throw Error(errc::empty_dataset, "train_urm: empty dataset");
  if (hyper.batch_size < 1 || hyper.epochs < 1)
    throw Error(errc::invalid_argument, "train_urm: epochs and batch_size must be positive");
  const auto feats = feature_pairs(data);
  for (const auto& f : feats) {
    model.check_features(f.chosen);
    model.check_features(f.rejected);
  }

  Rng rng(hyper.seed);
  std::vector<std::size_t> order(feats.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  UrmTrainResult out;
  std::vector<FeatPair> batch;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    deterministic_shuffle(order, rng);
    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t at = 0; at < order.size(); at += hyper.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), at + hyper.batch_size);
      for (std::size_t i = at; i < end; ++i) batch.push_back(feats[order[i]]);
      const auto masks = draw_masks(model, batch.size(), rng);
      loss_sum += urm_batch_loss(model, batch, masks);
      const auto grad = urm_batch_grad(model, batch, masks);
      for (std::size_t i = 0; i < model.params.size(); ++i)
        model.params[i] -= hyper.learning_rate * grad[i];
      ++n_batches;
    }
    out.epoch_loss.push_back(loss_sum / static_cast<double>(n_batches));
  }
  out.model = std::move(model);
  return out;
}

// fraction of pairs whose deterministic chosen score strictly exceeds the
// rejected score; ties count as incorrect
inline double preference_accuracy(const ProxyModel& model, std::span<const PreferencePair> data) {
  if (data.empty()) throw Error(errc::empty_dataset, "preference_accuracy: empty dataset");
  std::size_t correct = 0;
  for (const auto& p : data) {
    const auto fc = features_from_extra(p, "features_chosen");
    const auto fr = features_from_extra(p, "features_rejected");
    if (model.score(fc) > model.score(fr)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

inline void save_proxy(const ProxyModel& model, std::ostream& out) {
  const json j{{"version", 1},
               {"input_dim", model.input_dim},
               {"hidden_dim", model.hidden_dim},
               {"dropout_rate", model.dropout_rate},
               {"params", model.params}};
  out << j.dump() << '\n';
  out.flush();
  if (!out) throw Error(errc::io_error, "write failure");
}

inline ProxyModel load_proxy(std::istream& in) {
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(errc::parse_error, std::string("proxy checkpoint: ") + e.what());
  }
  ProxyModel m;
  try {
    m.input_dim = j.at("input_dim").get<int>();
    m.hidden_dim = j.at("hidden_dim").get<int>();
    m.dropout_rate = j.at("dropout_rate").get<double>();
    m.params = j.at("params").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(errc::parse_error, std::string("proxy checkpoint: ") + e.what());
  }
  if (m.input_dim < 1 || m.hidden_dim < 1 || !(m.dropout_rate >= 0.0 && m.dropout_rate < 1.0))
    throw Error(errc::invalid_input, "proxy checkpoint: bad dims or dropout rate");
  if (m.params.size() != ProxyModel::param_count(m.input_dim, m.hidden_dim))
    throw Error(errc::invalid_input, "proxy checkpoint: parameter count does not match dims");
  return m;
}

}  // namespace balent
