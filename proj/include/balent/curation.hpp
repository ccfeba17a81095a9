#pragma once
// Uncertainty-guided curation: curriculum orderings over annotated records,
// reward-gap filters, per-record training weights for the weighted
// objectives, benchmark pair-score arithmetic, and a CSV distribution report.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "balent/errors.hpp"
#include "balent/math.hpp"
#include "balent/rng.hpp"
#include "balent/uncertainty.hpp"

namespace balent {

enum class Strategy { random, epistemic, aleatoric, balent, bad };
enum class Direction { ascending, descending, none };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::random: return "random";
    case Strategy::epistemic: return "epistemic";
    case Strategy::aleatoric: return "aleatoric";
    case Strategy::balent: return "balent";
    case Strategy::bad: return "bad";
  }
  return "?";
}

inline const char* to_string(Direction d) {
  switch (d) {
    case Direction::ascending: return "ascending";
    case Direction::descending: return "descending";
    default: return "n/a";
  }
}

struct CurriculumPlan {
  Strategy strategy = Strategy::random;
  Direction direction = Direction::none;
  std::uint64_t seed = 0;
  std::vector<std::string> ranking;  // permutation of the input id set
};

namespace detail {

inline double metric_of(const AnnotatedRecord& r, Strategy s) {
  switch (s) {
    case Strategy::epistemic: return r.uncertainty.epistemic;
    case Strategy::aleatoric: return r.uncertainty.aleatoric;
    case Strategy::balent: return r.uncertainty.balent;
    default:
      throw Error(errc::invalid_argument, "strategy has no sort metric");
  }
}

}  // namespace detail

// random: seeded uniform shuffle of the input order. Metric strategies:
// sort by the metric in the given direction, ties broken by ascending id.
inline CurriculumPlan order_by(std::span<const AnnotatedRecord> records, Strategy strategy,
                               Direction direction, std::uint64_t seed) {
  if (records.empty()) throw Error(errc::empty_dataset, "order_by: empty dataset");
  if (strategy == Strategy::bad)
    throw Error(errc::invalid_argument, "use bad_curriculum() for the bad strategy");

  CurriculumPlan plan{strategy, direction, seed, {}};
  plan.ranking.reserve(records.size());
  if (strategy == Strategy::random) {
    for (const auto& r : records) plan.ranking.push_back(r.pair.id);
    Rng rng(seed);
    deterministic_shuffle(plan.ranking, rng);
    plan.direction = Direction::none;
    return plan;
  }

  std::vector<std::pair<double, std::string>> keyed;
  keyed.reserve(records.size());
  for (const auto& r : records) keyed.emplace_back(detail::metric_of(r, strategy), r.pair.id);
  const bool asc = direction != Direction::descending;
  std::sort(keyed.begin(), keyed.end(), [asc](const auto& a, const auto& b) {
    if (a.first != b.first) return asc ? a.first < b.first : a.first > b.first;
    return a.second < b.second;
  });
  for (auto& k : keyed) plan.ranking.push_back(std::move(k.second));
  return plan;
}

// Positive-gap records first, ordered by balent from high to low (ties by
// ascending id); the remaining (mu <= 0) records follow in seeded-shuffled
// order.
inline CurriculumPlan bad_curriculum(std::span<const AnnotatedRecord> records,
                                     std::uint64_t seed) {
  if (records.empty()) throw Error(errc::empty_dataset, "bad_curriculum: empty dataset");
  std::vector<std::pair<double, std::string>> positive;
  std::vector<std::string> rest;
  for (const auto& r : records) {
    if (r.posterior.mu > 0.0) {
      positive.emplace_back(r.uncertainty.balent, r.pair.id);
    } else {
      rest.push_back(r.pair.id);
    }
  }
  std::sort(positive.begin(), positive.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  Rng rng(seed);
  deterministic_shuffle(rest, rng);

  CurriculumPlan plan{Strategy::bad, Direction::none, seed, {}};
  plan.ranking.reserve(records.size());
  for (auto& k : positive) plan.ranking.push_back(std::move(k.second));
  for (auto& id : rest) plan.ranking.push_back(std::move(id));
  return plan;
}

struct GapFilter {
  enum class Kind { positive_gap_only, min_gap };
  Kind kind = Kind::positive_gap_only;
  double threshold = 0.0;

  static GapFilter positive() { return {}; }
  static GapFilter min_gap(double t) { return {Kind::min_gap, t}; }
};

// keeps mu > 0 (positive_gap_only) or mu >= threshold (min_gap); order
// preserved, empty result allowed
inline std::vector<AnnotatedRecord> filter_by_gap(std::span<const AnnotatedRecord> records,
                                                  const GapFilter& f) {
  std::vector<AnnotatedRecord> out;
  for (const auto& r : records) {
    const bool keep = f.kind == GapFilter::Kind::positive_gap_only ? r.posterior.mu > 0.0
                                                                   : r.posterior.mu >= f.threshold;
    if (keep) out.push_back(r);
  }
  return out;
}

struct WeightRecord {
  std::string id;
  std::optional<double> c_u;          // (e - u) / E[e - u]
  std::optional<double> ucpo_weight;  // class reward + gamma * (1 - u_tilde)
  std::optional<double> u_tilde;      // min-max normalized u
};

struct UcpoConfig {
  double gamma = 0.1;
  double reward_expert = 1.0;
  double reward_suboptimal = 0.1;
};

// c_u(i) = (e - u_i) / mean_j(e - u_j); the dataset mean of c_u is 1.
inline std::vector<WeightRecord> udpo_weights(std::span<const AnnotatedRecord> records) {
  if (records.empty()) throw Error(errc::empty_dataset, "udpo_weights: empty dataset");
  double slack_sum = 0.0;
  for (const auto& r : records) {
    const double u = r.uncertainty.u;
    if (!(u >= 0.0 && u <= kEuler))
      throw Error(errc::invalid_input, "record \"" + r.pair.id + "\": u outside [0, e]");
    slack_sum += kEuler - u;
  }
  const double mean_slack = slack_sum / static_cast<double>(records.size());
  if (!(mean_slack > 0.0))
    throw Error(errc::degenerate_weights, "every u equals e; E[e - u] is zero");
  std::vector<WeightRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    WeightRecord w;
    w.id = r.pair.id;
    w.c_u = (kEuler - r.uncertainty.u) / mean_slack;
    out.push_back(std::move(w));
  }
  return out;
}

// u_tilde = (u - min u) / (max u - min u) over the dataset (0.5 for all when
// the range is degenerate); weight = class reward + gamma * (1 - u_tilde).
inline std::vector<WeightRecord> ucpo_weights(std::span<const AnnotatedRecord> records,
                                              const UcpoConfig& cfg = {}) {
  if (records.empty()) throw Error(errc::empty_dataset, "ucpo_weights: empty dataset");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    if (r.pair.source_class == SourceClass::unlabeled)
      throw Error(errc::missing_class, "record \"" + r.pair.id + "\" has no source class");
    const double u = r.uncertainty.u;
    if (!std::isfinite(u))
      throw Error(errc::invalid_input, "record \"" + r.pair.id + "\": non-finite u");
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  const double range = hi - lo;
  std::vector<WeightRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    WeightRecord w;
    w.id = r.pair.id;
    w.u_tilde = range > 0.0 ? (r.uncertainty.u - lo) / range : 0.5;
    const double reward = r.pair.source_class == SourceClass::expert ? cfg.reward_expert
                                                                     : cfg.reward_suboptimal;
    w.ucpo_weight = reward + cfg.gamma * (1.0 - *w.u_tilde);
    out.push_back(std::move(w));
  }
  return out;
}

// (2W + D) / (W + D + L) * 100; exact for benchmark-sized counts
inline double pair_score(long long wins, long long draws, long long losses) {
  if (wins < 0 || draws < 0 || losses < 0)
    throw Error(errc::invalid_argument, "pair_score: negative count");
  const long long total = wins + draws + losses;
  if (total == 0) throw Error(errc::empty_dataset, "pair_score: all counts zero");
  return static_cast<double>(2 * wins + draws) * 100.0 / static_cast<double>(total);
}

struct ReportOptions {
  int n_bins = 20;  // reward-gap histogram bins
};

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double ma = sample_mean(a);
  const double mb = sample_mean(b);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

// CSV with two sections: a reward-gap histogram of per-bin counts and mean
// uncertainties, then the Pearson correlation matrix over (u, aleatoric,
// epistemic). Undefined or zero-variance correlations print the "nan"
// sentinel and are flagged in the note column.
inline void write_report(std::span<const AnnotatedRecord> records, std::ostream& out,
                         const ReportOptions& opt = {}) {
  if (records.empty()) throw Error(errc::empty_dataset, "report: empty dataset");
  if (opt.n_bins < 1) throw Error(errc::invalid_argument, "report: n_bins must be >= 1");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    lo = std::min(lo, r.posterior.mu);
    hi = std::max(hi, r.posterior.mu);
  }
  const int n_bins = hi > lo ? opt.n_bins : 1;
  const double width = (hi - lo) / n_bins;

  std::vector<long long> count(n_bins, 0);
  std::vector<double> sum_u(n_bins, 0.0), sum_ale(n_bins, 0.0), sum_epi(n_bins, 0.0);
  std::vector<double> us, ales, epis;
  for (const auto& r : records) {
    int b = 0;
    if (hi > lo)
      b = std::min(n_bins - 1, static_cast<int>((r.posterior.mu - lo) / width));
    count[b] += 1;
    sum_u[b] += r.uncertainty.u;
    sum_ale[b] += r.uncertainty.aleatoric;
    sum_epi[b] += r.uncertainty.epistemic;
    us.push_back(r.uncertainty.u);
    ales.push_back(r.uncertainty.aleatoric);
    epis.push_back(r.uncertainty.epistemic);
  }

  out << "bin,gap_lo,gap_hi,count,mean_u,mean_aleatoric,mean_epistemic\n";
  for (int b = 0; b < n_bins; ++b) {
    const double blo = hi > lo ? lo + b * width : lo;
    const double bhi = hi > lo ? (b + 1 == n_bins ? hi : lo + (b + 1) * width) : hi;
    const double c = static_cast<double>(count[b]);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out << b << ',' << fmt_double(blo) << ',' << fmt_double(bhi) << ',' << count[b] << ','
        << fmt_double(count[b] ? sum_u[b] / c : nan) << ','
        << fmt_double(count[b] ? sum_ale[b] / c : nan) << ','
        << fmt_double(count[b] ? sum_epi[b] / c : nan) << '\n';
  }

  const auto var_zero = [](std::span<const double> v) {
    for (double x : v)
      if (x != v[0]) return false;
    return true;
  };
  out << "\nmetric_a,metric_b,pearson,note\n";
  const auto corr_row = [&](const char* na, std::span<const double> a, const char* nb,
                            std::span<const double> b) {
    const double c = pearson(a, b);
    const char* note = "ok";
    if (a.size() < 2) {
      note = "undefined";
    } else if (var_zero(a) || var_zero(b)) {
      note = "zero_variance";
    }
    out << na << ',' << nb << ',' << fmt_double(c) << ',' << note << '\n';
  };
  corr_row("u", us, "aleatoric", ales);
  corr_row("u", us, "epistemic", epis);
  corr_row("aleatoric", ales, "epistemic", epis);
  out.flush();
  if (!out) throw Error(errc::io_error, "write failure");
}

// plan serialization: plain ids (one per line) or JSONL {id, rank}
inline void write_plan_ids(const CurriculumPlan& plan, std::ostream& out) {
  for (const auto& id : plan.ranking) out << id << '\n';
  out.flush();
  if (!out) throw Error(errc::io_error, "write failure");
}

inline void write_plan_jsonl(const CurriculumPlan& plan, std::ostream& out) {
  for (std::size_t i = 0; i < plan.ranking.size(); ++i)
    out << json{{"id", plan.ranking[i]}, {"rank", i}}.dump() << '\n';
  out.flush();
  if (!out) throw Error(errc::io_error, "write failure");
}

inline std::vector<std::string> read_plan_ids(std::istream& in) {
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  if (in.bad()) throw Error(errc::io_error, "read failure");
  return ids;
}

inline void write_weights(std::span<const WeightRecord> weights, std::ostream& out) {
  for (const auto& w : weights) {
    json j{{"id", w.id}};
    if (w.c_u) j["c_u"] = *w.c_u;
    if (w.ucpo_weight) j["ucpo_weight"] = *w.ucpo_weight;
    if (w.u_tilde) j["u_tilde"] = *w.u_tilde;
    out << j.dump() << '\n';
  }
  out.flush();
  if (!out) throw Error(errc::io_error, "write failure");
}

inline std::vector<WeightRecord> read_weights(std::istream& in) {
  std::vector<WeightRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw detail::parse_err(line_no, e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string())
      throw detail::parse_err(line_no, "weight record needs a string \"id\"");
    WeightRecord w;
    w.id = j["id"].get<std::string>();
    const auto grab = [&](const char* key) -> std::optional<double> {
      const auto it = j.find(key);
      if (it == j.end()) return std::nullopt;
      if (!it->is_number()) throw detail::parse_err(line_no, std::string(key) + " must be a number");
      return it->get<double>();
    };
    w.c_u = grab("c_u");
    w.ucpo_weight = grab("ucpo_weight");
    w.u_tilde = grab("u_tilde");
    out.push_back(std::move(w));
  }
  if (in.bad()) throw Error(errc::io_error, "read failure");
  return out;
}

}  // namespace balent
