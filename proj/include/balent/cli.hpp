#pragma once
// Command-line surface wiring the pipeline:
//   gen-synth -> train-proxy -> annotate -> curate/weights/filter ->
//   train-policy -> report, plus pair-score arithmetic and the oracle
//   cross-check. Logs and the resolved-config banner go to stderr; data goes
//   to files or stdout. Exit codes: 0 success, 1 domain error, 2 usage error.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "balent/curation.hpp"
#include "balent/errors.hpp"
#include "balent/math.hpp"
#include "balent/model.hpp"
#include "balent/objectives.hpp"
#include "balent/proxy.hpp"
#include "balent/rng.hpp"
#include "balent/uncertainty.hpp"

namespace balent {
namespace cli_detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(errc::io_error, "cannot open input file \"" + path + "\"");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(errc::io_error, "cannot open output file \"" + path + "\"");
  return out;
}

inline void banner(const std::string& name, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::cerr << "[balent " << name << "]";
  for (const auto& [k, v] : kv) std::cerr << ' ' << k << '=' << v;
  std::cerr << '\n';
}

struct QuadratureFlags {
  int n_steps = 10000;
  double z_halfwidth = 8.0;
  double sigma_min = 1e-6;

  QuadratureConfig config() const { return {n_steps, z_halfwidth, sigma_min}; }

  void attach(CLI::App* cmd) {
    cmd->add_option("--n-steps", n_steps, "trapezoid intervals")->capture_default_str();
    cmd->add_option("--z-halfwidth", z_halfwidth, "Gaussian-domain half-width in sigma units")
        ->capture_default_str();
    cmd->add_option("--sigma-min", sigma_min, "posterior sigma floor")->capture_default_str();
  }
};

inline void cmd_gen_synth(const SynthConfig& cfg, const std::string& output) {
  banner("gen-synth", {{"n_pairs", std::to_string(cfg.n_pairs)},
                       {"feature_dim", std::to_string(cfg.feature_dim)},
                       {"margin", fmt_double(cfg.quality_margin)},
                       {"noise_sigma", fmt_double(cfg.noise_sigma)},
                       {"flip_rate", fmt_double(cfg.flip_rate)},
                       {"n_prompts", std::to_string(cfg.n_prompts)},
                       {"n_responses", std::to_string(cfg.n_responses_per_prompt)},
                       {"seed", std::to_string(cfg.seed)},
                       {"output", output}});
  const auto pairs = gen_synthetic(cfg);
  auto out = open_output(output);
  write_dataset(pairs, out);
  std::cerr << "wrote " << pairs.size() << " pairs\n";
}

inline void cmd_train_proxy(const std::string& input, const std::string& output, int hidden_dim,
                            double dropout, const UrmHyper& hyper) {
  banner("train-proxy", {{"input", input},
                         {"output", output},
                         {"hidden_dim", std::to_string(hidden_dim)},
                         {"dropout", fmt_double(dropout)},
                         {"lr", fmt_double(hyper.learning_rate)},
                         {"epochs", std::to_string(hyper.epochs)},
                         {"batch_size", std::to_string(hyper.batch_size)},
                         {"seed", std::to_string(hyper.seed)}});
  auto in = open_input(input);
  const auto pairs = parse_dataset(in, ParseOptions{.require_gap_source = false});
  if (pairs.empty()) throw Error(errc::empty_dataset, "no records in \"" + input + "\"");
  const int feature_dim = static_cast<int>(features_from_extra(pairs.front(), "features_chosen").size());
  auto model = ProxyModel::init(feature_dim, hidden_dim, dropout, derive_stream(hyper.seed, "proxy-init"));
  auto result = train_urm(pairs, std::move(model), hyper);
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
    std::cerr << "epoch " << e << " loss " << fmt_double(result.epoch_loss[e]) << '\n';
  std::cerr << "train preference accuracy " << fmt_double(preference_accuracy(result.model, pairs))
            << '\n';
  auto out = open_output(output);
  save_proxy(result.model, out);
}

inline void cmd_annotate(const std::string& input, const std::string& output,
                         const std::string& model_path, int mc_passes, std::uint64_t seed,
                         bool paired, const QuadratureFlags& quad) {
  banner("annotate", {{"input", input},
                      {"output", output},
                      {"model", model_path.empty() ? "-" : model_path},
                      {"mc_passes", std::to_string(mc_passes)},
                      {"n_steps", std::to_string(quad.n_steps)},
                      {"paired", paired ? "true" : "false"},
                      {"seed", std::to_string(seed)}});
  const bool scoring = !model_path.empty();
  auto in = open_input(input);
  auto pairs = parse_dataset(in, ParseOptions{.require_gap_source = !scoring});
  if (scoring) {
    auto model_in = open_input(model_path);
    const auto model = load_proxy(model_in);
    for (auto& p : pairs) {
      if (p.gap_override) continue;
      if (p.reward_samples_chosen.empty())
        p.reward_samples_chosen = mc_rewards(model, features_from_extra(p, "features_chosen"),
                                             mc_passes, derive_stream(seed, p.id + "/chosen"));
      if (p.reward_samples_rejected.empty() && p.extra.contains("features_rejected"))
        p.reward_samples_rejected = mc_rewards(model, features_from_extra(p, "features_rejected"),
                                               mc_passes, derive_stream(seed, p.id + "/rejected"));
    }
  }
  const auto records = annotate_all(pairs, quad.config(),
                                    paired ? GapEstimator::paired : GapEstimator::independent);
  auto out = open_output(output);
  write_annotated(records, out);
  std::cerr << "annotated " << records.size() << " records\n";
}

inline void cmd_curate(const std::string& input, const std::string& output, Strategy strategy,
                       Direction direction, std::uint64_t seed, const std::string& format) {
  banner("curate", {{"input", input},
                    {"strategy", to_string(strategy)},
                    {"direction", to_string(direction)},
                    {"seed", std::to_string(seed)},
                    {"format", format},
                    {"output", output}});
  auto in = open_input(input);
  const auto records = read_annotated(in);
  const CurriculumPlan plan = strategy == Strategy::bad
                                  ? bad_curriculum(records, seed)
                                  : order_by(records, strategy, direction, seed);
  auto out = open_output(output);
  if (format == "jsonl") {
    write_plan_jsonl(plan, out);
  } else {
    write_plan_ids(plan, out);
  }
}

inline void cmd_weights(const std::string& input, const std::string& output, const std::string& mode,
                        const UcpoConfig& cfg) {
  banner("weights", {{"input", input},
                     {"mode", mode},
                     {"gamma", fmt_double(cfg.gamma)},
                     {"reward_expert", fmt_double(cfg.reward_expert)},
                     {"reward_suboptimal", fmt_double(cfg.reward_suboptimal)},
                     {"output", output}});
  auto in = open_input(input);
  const auto records = read_annotated(in);
  const auto weights = mode == "udpo" ? udpo_weights(records) : ucpo_weights(records, cfg);
  auto out = open_output(output);
  write_weights(weights, out);
}

inline void cmd_filter(const std::string& input, const std::string& output,
                       const std::string& predicate, double threshold) {
  banner("filter", {{"input", input},
                    {"predicate", predicate},
                    {"threshold", fmt_double(threshold)},
                    {"output", output}});
  auto in = open_input(input);
  const auto records = read_annotated(in);
  const GapFilter f =
      predicate == "min-gap" ? GapFilter::min_gap(threshold) : GapFilter::positive();
  const auto kept = filter_by_gap(records, f);
  auto out = open_output(output);
  write_annotated(kept, out);
  std::cerr << "kept " << kept.size() << " of " << records.size() << " records\n";
}

inline void cmd_report(const std::string& input, const std::string& output, int bins) {
  banner("report", {{"input", input}, {"bins", std::to_string(bins)}, {"output", output}});
  auto in = open_input(input);
  const auto records = read_annotated(in);
  auto out = open_output(output);
  write_report(records, out, ReportOptions{bins});
}

inline void cmd_pair_score(long long w, long long d, long long l) {
  banner("pair-score", {{"w", std::to_string(w)}, {"d", std::to_string(d)}, {"l", std::to_string(l)}});
  std::printf("%.1f\n", pair_score(w, d, l));
}

inline int extra_int(const PreferencePair& p, const char* key) {
  const auto it = p.extra.find(key);
  if (it == p.extra.end() || !it->is_number_integer())
    throw Error(errc::missing_entry, "record \"" + p.id + "\" has no integer \"" + key + "\"");
  return it->get<int>();
}

inline void cmd_train_policy(const std::string& input, const std::string& objective,
                             const std::string& weights_path, const std::string& order_path,
                             const UdpoConfig& udpo_cfg, const UcpoConfig& ucpo_cfg,
                             const PolicyTrainConfig& train_cfg, const std::string& output,
                             const std::string& trace_path) {
  banner("train-policy", {{"input", input},
                          {"objective", objective},
                          {"weights", weights_path.empty() ? "-" : weights_path},
                          {"order", order_path.empty() ? "-" : order_path},
                          {"beta", fmt_double(udpo_cfg.beta)},
                          {"gamma", fmt_double(ucpo_cfg.gamma)},
                          {"lr", fmt_double(train_cfg.learning_rate)},
                          {"epochs", std::to_string(train_cfg.epochs)},
                          {"constant_lr", train_cfg.constant_lr ? "true" : "false"},
                          {"seed", std::to_string(train_cfg.seed)},
                          {"output", output}});
  auto in = open_input(input);
  auto pairs = parse_dataset(in, ParseOptions{.require_gap_source = false});
  if (pairs.empty()) throw Error(errc::empty_dataset, "no records in \"" + input + "\"");

  if (!order_path.empty()) {
    auto plan_in = open_input(order_path);
    const auto plan_ids = read_plan_ids(plan_in);
    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < pairs.size(); ++i) by_id.emplace(pairs[i].id, i);
    if (plan_ids.size() != pairs.size())
      throw Error(errc::invalid_input, "order plan is not a permutation of the dataset ids");
    std::vector<PreferencePair> ordered;
    ordered.reserve(pairs.size());
    std::set<std::string> used;
    for (const auto& id : plan_ids) {
      const auto it = by_id.find(id);
      if (it == by_id.end())
        throw Error(errc::missing_entry, "order plan names unknown id \"" + id + "\"");
      if (!used.insert(id).second)
        throw Error(errc::invalid_input, "order plan repeats id \"" + id + "\"");
      ordered.push_back(std::move(pairs[it->second]));
    }
    pairs = std::move(ordered);
  }

  std::map<std::string, WeightRecord> weight_by_id;
  if (!weights_path.empty()) {
    auto win = open_input(weights_path);
    for (auto& w : read_weights(win)) weight_by_id.emplace(w.id, std::move(w));
  }
  const auto weight_of = [&](const std::string& id) -> const WeightRecord& {
    const auto it = weight_by_id.find(id);
    if (it == weight_by_id.end())
      throw Error(errc::missing_entry, "no weight record for id \"" + id + "\"");
    return it->second;
  };

  int n_prompts = 0;
  int n_responses = 0;
  for (const auto& p : pairs) {
    n_prompts = std::max(n_prompts, extra_int(p, "prompt_id") + 1);
    n_responses = std::max(n_responses, extra_int(p, "chosen_rid") + 1);
    if (p.extra.contains("rejected_rid"))
      n_responses = std::max(n_responses, extra_int(p, "rejected_rid") + 1);
  }

  PolicyTrainResult result;
  if (objective == "dpo" || objective == "udpo") {
    std::vector<PairExample> data;
    data.reserve(pairs.size());
    for (const auto& p : pairs) {
      PairExample e{extra_int(p, "prompt_id"), extra_int(p, "chosen_rid"),
                    extra_int(p, "rejected_rid"), 1.0};
      if (objective == "udpo") {
        const auto& w = weight_of(p.id);
        if (!w.c_u) throw Error(errc::invalid_input, "weight record for \"" + p.id + "\" lacks c_u");
        e.weight = *w.c_u;
      }
      data.push_back(e);
    }
    result = train_toy_policy(ToyPolicy::uniform(n_prompts, 1, n_responses), data, udpo_cfg,
                              train_cfg);
  } else {
    std::vector<SftExample> data;
    data.reserve(pairs.size());
    for (const auto& p : pairs) {
      if (p.source_class == SourceClass::unlabeled)
        throw Error(errc::missing_class, "record \"" + p.id + "\" has no source class");
      SftExample e;
      e.prompt = extra_int(p, "prompt_id");
      e.cls = p.source_class == SourceClass::expert ? 0 : 1;
      e.response = extra_int(p, "chosen_rid");
      e.class_reward = p.source_class == SourceClass::expert ? ucpo_cfg.reward_expert
                                                             : ucpo_cfg.reward_suboptimal;
      if (objective == "ucpo") {
        const auto& w = weight_of(p.id);
        if (!w.u_tilde)
          throw Error(errc::invalid_input, "weight record for \"" + p.id + "\" lacks u_tilde");
        e.u_tilde = *w.u_tilde;
      }
      data.push_back(e);
    }
    UcpoConfig obj = ucpo_cfg;
    if (objective == "crlft") obj.gamma = 0.0;
    result = train_toy_policy(ToyPolicy::uniform(n_prompts, 2, n_responses), data, obj, train_cfg);
  }

  std::cerr << "final epoch loss " << fmt_double(result.epoch_loss.back()) << '\n';
  auto out = open_output(output);
  save_policy(result.policy, out);
  if (!trace_path.empty()) {
    auto tout = open_output(trace_path);
    write_trace_csv(result.epoch_loss, tout);
  }
}

inline int cmd_oracle(std::vector<double> mus, std::vector<double> sigmas, std::size_t draws,
                      std::uint64_t seed, const QuadratureFlags& quad, double fail_above) {
  if (mus.empty()) {
    mus = {0.0, 1.0, 2.0, -1.0, 4.0};
    sigmas = {1.0, 0.5, 2.0, 1.0, 1.0};
  }
  if (mus.size() != sigmas.size())
    throw Error(errc::invalid_argument, "--mu and --sigma must be given the same number of times");
  banner("oracle", {{"points", std::to_string(mus.size())},
                    {"draws", std::to_string(draws)},
                    {"n_steps", std::to_string(quad.n_steps)},
                    {"seed", std::to_string(seed)},
                    {"fail_above", fmt_double(fail_above)}});
  const auto cfg = quad.config();
  double overall = 0.0;
  for (std::size_t i = 0; i < mus.size(); ++i) {
    const GapPosterior g{mus[i], sigmas[i], false};
    const auto quad_rec = uncertainty_profile(g, cfg);
    const auto mc = mc_profile(g, draws, derive_stream(seed, "oracle/" + std::to_string(i)));
    const auto row = [&](const char* name, double qv, double mv, double se) {
      const double dev = se > 0.0 ? std::abs(qv - mv) / se : 0.0;
      overall = std::max(overall, dev);
      std::printf("mu=%g sigma=%g %-14s quad=%- .9g mc=%- .9g se=%.3g dev=%.2fse\n", g.mu, g.sigma,
                  name, qv, mv, se, dev);
      return dev;
    };
    row("mean_prob", quad_rec.mean_prob, mc.record.mean_prob, mc.se_mean_prob);
    row("aleatoric", quad_rec.aleatoric, mc.record.aleatoric, mc.se_aleatoric);
    row("h_post_chosen", quad_rec.post_entropy_chosen, mc.record.post_entropy_chosen,
        mc.se_post_chosen);
    row("h_post_rejected", quad_rec.post_entropy_rejected, mc.record.post_entropy_rejected,
        mc.se_post_rejected);
    row("balent", quad_rec.balent, mc.record.balent, mc.se_balent);
    row("u", quad_rec.u, mc.record.u, mc.se_u);
  }
  std::printf("max deviation: %.2f standard errors\n", overall);
  if (overall > fail_above) {
    std::cerr << "oracle deviation exceeds " << fmt_double(fail_above) << " standard errors\n";
    return 1;
  }
  return 0;
}

}  // namespace cli_detail

inline int run_cli(std::vector<std::string> args) {
  using namespace cli_detail;

  CLI::App app{"Bayesian uncertainty profiles and uncertainty-guided curation for preference data"};
  app.name("balent");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  int exit_code = 0;

  // gen-synth
  {
    auto* cmd = app.add_subcommand("gen-synth", "generate a synthetic featurized preference dataset");
    auto cfg = std::make_shared<SynthConfig>();
    auto output = std::make_shared<std::string>();
    cmd->add_option("--n-pairs", cfg->n_pairs, "number of pairs")->required();
    cmd->add_option("--feature-dim", cfg->feature_dim, "feature dimension");
    cmd->add_option("--margin", cfg->quality_margin, "minimum within-prompt quality gap");
    cmd->add_option("--noise-sigma", cfg->noise_sigma, "isotropic feature noise");
    cmd->add_option("--flip-rate", cfg->flip_rate, "mislabel probability (<= 0.5)");
    cmd->add_option("--n-prompts", cfg->n_prompts, "prompt universe size");
    cmd->add_option("--n-responses", cfg->n_responses_per_prompt, "responses per prompt");
    cmd->add_option("--seed", cfg->seed, "random seed");
    cmd->add_option("--output", *output, "output JSONL path")->required();
    cmd->callback([cfg, output] { cmd_gen_synth(*cfg, *output); });
  }

  // train-proxy
  {
    auto* cmd = app.add_subcommand("train-proxy", "train the MC-dropout reward model");
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto hidden = std::make_shared<int>(64);
    auto dropout = std::make_shared<double>(0.1);
    auto hyper = std::make_shared<UrmHyper>();
    hyper->seed = 42;
    cmd->add_option("--input", *input, "training pairs JSONL")->required();
    cmd->add_option("--output", *output, "model checkpoint path")->required();
    cmd->add_option("--hidden-dim", *hidden, "hidden layer width");
    cmd->add_option("--dropout", *dropout, "dropout rate in [0,1)");
    cmd->add_option("--lr", hyper->learning_rate, "SGD learning rate");
    cmd->add_option("--epochs", hyper->epochs, "training epochs");
    cmd->add_option("--batch-size", hyper->batch_size, "minibatch size");
    cmd->add_option("--seed", hyper->seed, "random seed");
    cmd->callback([input, output, hidden, dropout, hyper] {
      cmd_train_proxy(*input, *output, *hidden, *dropout, *hyper);
    });
  }

  // annotate
  {
    auto* cmd = app.add_subcommand("annotate", "fit gap posteriors and write uncertainty profiles");
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto mc_passes = std::make_shared<int>(64);
    auto seed = std::make_shared<std::uint64_t>(42);
    auto paired = std::make_shared<bool>(false);
    auto quad = std::make_shared<QuadratureFlags>();
    cmd->add_option("--input", *input, "pairs JSONL")->required();
    cmd->add_option("--output", *output, "annotated JSONL path")->required();
    cmd->add_option("--model", *model, "proxy checkpoint; scores records lacking reward samples");
    cmd->add_option("--mc-passes", *mc_passes, "MC dropout passes per response");
    cmd->add_option("--seed", *seed, "random seed for per-record MC streams");
    cmd->add_flag("--paired", *paired, "treat MC draws as paired across the two responses");
    quad->attach(cmd);
    cmd->callback([input, output, model, mc_passes, seed, paired, quad] {
      cmd_annotate(*input, *output, *model, *mc_passes, *seed, *paired, *quad);
    });
  }

  // curate
  {
    auto* cmd = app.add_subcommand("curate", "emit a curriculum ordering over annotated records");
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto strategy = std::make_shared<Strategy>(Strategy::random);
    auto direction = std::make_shared<Direction>(Direction::ascending);
    auto seed = std::make_shared<std::uint64_t>(42);
    auto format = std::make_shared<std::string>("ids");
    cmd->add_option("--input", *input, "annotated JSONL")->required();
    cmd->add_option("--output", *output, "plan output path")->required();
    cmd->add_option("--strategy", *strategy, "ordering strategy")
        ->required()
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, Strategy>{{"random", Strategy::random},
                                            {"epistemic", Strategy::epistemic},
                                            {"aleatoric", Strategy::aleatoric},
                                            {"balent", Strategy::balent},
                                            {"bad", Strategy::bad}}));
    cmd->add_option("--direction", *direction, "sort direction for metric strategies")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, Direction>{{"ascending", Direction::ascending},
                                             {"descending", Direction::descending}}));
    cmd->add_option("--seed", *seed, "shuffle seed (random / bad suffix)");
    cmd->add_option("--format", *format, "plan format")
        ->transform(CLI::IsMember({"ids", "jsonl"}));
    cmd->callback([input, output, strategy, direction, seed, format] {
      cmd_curate(*input, *output, *strategy, *direction, *seed, *format);
    });
  }

  // weights
  {
    auto* cmd = app.add_subcommand("weights", "compute per-record training-loss weights");
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto mode = std::make_shared<std::string>();
    auto cfg = std::make_shared<UcpoConfig>();
    cmd->add_option("--input", *input, "annotated JSONL")->required();
    cmd->add_option("--output", *output, "weights JSONL path")->required();
    cmd->add_option("--mode", *mode, "weight family")
        ->required()
        ->transform(CLI::IsMember({"udpo", "ucpo"}));
    cmd->add_option("--gamma", cfg->gamma, "certainty-bonus scale (ucpo)");
    cmd->add_option("--reward-expert", cfg->reward_expert, "class reward for expert records");
    cmd->add_option("--reward-suboptimal", cfg->reward_suboptimal,
                    "class reward for suboptimal records");
    cmd->callback([input, output, mode, cfg] { cmd_weights(*input, *output, *mode, *cfg); });
  }

  // filter
  {
    auto* cmd = app.add_subcommand("filter", "keep records by reward-gap predicate");
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto predicate = std::make_shared<std::string>("positive");
    auto threshold = std::make_shared<double>(0.0);
    cmd->add_option("--input", *input, "annotated JSONL")->required();
    cmd->add_option("--output", *output, "filtered JSONL path")->required();
    cmd->add_option("--predicate", *predicate, "positive: mu > 0; min-gap: mu >= threshold")
        ->transform(CLI::IsMember({"positive", "min-gap"}));
    cmd->add_option("--threshold", *threshold, "minimum gap for min-gap");
    cmd->callback([input, output, predicate, threshold] {
      cmd_filter(*input, *output, *predicate, *threshold);
    });
  }

  // train-policy
  {
    auto* cmd = app.add_subcommand("train-policy", "train the toy tabular policy");
    auto input = std::make_shared<std::string>();
    auto objective = std::make_shared<std::string>();
    auto weights = std::make_shared<std::string>();
    auto order = std::make_shared<std::string>();
    auto udpo_cfg = std::make_shared<UdpoConfig>();
    auto ucpo_cfg = std::make_shared<UcpoConfig>();
    auto train_cfg = std::make_shared<PolicyTrainConfig>();
    train_cfg->seed = 42;
    auto cosine = std::make_shared<bool>(false);
    auto output = std::make_shared<std::string>();
    auto trace = std::make_shared<std::string>();
    cmd->add_option("--input", *input, "pairs JSONL with prompt/response ids")->required();
    cmd->add_option("--objective", *objective, "training objective")
        ->required()
        ->transform(CLI::IsMember({"dpo", "udpo", "crlft", "ucpo"}));
    cmd->add_option("--weights", *weights, "weights JSONL (required for udpo/ucpo)");
    cmd->add_option("--order", *order, "curriculum plan of record ids, one per line");
    cmd->add_option("--beta", udpo_cfg->beta, "implicit-reward temperature");
    cmd->add_option("--gamma", ucpo_cfg->gamma, "certainty-bonus scale (ucpo)");
    cmd->add_option("--reward-expert", ucpo_cfg->reward_expert, "class reward for expert records");
    cmd->add_option("--reward-suboptimal", ucpo_cfg->reward_suboptimal,
                    "class reward for suboptimal records");
    cmd->add_option("--lr", train_cfg->learning_rate, "learning rate");
    cmd->add_option("--epochs", train_cfg->epochs, "training epochs");
    cmd->add_flag("--cosine-lr", *cosine, "cosine learning-rate decay (constant otherwise)");
    cmd->add_option("--seed", train_cfg->seed, "seed recorded with the run");
    cmd->add_option("--output", *output, "policy checkpoint path")->required();
    cmd->add_option("--trace", *trace, "per-epoch loss CSV path");
    cmd->callback([input, objective, weights, order, udpo_cfg, ucpo_cfg, train_cfg, cosine, output,
                   trace] {
      if ((*objective == "udpo" || *objective == "ucpo") && weights->empty())
        throw Error(errc::invalid_argument, *objective + " requires --weights");
      train_cfg->constant_lr = !*cosine;
      cmd_train_policy(*input, *objective, *weights, *order, *udpo_cfg, *ucpo_cfg, *train_cfg,
                       *output, *trace);
    });
  }

  // pair-score
  {
    auto* cmd = app.add_subcommand("pair-score", "benchmark pair score (2W + D) / n * 100");
    auto w = std::make_shared<long long>(0);
    auto d = std::make_shared<long long>(0);
    auto l = std::make_shared<long long>(0);
    cmd->add_option("--w", *w, "wins")->required();
    cmd->add_option("--d", *d, "draws")->required();
    cmd->add_option("--l", *l, "losses")->required();
    cmd->callback([w, d, l] { cmd_pair_score(*w, *d, *l); });
  }

  // report
  {
    auto* cmd = app.add_subcommand("report", "CSV distribution summary of an annotated dataset");
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto bins = std::make_shared<int>(20);
    cmd->add_option("--input", *input, "annotated JSONL")->required();
    cmd->add_option("--output", *output, "report CSV path")->required();
    cmd->add_option("--bins", *bins, "reward-gap histogram bins");
    cmd->callback([input, output, bins] { cmd_report(*input, *output, *bins); });
  }

  // oracle
  {
    auto* cmd = app.add_subcommand(
        "oracle", "cross-check quadrature profiles against the Monte-Carlo estimator");
    auto mus = std::make_shared<std::vector<double>>();
    auto sigmas = std::make_shared<std::vector<double>>();
    auto draws = std::make_shared<std::size_t>(1000000);
    auto seed = std::make_shared<std::uint64_t>(42);
    auto quad = std::make_shared<QuadratureFlags>();
    auto fail_above = std::make_shared<double>(3.0);
    cmd->add_option("--mu", *mus, "gap mean (repeatable; default grid when omitted)");
    cmd->add_option("--sigma", *sigmas, "gap sigma (repeatable, paired with --mu)");
    cmd->add_option("--draws", *draws, "Monte-Carlo draws");
    cmd->add_option("--seed", *seed, "random seed");
    cmd->add_option("--fail-above", *fail_above, "exit 1 when any deviation exceeds this many SE");
    quad->attach(cmd);
    cmd->callback([mus, sigmas, draws, seed, quad, fail_above, &exit_code] {
      exit_code = cmd_oracle(*mus, *sigmas, *draws, *seed, *quad, *fail_above);
    });
  }

  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return exit_code;
}

}  // namespace balent
