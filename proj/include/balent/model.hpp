#pragma once
// Preference-pair records and their JSONL form. Parsing is strict: every
// input line either yields a record or a typed Error carrying the line
// number; nothing is dropped silently. Unknown keys ride along in `extra`
// and are written back verbatim, so annotation pipelines compose.

#include <cmath>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "balent/errors.hpp"
#include "balent/logit_normal.hpp"

namespace balent {

using json = nlohmann::json;

enum class SourceClass { unlabeled, expert, suboptimal };

inline const char* to_string(SourceClass c) {
  switch (c) {
    case SourceClass::expert: return "expert";
    case SourceClass::suboptimal: return "suboptimal";
    default: return "unlabeled";
  }
}

struct GapOverride {
  double mu = 0.0;
  double sigma = 0.0;
};

// One dataset record. All mathematics depends only on the reward samples and
// the optional override; texts are carried opaquely for provenance.
struct PreferencePair {
  std::string id;
  std::optional<std::string> instruction;
  std::optional<std::string> chosen_text;
  std::optional<std::string> rejected_text;
  SourceClass source_class = SourceClass::unlabeled;
  std::vector<double> reward_samples_chosen;
  std::vector<double> reward_samples_rejected;
  std::optional<GapOverride> gap_override;
  json extra = json::object();  // unknown keys, preserved on write

  // a record is resolvable when some route to a gap posterior exists:
  // paired samples, an override, or a class label usable with a baseline
  bool has_gap_source() const {
    if (gap_override) return true;
    if (reward_samples_chosen.empty()) return false;
    return !reward_samples_rejected.empty() || source_class != SourceClass::unlabeled;
  }
};

struct ParseOptions {
  // relaxed mode admits records without any gap source (e.g. freshly
  // generated synthetic pairs that still await proxy scoring)
  bool require_gap_source = true;
};

namespace detail {

inline Error parse_err(std::size_t line_no, const std::string& what) {
  return Error(errc::parse_error, "line " + std::to_string(line_no) + ": " + what);
}

inline std::vector<double> samples_from_json(const json& arr, const std::string& id,
                                             const char* key, std::size_t line_no) {
  if (!arr.is_array()) throw parse_err(line_no, std::string(key) + " must be an array");
  std::vector<double> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& el = arr[i];
    // JSON cannot carry non-finite numbers; null is their serialized form
    double v = std::numeric_limits<double>::quiet_NaN();
    if (el.is_number()) {
      v = el.get<double>();
    } else if (!el.is_null()) {
      throw parse_err(line_no, std::string(key) + " holds a non-numeric element");
    }
    if (!std::isfinite(v))
      throw Error(errc::invalid_sample, "record \"" + id + "\": non-finite sample at index " +
                                            std::to_string(i) + " of " + key);
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

inline PreferencePair pair_from_json(const json& j, std::size_t line_no,
                                     const ParseOptions& opt = {}) {
  if (!j.is_object()) throw detail::parse_err(line_no, "record is not a JSON object");

  PreferencePair p;
  const auto id_it = j.find("id");
  if (id_it == j.end() || !id_it->is_string())
    throw detail::parse_err(line_no, "missing or non-string \"id\"");
  p.id = id_it->get<std::string>();
  if (p.id.empty()) throw detail::parse_err(line_no, "empty \"id\"");

  const auto opt_string = [&](const char* key) -> std::optional<std::string> {
    const auto it = j.find(key);
    if (it == j.end()) return std::nullopt;
    if (!it->is_string()) throw detail::parse_err(line_no, std::string(key) + " must be a string");
    return it->get<std::string>();
  };
  p.instruction = opt_string("instruction");
  p.chosen_text = opt_string("chosen_text");
  p.rejected_text = opt_string("rejected_text");

  if (const auto it = j.find("source_class"); it != j.end()) {
    if (!it->is_string()) throw detail::parse_err(line_no, "source_class must be a string");
    const std::string s = it->get<std::string>();
    if (s == "expert") {
      p.source_class = SourceClass::expert;
    } else if (s == "suboptimal") {
      p.source_class = SourceClass::suboptimal;
    } else if (s == "unlabeled") {
      p.source_class = SourceClass::unlabeled;
    } else {
      throw detail::parse_err(line_no, "unknown source_class \"" + s + "\"");
    }
  }

  if (const auto it = j.find("reward_samples_chosen"); it != j.end())
    p.reward_samples_chosen = detail::samples_from_json(*it, p.id, "reward_samples_chosen", line_no);
  if (const auto it = j.find("reward_samples_rejected"); it != j.end())
    p.reward_samples_rejected = detail::samples_from_json(*it, p.id, "reward_samples_rejected", line_no);

  if (const auto it = j.find("gap_override"); it != j.end()) {
    if (!it->is_object() || !it->contains("mu") || !it->contains("sigma") ||
        !(*it)["mu"].is_number() || !(*it)["sigma"].is_number())
      throw detail::parse_err(line_no, "gap_override must be {\"mu\": number, \"sigma\": number}");
    GapOverride o{(*it)["mu"].get<double>(), (*it)["sigma"].get<double>()};
    if (!std::isfinite(o.mu) || !std::isfinite(o.sigma) || o.sigma < 0.0)
      throw detail::parse_err(line_no, "gap_override requires finite mu and sigma >= 0");
    p.gap_override = o;
  }

  p.extra = j;
  for (const char* key : {"id", "instruction", "chosen_text", "rejected_text", "source_class",
                          "reward_samples_chosen", "reward_samples_rejected", "gap_override"})
    p.extra.erase(key);

  if (opt.require_gap_source && !p.has_gap_source())
    throw Error(errc::unresolvable,
                "record \"" + p.id + "\": no gap source (rejected samples, override, or class baseline)");
  return p;
}

inline json pair_to_json(const PreferencePair& p) {
  json j = p.extra.is_object() ? p.extra : json::object();
  j["id"] = p.id;
  if (p.instruction) j["instruction"] = *p.instruction;
  if (p.chosen_text) j["chosen_text"] = *p.chosen_text;
  if (p.rejected_text) j["rejected_text"] = *p.rejected_text;
  if (p.source_class != SourceClass::unlabeled) j["source_class"] = to_string(p.source_class);
  if (!p.reward_samples_chosen.empty()) j["reward_samples_chosen"] = p.reward_samples_chosen;
  if (!p.reward_samples_rejected.empty()) j["reward_samples_rejected"] = p.reward_samples_rejected;
  if (p.gap_override)
    j["gap_override"] = json{{"mu", p.gap_override->mu}, {"sigma", p.gap_override->sigma}};
  return j;
}

// One record per well-formed line, in file order. Whitespace-only lines are
// skipped; anything else must parse.
inline std::vector<PreferencePair> parse_dataset(std::istream& in, const ParseOptions& opt = {}) {
  std::vector<PreferencePair> out;
  std::set<std::string> seen;
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
    PreferencePair p = pair_from_json(j, line_no, opt);
    if (!seen.insert(p.id).second)
      throw Error(errc::duplicate_id,
                  "duplicate id \"" + p.id + "\" at line " + std::to_string(line_no));
    out.push_back(std::move(p));
  }
  if (in.bad()) throw Error(errc::io_error, "read failure");
  return out;
}

inline void write_dataset(std::span<const PreferencePair> records, std::ostream& out) {
  for (const auto& p : records) out << pair_to_json(p).dump() << '\n';
  out.flush();
  if (!out) throw Error(errc::io_error, "write failure");
}

}  // namespace balent
