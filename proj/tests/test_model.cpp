#include <cmath>
#include <sstream>
#include <string>

#include "doctest.h"

#include "balent/model.hpp"
#include "balent/proxy.hpp"
#include "balent/rng.hpp"
#include "balent/uncertainty.hpp"
#include "test_support.hpp"

using namespace balent;

TEST_CASE("parse_dataset: field mapping and defaults") {
  std::istringstream in(
      R"({"id":"a","reward_samples_chosen":[1,2,3],"reward_samples_rejected":[0,1,2]})"
      "\n");
  const auto recs = parse_dataset(in);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].id == "a");
  CHECK(recs[0].reward_samples_chosen == std::vector<double>{1, 2, 3});
  CHECK(recs[0].reward_samples_rejected == std::vector<double>{0, 1, 2});
  CHECK(recs[0].source_class == SourceClass::unlabeled);
  CHECK_FALSE(recs[0].instruction.has_value());
  CHECK_FALSE(recs[0].gap_override.has_value());
}

TEST_CASE("parse_dataset: typed errors") {
  testsup::expect_error(errc::duplicate_id, [] {
    std::istringstream in(
        R"({"id":"a","reward_samples_chosen":[1,2],"reward_samples_rejected":[0,1]})"
        "\n"
        R"({"id":"a","reward_samples_chosen":[1,2],"reward_samples_rejected":[0,1]})"
        "\n");
    parse_dataset(in);
  });

  // JSON carries non-finite samples as null
  testsup::expect_error(errc::invalid_sample, [] {
    std::istringstream in(
        R"({"id":"a","reward_samples_chosen":[1.0,null],"reward_samples_rejected":[0,1]})" "\n");
    parse_dataset(in);
  });

  testsup::expect_error(errc::unresolvable, [] {
    std::istringstream in(R"({"id":"a","reward_samples_chosen":[1,2]})" "\n");
    parse_dataset(in);
  });

  // malformed line reports its number
  try {
    std::istringstream in(
        R"({"id":"a","reward_samples_chosen":[1,2],"reward_samples_rejected":[0,1]})"
        "\n{not json\n");
    parse_dataset(in);
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.code() == errc::parse_error);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  testsup::expect_error(errc::parse_error, [] {
    std::istringstream in("[1,2,3]\n");
    parse_dataset(in);
  });
  testsup::expect_error(errc::parse_error, [] {
    std::istringstream in(R"({"id":"a","source_class":"great"})" "\n");
    parse_dataset(in);
  });
  testsup::expect_error(errc::parse_error, [] {
    std::istringstream in(R"({"id":"a","gap_override":{"mu":0,"sigma":-1}})" "\n");
    parse_dataset(in);
  });
  testsup::expect_error(errc::parse_error, [] {
    std::istringstream in(R"({"reward_samples_chosen":[1,2]})" "\n");
    parse_dataset(in);
  });
}

TEST_CASE("parse_dataset: gap sources and relaxed mode") {
  // override alone is a valid gap source
  {
    std::istringstream in(R"({"id":"a","gap_override":{"mu":1.5,"sigma":0.25}})" "\n");
    const auto recs = parse_dataset(in);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].gap_override->mu == 1.5);
  }
  // class label + chosen samples is a valid gap source
  {
    std::istringstream in(
        R"({"id":"a","source_class":"expert","reward_samples_chosen":[1,2]})" "\n");
    CHECK(parse_dataset(in).size() == 1);
  }
  // relaxed mode admits unresolvable records (pre-scoring pipelines)
  {
    std::istringstream in(R"({"id":"a"})" "\n");
    CHECK(parse_dataset(in, ParseOptions{.require_gap_source = false}).size() == 1);
  }
  // blank lines are skipped, order is file order
  {
    std::istringstream in(
        "\n"
        R"({"id":"b","gap_override":{"mu":0,"sigma":1}})"
        "\n\n"
        R"({"id":"a","gap_override":{"mu":0,"sigma":1}})"
        "\n");
    const auto recs = parse_dataset(in);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].id == "b");
    CHECK(recs[1].id == "a");
  }
}

TEST_CASE("unknown keys are preserved verbatim") {
  std::istringstream in(
      R"({"id":"a","gap_override":{"mu":1,"sigma":1},"note":"keep me","nested":{"k":[1,2.5]}})"
      "\n");
  const auto recs = parse_dataset(in);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].extra.at("note") == "keep me");

  std::ostringstream out;
  write_dataset(recs, out);
  CHECK(out.str().find("\"note\":\"keep me\"") != std::string::npos);
  CHECK(out.str().find("\"nested\":{\"k\":[1,2.5]}") != std::string::npos);
}

namespace {

std::vector<PreferencePair> random_records(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PreferencePair> out;
  for (std::size_t i = 0; i < n; ++i) {
    PreferencePair p;
    p.id = "rec-" + std::to_string(i);
    if (rng.next_below(2)) p.instruction = "ask " + std::to_string(rng.next_u64());
    if (rng.next_below(2)) p.chosen_text = "good\n\"quoted\" text";
    if (rng.next_below(3) == 0) p.rejected_text = "bad";
    const auto cls = rng.next_below(3);
    p.source_class = cls == 0   ? SourceClass::unlabeled
                     : cls == 1 ? SourceClass::expert
                                : SourceClass::suboptimal;
    const std::size_t k = 2 + rng.next_below(6);
    for (std::size_t j = 0; j < k; ++j)
      p.reward_samples_chosen.push_back(rng.next_normal() * std::exp(4.0 * rng.next_unit()));
    if (p.source_class == SourceClass::unlabeled || rng.next_below(2)) {
      for (std::size_t j = 0; j < k; ++j)
        p.reward_samples_rejected.push_back(rng.next_normal() * 1e-3);
    }
    if (rng.next_below(4) == 0)
      p.gap_override = GapOverride{rng.next_normal(), 0.1 + rng.next_unit()};
    p.extra = json{{"tag", static_cast<std::int64_t>(rng.next_u64() >> 1)},
                   {"weights", json::array({rng.next_unit(), rng.next_unit()})}};
    out.push_back(std::move(p));
  }
  return out;
}

void check_pairs_equal(const PreferencePair& a, const PreferencePair& b) {
  CHECK(a.id == b.id);
  CHECK(a.instruction == b.instruction);
  CHECK(a.chosen_text == b.chosen_text);
  CHECK(a.rejected_text == b.rejected_text);
  CHECK(a.source_class == b.source_class);
  CHECK(a.reward_samples_chosen == b.reward_samples_chosen);
  CHECK(a.reward_samples_rejected == b.reward_samples_rejected);
  CHECK(a.gap_override.has_value() == b.gap_override.has_value());
  if (a.gap_override) {
    CHECK(a.gap_override->mu == b.gap_override->mu);
    CHECK(a.gap_override->sigma == b.gap_override->sigma);
  }
}

}  // namespace

TEST_CASE("round-trip: parse after write is the identity on records") {
  const auto records = random_records(100, 20240917);
  std::ostringstream out;
  write_dataset(records, out);
  std::istringstream in(out.str());
  const auto back = parse_dataset(in);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    check_pairs_equal(records[i], back[i]);
    CHECK(records[i].extra == back[i].extra);
  }

  // the same holds through the annotated writer
  std::vector<AnnotatedRecord> ann;
  for (const auto& r : records) ann.push_back(annotate(r));
  std::ostringstream out2;
  write_annotated(ann, out2);
  std::istringstream in2(out2.str());
  const auto back2 = parse_dataset(in2);
  REQUIRE(back2.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) check_pairs_equal(records[i], back2[i]);
}

TEST_CASE("write failure raises io_error") {
  std::ostringstream bad;
  bad.setstate(std::ios::badbit);
  testsup::expect_error(errc::io_error, [&] { write_dataset(random_records(1, 7), bad); });
}

TEST_CASE("parsing is total: arbitrary lines yield records or typed errors") {
  Rng rng(404);
  const char alphabet[] = "{}[]\",:a0.5嗯\\ne-";
  for (int trial = 0; trial < 300; ++trial) {
    std::string line;
    const std::size_t len = rng.next_below(60);
    for (std::size_t i = 0; i < len; ++i)
      line += alphabet[rng.next_below(sizeof alphabet - 1)];
    std::istringstream in(line + "\n");
    try {
      const auto recs = parse_dataset(in);
      for (const auto& r : recs) CHECK_FALSE(r.id.empty());
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("line") != std::string::npos);
    }
    // anything else escaping would fail the test by doctest's uncaught-exception rule
  }
}
