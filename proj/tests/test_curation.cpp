#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "doctest.h"

#include "balent/curation.hpp"
#include "test_support.hpp"

using namespace balent;

namespace {

AnnotatedRecord rec(std::string id, double mu, double epistemic, double aleatoric, double balent,
                    double u) {
  AnnotatedRecord r;
  r.pair.id = std::move(id);
  r.posterior = {mu, 1.0, false};
  r.uncertainty.epistemic = epistemic;
  r.uncertainty.aleatoric = aleatoric;
  r.uncertainty.balent = balent;
  r.uncertainty.u = u;
  r.uncertainty.mean_prob = 0.5;
  r.uncertainty.shannon = kLn2;
  return r;
}

std::vector<AnnotatedRecord> random_annotated(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<AnnotatedRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = kEuler * rng.next_unit();
    out.push_back(rec("r-" + std::to_string(i), rng.next_normal(), rng.next_unit(),
                      kLn2 * rng.next_unit(), std::log(u), u));
  }
  return out;
}

bool is_permutation_of(const std::vector<std::string>& ranking,
                       const std::vector<AnnotatedRecord>& records) {
  std::multiset<std::string> a(ranking.begin(), ranking.end());
  std::multiset<std::string> b;
  for (const auto& r : records) b.insert(r.pair.id);
  return a == b;
}

}  // namespace

TEST_CASE("order_by: metric sort with id tie-break") {
  const std::vector<AnnotatedRecord> records{rec("a", 1, 0, 0.1, 0, 1), rec("b", 1, 0, 0.3, 0, 1),
                                             rec("c", 1, 0, 0.2, 0, 1)};
  const auto asc = order_by(records, Strategy::aleatoric, Direction::ascending, 0);
  CHECK(asc.ranking == std::vector<std::string>{"a", "c", "b"});
  const auto desc = order_by(records, Strategy::aleatoric, Direction::descending, 0);
  CHECK(desc.ranking == std::vector<std::string>{"b", "c", "a"});

  // descending is the exact reverse of ascending on tie-free inputs
  auto rev = asc.ranking;
  std::reverse(rev.begin(), rev.end());
  CHECK(rev == desc.ranking);

  // ties break by ascending id in both directions
  const std::vector<AnnotatedRecord> tied{rec("b", 1, 0.5, 0, 0, 1), rec("a", 1, 0.5, 0, 0, 1),
                                          rec("c", 1, 0.1, 0, 0, 1)};
  CHECK(order_by(tied, Strategy::epistemic, Direction::ascending, 0).ranking ==
        std::vector<std::string>{"c", "a", "b"});
  CHECK(order_by(tied, Strategy::epistemic, Direction::descending, 0).ranking ==
        std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("order_by: random strategy is a seeded shuffle") {
  const auto records = random_annotated(50, 7);
  const auto p1 = order_by(records, Strategy::random, Direction::ascending, 99);
  const auto p2 = order_by(records, Strategy::random, Direction::ascending, 99);
  CHECK(p1.ranking == p2.ranking);
  CHECK(p1.direction == Direction::none);
  CHECK(is_permutation_of(p1.ranking, records));
  const auto p3 = order_by(records, Strategy::random, Direction::ascending, 100);
  CHECK(p3.ranking != p1.ranking);
}

TEST_CASE("order_by: permutation property and errors") {
  const auto records = random_annotated(120, 8);
  for (const auto strategy : {Strategy::epistemic, Strategy::aleatoric, Strategy::balent}) {
    const auto plan = order_by(records, strategy, Direction::descending, 0);
    CHECK(is_permutation_of(plan.ranking, records));
  }
  testsup::expect_error(errc::empty_dataset, [] {
    order_by(std::vector<AnnotatedRecord>{}, Strategy::random, Direction::ascending, 0);
  });
  testsup::expect_error(errc::invalid_argument, [&] {
    order_by(records, Strategy::bad, Direction::ascending, 0);
  });
}

TEST_CASE("bad_curriculum: positive gaps by descending balent, negatives shuffled") {
  const std::vector<AnnotatedRecord> records{rec("a", 0.5, 0, 0, 0.3, 1),
                                             rec("b", 1.5, 0, 0, 0.7, 1),
                                             rec("c", -0.5, 0, 0, 0.9, 1)};
  const auto plan = bad_curriculum(records, 1);
  REQUIRE(plan.ranking.size() == 3);
  CHECK(plan.ranking[0] == "b");
  CHECK(plan.ranking[1] == "a");
  CHECK(plan.ranking[2] == "c");

  // all positive: pure balent-descending order
  const std::vector<AnnotatedRecord> pos{rec("a", 1, 0, 0, 0.1, 1), rec("b", 2, 0, 0, 0.9, 1),
                                         rec("c", 3, 0, 0, 0.5, 1)};
  CHECK(bad_curriculum(pos, 0).ranking == std::vector<std::string>{"b", "c", "a"});

  // all non-positive: a reproducible seeded shuffle
  const std::vector<AnnotatedRecord> neg{rec("a", -1, 0, 0, 0.1, 1), rec("b", -2, 0, 0, 0.9, 1),
                                         rec("c", 0.0, 0, 0, 0.5, 1)};
  CHECK(bad_curriculum(neg, 12).ranking == bad_curriculum(neg, 12).ranking);
  CHECK(is_permutation_of(bad_curriculum(neg, 12).ranking, neg));
}

TEST_CASE("bad_curriculum: structural property") {
  const auto records = random_annotated(200, 9);
  const auto plan = bad_curriculum(records, 3);
  CHECK(is_permutation_of(plan.ranking, records));

  std::map<std::string, const AnnotatedRecord*> by_id;
  for (const auto& r : records) by_id[r.pair.id] = &r;
  std::size_t n_pos = 0;
  for (const auto& r : records) n_pos += r.posterior.mu > 0.0;

  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < plan.ranking.size(); ++i) {
    const auto* r = by_id.at(plan.ranking[i]);
    if (i < n_pos) {
      CHECK(r->posterior.mu > 0.0);
      CHECK(r->uncertainty.balent <= prev);
      prev = r->uncertainty.balent;
    } else {
      CHECK(r->posterior.mu <= 0.0);
    }
  }
}

TEST_CASE("filter_by_gap") {
  const std::vector<AnnotatedRecord> records{rec("a", 1, 0, 0, 0, 1), rec("b", -1, 0, 0, 0, 1),
                                             rec("c", 2, 0, 0, 0, 1)};
  CHECK(filter_by_gap(records, GapFilter::positive()).size() == 2);
  const auto kept = filter_by_gap(records, GapFilter::min_gap(1.5));
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].pair.id == "c");
  CHECK(filter_by_gap(records, GapFilter::min_gap(-std::numeric_limits<double>::infinity())).size() ==
        records.size());
  // order preserved
  const auto pos = filter_by_gap(records, GapFilter::positive());
  CHECK(pos[0].pair.id == "a");
  CHECK(pos[1].pair.id == "c");
}

TEST_CASE("udpo_weights: definition and normalization") {
  // u = [0, e] -> c_u = [2, 0], exactly
  {
    const std::vector<AnnotatedRecord> records{rec("a", 0, 0, 0, 0, 0.0),
                                               rec("b", 0, 0, 0, 0, kEuler)};
    const auto w = udpo_weights(records);
    CHECK(*w[0].c_u == 2.0);
    CHECK(*w[1].c_u == 0.0);
  }
  // all u equal -> all weights 1
  {
    const std::vector<AnnotatedRecord> records{rec("a", 0, 0, 0, 0, 1.3), rec("b", 0, 0, 0, 0, 1.3),
                                               rec("c", 0, 0, 0, 0, 1.3)};
    for (const auto& w : udpo_weights(records)) CHECK(*w.c_u == doctest::Approx(1.0).epsilon(1e-15));
  }
  // u = [0, e, e] -> [3, 0, 0]
  {
    const std::vector<AnnotatedRecord> records{rec("a", 0, 0, 0, 0, 0.0),
                                               rec("b", 0, 0, 0, 0, kEuler),
                                               rec("c", 0, 0, 0, 0, kEuler)};
    const auto w = udpo_weights(records);
    CHECK(*w[0].c_u == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(*w[1].c_u == 0.0);
    CHECK(*w[2].c_u == 0.0);
  }
  // mean is 1 on random vectors; scaling the slack leaves weights unchanged
  {
    const auto records = random_annotated(500, 10);
    const auto w = udpo_weights(records);
    double sum = 0.0;
    for (const auto& x : w) {
      CHECK(*x.c_u >= 0.0);
      sum += *x.c_u;
    }
    CHECK(sum / 500.0 == doctest::Approx(1.0).epsilon(1e-9));

    auto scaled = records;
    for (auto& r : scaled) r.uncertainty.u = kEuler - 0.25 * (kEuler - r.uncertainty.u);
    const auto w2 = udpo_weights(scaled);
    for (std::size_t i = 0; i < w.size(); ++i)
      CHECK(*w2[i].c_u == doctest::Approx(*w[i].c_u).epsilon(1e-12));
  }
  // degenerate: every u equals e
  testsup::expect_error(errc::degenerate_weights, [] {
    const std::vector<AnnotatedRecord> records{rec("a", 0, 0, 0, 0, kEuler),
                                               rec("b", 0, 0, 0, 0, kEuler)};
    udpo_weights(records);
  });
  testsup::expect_error(errc::empty_dataset,
                        [] { udpo_weights(std::vector<AnnotatedRecord>{}); });
  testsup::expect_error(errc::invalid_input, [] {
    udpo_weights(std::vector<AnnotatedRecord>{rec("a", 0, 0, 0, 0, 3.0)});
  });
}

TEST_CASE("ucpo_weights: default constants") {
  auto expert = rec("a", 0, 0, 0, 0, 0.2);
  expert.pair.source_class = SourceClass::expert;
  auto subopt = rec("b", 0, 0, 0, 0, 1.4);
  subopt.pair.source_class = SourceClass::suboptimal;
  const std::vector<AnnotatedRecord> records{expert, subopt};
  const auto w = ucpo_weights(records);
  // expert at the dataset-min u: 1.0 + 0.1 * (1 - 0)
  CHECK(*w[0].u_tilde == 0.0);
  CHECK(*w[0].ucpo_weight == doctest::Approx(1.1).epsilon(1e-12));
  // suboptimal at the dataset-max u: 0.1 + 0.1 * 0
  CHECK(*w[1].u_tilde == 1.0);
  CHECK(*w[1].ucpo_weight == doctest::Approx(0.1).epsilon(1e-12));

  // all u equal: u_tilde is 0.5 everywhere
  auto e2 = expert;
  e2.pair.id = "c";
  e2.uncertainty.u = 0.2;
  const std::vector<AnnotatedRecord> flat{expert, e2};
  for (const auto& x : ucpo_weights(flat)) {
    CHECK(*x.u_tilde == 0.5);
    CHECK(*x.ucpo_weight == doctest::Approx(1.0 + 0.1 * 0.5).epsilon(1e-12));
  }

  testsup::expect_error(errc::missing_class, [] {
    ucpo_weights(std::vector<AnnotatedRecord>{rec("a", 0, 0, 0, 0, 1.0)});
  });
}

TEST_CASE("pair_score: published triples and edge cases") {
  CHECK(pair_score(58, 12, 10) == 160.0);
  CHECK(pair_score(0, 160, 0) == 100.0);
  CHECK(pair_score(76, 69, 15) == 138.125);
  CHECK(pair_score(65, 69, 26) == 124.375);

  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", pair_score(76, 69, 15));
  CHECK(std::string(buf) == "138.1");
  std::snprintf(buf, sizeof buf, "%.1f", pair_score(65, 69, 26));
  CHECK(std::string(buf) == "124.4");

  // W = L pins the score at exactly 100
  Rng rng(14);
  for (int i = 0; i < 50; ++i) {
    const long long w = static_cast<long long>(rng.next_below(500));
    const long long d = static_cast<long long>(rng.next_below(500));
    if (w + d == 0) continue;
    CHECK(pair_score(w, d, w) == 100.0);
  }

  testsup::expect_error(errc::empty_dataset, [] { pair_score(0, 0, 0); });
  testsup::expect_error(errc::invalid_argument, [] { pair_score(-1, 2, 3); });
}

TEST_CASE("report: histogram and correlation sections") {
  // single record: one occupied bin, undefined correlations
  {
    std::ostringstream out;
    write_report(std::vector<AnnotatedRecord>{rec("a", 1.0, 0.1, 0.2, 0.0, 1.0)}, out);
    const std::string s = out.str();
    CHECK(s.find("bin,gap_lo,gap_hi,count,mean_u,mean_aleatoric,mean_epistemic\n") == 0);
    CHECK(s.find("0,1,1,1,1,0.2,0.1\n") != std::string::npos);
    CHECK(s.find("u,aleatoric,nan,undefined") != std::string::npos);
  }
  // identical u: zero-variance column flagged
  {
    std::ostringstream out;
    write_report(std::vector<AnnotatedRecord>{rec("a", 0.0, 0.1, 0.2, 0.0, 1.0),
                                              rec("b", 1.0, 0.3, 0.4, 0.0, 1.0)},
                 out);
    CHECK(out.str().find("u,aleatoric,nan,zero_variance") != std::string::npos);
  }
  // deterministic bytes and positive correlations on a monotone family
  {
    std::vector<AnnotatedRecord> records;
    std::vector<double> us, ales, epis;
    for (int i = 0; i < 40; ++i) {
      records.push_back(
          rec("r-" + std::to_string(i), -2.0 + 0.1 * i, 0.01 * i, 0.015 * i, 0.0, 0.05 * i));
      us.push_back(0.05 * i);
      ales.push_back(0.015 * i);
      epis.push_back(0.01 * i);
    }
    std::ostringstream a, b;
    write_report(records, a);
    write_report(records, b);
    CHECK(a.str() == b.str());
    CHECK(pearson(us, ales) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pearson(us, epis) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a.str().find("u,aleatoric,") != std::string::npos);
    CHECK(a.str().find(",ok\n") != std::string::npos);
  }
  testsup::expect_error(errc::empty_dataset, [] {
    std::ostringstream out;
    write_report(std::vector<AnnotatedRecord>{}, out);
  });
}

TEST_CASE("plan and weight serialization round-trips") {
  const auto records = random_annotated(20, 15);
  const auto plan = order_by(records, Strategy::balent, Direction::descending, 0);
  std::ostringstream out;
  write_plan_ids(plan, out);
  std::istringstream in(out.str());
  CHECK(read_plan_ids(in) == plan.ranking);

  std::ostringstream jout;
  write_plan_jsonl(plan, jout);
  std::istringstream jin(jout.str());
  std::string first;
  std::getline(jin, first);
  const auto j = json::parse(first);
  CHECK(j.at("id") == plan.ranking[0]);
  CHECK(j.at("rank") == 0);

  const auto w = udpo_weights(records);
  std::ostringstream wout;
  write_weights(w, wout);
  std::istringstream win(wout.str());
  const auto back = read_weights(win);
  REQUIRE(back.size() == w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(back[i].id == w[i].id);
    CHECK(*back[i].c_u == *w[i].c_u);
    CHECK_FALSE(back[i].u_tilde.has_value());
  }
}
