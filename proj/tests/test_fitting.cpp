#include <doctest.h>

#include <sstream>

#include "nppc/fitting.hpp"
#include "nppc/reference.hpp"

using namespace nppc;

namespace {

GridSpec small_grid() {
  GridSpec g;
  g.n = {5, 45, 3};
  g.g = {2, 60, 3};
  g.w = {0.3, 1.2, 2};
  g.o = {1, 6, 2};
  g.s = {1.5, 4.5, 4};
  return g;
}

FitOptions fast_options(Objective objective = Objective::JSD) {
  FitOptions o;
  o.objective = objective;
  o.budget.jsd_samples = 600;
  o.budget.kappa_repeats = 120;
  return o;
}

}  // namespace

TEST_CASE("ranges parse and enumerate") {
  const auto r = Range::parse("1:5:5");
  CHECK(r.values() == std::vector<double>{1, 2, 3, 4, 5});
  CHECK(Range::parse("2.5").values() == std::vector<double>{2.5});
  CHECK(Range::parse(r.to_string()) == r);
  CHECK_THROWS(Range::parse("5:1:3"));
  CHECK_THROWS(Range::parse("1:2:0"));
  CHECK_THROWS(Range::parse("a:b:c"));
}

TEST_CASE("gridded n is rounded and deduplicated") {
  GridSpec g;
  g.n = {1, 3, 5};
  CHECK(g.n_values() == std::vector<int>{1, 2, 3});
  g.g = {1, 1, 1};
  g.w = {1, 1, 1};
  g.o = {1, 1, 1};
  g.s = {3, 3, 1};
  CHECK(g.cardinality() == 3);
  CHECK(enumerate_grid(g).size() == 3);
}

TEST_CASE("grid validation rejects bad ranges") {
  GridSpec g;
  g.o = {0, 5, 3};
  CHECK_THROWS(g.validate(Scale{}));
  g = {};
  g.s = {0, 5, 3};
  CHECK_THROWS(g.validate(Scale{}));
  g = {};
  g.decoders.clear();
  CHECK_THROWS(g.validate(Scale{}));
}

TEST_CASE("population energy") {
  CHECK(population_energy({11, 10, 0.5, 5, 3}) == 165.0);
  CHECK(population_energy({1, 1, 1, 1, 1}) == 2.0);
}

TEST_CASE("argmin prefers the lowest energy among ties") {
  const std::vector<CognitionVector> pts{{10, 5, 1, 5, 3}, {2, 5, 1, 1, 3}, {3, 1, 1, 1, 3}, {1, 50, 1, 50, 3}};
  // Two decoders per point, point-major.
  const std::vector<double> scores{0.2, 0.1, 0.1, 0.3, 0.1 + 1e-12, 0.5, 0.1, 0.1};
  const auto best = reduce_argmin(scores, pts, 2, Objective::JSD);
  // Ties: (0,d1) E=100, (1,d0) E=12, (2,d0) E=6, (3,*) E=100.
  CHECK(best.index == 4);
  CHECK(best.ties == 5);
  const auto exact = reduce_argmin(scores, pts, 2, Objective::Kappa);
  CHECK(exact.ties == 4);
  CHECK(exact.index == 2);
}

TEST_CASE("argmin falls back to grid order at equal energy") {
  const std::vector<CognitionVector> pts{{2, 1, 1, 1, 3}, {1, 3, 1, 1, 3}, {4, 0.5, 1, 0.5, 3}};
  const std::vector<double> scores{0.0, 0.0, 0.0};
  const auto best = reduce_argmin(scores, pts, 1, Objective::JSD);
  CHECK(best.index == 0);
  CHECK(best.ties == 3);
  const auto filtered = reduce_argmin({0.3, 0.1, 0.2, 0.05}, {pts[0], pts[1]}, 2, Objective::JSD, {0});
  CHECK(filtered.index == 2);
}

TEST_CASE("candidate seeds are keyed by the vector only") {
  const CognitionVector a{10, 2, 1, 3, 2.5};
  CHECK(candidate_seed(1, a) == candidate_seed(1, a));
  CHECK(candidate_seed(1, a) != candidate_seed(2, a));
  CognitionVector b = a;
  b.s = 2.5000000000000004;
  CHECK(candidate_seed(1, a) != candidate_seed(1, b));
}

TEST_CASE("eligibility by objective") {
  CHECK(fit_eligible({1, 1, {3, 4}}, Objective::JSD));
  CHECK_FALSE(fit_eligible({1, 1, {3}}, Objective::JSD));
  CHECK(fit_eligible({1, 1, {3, 4, 4, 4, 2}}, Objective::Kappa));
  CHECK_FALSE(fit_eligible({1, 1, {3, 4, 4, 4}}, Objective::Kappa));
}

TEST_CASE("planted vector scores below a distant one") {
  const Scale scale;
  SamplingBudget budget;
  budget.jsd_samples = 2000;
  Engine eng = make_engine(77);
  for (int i = 0; i < 10; ++i) {
    const CognitionVector planted{static_cast<int>(20 + uniform_below(eng, 80)), 20 + 60 * uniform01(eng),
                                  0.3 + uniform01(eng), 1 + 3 * uniform01(eng), 1.5 + 0.8 * uniform01(eng)};
    CognitionVector far = planted;
    far.s = 4.6;
    const auto fb = sample_feedback(planted, DecoderSpec::mld(), scale, 5, derive_seed(9, Stream::Synth, i));
    std::vector<int> ratings;
    for (double v : fb.values) ratings.push_back(static_cast<int>(std::floor(v + 0.5)));
    const auto observed = EmpiricalFeedback::from_ratings(ratings);
    const double near_score =
        score_candidate(observed, planted, DecoderSpec::mld(), Objective::JSD, budget, scale, 3);
    const double far_score = score_candidate(observed, far, DecoderSpec::mld(), Objective::JSD, budget, scale, 3);
    CHECK(near_score < far_score);
  }
}

TEST_CASE("exact generating vector of constant feedback scores zero and wins by energy") {
  GridSpec g;
  g.n = {5, 5, 1};
  g.g = {1000, 3000, 3};
  g.w = {0.1, 0.1, 1};
  g.o = {0.01, 0.01, 1};
  g.s = {1, 5, 5};
  g.decoders = {DecoderSpec::mvd()};
  const auto observed = EmpiricalFeedback::from_ratings({3, 3, 3, 3, 3});
  const auto fit = fit_pair(observed, g, fast_options(), 4);
  CHECK(fit.score.value == 0.0);
  CHECK(fit.ambiguity >= 3);
  CHECK(fit.xi == CognitionVector{5, 1000, 0.1, 0.01, 3});
}

TEST_CASE("candidate table matches the serial reference build") {
  const Scale scale;
  const auto grid = small_grid();
  for (Objective obj : {Objective::JSD, Objective::Kappa}) {
    const auto opts = fast_options(obj);
    const auto fast = CandidateTable::build(grid, obj, opts.budget, scale, 5, 3);
    const auto slow = reference::build_candidate_table(grid, obj, opts.budget, scale, 5);
    CHECK(fast == slow);
  }
}

TEST_CASE("table fit equals brute-force scoring") {
  const Scale scale;
  const auto grid = small_grid();
  for (Objective obj : {Objective::JSD, Objective::Kappa}) {
    const auto opts = fast_options(obj);
    for (const std::vector<int>& ratings : {std::vector<int>{3, 3, 4, 3, 3}, std::vector<int>{1, 2, 1, 1, 1},
                                            std::vector<int>{2, 5, 3, 4, 1}}) {
      const auto observed = EmpiricalFeedback::from_ratings(ratings);
      const auto fast = fit_pair(observed, grid, opts, 6);
      const auto slow = reference::fit_pair(observed, grid, obj, opts.budget, scale, 6);
      CHECK(same_fit(fast, slow));
      CHECK(fast.energy == population_energy(fast.xi));
    }
  }
}

TEST_CASE("fit is invariant to the worker count") {
  auto opts = fast_options();
  const auto observed = EmpiricalFeedback::from_ratings({4, 4, 5, 4, 3});
  const auto one = fit_pair(observed, small_grid(), opts, 8);
  opts.workers = 4;
  CHECK(same_fit(one, fit_pair(observed, small_grid(), opts, 8)));
}

TEST_CASE("a superset grid never scores worse") {
  const auto opts = fast_options();
  auto sub = small_grid();
  auto super = sub;
  super.s = {1.5, 4.5, 7};  // contains every point of the 4-value axis
  super.g = {2, 60, 5};
  for (const std::vector<int>& ratings : {std::vector<int>{2, 2, 3, 2, 2}, std::vector<int>{5, 4, 5, 5, 4}}) {
    const auto observed = EmpiricalFeedback::from_ratings(ratings);
    CHECK(fit_pair(observed, super, opts, 2).score.value <= fit_pair(observed, sub, opts, 2).score.value);
  }
}

TEST_CASE("kappa scores are one minus kappa") {
  const Scale scale;
  const auto opts = fast_options(Objective::Kappa);
  const auto observed = EmpiricalFeedback::from_ratings({3, 3, 3, 4, 3});
  const CognitionVector xi{20, 10, 0.5, 2, 3};
  const double s = score_candidate(observed, xi, DecoderSpec::wad(), Objective::Kappa, opts.budget, scale, 1);
  CHECK(s == doctest::Approx(1.0 - cohen_kappa(observed, xi, DecoderSpec::wad(), scale, opts.budget.kappa_repeats,
                                               candidate_seed(1, xi))));
}

TEST_CASE("refinement never worsens the grid result") {
  auto opts = fast_options();
  opts.refine_rounds = 2;
  const auto observed = EmpiricalFeedback::from_ratings({2, 3, 2, 2, 3});
  auto plain = opts;
  plain.refine_rounds = 0;
  const auto coarse = fit_pair(observed, small_grid(), plain, 3);
  const auto fine = fit_pair(observed, small_grid(), opts, 3);
  CHECK(fine.score.value <= coarse.score.value);
}

TEST_CASE("dataset fitting skips ineligible pairs and memoizes equal ratings") {
  std::vector<PairRatings> pairs{{1, 1, {3, 4, 3, 3, 3}}, {1, 2, {4}}, {2, 1, {3, 3, 3, 4, 3}}, {2, 2, {1, 1, 2, 1, 1}}};
  const auto data = RatingDataset::from_pairs(pairs);
  std::vector<std::string> warnings;
  DatasetFitHooks hooks;
  hooks.warn = [&](const std::string& w) { warnings.push_back(w); };
  const auto fits = fit_dataset(data, small_grid(), fast_options(), 4, hooks);
  REQUIRE(fits.size() == 3);
  CHECK(warnings.size() == 1);
  CHECK(fits[0].xi == fits[1].xi);
  CHECK(fits[0].score.value == fits[1].score.value);
  CHECK(fits[1].user == 2);
}

TEST_CASE("completed pairs are reused") {
  const auto data = RatingDataset::from_pairs({{1, 1, {3, 4, 3, 3, 3}}, {1, 2, {5, 5, 4, 5, 5}}});
  const auto full = fit_dataset(data, small_grid(), fast_options(), 4);
  DatasetFitHooks hooks;
  hooks.completed[{1, 1}] = full[0];
  int fresh = 0;
  hooks.on_result = [&](const FitResult&) { ++fresh; };
  const auto resumed = fit_dataset(data, small_grid(), fast_options(), 4, hooks);
  CHECK(fresh == 1);
  REQUIRE(resumed.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) CHECK(same_fit(resumed[i], full[i]));
}

TEST_CASE("fit results round trip through CSV and JSON") {
  const auto data = RatingDataset::from_pairs({{1, 1, {3, 4, 3, 3, 3}}, {4, 9, {1, 2, 2, 1, 2}}});
  const auto fits = fit_dataset(data, small_grid(), fast_options(), 1);
  std::stringstream ss;
  write_fits_csv(fits, ss, "c");
  const auto back = read_fits_csv(ss);
  REQUIRE(back.size() == fits.size());
  for (std::size_t i = 0; i < fits.size(); ++i) {
    CHECK(same_fit(back[i], fits[i]));
    CHECK(same_fit(fit_from_json(fit_to_json(fits[i])), fits[i]));
  }
}

TEST_CASE("NaN scores never win or tie") {
  const std::vector<CognitionVector> pts{{1, 1, 1, 1, 3}, {5, 1, 1, 1, 3}};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto best = reduce_argmin({nan, 0.4}, pts, 1, Objective::JSD);
  CHECK(best.index == 1);
  CHECK(best.ties == 1);
}

TEST_CASE("a shared table gives the same fits as a private one") {
  const auto data = RatingDataset::from_pairs({{1, 1, {3, 4, 3, 3, 3}}, {1, 2, {5, 5, 4, 5, 5}}});
  const auto opts = fast_options();
  const auto table = CandidateTable::build(small_grid(), opts.objective, opts.budget, opts.scale, 4);
  DatasetFitHooks hooks;
  hooks.table = &table;
  const auto shared = fit_dataset(data, small_grid(), opts, 4, hooks);
  const auto own = fit_dataset(data, small_grid(), opts, 4);
  for (std::size_t i = 0; i < own.size(); ++i) CHECK(same_fit(shared[i], own[i]));
  CHECK_THROWS(fit_dataset(data, small_grid(), opts, 5, hooks));
}
