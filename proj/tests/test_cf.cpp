#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "nppc/cf.hpp"
#include "nppc/errors.hpp"

using namespace nppc;

namespace {

// Users 1..users, items 1..5, each user a copy of one of four rating patterns.
RatingDataset patterned(int users, int trials, bool noisy, std::uint64_t seed) {
  const int patterns[4][5] = {{5, 5, 4, 5, 5}, {1, 2, 1, 1, 2}, {3, 3, 3, 2, 3}, {4, 1, 5, 2, 4}};
  Engine eng = make_engine(seed);
  std::vector<PairRatings> pairs;
  for (int u = 1; u <= users; ++u) {
    for (int i = 1; i <= 5; ++i) {
      PairRatings p{u, i, {}};
      for (int t = 0; t < trials; ++t) {
        int r = patterns[u % 4][i - 1];
        if (noisy) r = std::clamp(r + static_cast<int>(uniform_below(eng, 3)) - 1, 1, 5);
        p.ratings.push_back(r);
      }
      pairs.push_back(std::move(p));
    }
  }
  return RatingDataset::from_pairs(std::move(pairs));
}

CfConfig quick_config() {
  CfConfig c;
  c.profile_samples = 100;
  c.profile_grid_points = 9;
  return c;
}

// Pair-count form of the adjusted Rand index.
double oracle_ari(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> nij;
  std::map<int, double> ai, bj;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ++nij[{a[k], b[k]}];
    ++ai[a[k]];
    ++bj[b[k]];
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double sum_ij = 0, sum_a = 0, sum_b = 0;
  for (auto& [k, v] : nij) sum_ij += c2(v);
  for (auto& [k, v] : ai) sum_a += c2(v);
  for (auto& [k, v] : bj) sum_b += c2(v);
  const double expected = sum_a * sum_b / c2(static_cast<double>(a.size()));
  return (sum_ij - expected) / (0.5 * (sum_a + sum_b) - expected);
}

}  // namespace

TEST_CASE("rmse") {
  CHECK(rmse({1, 2}, {1, 2}) == 0.0);
  CHECK(rmse({1}, {3}) == 2.0);
  CHECK(rmse({1, 5}, {3, 3}) == 2.0);
  CHECK_THROWS(rmse({1}, {1, 2}));
  CHECK_THROWS(rmse({}, {}));
}

TEST_CASE("k-means separates two distant clouds") {
  std::vector<std::vector<double>> pts;
  std::vector<int> truth;
  Engine eng = make_engine(4);
  for (int i = 0; i < 40; ++i) {
    const int c = i % 2;
    pts.push_back({c * 10.0 + uniform01(eng), c * -10.0 + uniform01(eng)});
    truth.push_back(c);
  }
  const auto model = kmeans(pts, 2, 11);
  CHECK(adjusted_rand_index(model.assignments, truth) == doctest::Approx(1.0));
  CHECK(model.centroids.size() == 2);
  CHECK(model.centroids[0].size() == 2);
  const auto again = kmeans(pts, 2, 11);
  CHECK(again.assignments == model.assignments);
}

TEST_CASE("k equal to the point count leaves no inertia") {
  const std::vector<std::vector<double>> pts{{0, 0}, {1, 5}, {3, 1}, {7, 7}};
  CHECK(kmeans(pts, 4, 1).inertia == 0.0);
  CHECK_THROWS(kmeans(pts, 5, 1));
}

TEST_CASE("integer weights act as duplicated points") {
  const std::vector<std::vector<double>> pts{{0.0}, {0.4}, {5.0}, {5.5}, {9.0}};
  const std::vector<double> w{1, 2, 1, 3, 1};
  std::vector<std::vector<double>> dup;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int c = 0; c < w[i]; ++c) dup.push_back(pts[i]);
  const auto weighted = kmeans(pts, 2, 3, w);
  const auto expanded = kmeans(dup, 2, 3);
  CHECK(weighted.inertia == doctest::Approx(expanded.inertia));
  // Scaling all weights by a constant changes nothing.
  const std::vector<double> w2{2, 4, 2, 6, 2};
  CHECK(kmeans(pts, 2, 3, w2).assignments == weighted.assignments);
}

TEST_CASE("adjusted rand index matches the pair-count oracle") {
  Engine eng = make_engine(10);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<int> a(30), b(30);
    for (auto& x : a) x = static_cast<int>(uniform_below(eng, 3));
    for (auto& x : b) x = static_cast<int>(uniform_below(eng, 4));
    CHECK(adjusted_rand_index(a, b) == doctest::Approx(oracle_ari(a, b)));
  }
  CHECK(adjusted_rand_index({0, 0, 1, 1}, {1, 1, 0, 0}) == 1.0);
  CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 0, 1, 2}) == doctest::Approx(0.5714285714));
}

TEST_CASE("standardize gives zero mean and unit variance") {
  std::vector<std::vector<double>> pts{{1, 100, 7}, {2, 300, 7}, {3, 500, 7}};
  standardize(pts);
  for (int d = 0; d < 2; ++d) {
    double m = 0, v = 0;
    for (auto& p : pts) m += p[d];
    for (auto& p : pts) v += p[d] * p[d];
    CHECK(m == doctest::Approx(0.0));
    CHECK(v / 3 == doctest::Approx(1.0));
  }
  for (auto& p : pts) CHECK(p[2] == 0.0);
}

TEST_CASE("quartiles interpolate between order statistics") {
  const auto q = quartiles({4, 1, 3, 2});
  CHECK(q.min == 1);
  CHECK(q.q1 == 1.75);
  CHECK(q.median == 2.5);
  CHECK(q.q3 == 3.25);
  CHECK(q.max == 4);
  CHECK(median({5, 1, 3}) == 3);
}

TEST_CASE("magic barrier on constructed variances") {
  CHECK(magic_barrier(patterned(8, 5, false, 1), 50, 1).barrier == 0.0);
  // Every pair {1,2}: divide-by-(T-1) variance 0.5.
  std::vector<PairRatings> pairs;
  for (int u = 1; u <= 4; ++u) pairs.push_back({u, 1, {1, 2}});
  const auto b = magic_barrier(RatingDataset::from_pairs(pairs), 100, 3);
  CHECK(b.barrier == doctest::Approx(std::sqrt(0.5)));
  CHECK(b.ci_lo == doctest::Approx(std::sqrt(0.5)));
  CHECK(b.ci_hi == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS(magic_barrier(RatingDataset::from_pairs({{1, 1, {3}}}), 10, 1));
}

TEST_CASE("magic barrier ignores trial order") {
  const auto data = patterned(12, 5, true, 6);
  std::vector<PairRatings> shuffled = data.pairs();
  for (auto& p : shuffled) std::reverse(p.ratings.begin(), p.ratings.end());
  const auto a = magic_barrier(data, 200, 2);
  const auto b = magic_barrier(RatingDataset::from_pairs(shuffled), 200, 2);
  CHECK(a.barrier == b.barrier);
  CHECK(a.ci_lo == b.ci_lo);
  CHECK(a.ci_hi == b.ci_hi);
}

TEST_CASE("reference protocols emit trials times repeats scores") {
  const auto data = patterned(20, 5, true, 2);
  const auto cfg = quick_config();
  CHECK(noiseless_reference(data, cfg, 1).scores.size() == 25);
  CHECK(noisy_reference(data, cfg, 1).scores.size() == 25);
}

TEST_CASE("constant users are predicted exactly") {
  const auto data = patterned(20, 5, false, 2);
  for (const auto& s : noiseless_reference(data, quick_config(), 4).scores) CHECK(s.rmse == 0.0);
  for (const auto& s : noisy_reference(data, quick_config(), 4).scores) CHECK(s.rmse == 0.0);
}

TEST_CASE("noisy and noiseless coincide on identical trial copies") {
  // Patterns plus per-user offsets, copied identically to every trial.
  Engine eng = make_engine(8);
  std::vector<PairRatings> pairs;
  for (int u = 1; u <= 24; ++u) {
    for (int i = 1; i <= 5; ++i) {
      const int r = 1 + static_cast<int>(uniform_below(eng, 5));
      pairs.push_back({u, i, std::vector<int>(5, r)});
    }
  }
  const auto data = RatingDataset::from_pairs(pairs);
  const auto a = noiseless_reference(data, quick_config(), 9);
  const auto b = noisy_reference(data, quick_config(), 9);
  REQUIRE(a.scores.size() == b.scores.size());
  for (std::size_t k = 0; k < a.scores.size(); ++k) CHECK(a.scores[k].rmse == b.scores[k].rmse);
}

TEST_CASE("protocols are deterministic and worker independent") {
  const auto data = patterned(20, 5, true, 3);
  auto cfg = quick_config();
  const auto a = noisy_reference(data, cfg, 5);
  cfg.workers = 3;
  const auto b = noisy_reference(data, cfg, 5);
  for (std::size_t k = 0; k < a.scores.size(); ++k) CHECK(a.scores[k].rmse == b.scores[k].rmse);
}

TEST_CASE("split keys are pure") {
  CHECK(split_key(1, 2, 3, 4) == split_key(1, 2, 3, 4));
  CHECK(split_key(1, 2, 3, 4) != split_key(1, 2, 4, 4));
}

TEST_CASE("neural methods require fits") {
  const auto data = patterned(12, 5, true, 3);
  CHECK_THROWS_AS(run_cf(data, nullptr, {CfMethod::Xi}, quick_config(), 10, 1), UsageError);
}

TEST_CASE("neural methods cluster on fitted vectors") {
  const auto data = patterned(16, 5, true, 3);
  std::vector<FitResult> fits;
  for (const auto& p : data.pairs()) {
    FitResult f;
    f.user = p.user;
    f.item = p.item;
    f.xi = {static_cast<int>(10 + 30 * (p.user % 4)), 1.0 + p.user % 4, 1.0, 2.0, p.mean()};
    f.decoder = DecoderSpec::mld();
    f.energy = population_energy(f.xi);
    fits.push_back(f);
  }
  const auto report = run_cf(data, &fits, all_cf_methods(), quick_config(), 50, 2);
  CHECK(report.methods.size() == 8);
  for (const auto& m : report.methods) CHECK(m.scores.size() == 25);
  std::ostringstream out;
  write_scores_csv(report, out);
  CHECK(out.str().rfind("method,trial,repeat,rmse\n", 0) == 0);
}

TEST_CASE("profiles average the fitted vectors") {
  const auto data = patterned(4, 5, false, 3);
  std::vector<FitResult> fits;
  for (const auto& p : data.pairs()) {
    FitResult f;
    f.user = p.user;
    f.item = p.item;
    f.xi = {40, 20, 0.8, 3, 3};
    f.decoder = DecoderSpec::wad();
    fits.push_back(f);
  }
  const auto profiles = build_profiles(data, fits, quick_config(), 1);
  REQUIRE(profiles.size() == 4);
  for (const auto& p : profiles) {
    CHECK(p.xi.n == 40);
    CHECK(p.xi.g == 20);
    CHECK(p.xi.w == 0.8);
    CHECK(p.observed_variance == 0.0);
    CHECK(p.decoder == DecoderSpec::wad());
  }
}
