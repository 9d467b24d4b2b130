#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "nppc/neural.hpp"
#include "nppc/rng.hpp"

using namespace nppc;

TEST_CASE("derived seeds are pure and separate streams") {
  CHECK(derive_seed(42, Stream::Response, 3) == derive_seed(42, Stream::Response, 3));
  CHECK(derive_seed(42, Stream::Response, 3) != derive_seed(42, Stream::Response, 4));
  CHECK(derive_seed(42, Stream::Response, 3) != derive_seed(42, Stream::TieBreak, 3));
  CHECK(derive_seed(42, Stream::Response) != derive_seed(43, Stream::Response));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derive_seed(7, Stream::Cell, i));
  CHECK(seen.size() == 10000);
}

TEST_CASE("uniform_below stays in range and covers it") {
  Engine eng = make_engine(3);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto v = uniform_below(eng, 7);
    REQUIRE(v < 7);
    ++hits[v];
  }
  for (int h : hits) CHECK(std::abs(h - 10000) < 500);
}

TEST_CASE("poisson sampler moments across both regimes") {
  for (double lambda : {0.0, 0.3, 2.5, 17.0, 29.9, 30.0, 55.0, 400.0}) {
    CAPTURE(lambda);
    PoissonSampler sampler(lambda);
    Engine eng = make_engine(11);
    const int draws = 200000;
    double sum = 0, sq = 0;
    for (int i = 0; i < draws; ++i) {
      const double k = sampler(eng);
      REQUIRE(k >= 0.0);
      REQUIRE(k == std::floor(k));
      sum += k;
      sq += k * k;
    }
    const double mean = sum / draws;
    const double var = sq / draws - mean * mean;
    if (lambda == 0.0) {
      CHECK(mean == 0.0);
      continue;
    }
    CHECK(std::abs(mean - lambda) < 4.0 * std::sqrt(lambda / draws));
    CHECK(std::abs(var - lambda) < 0.03 * lambda + 0.01);
  }
}

TEST_CASE("poisson inversion matches the exact pmf") {
  // Chi-square goodness of fit against pmf values computed in long double.
  const double lambda = 4.2;
  PoissonSampler sampler(lambda);
  Engine eng = make_engine(5);
  const int draws = 400000;
  std::vector<int> counts(25, 0);
  for (int i = 0; i < draws; ++i) {
    const auto k = static_cast<std::size_t>(sampler(eng));
    ++counts[std::min<std::size_t>(k, 24)];
  }
  long double pmf = std::exp(-static_cast<long double>(lambda));
  double chi2 = 0.0;
  for (int k = 0; k < 24; ++k) {
    const double expected = static_cast<double>(pmf) * draws;
    if (expected > 5.0) chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
    pmf *= lambda / (k + 1);
  }
  CHECK(chi2 < 45.0);  // ~14 bins used; far beyond the 0.999 quantile
}

TEST_CASE("preferred values are equidistant and end on the scale bounds") {
  const Scale scale;
  const auto p = preferred_values(5, scale);
  REQUIRE(p.size() == 5);
  CHECK(p.front() == 1.0);
  CHECK(p.back() == 5.0);
  CHECK(p[2] == doctest::Approx(3.0));
  CHECK(preferred_values(1, scale) == std::vector<double>{3.0});
  CHECK_THROWS(preferred_values(0, scale));
}

TEST_CASE("tuning curve peaks at the preferred value") {
  const CognitionVector xi{10, 20.0, 0.5, 2.0, 3.0};
  const double peak = tuning_eval(xi, 3.0, 3.0);
  CHECK(peak == doctest::Approx(20.0 / (0.5 * std::sqrt(2.0 * std::numbers::pi)) + 2.0));
  CHECK(tuning_eval(xi, 3.0, 2.5) < peak);
  CHECK(tuning_eval(xi, 3.0, 2.5) == doctest::Approx(tuning_eval(xi, 3.0, 3.5)));
  CHECK(tuning_eval(xi, 3.0, 100.0) == doctest::Approx(2.0));
}

TEST_CASE("cognition vector validation") {
  const Scale scale;
  CHECK_NOTHROW(CognitionVector{100, 1, 1, 5, 3}.validate(scale));
  CHECK_THROWS(CognitionVector{0, 1, 1, 5, 3}.validate(scale));
  CHECK_THROWS(CognitionVector{10, -1, 1, 5, 3}.validate(scale));
  CHECK_THROWS(CognitionVector{10, 1, 0, 5, 3}.validate(scale));
  CHECK_THROWS(CognitionVector{10, 1, 1, 5, 5.5}.validate(scale));
}

TEST_CASE("sampled responses are reproducible counts") {
  const Scale scale;
  const CognitionVector xi{50, 10, 1, 5, 3};
  const auto a = sample_response(xi, scale, 99);
  const auto b = sample_response(xi, scale, 99);
  CHECK(a.rates == b.rates);
  for (double r : a.rates) CHECK(r == std::floor(r));
  CHECK(a.rates != sample_response(xi, scale, 100).rates);
}

TEST_CASE("response sampler means are the static response") {
  const Scale scale;
  const CognitionVector xi{30, 40, 0.7, 3, 2};
  const ResponseSampler sampler(xi, scale);
  CHECK(sampler.means() == static_response(xi, scale).rates);
}
