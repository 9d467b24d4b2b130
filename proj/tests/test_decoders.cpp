#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nppc/decoders.hpp"
#include "nppc/reference.hpp"

using namespace nppc;

namespace {

// Brute-force Poisson log-likelihood in long double, from the tuning formula.
long double oracle_loglik(const PopulationResponse& resp, const CognitionVector& xi, double s) {
  long double total = 0.0L;
  for (std::size_t j = 0; j < resp.rates.size(); ++j) {
    const long double z = (static_cast<long double>(s) - resp.preferred[j]) / xi.w;
    const long double f =
        xi.g * std::exp(-0.5L * z * z) / (xi.w * std::sqrt(2.0L * std::numbers::pi_v<long double>)) + xi.o;
    const long double r = resp.rates[j];
    total += r * std::log(f) - f - std::lgamma(r + 1.0L);
  }
  return total;
}

PopulationResponse handmade(std::vector<double> rates, const Scale& scale = {}) {
  PopulationResponse r;
  r.preferred = preferred_values(static_cast<int>(rates.size()), scale);
  r.rates = std::move(rates);
  return r;
}

}  // namespace

TEST_CASE("decoder labels round trip") {
  for (const auto& d : DecoderSpec::all()) CHECK(parse_decoder_spec(d.label()) == d);
  CHECK(parse_decoder_spec("mad(2.5,0.3)") == DecoderSpec::mad(GaussianPrior::centered(2.5, 0.3)));
  CHECK(parse_decoder_spec("MAD(flat)").prior->is_flat());
  CHECK(parse_decoder_list("all").size() == 4);
  CHECK(parse_decoder_list("wad,mld").size() == 2);
  CHECK_THROWS(parse_decoder_spec("bayes"));
}

TEST_CASE("MVD returns the preferred value of the peak neuron") {
  const auto r = handmade({1, 3, 9, 2, 0});
  CHECK(decode_mvd(r, 1) == 3.0);
}

TEST_CASE("MVD ties are broken uniformly") {
  const auto r = handmade({5, 0, 0, 0, 5});
  Engine eng = make_engine(2);
  int low = 0;
  for (int i = 0; i < 4000; ++i) low += decode_mvd(r, eng) == 1.0;
  CHECK(low > 1800);
  CHECK(low < 2200);
}

TEST_CASE("WAD is the rate-weighted preferred mean") {
  const auto r = handmade({1, 0, 0, 0, 3});
  CHECK(decode_wad(r) == doctest::Approx((1.0 * 1 + 5.0 * 3) / 4));
}

TEST_CASE("silent population decodes to the midpoint for WAD") {
  const Scale scale;
  const CognitionVector xi{5, 1, 1, 0.5, 3};
  const auto r = handmade({0, 0, 0, 0, 0});
  Engine eng = make_engine(1);
  CHECK(decode_response(r, xi, DecoderSpec::wad(), scale, eng) == 3.0);
}

TEST_CASE("log likelihood matches the long double oracle") {
  const Scale scale;
  const CognitionVector xi{40, 25, 0.6, 3, 2.2};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto resp = sample_response(xi, scale, seed);
    for (double s : {1.0, 2.2, 3.7, 5.0}) {
      const long double want = oracle_loglik(resp, xi, s);
      CHECK(std::abs(log_likelihood(resp, xi, s) - static_cast<double>(want)) < 1e-9 * std::abs(static_cast<double>(want)) + 1e-9);
    }
  }
}

TEST_CASE("grid likelihood differs from the full one by a stimulus-free constant") {
  const Scale scale;
  const CognitionVector xi{25, 10, 0.8, 4, 3.1};
  const auto resp = sample_response(xi, scale, 17);
  const LikelihoodGrid grid(xi, scale);
  std::vector<double> ll(grid.grid().size());
  grid.evaluate(resp.rates, ll);
  const double offset = log_likelihood(resp, xi, grid.grid()[0]) - ll[0];
  for (std::size_t k = 0; k < ll.size(); k += 40) {
    CHECK(log_likelihood(resp, xi, grid.grid()[k]) - ll[k] == doctest::Approx(offset).epsilon(1e-9));
  }
}

TEST_CASE("batched likelihood rows are bitwise equal to single rows") {
  const Scale scale;
  const CognitionVector xi{37, 30, 0.5, 2, 3};
  const LikelihoodGrid grid(xi, scale);
  const std::size_t rows = 7;
  std::vector<double> rates;
  for (std::size_t i = 0; i < rows; ++i) {
    const auto r = sample_response(xi, scale, i);
    rates.insert(rates.end(), r.rates.begin(), r.rates.end());
  }
  const std::size_t g = grid.grid().size();
  std::vector<double> batch(rows * g);
  grid.evaluate_batch(rates, rows, batch);
  std::vector<double> one(g);
  for (std::size_t i = 0; i < rows; ++i) {
    grid.evaluate(std::span<const double>(rates).subspan(i * 37, 37), one);
    for (std::size_t k = 0; k < g; ++k) REQUIRE(batch[i * g + k] == one[k]);
  }
}

TEST_CASE("MLD picks the grid maximum of the oracle likelihood") {
  const Scale scale;
  const CognitionVector xi{60, 20, 0.7, 3, 4.1};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto resp = sample_response(xi, scale, seed);
    const double est = decode_mld(resp, xi, scale);
    const auto g = scale.grid();
    long double best = -1e300L;
    for (double s : g) best = std::max(best, oracle_loglik(resp, xi, s));
    CHECK(static_cast<double>(oracle_loglik(resp, xi, est)) == doctest::Approx(static_cast<double>(best)).epsilon(1e-12));
  }
}

TEST_CASE("MAD with a flat prior equals MLD") {
  const Scale scale;
  const CognitionVector xi{30, 5, 1.2, 6, 2.5};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto resp = sample_response(xi, scale, seed);
    CHECK(decode_mad(resp, xi, scale, GaussianPrior::flat()) == decode_mld(resp, xi, scale));
  }
}

TEST_CASE("a sharp MAD prior pulls the estimate to its mean") {
  const Scale scale;
  const CognitionVector xi{30, 5, 1.2, 6, 1.5};
  const auto resp = sample_response(xi, scale, 4);
  CHECK(decode_mad(resp, xi, scale, GaussianPrior::centered(4.0, 1e-6)) == doctest::Approx(4.0));
}

TEST_CASE("likelihood decoders refuse non-count rates") {
  const Scale scale;
  const CognitionVector xi{3, 5, 1, 1, 3};
  auto r = handmade({1.5, 2, 0});
  CHECK_THROWS_AS(decode_mld(r, xi, scale), std::invalid_argument);
}

TEST_CASE("decoded feedback stays on the scale") {
  const Scale scale;
  for (const auto& d : DecoderSpec::all()) {
    const auto fb = sample_feedback({20, 3, 0.4, 1, 4.8}, d, scale, 3000, 8);
    for (double v : fb.values) {
      REQUIRE(v >= 1.0);
      REQUIRE(v <= 5.0);
    }
  }
}

TEST_CASE("multi-decoder sampling equals the serial reference bit for bit") {
  const Scale scale;
  const auto decoders = DecoderSpec::all();
  for (const CognitionVector& xi : {CognitionVector{100, 1, 1, 5, 3}, CognitionVector{13, 60, 0.3, 2, 1.4},
                                    CognitionVector{1, 10, 1, 0.5, 4}}) {
    const std::size_t count = 2 * kSampleBlock + 77;
    const auto fast = sample_feedback_multi(xi, decoders, scale, count, 21, 3);
    const auto slow = reference::sample_feedback(xi, decoders, scale, count, 21);
    REQUIRE(fast.size() == slow.size());
    for (std::size_t d = 0; d < fast.size(); ++d) CHECK(fast[d] == slow[d]);
  }
}

TEST_CASE("feedback does not depend on worker count or decoder set") {
  const Scale scale;
  const CognitionVector xi{50, 8, 0.9, 4, 2.6};
  const auto all = DecoderSpec::all();
  const auto one = sample_feedback_multi(xi, all, scale, 5000, 3, 1);
  const auto four = sample_feedback_multi(xi, all, scale, 5000, 3, 4);
  CHECK(one == four);
  const std::vector<DecoderSpec> only_mld{DecoderSpec::mld()};
  CHECK(sample_feedback_multi(xi, only_mld, scale, 5000, 3, 2)[0] == one[2]);
}
