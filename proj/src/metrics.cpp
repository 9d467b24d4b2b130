#include "nppc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>

namespace nppc {

GaussianFit gaussian_ml_fit(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("gaussian_ml_fit needs at least 2 values");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double n = static_cast<double>(values.size());
  const double mu = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mu) * (v - mu);
  const bool degenerate = std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; });
  return {mu, degenerate ? 0.0 : std::sqrt(ss / n), degenerate};
}

EmpiricalFeedback EmpiricalFeedback::from_ratings(std::vector<int> ratings) {
  EmpiricalFeedback out;
  std::vector<double> values;
  values.reserve(ratings.size());
  for (int r : ratings) {
    if (r < 1 || r > 5) throw std::invalid_argument("rating outside [1,5]: " + std::to_string(r));
    ++out.histogram[r - 1];
    values.push_back(r);
  }
  if (values.size() >= 2) out.gauss = gaussian_ml_fit(values);
  out.ratings = std::move(ratings);
  return out;
}

DiscretizedDensity DiscretizedDensity::gaussian(double mu, double sigma, const Scale& scale, double sigma_floor) {
  scale.validate();
  const double sd = std::max(sigma, sigma_floor);
  if (!(sd > 0.0)) throw std::invalid_argument("discretized Gaussian needs a positive width");
  DiscretizedDensity out{scale, scale.grid()};
  double total = 0.0;
  for (double& x : out.mass) {
    const double z = (x - mu) / sd;
    x = std::exp(-0.5 * z * z);
    total += x;
  }
  if (!(total > 0.0)) {
    // Mean far off the scale: all mass underflowed, keep the nearest grid point.
    std::fill(out.mass.begin(), out.mass.end(), 0.0);
    out.mass[mu < scale.lo ? 0 : out.mass.size() - 1] = 1.0;
    return out;
  }
  for (double& x : out.mass) x /= total;
  return out;
}

double jsd(const DiscretizedDensity& p, const DiscretizedDensity& q) {
  if (!(p.scale == q.scale) || p.mass.size() != q.mass.size()) {
    throw std::invalid_argument("jsd: densities are defined on different grids");
  }
  // a log(a/m) written as a log(2a/(a+b)): m = (a+b)/2 underflows for denormal masses.
  double total = 0.0;
  for (std::size_t i = 0; i < p.mass.size(); ++i) {
    const double a = p.mass[i];
    const double b = q.mass[i];
    const double sum = a + b;
    if (a > 0.0) total += a * std::log2(2.0 * a / sum);
    if (b > 0.0) total += b * std::log2(2.0 * b / sum);
  }
  return std::max(0.5 * total, 0.0);
}

double normalized_jsd(const DiscretizedDensity& p, const DiscretizedDensity& q, double normalizer) {
  if (!(normalizer > 0.0)) throw std::invalid_argument("normalized_jsd: normalizer must be > 0");
  return std::min(jsd(p, q) / normalizer, 1.0);
}

double mse_ratio(double true_s, std::span<const double> estimates, const Scale& scale) {
  if (estimates.empty()) throw std::invalid_argument("mse_ratio: no estimates");
  double ss = 0.0;
  for (double e : estimates) ss += (e - true_s) * (e - true_s);
  const double mse = ss / static_cast<double>(estimates.size());
  const double lo = true_s - scale.lo;
  const double hi = scale.hi - true_s;
  const double mse_max = std::max(lo * lo, hi * hi);
  return mse / mse_max;
}

HistogramCodec::HistogramCodec(int classes, int draws) : classes_(classes), draws_(draws) {
  if (classes < 1 || draws < 1) throw std::invalid_argument("HistogramCodec: classes and draws must be >= 1");
  std::size_t codes = 1;
  for (int c = 0; c < classes; ++c) codes *= static_cast<std::size_t>(draws + 1);
  dense_.assign(codes, -1);
  std::vector<int> h(static_cast<std::size_t>(classes), 0);
  // Enumerate compositions of `draws` into `classes` parts in lexicographic order.
  std::function<void(int, int)> rec = [&](int cls, int left) {
    if (cls == classes - 1) {
      h[cls] = left;
      std::size_t code = 0;
      for (int c = classes - 1; c >= 0; --c) code = code * static_cast<std::size_t>(draws + 1) + h[c];
      dense_[code] = static_cast<std::int32_t>(count_++);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      h[cls] = v;
      rec(cls + 1, left - v);
    }
  };
  rec(0, draws);
}

std::size_t HistogramCodec::index(std::span<const int> histogram) const {
  if (histogram.size() != static_cast<std::size_t>(classes_)) throw std::invalid_argument("histogram size mismatch");
  std::size_t code = 0;
  for (int c = classes_ - 1; c >= 0; --c) {
    const int v = histogram[c];
    if (v < 0 || v > draws_) throw std::invalid_argument("histogram count out of range");
    code = code * static_cast<std::size_t>(draws_ + 1) + v;
  }
  const std::int32_t idx = dense_[code];
  if (idx < 0) throw std::invalid_argument("histogram does not sum to the draw count");
  return static_cast<std::size_t>(idx);
}

std::vector<std::uint32_t> round_histogram_counts(std::span<const double> values, const HistogramCodec& codec,
                                                  const Scale& scale) {
  const auto draws = static_cast<std::size_t>(codec.draws());
  if (values.size() % draws != 0) throw std::invalid_argument("value count is not a multiple of the draws per round");
  std::vector<std::uint32_t> counts(codec.size(), 0);
  std::vector<int> h(static_cast<std::size_t>(codec.classes()));
  for (std::size_t start = 0; start < values.size(); start += draws) {
    std::fill(h.begin(), h.end(), 0);
    for (std::size_t i = start; i < start + draws; ++i) {
      const double rounded = std::floor(scale.clamp(values[i]) + 0.5);
      int cls = static_cast<int>(rounded - scale.lo);
      cls = std::clamp(cls, 0, codec.classes() - 1);
      ++h[cls];
    }
    ++counts[codec.index(h)];
  }
  return counts;
}

double chance_agreement(std::span<const int> observed_histogram, int repeats, std::uint64_t seed) {
  if (repeats < 1) throw std::invalid_argument("chance_agreement: repeats must be >= 1");
  const int classes = static_cast<int>(observed_histogram.size());
  const int draws = std::accumulate(observed_histogram.begin(), observed_histogram.end(), 0);
  Engine eng = make_engine(seed);
  std::vector<int> h(static_cast<std::size_t>(classes));
  int matches = 0;
  for (int r = 0; r < repeats; ++r) {
    std::fill(h.begin(), h.end(), 0);
    for (int d = 0; d < draws; ++d) ++h[uniform_below(eng, static_cast<std::uint64_t>(classes))];
    if (std::equal(h.begin(), h.end(), observed_histogram.begin())) ++matches;
  }
  return static_cast<double>(matches) / repeats;
}

double kappa_from_rates(double p0, double pc) {
  if (pc >= 1.0) throw std::domain_error("kappa undefined");
  return (p0 - pc) / (1.0 - pc);
}

double cohen_kappa(const EmpiricalFeedback& observed, const CognitionVector& xi, const DecoderSpec& decoder,
                   const Scale& scale, int repeats, std::uint64_t seed) {
  if (observed.ratings.size() != 5) throw std::invalid_argument("cohen_kappa needs exactly 5 observed ratings");
  if (repeats < 1) throw std::invalid_argument("cohen_kappa: repeats must be >= 1");
  const HistogramCodec codec(5, 5);
  const FeedbackSample model =
      sample_feedback(xi, decoder, scale, static_cast<std::size_t>(repeats) * 5, derive_seed(seed, Stream::Candidate));
  const auto counts = round_histogram_counts(model.values, codec, scale);
  const double p0 = static_cast<double>(counts[codec.index(observed.histogram)]) / repeats;
  const double pc = chance_agreement(observed.histogram, repeats, derive_seed(seed, Stream::Chance));
  return kappa_from_rates(p0, pc);
}

}  // namespace nppc
