#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "nppc/decoders.hpp"
#include "nppc/neural.hpp"

namespace nppc {

struct GaussianFit {
  double mu = 0.0;
  double sigma = 0.0;
  bool degenerate = false;  // all values identical, sigma == 0
};

/// Maximum-likelihood Gaussian: sample mean and divide-by-N standard deviation.
GaussianFit gaussian_ml_fit(std::span<const double> values);

/// Observed re-ratings of one user-item pair.
struct EmpiricalFeedback {
  std::vector<int> ratings;
  std::array<int, 5> histogram{};
  GaussianFit gauss;

  static EmpiricalFeedback from_ratings(std::vector<int> ratings);
};

/// Probability mass on the points of a scale grid.
struct DiscretizedDensity {
  Scale scale;
  std::vector<double> mass;

  /// Gaussian evaluated on the grid and renormalized to unit mass. Sigma below
  /// `sigma_floor` is raised to it; a zero-width Gaussian has no grid density.
  static DiscretizedDensity gaussian(double mu, double sigma, const Scale& scale, double sigma_floor = 0.05);
};

inline constexpr double kDefaultSigmaFloor = 0.05;

/// Supremum of the base-2 Jensen-Shannon divergence with 1/2 weights (reached
/// on disjoint supports). Default normalizer of normalized_jsd.
inline constexpr double kJsdSupremum = 1.0;

/// Jensen-Shannon divergence in bits: 1/2 KL(p||m) + 1/2 KL(q||m), m = (p+q)/2.
double jsd(const DiscretizedDensity& p, const DiscretizedDensity& q);
double normalized_jsd(const DiscretizedDensity& p, const DiscretizedDensity& q, double normalizer = kJsdSupremum);

/// Mean squared error about true_s divided by its largest possible value on the scale.
double mse_ratio(double true_s, std::span<const double> estimates, const Scale& scale);

/// Enumerates the histograms of `draws` ratings over `classes` integer stars and
/// maps each to a dense index.
class HistogramCodec {
 public:
  HistogramCodec(int classes = 5, int draws = 5);

  int classes() const noexcept { return classes_; }
  int draws() const noexcept { return draws_; }
  std::size_t size() const noexcept { return count_; }
  /// Dense index of a histogram of draws (counts per class).
  std::size_t index(std::span<const int> histogram) const;

 private:
  int classes_;
  int draws_;
  std::size_t count_ = 0;
  std::vector<std::int32_t> dense_;  // base-(draws+1) code -> dense index or -1
};

/// Rounds values half-up to integer stars of `scale` and counts each
/// consecutive group of codec.draws() values as one round's histogram.
std::vector<std::uint32_t> round_histogram_counts(std::span<const double> values, const HistogramCodec& codec,
                                                  const Scale& scale);

/// Fraction of `repeats` rounds of uniform draws over the stars whose
/// histogram equals the observed one.
double chance_agreement(std::span<const int> observed_histogram, int repeats, std::uint64_t seed);

/// (p0 - pc) / (1 - pc); throws when pc == 1.
double kappa_from_rates(double p0, double pc);

/// Cohen's kappa between observed re-ratings and rounded model feedback.
/// Model draws use (seed, Candidate) and chance draws use (seed, Chance).
double cohen_kappa(const EmpiricalFeedback& observed, const CognitionVector& xi, const DecoderSpec& decoder,
                   const Scale& scale, int repeats, std::uint64_t seed);

}  // namespace nppc
