#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nppc/dataset.hpp"
#include "nppc/decoders.hpp"
#include "nppc/fitting.hpp"
#include "nppc/neural.hpp"

namespace nppc {

enum class FeatureSpace { Rating, XiFull, N, G, W, O, Profile };

struct ClusterModel {
  int k = 0;
  std::vector<int> assignments;
  std::vector<std::vector<double>> centroids;
  FeatureSpace feature_space = FeatureSpace::Rating;
  double inertia = 0.0;  // weighted within-cluster sum of squares
  int iterations = 0;
};

/// Lloyd iterations from a seeded k-means++ start. Optional per-point weights
/// act as multiplicities; they are rescaled by their minimum so integer
/// duplicates and repeated points give identical results. An empty cluster is
/// re-seeded with the point farthest from its centroid.
ClusterModel kmeans(const std::vector<std::vector<double>>& points, int k, std::uint64_t seed,
                    const std::vector<double>& weights = {}, int max_iterations = 300);

/// Inertia for k = 1..k_max.
std::vector<double> elbow_inertia(const std::vector<std::vector<double>>& points, int k_max, std::uint64_t seed);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

/// Zero mean and unit variance per dimension; constant dimensions are only centered.
void standardize(std::vector<std::vector<double>>& points);

double rmse(const std::vector<double>& predictions, const std::vector<double>& targets);

enum class CfMethod { Noiseless, Noisy, Xi, SubN, SubG, SubW, SubO, Profiling };

std::string_view to_string(CfMethod method) noexcept;
CfMethod parse_cf_method(std::string_view text);
std::vector<CfMethod> all_cf_methods();
bool needs_fits(CfMethod method) noexcept;

struct CfConfig {
  int k = 4;
  double holdout_frac = 0.3;
  int repeats = 5;
  Scale scale;
  /// Noise profiling: stimulus candidates and Monte Carlo draws per candidate.
  int profile_grid_points = 21;
  std::size_t profile_samples = 200;
  int workers = 1;

  void validate() const;
};

struct CfScore {
  int trial = 1;
  int repeat = 1;
  double rmse = 0.0;
};

struct RmseDistribution {
  std::string method;
  std::vector<CfScore> scores;

  std::vector<double> values() const;
};

struct BarrierEstimate {
  double barrier = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int bootstrap = 0;
};

/// sqrt of the mean per-pair rating variance (divide-by-(T-1)), with a
/// percentile bootstrap interval over pairs.
BarrierEstimate magic_barrier(const RatingDataset& data, int bootstrap, std::uint64_t seed);

/// Users per split cell: key drawn from (seed, Split, trial, repeat, user).
double split_key(std::uint64_t seed, int trial, int repeat, std::int64_t user);

using WarnFn = std::function<void(const std::string&)>;

RmseDistribution noiseless_reference(const RatingDataset& data, const CfConfig& config, std::uint64_t seed,
                                     const WarnFn& warn = {});
RmseDistribution noisy_reference(const RatingDataset& data, const CfConfig& config, std::uint64_t seed,
                                 const WarnFn& warn = {});
RmseDistribution xi_clustering(const RatingDataset& data, const std::vector<FitResult>& fits,
                               const CfConfig& config, std::uint64_t seed, const WarnFn& warn = {});
RmseDistribution subspace_clustering(const RatingDataset& data, const std::vector<FitResult>& fits,
                                     FeatureSpace dim, const CfConfig& config, std::uint64_t seed,
                                     const WarnFn& warn = {});
RmseDistribution noise_profiling(const RatingDataset& data, const std::vector<FitResult>& fits,
                                 const CfConfig& config, std::uint64_t seed, const WarnFn& warn = {});

struct UserProfile {
  std::int64_t user = 0;
  CognitionVector xi;
  DecoderSpec decoder;
  double observed_variance = 0.0;
  double model_variance = 0.0;
};

/// Mean fitted vector over the non-target items with s matched to the
/// user's average observed variance. Users lacking fits are skipped.
std::vector<UserProfile> build_profiles(const RatingDataset& data, const std::vector<FitResult>& fits,
                                        const CfConfig& config, std::uint64_t seed, const WarnFn& warn = {});

struct CfReport {
  std::vector<RmseDistribution> methods;
  BarrierEstimate barrier;
};

CfReport run_cf(const RatingDataset& data, const std::vector<FitResult>* fits, const std::vector<CfMethod>& methods,
                const CfConfig& config, int bootstrap, std::uint64_t seed, const WarnFn& warn = {});

struct Quartiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};
/// Linear interpolation between order statistics.
Quartiles quartiles(std::vector<double> values);
double median(std::vector<double> values);

void write_scores_csv(const CfReport& report, std::ostream& out, std::string_view comment = {});
void write_summary_csv(const CfReport& report, std::ostream& out, std::string_view comment = {});
void write_barrier_csv(const BarrierEstimate& barrier, std::ostream& out, std::string_view comment = {});

}  // namespace nppc
