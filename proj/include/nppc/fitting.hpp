#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nppc/dataset.hpp"
#include "nppc/decoders.hpp"
#include "nppc/metrics.hpp"
#include "nppc/neural.hpp"

namespace nppc {

/// `count` equidistant values from min to max (a single value is min).
struct Range {
  double min = 0.0;
  double max = 0.0;
  int count = 1;

  void validate(std::string_view name) const;
  std::vector<double> values() const;
  /// "min:max:count" or a single value.
  static Range parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const Range&, const Range&) = default;
};

struct GridSpec {
  Range n{1, 250, 100};
  Range g{1, 100, 100};
  Range w{0.1, 2.0, 100};
  Range o{1, 15, 100};
  Range s{1, 5, 100};
  std::vector<DecoderSpec> decoders = DecoderSpec::all();

  void validate(const Scale& scale) const;
  /// Gridded population sizes rounded to integers and deduplicated.
  std::vector<int> n_values() const;
  /// Number of cognition vectors (per decoder) after n deduplication.
  std::uint64_t cardinality() const;
};

enum class Objective { Kappa, JSD };

std::string_view to_string(Objective objective) noexcept;
Objective parse_objective(std::string_view text);

struct SamplingBudget {
  std::size_t jsd_samples = 10000;
  int kappa_repeats = 1000;
  double sigma_floor = kDefaultSigmaFloor;
  double jsd_normalizer = kJsdSupremum;
};

/// Lower is better for both kinds: 1 - kappa, or normalized JSD.
struct MetricScore {
  Objective kind = Objective::JSD;
  double value = 0.0;
};

struct FitResult {
  std::int64_t user = 0;
  std::int64_t item = 0;
  CognitionVector xi;
  DecoderSpec decoder;
  MetricScore score;
  std::uint64_t ambiguity = 1;
  double energy = 0.0;
};

bool same_fit(const FitResult& a, const FitResult& b);

/// n * (g + o).
double population_energy(const CognitionVector& xi);

/// Grid points in lexicographic (n, g, w, o, s) order.
std::vector<CognitionVector> enumerate_grid(const GridSpec& spec);

/// Candidate substream: a pure function of the run seed and the bit patterns
/// of xi, so the same vector scores identically in every grid and pair.
std::uint64_t candidate_seed(std::uint64_t run_seed, const CognitionVector& xi);

/// Requirements for scoring a pair: >= 2 trials for JSD, exactly 5 for kappa.
bool fit_eligible(const PairRatings& pair, Objective objective);

double score_candidate(const EmpiricalFeedback& observed, const CognitionVector& xi, const DecoderSpec& decoder,
                       Objective objective, const SamplingBudget& budget, const Scale& scale,
                       std::uint64_t run_seed);

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Model statistics of every grid point and decoder, independent of observed data.
/// JSD keeps the ML Gaussian of each model sample; kappa keeps the histogram
/// counts of its rounded 5-draw rounds.
class CandidateTable {
 public:
  static CandidateTable build(const GridSpec& spec, Objective objective, const SamplingBudget& budget,
                              const Scale& scale, std::uint64_t run_seed, int workers = 1,
                              const ProgressFn& progress = {});

  Objective objective() const noexcept { return objective_; }
  const std::vector<CognitionVector>& points() const noexcept { return points_; }
  const std::vector<DecoderSpec>& decoders() const noexcept { return decoders_; }
  std::size_t size() const noexcept { return points_.size() * decoders_.size(); }
  const GaussianFit& moments(std::size_t point, std::size_t decoder) const;
  const std::uint32_t* histogram_counts(std::size_t point, std::size_t decoder) const;

  /// Scores of every (point, decoder) entry against one observed pair, point-major.
  std::vector<double> score_all(const EmpiricalFeedback& observed, int workers = 1) const;

  /// Argmin with energy tie-breaking. `decoder_filter` restricts the decoders
  /// considered (indices into decoders()); empty means all.
  FitResult select_best(const EmpiricalFeedback& observed, int workers = 1,
                        const std::vector<std::size_t>& decoder_filter = {}) const;

  friend bool operator==(const CandidateTable&, const CandidateTable&);

  // Internal layout, exposed for the serial reference build.
  Objective objective_ = Objective::JSD;
  SamplingBudget budget_;
  Scale scale_;
  std::uint64_t run_seed_ = 0;
  std::vector<CognitionVector> points_;
  std::vector<DecoderSpec> decoders_;
  std::vector<GaussianFit> moments_;
  std::vector<std::uint32_t> counts_;
  HistogramCodec codec_{5, 5};
};

/// Tie set reduction over a score vector laid out point-major.
/// JSD ties are scores within 1e-9 of the minimum; kappa needs exact equality.
struct Argmin {
  std::size_t index = 0;
  std::uint64_t ties = 0;
};
Argmin reduce_argmin(const std::vector<double>& scores, const std::vector<CognitionVector>& points,
                     std::size_t decoder_count, Objective objective,
                     const std::vector<std::size_t>& decoder_filter = {});

inline constexpr double kJsdTieTolerance = 1e-9;

struct FitOptions {
  Objective objective = Objective::JSD;
  SamplingBudget budget;
  Scale scale;
  int workers = 1;
  /// Coarse-to-fine rounds around the best point; 0 keeps the faithful brute force.
  int refine_rounds = 0;
};

FitResult fit_pair(const EmpiricalFeedback& observed, const GridSpec& spec, const FitOptions& options,
                   std::uint64_t run_seed);

struct DatasetFitHooks {
  ProgressFn table_progress;
  /// Called once per fitted pair in dataset order.
  std::function<void(const FitResult&)> on_result;
  std::function<void(const std::string&)> warn;
  /// Pairs already fitted (e.g. loaded from a checkpoint) are not refitted.
  std::map<std::pair<std::int64_t, std::int64_t>, FitResult> completed;
  /// Table built beforehand for the same grid, options and seed; shared across datasets.
  const CandidateTable* table = nullptr;
};

/// One FitResult per eligible pair, ordered by (user, item).
std::vector<FitResult> fit_dataset(const RatingDataset& data, const GridSpec& spec, const FitOptions& options,
                                   std::uint64_t run_seed, DatasetFitHooks hooks = {});

/// Applies the refinement rounds of `options` to a grid result.
FitResult refine_fit(const EmpiricalFeedback& observed, const GridSpec& spec, const FitOptions& options,
                     std::uint64_t run_seed, FitResult best);

void write_fits_csv(const std::vector<FitResult>& fits, std::ostream& out, std::string_view comment = {});
std::vector<FitResult> read_fits_csv(std::istream& in, std::string_view source = "<fits>");

std::string fit_to_json(const FitResult& fit);
FitResult fit_from_json(std::string_view line);

}  // namespace nppc
