#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nppc/decoders.hpp"
#include "nppc/neural.hpp"

namespace nppc {

struct RatingRecord {
  std::int64_t user = 0;
  std::int64_t item = 0;
  int trial = 1;
  int rating = 1;

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

/// All trials of one user-item pair, ordered by trial index.
struct PairRatings {
  std::int64_t user = 0;
  std::int64_t item = 0;
  std::vector<int> ratings;

  double mean() const;
  double ml_variance() const;
  /// Divide-by-(T-1) variance; zero for a single trial.
  double unbiased_variance() const;
  int distinct() const;

  friend bool operator==(const PairRatings&, const PairRatings&) = default;
};

/// (user, item, trial, rating) table with dense trial indices per pair.
class RatingDataset {
 public:
  RatingDataset() = default;

  /// Validates and groups records. Throws DataError on duplicates, ratings
  /// outside [1,5] or gaps in the trial indices of a pair.
  static RatingDataset from_records(std::vector<RatingRecord> records);
  static RatingDataset from_pairs(std::vector<PairRatings> pairs);

  const std::vector<PairRatings>& pairs() const noexcept { return pairs_; }
  bool empty() const noexcept { return pairs_.empty(); }
  std::vector<std::int64_t> users() const;
  std::vector<std::int64_t> items() const;
  std::size_t record_count() const noexcept;
  std::vector<RatingRecord> records() const;
  const PairRatings* find(std::int64_t user, std::int64_t item) const;

  /// Trial count when every pair has the same number of trials, otherwise 0.
  int uniform_trials() const;
  /// True when every user rated every item with the same trial count.
  bool is_complete() const;

  friend bool operator==(const RatingDataset&, const RatingDataset&) = default;

 private:
  std::vector<PairRatings> pairs_;  // sorted by (user, item)
};

/// Parses `user,item,trial,rating` CSV. Lines starting with '#' are comments.
RatingDataset parse_ratings_csv(std::istream& in, std::string_view source = "<input>");
RatingDataset ingest(const std::filesystem::path& path);
/// Writes the header and one row per record; an optional comment becomes a leading '#' line.
void export_csv(const RatingDataset& data, std::ostream& out, std::string_view comment = {});

/// Share of pairs answered with one, two, and three or more distinct ratings.
struct ConsistencyMix {
  double constant = 0.35;
  double two = 0.50;
  double three_plus = 0.15;

  void validate() const;
};

struct SynthSpec {
  int users = 67;
  int items = 5;
  int trials = 5;
  ConsistencyMix mix;
  double variance_rate = 2.0;  // exponential rate of the latent per-pair rating variance

  void validate() const;
};

/// Plants one cognition vector drawn uniformly from `candidates` and one decoder
/// drawn uniformly from `decoders` in every pair.
struct GridPlanting {
  std::vector<CognitionVector> candidates;
  std::vector<DecoderSpec> decoders;
};

/// A latent user group: its share of users, its gain regime and the mean
/// stimulus it assigns to every item.
struct PlantedGroup {
  double weight = 0.5;
  double g_lo = 1.0;
  double g_hi = 10.0;
  std::vector<double> item_stimulus;
  std::optional<DecoderSpec> decoder;  // overrides GroupPlanting::decoder
};

/// Users belong to latent groups. Population size and gain are per user (gain
/// from the group's regime); width and offset are drawn per pair independently
/// of the group; the stimulus is the group's item mean plus Gaussian jitter.
struct GroupPlanting {
  std::vector<PlantedGroup> groups;
  int n_lo = 20;
  int n_hi = 120;
  double w_lo = 0.3;
  double w_hi = 1.5;
  double o_lo = 2.0;
  double o_hi = 10.0;
  double stimulus_jitter = 0.3;
  DecoderSpec decoder = DecoderSpec::mad();

  static GroupPlanting defaults(int items);
};

using Planting = std::variant<GridPlanting, GroupPlanting>;

struct PairTruth {
  std::int64_t user = 0;
  std::int64_t item = 0;
  int group = -1;
  std::optional<CognitionVector> xi;
  std::optional<DecoderSpec> decoder;
  double mu = 0.0;     // stochastic mode: latent rating mean
  double sigma = 0.0;  // stochastic mode: latent rating standard deviation
};

struct SynthResult {
  RatingDataset data;
  std::vector<PairTruth> truth;
};

/// Per-pair Gaussian ratings with exponential variances, rounded half away
/// from the scale midpoint and clipped, conditioned on the consistency mix.
SynthResult synthesize_stochastic(const SynthSpec& spec, std::uint64_t seed);

/// Ratings are rounded decoded feedback of planted cognition vectors.
SynthResult synthesize_planted(const SynthSpec& spec, const Planting& planting, const Scale& scale,
                               std::uint64_t seed, int workers = 1);

/// Ground truth as JSON lines keyed by (user, item).
void write_truth_jsonl(const std::vector<PairTruth>& truth, std::ostream& out);
std::vector<PairTruth> read_truth_jsonl(std::istream& in);

/// Round half away from `midpoint`, then clip to [lo, hi].
int round_rating(double value, const Scale& scale);

}  // namespace nppc
