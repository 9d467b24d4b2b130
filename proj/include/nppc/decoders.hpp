#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nppc/neural.hpp"
#include "nppc/rng.hpp"

namespace nppc {

enum class DecoderKind { MVD, WAD, MLD, MAD };

std::string_view to_string(DecoderKind kind) noexcept;
DecoderKind parse_decoder_kind(std::string_view name);

/// Gaussian prior over the stimulus for the MAP decoder.
///
/// A prior that follows the stimulus is centered on the cognition vector's s
/// at decoding time. Infinite variance gives a numerically flat prior whose
/// log density is -0.0 everywhere.
struct GaussianPrior {
  double mean = 3.0;
  double variance = 0.75;
  bool follows_stimulus = false;

  static GaussianPrior centered(double mean, double variance) { return {mean, variance, false}; }
  static GaussianPrior following_stimulus(double variance = 0.75) { return {0.0, variance, true}; }
  static GaussianPrior flat();

  bool is_flat() const noexcept;
  GaussianPrior resolved(double stimulus) const noexcept;
  /// Unnormalized log density.
  double log_density(double s) const noexcept;

  friend bool operator==(const GaussianPrior&, const GaussianPrior&) = default;
};

struct DecoderSpec {
  DecoderKind kind = DecoderKind::WAD;
  std::optional<GaussianPrior> prior;

  static DecoderSpec mvd() { return {DecoderKind::MVD, std::nullopt}; }
  static DecoderSpec wad() { return {DecoderKind::WAD, std::nullopt}; }
  static DecoderSpec mld() { return {DecoderKind::MLD, std::nullopt}; }
  static DecoderSpec mad(GaussianPrior prior = GaussianPrior::following_stimulus()) { return {DecoderKind::MAD, prior}; }

  /// The four decoders with the MAD prior N(s, 0.75) centered on the stimulus.
  static std::vector<DecoderSpec> all();

  void validate() const;
  bool needs_likelihood() const noexcept { return kind == DecoderKind::MLD || kind == DecoderKind::MAD; }
  /// Human-readable label, e.g. "MAD(s,0.75)".
  std::string label() const;

  friend bool operator==(const DecoderSpec&, const DecoderSpec&) = default;
};

DecoderSpec parse_decoder_spec(std::string_view text);
std::vector<DecoderSpec> parse_decoder_list(std::string_view text);

struct FeedbackSample {
  std::vector<double> values;
  CognitionVector xi;
  DecoderSpec decoder;
};

/// Log tuning values of one population shape on the scale grid.
///
/// Only n, g, w and o matter; the stimulus s is ignored, so one grid is shared
/// by every cognition vector that differs in s alone.
class LikelihoodGrid {
 public:
  LikelihoodGrid(const CognitionVector& shape, const Scale& scale);

  const std::vector<double>& grid() const noexcept { return grid_; }
  int neurons() const noexcept { return neurons_; }

  /// out[k] = sum_j r_j log f_j(s_k) - sum_j f_j(s_k), i.e. the Poisson
  /// log-likelihood without the count-only term sum_j log(r_j!).
  void evaluate(std::span<const double> rates, std::span<double> out) const;
  /// Same as evaluate for `count` responses stored row-major; bitwise identical per row.
  void evaluate_batch(std::span<const double> rates, std::size_t count, std::span<double> out) const;

 private:
  int neurons_;
  std::vector<double> grid_;
  std::vector<double> log_tuning_;  // [neuron][grid point]
  std::vector<double> total_rate_;  // [grid point]
};

/// Index of the first maximum of values[k] + log_prior[k]; ties resolve to the smallest k.
std::size_t argmax_with_prior(std::span<const double> values, std::span<const double> log_prior);
std::size_t argmax_first(std::span<const double> values);

double decode_mvd(const PopulationResponse& resp, std::uint64_t seed);
double decode_mvd(const PopulationResponse& resp, Engine& tie_engine);
double decode_wad(const PopulationResponse& resp);
double log_likelihood(const PopulationResponse& resp, const CognitionVector& shape, double candidate_s);
double decode_mld(const PopulationResponse& resp, const CognitionVector& shape, const Scale& scale);
double decode_mad(const PopulationResponse& resp, const CognitionVector& shape, const Scale& scale,
                  const GaussianPrior& prior);

/// Decodes one sampled response with any decoder. A silent population has no
/// weighted average; WAD then reports the mean preferred value.
double decode_response(const PopulationResponse& resp, const CognitionVector& xi, const DecoderSpec& decoder,
                       const Scale& scale, Engine& tie_engine);

/// Decodes responses of one cognition vector with several decoders at once,
/// sharing the likelihood evaluation between MLD and MAD.
class PopulationDecoder {
 public:
  PopulationDecoder(const CognitionVector& xi, const Scale& scale, std::span<const DecoderSpec> decoders,
                    std::shared_ptr<const LikelihoodGrid> grid = nullptr);

  std::size_t decoder_count() const noexcept { return decoders_.size(); }
  bool needs_likelihood() const noexcept { return !loglik_.empty(); }
  void decode(std::span<const double> rates, Engine& tie_engine, std::span<double> out);
  /// Decodes with a log-likelihood row already evaluated on the shared grid.
  void decode_with(std::span<const double> rates, std::span<const double> loglik, Engine& tie_engine,
                   std::span<double> out) const;

 private:
  std::vector<double> preferred_;
  std::vector<double> scale_grid_;
  std::vector<DecoderSpec> decoders_;
  std::shared_ptr<const LikelihoodGrid> grid_;
  std::vector<std::vector<double>> log_priors_;
  std::vector<double> loglik_;
  double silent_value_;
};

/// Number of samples per independently seeded block in feedback sampling.
inline constexpr std::size_t kSampleBlock = 1024;

/// Draws `count` responses for xi and decodes each with every decoder; one
/// vector of decoded values per decoder. Block b uses the substreams
/// (seed, Response, b) and (seed, TieBreak, b), so the output does not depend
/// on the worker count or on which other decoders are requested.
std::vector<std::vector<double>> sample_feedback_multi(const CognitionVector& xi,
                                                       std::span<const DecoderSpec> decoders,
                                                       const Scale& scale, std::size_t count,
                                                       std::uint64_t seed, int workers = 1,
                                                       std::shared_ptr<const LikelihoodGrid> grid = nullptr);

FeedbackSample sample_feedback(const CognitionVector& xi, const DecoderSpec& decoder, const Scale& scale,
                               std::size_t count, std::uint64_t seed, int workers = 1);

}  // namespace nppc
