#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nppc/decoders.hpp"
#include "nppc/neural.hpp"

namespace nppc {

/// Normalized histogram over [lo, hi] with equal-width bins; the top edge
/// belongs to the last bin.
struct Histogram {
  Scale scale;
  std::vector<double> mass;

  std::size_t bins() const noexcept { return mass.size(); }
  double bin_lo(std::size_t b) const;
  double bin_hi(std::size_t b) const;
  std::size_t bin_of(double value) const;
};

Histogram make_histogram(std::span<const double> values, const Scale& scale, int bins);

Histogram feedback_distribution(const CognitionVector& xi, const DecoderSpec& decoder, const Scale& scale,
                                int bins, std::size_t samples, std::uint64_t seed, int workers = 1);

/// MSE/MSE_max of decoded estimates over a (stimulus, gain) grid.
struct ReliabilitySurface {
  std::vector<double> s_axis;
  std::vector<double> g_axis;
  std::vector<std::vector<double>> values;  // [s index][g index]
  DecoderSpec decoder;
  CognitionVector base_xi;

  /// Mean over the stimulus axis for every gain.
  std::vector<double> column_means() const;
  double at(double s, double g) const;
};

inline CognitionVector default_reliability_base() { return {100, 1.0, 1.0, 5.0, 3.0}; }
std::vector<double> default_s_axis();
std::vector<double> default_g_axis();

/// One surface per decoder. Every cell draws its responses once from the
/// substream (seed, Cell, s index, g index) and decodes them with all decoders.
std::vector<ReliabilitySurface> reliability_sweep(const CognitionVector& base_xi,
                                                  std::span<const DecoderSpec> decoders,
                                                  const std::vector<double>& s_axis,
                                                  const std::vector<double>& g_axis, std::size_t trials,
                                                  const Scale& scale, std::uint64_t seed, int workers = 1);

ReliabilitySurface reliability_sweep(const CognitionVector& base_xi, const DecoderSpec& decoder,
                                     const std::vector<double>& s_axis, const std::vector<double>& g_axis,
                                     std::size_t trials, const Scale& scale, std::uint64_t seed, int workers = 1);

std::uint64_t reliability_cell_seed(std::uint64_t seed, std::size_t s_index, std::size_t g_index);

/// File-name stem encoding decoder, the fixed vector components and the seed.
std::string file_tag(const DecoderSpec& decoder);
std::string surface_file_name(const ReliabilitySurface& surface, std::uint64_t seed);
std::string histogram_file_name(const CognitionVector& xi, const DecoderSpec& decoder, std::uint64_t seed);

/// Matrix CSV: header `s,g=<g1>,g=<g2>,...`, one row per stimulus.
void write_surface_csv(const ReliabilitySurface& surface, std::ostream& out, std::string_view comment = {});
/// `bin_lo,bin_hi,mass` rows.
void write_histogram_csv(const Histogram& hist, std::ostream& out, std::string_view comment = {});

}  // namespace nppc
