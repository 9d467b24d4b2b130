#include "nppc/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "nppc/format.hpp"
#include "nppc/metrics.hpp"
#include "nppc/parallel.hpp"

namespace nppc {

double Histogram::bin_lo(std::size_t b) const {
  return scale.lo + (scale.hi - scale.lo) * static_cast<double>(b) / static_cast<double>(bins());
}

double Histogram::bin_hi(std::size_t b) const {
  return b + 1 == bins() ? scale.hi : bin_lo(b + 1);
}

std::size_t Histogram::bin_of(double value) const {
  if (!scale.contains(value)) throw std::invalid_argument("histogram value outside the scale");
  const double pos = (value - scale.lo) / (scale.hi - scale.lo) * static_cast<double>(bins());
  return std::min(bins() - 1, static_cast<std::size_t>(pos));
}

Histogram make_histogram(std::span<const double> values, const Scale& scale, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
  if (values.empty()) throw std::invalid_argument("histogram of no values");
  Histogram h{scale, std::vector<double>(static_cast<std::size_t>(bins), 0.0)};
  std::vector<std::size_t> counts(h.mass.size(), 0);
  for (double v : values) ++counts[h.bin_of(v)];
  for (std::size_t b = 0; b < counts.size(); ++b) {
    h.mass[b] = static_cast<double>(counts[b]) / static_cast<double>(values.size());
  }
  return h;
}

Histogram feedback_distribution(const CognitionVector& xi, const DecoderSpec& decoder, const Scale& scale,
                                int bins, std::size_t samples, std::uint64_t seed, int workers) {
  const auto fb = sample_feedback(xi, decoder, scale, samples, seed, workers);
  return make_histogram(fb.values, scale, bins);
}

std::vector<double> ReliabilitySurface::column_means() const {
  std::vector<double> out(g_axis.size(), 0.0);
  for (const auto& row : values) {
    for (std::size_t j = 0; j < row.size(); ++j) out[j] += row[j];
  }
  for (double& v : out) v /= static_cast<double>(values.size());
  return out;
}

double ReliabilitySurface::at(double s, double g) const {
  const auto i = std::find(s_axis.begin(), s_axis.end(), s);
  const auto j = std::find(g_axis.begin(), g_axis.end(), g);
  if (i == s_axis.end() || j == g_axis.end()) throw std::out_of_range("point is not on the surface axes");
  return values[i - s_axis.begin()][j - g_axis.begin()];
}

std::vector<double> default_s_axis() {
  std::vector<double> out;
  for (int i = 0; i <= 16; ++i) out.push_back(1.0 + 0.25 * i);
  return out;
}

std::vector<double> default_g_axis() { return {1, 5, 10, 25, 50, 100}; }

std::uint64_t reliability_cell_seed(std::uint64_t seed, std::size_t s_index, std::size_t g_index) {
  return derive_seed(seed, {static_cast<std::uint64_t>(Stream::Cell), s_index, g_index});
}

std::vector<ReliabilitySurface> reliability_sweep(const CognitionVector& base_xi,
                                                  std::span<const DecoderSpec> decoders,
                                                  const std::vector<double>& s_axis,
                                                  const std::vector<double>& g_axis, std::size_t trials,
                                                  const Scale& scale, std::uint64_t seed, int workers) {
  if (s_axis.empty() || g_axis.empty()) throw std::invalid_argument("reliability axes must be non-empty");
  if (decoders.empty()) throw std::invalid_argument("reliability sweep needs a decoder");
  if (trials < 1) throw std::invalid_argument("reliability sweep needs trials >= 1");
  for (double s : s_axis) {
    if (!scale.contains(s)) throw std::invalid_argument("stimulus axis leaves the scale");
  }
  for (double g : g_axis) {
    if (!(g > 0.0)) throw std::invalid_argument("gain axis must be positive");
  }
  std::vector<ReliabilitySurface> out;
  for (const auto& d : decoders) {
    out.push_back({s_axis, g_axis,
                   std::vector<std::vector<double>>(s_axis.size(), std::vector<double>(g_axis.size())), d,
                   base_xi});
  }
  const std::size_t cells = s_axis.size() * g_axis.size();
  parallel_for(cells, workers, [&](std::size_t c) {
    const std::size_t i = c / g_axis.size();
    const std::size_t j = c % g_axis.size();
    CognitionVector xi = base_xi;
    xi.s = s_axis[i];
    xi.g = g_axis[j];
    const auto values = sample_feedback_multi(xi, decoders, scale, trials, reliability_cell_seed(seed, i, j));
    for (std::size_t d = 0; d < decoders.size(); ++d) out[d].values[i][j] = mse_ratio(xi.s, values[d], scale);
  });
  return out;
}

ReliabilitySurface reliability_sweep(const CognitionVector& base_xi, const DecoderSpec& decoder,
                                     const std::vector<double>& s_axis, const std::vector<double>& g_axis,
                                     std::size_t trials, const Scale& scale, std::uint64_t seed, int workers) {
  const DecoderSpec one[] = {decoder};
  return reliability_sweep(base_xi, one, s_axis, g_axis, trials, scale, seed, workers).front();
}

std::string file_tag(const DecoderSpec& decoder) {
  std::string out;
  for (char c : decoder.label()) {
    if (c == '(' || c == ',') {
      out.push_back('_');
    } else if (c != ')') {
      out.push_back(c);
    }
  }
  return out;
}

std::string surface_file_name(const ReliabilitySurface& surface, std::uint64_t seed) {
  return "reliability_" + file_tag(surface.decoder) + "_n" + std::to_string(surface.base_xi.n) + "_w" +
         format_double(surface.base_xi.w) + "_o" + format_double(surface.base_xi.o) + "_seed" +
         std::to_string(seed) + ".csv";
}

std::string histogram_file_name(const CognitionVector& xi, const DecoderSpec& decoder, std::uint64_t seed) {
  return "histogram_" + file_tag(decoder) + "_xi" + std::to_string(xi.n) + "-" + format_double(xi.g) + "-" +
         format_double(xi.w) + "-" + format_double(xi.o) + "-" + format_double(xi.s) + "_seed" +
         std::to_string(seed) + ".csv";
}

void write_surface_csv(const ReliabilitySurface& surface, std::ostream& out, std::string_view comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << 's';
  for (double g : surface.g_axis) out << ",g=" << format_double(g);
  out << '\n';
  for (std::size_t i = 0; i < surface.s_axis.size(); ++i) {
    out << format_double(surface.s_axis[i]);
    for (double v : surface.values[i]) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_histogram_csv(const Histogram& hist, std::ostream& out, std::string_view comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "bin_lo,bin_hi,mass\n";
  for (std::size_t b = 0; b < hist.bins(); ++b) {
    out << format_double(hist.bin_lo(b)) << ',' << format_double(hist.bin_hi(b)) << ',' << format_double(hist.mass[b])
        << '\n';
  }
}

}  // namespace nppc
