#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nppc/rng.hpp"

namespace nppc {

/// Rating scale in stars, discretized for continuous estimation.
struct Scale {
  double lo = 1.0;
  double hi = 5.0;
  int grid_points = 401;

  void validate() const;
  double midpoint() const noexcept { return 0.5 * (lo + hi); }
  double step() const noexcept { return (hi - lo) / (grid_points - 1); }
  double clamp(double v) const noexcept { return v < lo ? lo : (v > hi ? hi : v); }
  bool contains(double v) const noexcept { return v >= lo && v <= hi; }
  std::vector<double> grid() const;

  friend bool operator==(const Scale&, const Scale&) = default;
};

/// Population size, tuning gain, tuning width, baseline offset and assumed stimulus.
struct CognitionVector {
  int n = 1;
  double g = 1.0;
  double w = 1.0;
  double o = 1.0;
  double s = 3.0;

  void validate(const Scale& scale) const;

  friend bool operator==(const CognitionVector&, const CognitionVector&) = default;
};

/// One realization of population activity, rates in Hz against preferred stimuli.
struct PopulationResponse {
  std::vector<double> rates;
  std::vector<double> preferred;
};

/// Equidistant preferred stimuli over the scale; a single neuron sits at the midpoint.
std::vector<double> preferred_values(int n, const Scale& scale);

/// Bell-shaped tuning curve: g * N(stim; p, w) + o.
double tuning_eval(const CognitionVector& xi, double preferred, double stimulus);

PopulationResponse static_response(const CognitionVector& xi, const Scale& scale);

PopulationResponse sample_response(const CognitionVector& xi, const Scale& scale, std::uint64_t seed);
PopulationResponse sample_response(const CognitionVector& xi, const Scale& scale, Engine& eng);

/// Per-neuron Poisson samplers for a fixed cognition vector, reused across many draws.
class ResponseSampler {
 public:
  ResponseSampler(const CognitionVector& xi, const Scale& scale);

  std::size_t size() const noexcept { return samplers_.size(); }
  const std::vector<double>& means() const noexcept { return means_; }
  void draw(Engine& eng, std::span<double> rates) const;

 private:
  std::vector<double> means_;
  std::vector<PoissonSampler> samplers_;
};

}  // namespace nppc
