#include "nppc/neural.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace nppc {

void Scale::validate() const {
  if (!(lo < hi)) throw std::invalid_argument("scale requires lo < hi");
  if (grid_points < 2) throw std::invalid_argument("scale requires at least 2 grid points");
}

std::vector<double> Scale::grid() const {
  std::vector<double> out(static_cast<std::size_t>(grid_points));
  const double span = hi - lo;
  for (int k = 0; k < grid_points; ++k) out[k] = lo + span * k / (grid_points - 1);
  out.back() = hi;
  return out;
}

void CognitionVector::validate(const Scale& scale) const {
  if (n < 1) throw std::invalid_argument("cognition vector: n must be >= 1");
  if (!(g > 0.0)) throw std::invalid_argument("cognition vector: g must be > 0");
  if (!(w > 0.0)) throw std::invalid_argument("cognition vector: w must be > 0");
  if (!(o > 0.0)) throw std::invalid_argument("cognition vector: o must be > 0");
  if (!scale.contains(s)) throw std::invalid_argument("cognition vector: s outside the scale");
}

std::vector<double> preferred_values(int n, const Scale& scale) {
  if (n < 1) throw std::invalid_argument("preferred_values: n must be >= 1");
  if (n == 1) return {scale.midpoint()};
  std::vector<double> out(static_cast<std::size_t>(n));
  const double span = scale.hi - scale.lo;
  for (int j = 0; j < n; ++j) out[j] = scale.lo + span * j / (n - 1);
  out.back() = scale.hi;
  return out;
}

double tuning_eval(const CognitionVector& xi, double preferred, double stimulus) {
  const double z = (stimulus - preferred) / xi.w;
  const double density = std::exp(-0.5 * z * z) / (xi.w * std::sqrt(2.0 * std::numbers::pi));
  return xi.g * density + xi.o;
}

PopulationResponse static_response(const CognitionVector& xi, const Scale& scale) {
  xi.validate(scale);
  PopulationResponse resp;
  resp.preferred = preferred_values(xi.n, scale);
  resp.rates.reserve(resp.preferred.size());
  for (double p : resp.preferred) resp.rates.push_back(tuning_eval(xi, p, xi.s));
  return resp;
}

PopulationResponse sample_response(const CognitionVector& xi, const Scale& scale, std::uint64_t seed) {
  Engine eng = make_engine(seed);
  return sample_response(xi, scale, eng);
}

PopulationResponse sample_response(const CognitionVector& xi, const Scale& scale, Engine& eng) {
  const ResponseSampler sampler(xi, scale);
  PopulationResponse resp;
  resp.preferred = preferred_values(xi.n, scale);
  resp.rates.resize(sampler.size());
  sampler.draw(eng, resp.rates);
  return resp;
}

ResponseSampler::ResponseSampler(const CognitionVector& xi, const Scale& scale) {
  means_ = static_response(xi, scale).rates;
  samplers_.reserve(means_.size());
  for (double m : means_) samplers_.emplace_back(m);
}

void ResponseSampler::draw(Engine& eng, std::span<double> rates) const {
  if (rates.size() != samplers_.size()) throw std::invalid_argument("ResponseSampler: output size mismatch");
  for (std::size_t j = 0; j < samplers_.size(); ++j) rates[j] = static_cast<double>(samplers_[j](eng));
}

}  // namespace nppc
