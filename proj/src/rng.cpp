#include "nppc/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace nppc {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t h = mix64(parent);
  for (std::uint64_t t : tags) h = mix64(h ^ mix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

PoissonSampler::PoissonSampler(double mean) : mean_(mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw std::invalid_argument("Poisson mean must be finite and non-negative");
  if (mean < kInversionLimit) {
    double pmf = std::exp(-mean);
    double cdf = pmf;
    cdf_.push_back(cdf);
    for (std::int64_t k = 1;; ++k) {
      pmf *= mean / static_cast<double>(k);
      cdf += pmf;
      cdf_.push_back(cdf);
      if (static_cast<double>(k) > mean && pmf < 1e-18) break;
    }
    // guide_[i] is the first k with cdf_[k] >= i / size; the search starts there.
    const std::size_t size = cdf_.size();
    guide_.resize(size);
    std::size_t k = 0;
    for (std::size_t i = 0; i < size; ++i) {
      const double level = static_cast<double>(i) / static_cast<double>(size);
      while (k + 1 < size && cdf_[k] < level) ++k;
      guide_[i] = static_cast<std::uint32_t>(k);
    }
  } else {
    slam_ = std::sqrt(mean);
    loglam_ = std::log(mean);
    b_ = 0.931 + 2.53 * slam_;
    a_ = -0.059 + 0.02483 * b_;
    invalpha_ = 1.1239 + 1.1328 / (b_ - 3.4);
    vr_ = 0.9277 - 3.6224 / (b_ - 2.0);
  }
}

std::int64_t PoissonSampler::operator()(Engine& eng) const {
  if (mean_ == 0.0) return 0;
  return mean_ < kInversionLimit ? sample_inversion(eng) : sample_ptrs(eng);
}

std::int64_t PoissonSampler::sample_inversion(Engine& eng) const {
  const double u = uniform01(eng);
  const std::size_t size = cdf_.size();
  std::size_t k = guide_[static_cast<std::size_t>(u * static_cast<double>(size))];
  while (k < size && u > cdf_[k]) ++k;
  if (k < size) return static_cast<std::int64_t>(k);
  // Beyond the table the remaining mass is below 1e-17; continue the recurrence.
  double pmf = cdf_[size - 1] - cdf_[size - 2];
  double cdf = cdf_[size - 1];
  std::int64_t j = static_cast<std::int64_t>(size) - 1;
  while (u > cdf && pmf > 0.0) {
    ++j;
    pmf *= mean_ / static_cast<double>(j);
    cdf += pmf;
  }
  return j;
}

std::int64_t PoissonSampler::sample_ptrs(Engine& eng) const {
  for (;;) {
    const double u = uniform01(eng) - 0.5;
    const double v = uniform01(eng);
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a_ / us + b_) * u + mean_ + 0.43);
    if (us >= 0.07 && v <= vr_) return static_cast<std::int64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(invalpha_) - std::log(a_ / (us * us) + b_) <=
        -mean_ + k * loglam_ - std::lgamma(k + 1.0)) {
      return static_cast<std::int64_t>(k);
    }
  }
}

}  // namespace nppc
