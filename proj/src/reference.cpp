#include "nppc/reference.hpp"

#include <algorithm>
#include <limits>

#include "nppc/metrics.hpp"

namespace nppc::reference {

std::vector<std::vector<double>> sample_feedback(const CognitionVector& xi, std::span<const DecoderSpec> decoders,
                                                 const Scale& scale, std::size_t count, std::uint64_t seed) {
  std::vector<std::vector<double>> out(decoders.size(), std::vector<double>(count));
  Engine resp_eng, tie_eng;
  for (std::size_t i = 0; i < count; ++i) {
    if (i % kSampleBlock == 0) {
      resp_eng = make_engine(derive_seed(seed, Stream::Response, i / kSampleBlock));
      tie_eng = make_engine(derive_seed(seed, Stream::TieBreak, i / kSampleBlock));
    }
    const PopulationResponse resp = sample_response(xi, scale, resp_eng);
    for (std::size_t d = 0; d < decoders.size(); ++d) out[d][i] = decode_response(resp, xi, decoders[d], scale, tie_eng);
  }
  return out;
}

CandidateTable build_candidate_table(const GridSpec& spec, Objective objective, const SamplingBudget& budget,
                                     const Scale& scale, std::uint64_t run_seed) {
  CandidateTable t;
  t.objective_ = objective;
  t.budget_ = budget;
  t.scale_ = scale;
  t.run_seed_ = run_seed;
  t.points_ = enumerate_grid(spec);
  t.decoders_ = spec.decoders;
  const std::size_t draws =
      objective == Objective::Kappa ? static_cast<std::size_t>(budget.kappa_repeats) * 5 : budget.jsd_samples;
  for (const auto& xi : t.points_) {
    for (const auto& d : t.decoders_) {
      // One decoder at a time: the table must not depend on which decoders share a sample.
      const auto values = nppc::sample_feedback(xi, d, scale, draws, candidate_seed(run_seed, xi)).values;
      if (objective == Objective::JSD) {
        t.moments_.push_back(gaussian_ml_fit(values));
      } else {
        const auto counts = round_histogram_counts(values, t.codec_, scale);
        t.counts_.insert(t.counts_.end(), counts.begin(), counts.end());
      }
    }
  }
  return t;
}

FitResult fit_pair(const EmpiricalFeedback& observed, const GridSpec& spec, Objective objective,
                   const SamplingBudget& budget, const Scale& scale, std::uint64_t run_seed) {
  struct Entry {
    CognitionVector xi;
    DecoderSpec decoder;
    double score;
  };
  std::vector<Entry> entries;
  for (const auto& xi : enumerate_grid(spec)) {
    for (const auto& d : spec.decoders) {
      entries.push_back({xi, d, score_candidate(observed, xi, d, objective, budget, scale, run_seed)});
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : entries) best = std::min(best, e.score);
  const double tol = objective == Objective::JSD ? kJsdTieTolerance : 0.0;
  FitResult r;
  r.ambiguity = 0;
  r.energy = std::numeric_limits<double>::infinity();
  for (const auto& e : entries) {
    if (e.score - best > tol) continue;
    ++r.ambiguity;
    const double energy = population_energy(e.xi);
    if (energy < r.energy) {
      r.energy = energy;
      r.xi = e.xi;
      r.decoder = e.decoder;
      r.score = {objective, e.score};
    }
  }
  return r;
}

std::vector<ReliabilitySurface> reliability_sweep(const CognitionVector& base_xi,
                                                  std::span<const DecoderSpec> decoders,
                                                  const std::vector<double>& s_axis,
                                                  const std::vector<double>& g_axis, std::size_t trials,
                                                  const Scale& scale, std::uint64_t seed) {
  std::vector<ReliabilitySurface> out;
  for (const auto& d : decoders) {
    ReliabilitySurface s{s_axis, g_axis, {}, d, base_xi};
    for (std::size_t i = 0; i < s_axis.size(); ++i) {
      s.values.emplace_back();
      for (std::size_t j = 0; j < g_axis.size(); ++j) {
        CognitionVector xi = base_xi;
        xi.s = s_axis[i];
        xi.g = g_axis[j];
        const auto fb = nppc::sample_feedback(xi, d, scale, trials, reliability_cell_seed(seed, i, j));
        s.values.back().push_back(mse_ratio(xi.s, fb.values, scale));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace nppc::reference
