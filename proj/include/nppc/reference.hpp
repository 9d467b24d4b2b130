#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nppc/decoders.hpp"
#include "nppc/fitting.hpp"
#include "nppc/reliability.hpp"

// Straightforward serial versions of the parallel kernels. They decode one
// response at a time with the standalone decoders and are kept to check the
// optimized paths bit for bit.
namespace nppc::reference {

std::vector<std::vector<double>> sample_feedback(const CognitionVector& xi, std::span<const DecoderSpec> decoders,
                                                 const Scale& scale, std::size_t count, std::uint64_t seed);

CandidateTable build_candidate_table(const GridSpec& spec, Objective objective, const SamplingBudget& budget,
                                     const Scale& scale, std::uint64_t run_seed);

/// Scores every candidate with score_candidate and applies the tie rule directly.
FitResult fit_pair(const EmpiricalFeedback& observed, const GridSpec& spec, Objective objective,
                   const SamplingBudget& budget, const Scale& scale, std::uint64_t run_seed);

std::vector<ReliabilitySurface> reliability_sweep(const CognitionVector& base_xi,
                                                  std::span<const DecoderSpec> decoders,
                                                  const std::vector<double>& s_axis,
                                                  const std::vector<double>& g_axis, std::size_t trials,
                                                  const Scale& scale, std::uint64_t seed);

}  // namespace nppc::reference
