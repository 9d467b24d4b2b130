#include "nppc/decoders.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "nppc/format.hpp"
#include "nppc/parallel.hpp"

namespace nppc {

namespace {

std::string lower(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c != ' ') out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

void require_counts(const PopulationResponse& resp) {
  for (double r : resp.rates) {
    if (!(r >= 0.0) || r != std::floor(r)) throw std::invalid_argument("likelihood requires count data");
  }
}

void require_shape(const PopulationResponse& resp) {
  if (resp.rates.empty()) throw std::invalid_argument("empty population response");
  if (resp.rates.size() != resp.preferred.size()) {
    throw std::invalid_argument("population response: rates and preferred differ in length");
  }
}

}  // namespace

std::string_view to_string(DecoderKind kind) noexcept {
  switch (kind) {
    case DecoderKind::MVD: return "MVD";
    case DecoderKind::WAD: return "WAD";
    case DecoderKind::MLD: return "MLD";
    case DecoderKind::MAD: return "MAD";
  }
  return "?";
}

DecoderKind parse_decoder_kind(std::string_view name) {
  const std::string n = lower(name);
  if (n == "mvd") return DecoderKind::MVD;
  if (n == "wad") return DecoderKind::WAD;
  if (n == "mld") return DecoderKind::MLD;
  if (n == "mad") return DecoderKind::MAD;
  throw std::invalid_argument("unknown decoder '" + std::string(name) + "'");
}

GaussianPrior GaussianPrior::flat() {
  return {0.0, std::numeric_limits<double>::infinity(), false};
}

bool GaussianPrior::is_flat() const noexcept { return std::isinf(variance); }

GaussianPrior GaussianPrior::resolved(double stimulus) const noexcept {
  GaussianPrior out = *this;
  if (follows_stimulus) {
    out.mean = stimulus;
    out.follows_stimulus = false;
  }
  return out;
}

double GaussianPrior::log_density(double s) const noexcept {
  const double d = s - mean;
  return -(d * d) / (2.0 * variance);
}

std::vector<DecoderSpec> DecoderSpec::all() {
  return {mvd(), wad(), mld(), mad()};
}

void DecoderSpec::validate() const {
  if (kind == DecoderKind::MAD) {
    if (!prior) throw std::invalid_argument("MAD decoder requires a prior");
    if (!(prior->variance > 0.0)) throw std::invalid_argument("MAD prior variance must be > 0");
  } else if (prior) {
    throw std::invalid_argument("only the MAD decoder takes a prior");
  }
}

std::string DecoderSpec::label() const {
  std::string out(to_string(kind));
  if (kind == DecoderKind::MAD && prior) {
    if (prior->is_flat()) {
      out += "(flat)";
    } else {
      out += "(" + (prior->follows_stimulus ? std::string("s") : format_double(prior->mean)) + "," +
             format_double(prior->variance) + ")";
    }
  }
  return out;
}

DecoderSpec parse_decoder_spec(std::string_view text) {
  const std::string t = lower(text);
  const auto paren = t.find('(');
  const DecoderKind kind = parse_decoder_kind(t.substr(0, paren));
  if (kind != DecoderKind::MAD) {
    if (paren != std::string::npos) throw std::invalid_argument("only MAD takes prior arguments: " + t);
    return {kind, std::nullopt};
  }
  if (paren == std::string::npos) return DecoderSpec::mad();
  if (t.back() != ')') throw std::invalid_argument("malformed decoder: " + t);
  const std::string args = t.substr(paren + 1, t.size() - paren - 2);
  if (args == "flat") return DecoderSpec::mad(GaussianPrior::flat());
  const auto parts = split(args, ',');
  if (parts.size() != 2) throw std::invalid_argument("MAD prior must be (mean,variance): " + t);
  const double var = parse_double(parts[1]);
  DecoderSpec out = parts[0] == "s" ? DecoderSpec::mad(GaussianPrior::following_stimulus(var))
                                    : DecoderSpec::mad(GaussianPrior::centered(parse_double(parts[0]), var));
  out.validate();
  return out;
}

std::vector<DecoderSpec> parse_decoder_list(std::string_view text) {
  if (lower(text) == "all") return DecoderSpec::all();
  std::vector<DecoderSpec> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || (text[i] == ',' && depth == 0)) {
      if (i > start) out.push_back(parse_decoder_spec(text.substr(start, i - start)));
      start = i + 1;
    } else if (text[i] == '(') {
      ++depth;
    } else if (text[i] == ')') {
      --depth;
    }
  }
  if (out.empty()) throw std::invalid_argument("empty decoder list");
  return out;
}

LikelihoodGrid::LikelihoodGrid(const CognitionVector& shape, const Scale& scale)
    : neurons_(shape.n), grid_(scale.grid()) {
  const std::vector<double> preferred = preferred_values(shape.n, scale);
  const std::size_t points = grid_.size();
  log_tuning_.resize(preferred.size() * points);
  total_rate_.assign(points, 0.0);
  for (std::size_t j = 0; j < preferred.size(); ++j) {
    double* row = log_tuning_.data() + j * points;
    for (std::size_t k = 0; k < points; ++k) {
      const double f = tuning_eval(shape, preferred[j], grid_[k]);
      row[k] = std::log(f);
      total_rate_[k] += f;
    }
  }
}

namespace {

constexpr std::size_t kBatch = 4;
constexpr std::size_t kChunk = 32;

// Both kernels add the terms of every grid point in neuron order, so the
// vector widths chosen at run time never change the result.
__attribute__((target_clones("avx512f", "avx2", "default")))
void accumulate_one(const double* rates, std::size_t n, const double* log_tuning, std::size_t points, double* acc) {
  for (std::size_t k = 0; k < points; ++k) acc[k] = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double r = rates[j];
    if (r == 0.0) continue;
    const double* row = log_tuning + j * points;
    for (std::size_t k = 0; k < points; ++k) acc[k] += r * row[k];
  }
}

__attribute__((target_clones("avx512f", "avx2", "default")))
void accumulate_four(const double* rates, std::size_t n, const double* log_tuning, std::size_t points, double* acc) {
  for (std::size_t k0 = 0; k0 < points; k0 += kChunk) {
    const std::size_t kc = std::min(kChunk, points - k0);
    double a[kBatch][kChunk] = {};
    for (std::size_t j = 0; j < n; ++j) {
      const double* row = log_tuning + j * points + k0;
      for (std::size_t b = 0; b < kBatch; ++b) {
        const double r = rates[b * n + j];
        for (std::size_t k = 0; k < kChunk; ++k) a[b][k] += r * (k < kc ? row[k] : 0.0);
      }
    }
    for (std::size_t b = 0; b < kBatch; ++b) {
      for (std::size_t k = 0; k < kc; ++k) acc[b * points + k0 + k] = a[b][k];
    }
  }
}

}  // namespace

void LikelihoodGrid::evaluate(std::span<const double> rates, std::span<double> out) const {
  evaluate_batch(rates, 1, out);
}

void LikelihoodGrid::evaluate_batch(std::span<const double> rates, std::size_t count, std::span<double> out) const {
  const std::size_t points = grid_.size();
  const auto n = static_cast<std::size_t>(neurons_);
  if (rates.size() != n * count || out.size() != points * count) {
    throw std::invalid_argument("LikelihoodGrid::evaluate: size mismatch");
  }
  std::size_t i = 0;
  for (; i + kBatch <= count; i += kBatch) {
    accumulate_four(rates.data() + i * n, n, log_tuning_.data(), points, out.data() + i * points);
  }
  for (; i < count; ++i) accumulate_one(rates.data() + i * n, n, log_tuning_.data(), points, out.data() + i * points);
  for (std::size_t r = 0; r < count; ++r) {
    double* acc = out.data() + r * points;
    for (std::size_t k = 0; k < points; ++k) acc[k] -= total_rate_[k];
  }
}

std::size_t argmax_first(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = k;
  }
  return best;
}

std::size_t argmax_with_prior(std::span<const double> values, std::span<const double> log_prior) {
  std::size_t best = 0;
  double best_value = values[0] + log_prior[0];
  for (std::size_t k = 1; k < values.size(); ++k) {
    const double v = values[k] + log_prior[k];
    if (v > best_value) {
      best_value = v;
      best = k;
    }
  }
  return best;
}

double decode_mvd(const PopulationResponse& resp, std::uint64_t seed) {
  Engine eng = make_engine(seed);
  return decode_mvd(resp, eng);
}

namespace {

std::size_t mvd_index(std::span<const double> rates, Engine& tie_engine) {
  std::size_t best = 0;
  std::uint64_t ties = 1;
  for (std::size_t j = 1; j < rates.size(); ++j) {
    if (rates[j] > rates[best]) {
      best = j;
      ties = 1;
    } else if (rates[j] == rates[best]) {
      ++ties;
      if (uniform_below(tie_engine, ties) == 0) best = j;
    }
  }
  return best;
}

double wad_value(std::span<const double> rates, std::span<const double> preferred) {
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < rates.size(); ++j) {
    num += rates[j] * preferred[j];
    den += rates[j];
  }
  if (!(den > 0.0)) throw std::domain_error("undecodable: zero activity");
  return num / den;
}

double mean_preferred(std::span<const double> preferred) {
  return std::accumulate(preferred.begin(), preferred.end(), 0.0) / static_cast<double>(preferred.size());
}

}  // namespace

double decode_mvd(const PopulationResponse& resp, Engine& tie_engine) {
  require_shape(resp);
  return resp.preferred[mvd_index(resp.rates, tie_engine)];
}

double decode_wad(const PopulationResponse& resp) {
  require_shape(resp);
  return wad_value(resp.rates, resp.preferred);
}

double log_likelihood(const PopulationResponse& resp, const CognitionVector& shape, double candidate_s) {
  require_shape(resp);
  require_counts(resp);
  double total = 0.0;
  for (std::size_t j = 0; j < resp.rates.size(); ++j) {
    const double f = tuning_eval(shape, resp.preferred[j], candidate_s);
    const double r = resp.rates[j];
    total += r * std::log(f) - f - std::lgamma(r + 1.0);
  }
  return total;
}

double decode_mld(const PopulationResponse& resp, const CognitionVector& shape, const Scale& scale) {
  require_shape(resp);
  require_counts(resp);
  const LikelihoodGrid grid(shape, scale);
  std::vector<double> ll(grid.grid().size());
  grid.evaluate(resp.rates, ll);
  return grid.grid()[argmax_first(ll)];
}

double decode_mad(const PopulationResponse& resp, const CognitionVector& shape, const Scale& scale,
                  const GaussianPrior& prior) {
  require_shape(resp);
  require_counts(resp);
  if (!(prior.variance > 0.0)) throw std::invalid_argument("MAD prior variance must be > 0");
  const GaussianPrior p = prior.resolved(shape.s);
  const LikelihoodGrid grid(shape, scale);
  std::vector<double> ll(grid.grid().size());
  grid.evaluate(resp.rates, ll);
  std::vector<double> lp(ll.size());
  for (std::size_t k = 0; k < lp.size(); ++k) lp[k] = p.log_density(grid.grid()[k]);
  return grid.grid()[argmax_with_prior(ll, lp)];
}

double decode_response(const PopulationResponse& resp, const CognitionVector& xi, const DecoderSpec& decoder,
                       const Scale& scale, Engine& tie_engine) {
  switch (decoder.kind) {
    case DecoderKind::MVD: return decode_mvd(resp, tie_engine);
    case DecoderKind::WAD: {
      require_shape(resp);
      const bool silent = std::all_of(resp.rates.begin(), resp.rates.end(), [](double r) { return r == 0.0; });
      return silent ? mean_preferred(resp.preferred) : decode_wad(resp);
    }
    case DecoderKind::MLD: return decode_mld(resp, xi, scale);
    case DecoderKind::MAD: return decode_mad(resp, xi, scale, *decoder.prior);
  }
  throw std::logic_error("unreachable decoder kind");
}

PopulationDecoder::PopulationDecoder(const CognitionVector& xi, const Scale& scale,
                                     std::span<const DecoderSpec> decoders,
                                     std::shared_ptr<const LikelihoodGrid> grid)
    : preferred_(preferred_values(xi.n, scale)),
      scale_grid_(scale.grid()),
      decoders_(decoders.begin(), decoders.end()),
      grid_(std::move(grid)),
      silent_value_(mean_preferred(preferred_)) {
  bool needs_likelihood = false;
  for (const auto& d : decoders_) {
    d.validate();
    needs_likelihood = needs_likelihood || d.needs_likelihood();
  }
  if (needs_likelihood) {
    if (!grid_) grid_ = std::make_shared<const LikelihoodGrid>(xi, scale);
    if (grid_->neurons() != xi.n || grid_->grid().size() != scale_grid_.size()) {
      throw std::invalid_argument("PopulationDecoder: likelihood grid does not match the cognition vector");
    }
    loglik_.resize(scale_grid_.size());
  }
  log_priors_.resize(decoders_.size());
  for (std::size_t d = 0; d < decoders_.size(); ++d) {
    if (decoders_[d].kind != DecoderKind::MAD) continue;
    const GaussianPrior p = decoders_[d].prior->resolved(xi.s);
    auto& lp = log_priors_[d];
    lp.resize(scale_grid_.size());
    for (std::size_t k = 0; k < lp.size(); ++k) lp[k] = p.log_density(scale_grid_[k]);
  }
}

void PopulationDecoder::decode(std::span<const double> rates, Engine& tie_engine, std::span<double> out) {
  if (!loglik_.empty()) grid_->evaluate(rates, loglik_);
  decode_with(rates, loglik_, tie_engine, out);
}

void PopulationDecoder::decode_with(std::span<const double> rates, std::span<const double> loglik,
                                    Engine& tie_engine, std::span<double> out) const {
  for (std::size_t d = 0; d < decoders_.size(); ++d) {
    switch (decoders_[d].kind) {
      case DecoderKind::MVD: out[d] = preferred_[mvd_index(rates, tie_engine)]; break;
      case DecoderKind::WAD: {
        double den = 0.0;
        for (double r : rates) den += r;
        out[d] = den > 0.0 ? wad_value(rates, preferred_) : silent_value_;
        break;
      }
      case DecoderKind::MLD: out[d] = scale_grid_[argmax_first(loglik)]; break;
      case DecoderKind::MAD: out[d] = scale_grid_[argmax_with_prior(loglik, log_priors_[d])]; break;
    }
  }
}

std::vector<std::vector<double>> sample_feedback_multi(const CognitionVector& xi,
                                                       std::span<const DecoderSpec> decoders,
                                                       const Scale& scale, std::size_t count,
                                                       std::uint64_t seed, int workers,
                                                       std::shared_ptr<const LikelihoodGrid> grid) {
  xi.validate(scale);
  if (count < 1) throw std::invalid_argument("sample_feedback: count must be >= 1");
  if (decoders.empty()) throw std::invalid_argument("sample_feedback: no decoders");
  const bool needs_likelihood =
      std::any_of(decoders.begin(), decoders.end(), [](const DecoderSpec& d) { return d.needs_likelihood(); });
  if (needs_likelihood && !grid) grid = std::make_shared<const LikelihoodGrid>(xi, scale);

  const ResponseSampler sampler(xi, scale);
  const auto scale_points = static_cast<std::size_t>(scale.grid_points);
  std::vector<std::vector<double>> out(decoders.size(), std::vector<double>(count));
  const std::size_t blocks = (count + kSampleBlock - 1) / kSampleBlock;

  parallel_for(blocks, workers, [&](std::size_t b) {
    PopulationDecoder decoder(xi, scale, decoders, grid);
    Engine resp_eng = make_engine(derive_seed(seed, Stream::Response, b));
    Engine tie_eng = make_engine(derive_seed(seed, Stream::TieBreak, b));
    constexpr std::size_t kRows = 16;
    const std::size_t n = sampler.size();
    const std::size_t points = scale_points;
    std::vector<double> rates(kRows * n);
    std::vector<double> loglik(needs_likelihood ? kRows * points : 0);
    std::vector<double> decoded(decoders.size());
    const std::size_t end = std::min(count, (b + 1) * kSampleBlock);
    for (std::size_t i = b * kSampleBlock; i < end; i += kRows) {
      const std::size_t rows = std::min(kRows, end - i);
      for (std::size_t r = 0; r < rows; ++r) sampler.draw(resp_eng, std::span<double>(rates).subspan(r * n, n));
      if (needs_likelihood) {
        grid->evaluate_batch(std::span<const double>(rates).first(rows * n), rows,
                             std::span<double>(loglik).first(rows * points));
      }
      for (std::size_t r = 0; r < rows; ++r) {
        const auto row_ll = needs_likelihood ? std::span<const double>(loglik).subspan(r * points, points)
                                             : std::span<const double>();
        decoder.decode_with(std::span<const double>(rates).subspan(r * n, n), row_ll, tie_eng, decoded);
        for (std::size_t d = 0; d < decoded.size(); ++d) out[d][i + r] = decoded[d];
      }
    }
  });
  return out;
}

FeedbackSample sample_feedback(const CognitionVector& xi, const DecoderSpec& decoder, const Scale& scale,
                               std::size_t count, std::uint64_t seed, int workers) {
  decoder.validate();
  const DecoderSpec decoders[] = {decoder};
  auto values = sample_feedback_multi(xi, decoders, scale, count, seed, workers);
  return {std::move(values.front()), xi, decoder};
}

}  // namespace nppc
