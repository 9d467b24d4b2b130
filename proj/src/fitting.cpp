#include "nppc/fitting.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "nppc/errors.hpp"
#include "nppc/format.hpp"
#include "nppc/parallel.hpp"

namespace nppc {

void Range::validate(std::string_view name) const {
  if (count < 1) throw std::invalid_argument(std::string(name) + " range: count must be >= 1");
  if (!(min <= max)) throw std::invalid_argument(std::string(name) + " range: min must not exceed max");
  if (count == 1 && min != max) throw std::invalid_argument(std::string(name) + " range: a single value needs min == max");
}

std::vector<double> Range::values() const {
  std::vector<double> out(static_cast<std::size_t>(count));
  if (count == 1) {
    out[0] = min;
    return out;
  }
  for (int i = 0; i < count; ++i) out[i] = min + (max - min) * i / (count - 1);
  out.back() = max;
  return out;
}

Range Range::parse(std::string_view text) {
  const auto parts = split(text, ':');
  if (parts.size() == 1) {
    const double v = parse_double(parts[0]);
    return {v, v, 1};
  }
  if (parts.size() != 3) throw std::invalid_argument("range must be min:max:count, got '" + std::string(text) + "'");
  Range r{parse_double(parts[0]), parse_double(parts[1]), static_cast<int>(parse_int(parts[2]))};
  r.validate("grid");
  return r;
}

std::string Range::to_string() const {
  return format_double(min) + ":" + format_double(max) + ":" + std::to_string(count);
}

void GridSpec::validate(const Scale& scale) const {
  n.validate("n");
  g.validate("g");
  w.validate("w");
  o.validate("o");
  s.validate("s");
  if (std::lround(n.min) < 1) throw std::invalid_argument("n range must start at >= 1");
  if (!(g.min > 0.0)) throw std::invalid_argument("g range must be positive");
  if (!(w.min > 0.0)) throw std::invalid_argument("w range must be positive");
  if (!(o.min > 0.0)) throw std::invalid_argument("o range must be positive");
  if (s.min < scale.lo || s.max > scale.hi) throw std::invalid_argument("s range must lie within the scale");
  if (decoders.empty()) throw std::invalid_argument("grid needs at least one decoder");
  for (const auto& d : decoders) d.validate();
}

std::vector<int> GridSpec::n_values() const {
  std::vector<int> out;
  for (double v : n.values()) {
    const int r = static_cast<int>(std::lround(v));
    if (out.empty() || out.back() != r) out.push_back(r);
  }
  return out;
}

std::uint64_t GridSpec::cardinality() const {
  return static_cast<std::uint64_t>(n_values().size()) * static_cast<std::uint64_t>(g.count) *
         static_cast<std::uint64_t>(w.count) * static_cast<std::uint64_t>(o.count) *
         static_cast<std::uint64_t>(s.count);
}

std::string_view to_string(Objective objective) noexcept {
  return objective == Objective::Kappa ? "kappa" : "jsd";
}

Objective parse_objective(std::string_view text) {
  if (text == "kappa") return Objective::Kappa;
  if (text == "jsd") return Objective::JSD;
  throw std::invalid_argument("objective must be kappa or jsd, got '" + std::string(text) + "'");
}

bool same_fit(const FitResult& a, const FitResult& b) {
  return a.user == b.user && a.item == b.item && a.xi == b.xi && a.decoder == b.decoder &&
         a.score.kind == b.score.kind && a.score.value == b.score.value && a.ambiguity == b.ambiguity &&
         a.energy == b.energy;
}

double population_energy(const CognitionVector& xi) { return xi.n * (xi.g + xi.o); }

std::vector<CognitionVector> enumerate_grid(const GridSpec& spec) {
  const auto ns = spec.n_values();
  const auto gs = spec.g.values(), ws = spec.w.values(), os = spec.o.values(), ss = spec.s.values();
  std::vector<CognitionVector> out;
  out.reserve(ns.size() * gs.size() * ws.size() * os.size() * ss.size());
  for (int n : ns)
    for (double g : gs)
      for (double w : ws)
        for (double o : os)
          for (double s : ss) out.push_back({n, g, w, o, s});
  return out;
}

std::uint64_t candidate_seed(std::uint64_t run_seed, const CognitionVector& xi) {
  return derive_seed(run_seed, {static_cast<std::uint64_t>(Stream::Candidate), static_cast<std::uint64_t>(xi.n),
                                std::bit_cast<std::uint64_t>(xi.g), std::bit_cast<std::uint64_t>(xi.w),
                                std::bit_cast<std::uint64_t>(xi.o), std::bit_cast<std::uint64_t>(xi.s)});
}

bool fit_eligible(const PairRatings& pair, Objective objective) {
  return objective == Objective::Kappa ? pair.ratings.size() == 5 : pair.ratings.size() >= 2;
}

namespace {

std::size_t model_draws(Objective objective, const SamplingBudget& budget) {
  return objective == Objective::Kappa ? static_cast<std::size_t>(budget.kappa_repeats) * 5 : budget.jsd_samples;
}

void validate_budget(Objective objective, const SamplingBudget& budget) {
  if (objective == Objective::Kappa && budget.kappa_repeats < 1) throw std::invalid_argument("kappa repeats must be >= 1");
  if (objective == Objective::JSD && budget.jsd_samples < 2) throw std::invalid_argument("JSD budget must be >= 2 samples");
  if (!(budget.sigma_floor > 0.0)) throw std::invalid_argument("sigma floor must be > 0");
  if (!(budget.jsd_normalizer > 0.0)) throw std::invalid_argument("JSD normalizer must be > 0");
}

void require_observed(const EmpiricalFeedback& observed, Objective objective) {
  if (objective == Objective::Kappa && observed.ratings.size() != 5) {
    throw std::invalid_argument("kappa objective needs exactly 5 ratings per pair");
  }
  if (objective == Objective::JSD && observed.ratings.size() < 2) {
    throw std::invalid_argument("JSD objective needs at least 2 ratings per pair");
  }
}

double chance_for(const EmpiricalFeedback& observed, const SamplingBudget& budget, std::uint64_t run_seed) {
  return chance_agreement(observed.histogram, budget.kappa_repeats, derive_seed(run_seed, Stream::Chance));
}

double kappa_score(std::uint32_t matches, int repeats, double pc) {
  return 1.0 - kappa_from_rates(static_cast<double>(matches) / repeats, pc);
}

double jsd_score(const DiscretizedDensity& observed, const GaussianFit& model, const SamplingBudget& budget,
                 const Scale& scale) {
  const auto q = DiscretizedDensity::gaussian(model.mu, model.sigma, scale, budget.sigma_floor);
  return normalized_jsd(observed, q, budget.jsd_normalizer);
}

}  // namespace

double score_candidate(const EmpiricalFeedback& observed, const CognitionVector& xi, const DecoderSpec& decoder,
                       Objective objective, const SamplingBudget& budget, const Scale& scale,
                       std::uint64_t run_seed) {
  validate_budget(objective, budget);
  require_observed(observed, objective);
  const FeedbackSample model =
      sample_feedback(xi, decoder, scale, model_draws(objective, budget), candidate_seed(run_seed, xi));
  if (objective == Objective::Kappa) {
    const HistogramCodec codec(5, 5);
    const auto counts = round_histogram_counts(model.values, codec, scale);
    return kappa_score(counts[codec.index(observed.histogram)], budget.kappa_repeats,
                       chance_for(observed, budget, run_seed));
  }
  const auto p = DiscretizedDensity::gaussian(observed.gauss.mu, observed.gauss.sigma, scale, budget.sigma_floor);
  return jsd_score(p, gaussian_ml_fit(model.values), budget, scale);
}

CandidateTable CandidateTable::build(const GridSpec& spec, Objective objective, const SamplingBudget& budget,
                                     const Scale& scale, std::uint64_t run_seed, int workers,
                                     const ProgressFn& progress) {
  scale.validate();
  spec.validate(scale);
  validate_budget(objective, budget);
  CandidateTable t;
  t.objective_ = objective;
  t.budget_ = budget;
  t.scale_ = scale;
  t.run_seed_ = run_seed;
  t.points_ = enumerate_grid(spec);
  t.decoders_ = spec.decoders;
  const std::size_t D = t.decoders_.size();
  if (objective == Objective::JSD) {
    t.moments_.resize(t.points_.size() * D);
  } else {
    t.counts_.resize(t.points_.size() * D * t.codec_.size());
  }

  // Points sharing (n, g, w, o) are consecutive and share one likelihood grid.
  const std::size_t per_shape = static_cast<std::size_t>(spec.s.count);
  const std::size_t shapes = t.points_.size() / per_shape;
  const std::size_t draws = model_draws(objective, budget);
  std::size_t done = 0;
  parallel_for(shapes, workers, [&](std::size_t shape) {
    const CognitionVector& first = t.points_[shape * per_shape];
    const auto grid = std::make_shared<const LikelihoodGrid>(first, scale);
    for (std::size_t i = shape * per_shape; i < (shape + 1) * per_shape; ++i) {
      const auto& xi = t.points_[i];
      const auto values =
          sample_feedback_multi(xi, t.decoders_, scale, draws, candidate_seed(run_seed, xi), 1, grid);
      for (std::size_t d = 0; d < D; ++d) {
        if (objective == Objective::JSD) {
          t.moments_[i * D + d] = gaussian_ml_fit(values[d]);
        } else {
          const auto counts = round_histogram_counts(values[d], t.codec_, scale);
          std::copy(counts.begin(), counts.end(), t.counts_.begin() + (i * D + d) * t.codec_.size());
        }
      }
    }
    if (progress) {
#pragma omp critical(nppc_table_progress)
      progress(done += per_shape, t.points_.size());
    }
  });
  return t;
}

const GaussianFit& CandidateTable::moments(std::size_t point, std::size_t decoder) const {
  if (objective_ != Objective::JSD) throw std::logic_error("candidate table holds kappa histograms");
  return moments_.at(point * decoders_.size() + decoder);
}

const std::uint32_t* CandidateTable::histogram_counts(std::size_t point, std::size_t decoder) const {
  if (objective_ != Objective::Kappa) throw std::logic_error("candidate table holds JSD moments");
  return counts_.data() + (point * decoders_.size() + decoder) * codec_.size();
}

std::vector<double> CandidateTable::score_all(const EmpiricalFeedback& observed, int workers) const {
  require_observed(observed, objective_);
  std::vector<double> scores(size());
  if (objective_ == Objective::Kappa) {
    const double pc = chance_for(observed, budget_, run_seed_);
    const std::size_t h = codec_.index(observed.histogram);
    for (std::size_t e = 0; e < scores.size(); ++e) {
      scores[e] = kappa_score(counts_[e * codec_.size() + h], budget_.kappa_repeats, pc);
    }
    return scores;
  }
  const auto p = DiscretizedDensity::gaussian(observed.gauss.mu, observed.gauss.sigma, scale_, budget_.sigma_floor);
  constexpr std::size_t kChunk = 512;
  parallel_for((scores.size() + kChunk - 1) / kChunk, workers, [&](std::size_t c) {
    const std::size_t end = std::min(scores.size(), (c + 1) * kChunk);
    for (std::size_t e = c * kChunk; e < end; ++e) scores[e] = jsd_score(p, moments_[e], budget_, scale_);
  });
  return scores;
}

Argmin reduce_argmin(const std::vector<double>& scores, const std::vector<CognitionVector>& points,
                     std::size_t decoder_count, Objective objective, const std::vector<std::size_t>& decoder_filter) {
  std::vector<bool> allowed(decoder_count, decoder_filter.empty());
  for (std::size_t d : decoder_filter) allowed.at(d) = true;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < scores.size(); ++e) {
    if (allowed[e % decoder_count]) best = std::min(best, scores[e]);
  }
  if (!std::isfinite(best)) throw std::invalid_argument("no candidate to select from");
  const double limit = objective == Objective::JSD ? best + kJsdTieTolerance : best;
  Argmin out{scores.size(), 0};
  double best_energy = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < scores.size(); ++e) {
    if (!allowed[e % decoder_count] || !(scores[e] <= limit)) continue;  // NaN never ties
    ++out.ties;
    const double energy = population_energy(points[e / decoder_count]);
    if (energy < best_energy) {
      best_energy = energy;
      out.index = e;
    }
  }
  return out;
}

FitResult CandidateTable::select_best(const EmpiricalFeedback& observed, int workers,
                                      const std::vector<std::size_t>& decoder_filter) const {
  const auto scores = score_all(observed, workers);
  const Argmin m = reduce_argmin(scores, points_, decoders_.size(), objective_, decoder_filter);
  FitResult r;
  r.xi = points_[m.index / decoders_.size()];
  r.decoder = decoders_[m.index % decoders_.size()];
  r.score = {objective_, scores[m.index]};
  r.ambiguity = m.ties;
  r.energy = population_energy(r.xi);
  return r;
}

bool operator==(const CandidateTable& a, const CandidateTable& b) {
  if (a.objective_ != b.objective_ || !(a.points_ == b.points_) || !(a.decoders_ == b.decoders_)) return false;
  if (a.counts_ != b.counts_ || a.moments_.size() != b.moments_.size()) return false;
  for (std::size_t i = 0; i < a.moments_.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a.moments_[i].mu) != std::bit_cast<std::uint64_t>(b.moments_[i].mu) ||
        std::bit_cast<std::uint64_t>(a.moments_[i].sigma) != std::bit_cast<std::uint64_t>(b.moments_[i].sigma) ||
        a.moments_[i].degenerate != b.moments_[i].degenerate) {
      return false;
    }
  }
  return true;
}

namespace {

// Local grid of three values per dimension centered on `best`, with half the step of `around`.
Range local_range(double center, const Range& around, int round, double lo, double hi) {
  if (around.count < 2) return {center, center, 1};
  const double step = (around.max - around.min) / (around.count - 1) / std::ldexp(1.0, round);
  const double a = std::max(lo, center - step);
  const double b = std::min(hi, center + step);
  return a == b ? Range{a, a, 1} : Range{a, b, 3};
}

}  // namespace

FitResult refine_fit(const EmpiricalFeedback& observed, const GridSpec& spec, const FitOptions& options,
                     std::uint64_t run_seed, FitResult best) {
  const double inf = std::numeric_limits<double>::infinity();
  for (int round = 1; round <= options.refine_rounds; ++round) {
    GridSpec local;
    local.n = local_range(best.xi.n, spec.n, round, 1.0, inf);
    local.g = local_range(best.xi.g, spec.g, round, spec.g.min, spec.g.max);
    local.w = local_range(best.xi.w, spec.w, round, spec.w.min, spec.w.max);
    local.o = local_range(best.xi.o, spec.o, round, spec.o.min, spec.o.max);
    local.s = local_range(best.xi.s, spec.s, round, options.scale.lo, options.scale.hi);
    local.decoders = {best.decoder};
    const auto table = CandidateTable::build(local, options.objective, options.budget, options.scale, run_seed,
                                             options.workers);
    FitResult cand = table.select_best(observed, options.workers);
    const bool better = cand.score.value < best.score.value ||
                        (cand.score.value == best.score.value && cand.energy < best.energy);
    if (better) {
      cand.user = best.user;
      cand.item = best.item;
      best = cand;
    }
  }
  return best;
}

FitResult fit_pair(const EmpiricalFeedback& observed, const GridSpec& spec, const FitOptions& options,
                   std::uint64_t run_seed) {
  require_observed(observed, options.objective);
  const auto table =
      CandidateTable::build(spec, options.objective, options.budget, options.scale, run_seed, options.workers);
  FitResult best = table.select_best(observed, options.workers);
  return options.refine_rounds > 0 ? refine_fit(observed, spec, options, run_seed, best) : best;
}

std::vector<FitResult> fit_dataset(const RatingDataset& data, const GridSpec& spec, const FitOptions& options,
                                   std::uint64_t run_seed, DatasetFitHooks hooks) {
  std::vector<const PairRatings*> todo;
  std::vector<FitResult> out;
  for (const auto& pair : data.pairs()) {
    if (!fit_eligible(pair, options.objective)) {
      if (hooks.warn) {
        hooks.warn("skipping pair (" + std::to_string(pair.user) + "," + std::to_string(pair.item) + "): " +
                   std::to_string(pair.ratings.size()) + " ratings are too few for the " +
                   std::string(to_string(options.objective)) + " objective");
      }
      continue;
    }
    todo.push_back(&pair);
  }
  if (todo.empty()) return out;

  const bool all_done = std::all_of(todo.begin(), todo.end(), [&](const PairRatings* p) {
    return hooks.completed.count({p->user, p->item}) > 0;
  });
  std::optional<CandidateTable> owned;
  const CandidateTable* table = hooks.table;
  if (table) {
    if (table->objective() != options.objective || table->run_seed_ != run_seed ||
        table->decoders() != spec.decoders || table->points() != enumerate_grid(spec)) {
      throw std::invalid_argument("shared candidate table does not match the fit settings");
    }
  } else if (!all_done) {
    owned = CandidateTable::build(spec, options.objective, options.budget, options.scale, run_seed, options.workers,
                                  hooks.table_progress);
    table = &*owned;
  }

  // The score of a pair depends only on its multiset of ratings.
  std::map<std::vector<int>, FitResult> memo;
  for (const PairRatings* pair : todo) {
    FitResult r;
    if (auto it = hooks.completed.find({pair->user, pair->item}); it != hooks.completed.end()) {
      out.push_back(it->second);
      continue;
    }
    std::vector<int> key = pair->ratings;
    std::sort(key.begin(), key.end());
    if (auto it = memo.find(key); it != memo.end()) {
      r = it->second;
    } else {
      const auto observed = EmpiricalFeedback::from_ratings(pair->ratings);
      r = table->select_best(observed, options.workers);
      if (options.refine_rounds > 0) r = refine_fit(observed, spec, options, run_seed, r);
      memo.emplace(key, r);
    }
    r.user = pair->user;
    r.item = pair->item;
    if (hooks.on_result) hooks.on_result(r);
    out.push_back(r);
  }
  return out;
}

namespace {

constexpr std::string_view kFitsHeader = "user,item,n,g,w,o,s,decoder,objective,score,ambiguity,energy";

std::vector<std::string> split_quoted(std::string_view line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.emplace_back();
    } else {
      out.back().push_back(c);
    }
  }
  if (quoted) throw std::invalid_argument("unterminated quote");
  return out;
}

}  // namespace

void write_fits_csv(const std::vector<FitResult>& fits, std::ostream& out, std::string_view comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << kFitsHeader << '\n';
  for (const auto& f : fits) {
    out << f.user << ',' << f.item << ',' << f.xi.n << ',' << format_double(f.xi.g) << ','
        << format_double(f.xi.w) << ',' << format_double(f.xi.o) << ',' << format_double(f.xi.s) << ",\""
        << f.decoder.label() << "\"," << to_string(f.score.kind) << ',' << format_double(f.score.value) << ','
        << f.ambiguity << ',' << format_double(f.energy) << '\n';
  }
}

std::vector<FitResult> read_fits_csv(std::istream& in, std::string_view source) {
  std::vector<FitResult> out;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != kFitsHeader) throw DataError(std::string(source) + ": unexpected fits header");
      header = true;
      continue;
    }
    try {
      const auto f = split_quoted(line);
      if (f.size() != 12) throw std::invalid_argument("expected 12 fields");
      FitResult r;
      r.user = parse_int(f[0]);
      r.item = parse_int(f[1]);
      r.xi = {static_cast<int>(parse_int(f[2])), parse_double(f[3]), parse_double(f[4]), parse_double(f[5]),
              parse_double(f[6])};
      r.decoder = parse_decoder_spec(f[7]);
      r.score = {parse_objective(f[8]), parse_double(f[9])};
      r.ambiguity = static_cast<std::uint64_t>(parse_int(f[10]));
      r.energy = parse_double(f[11]);
      out.push_back(r);
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header) throw DataError(std::string(source) + ": missing fits header");
  return out;
}

std::string fit_to_json(const FitResult& fit) {
  nlohmann::ordered_json j;
  j["user"] = fit.user;
  j["item"] = fit.item;
  j["n"] = fit.xi.n;
  j["g"] = fit.xi.g;
  j["w"] = fit.xi.w;
  j["o"] = fit.xi.o;
  j["s"] = fit.xi.s;
  j["decoder"] = fit.decoder.label();
  j["objective"] = std::string(to_string(fit.score.kind));
  j["score"] = fit.score.value;
  j["ambiguity"] = fit.ambiguity;
  j["energy"] = fit.energy;
  return j.dump();
}

FitResult fit_from_json(std::string_view line) {
  const auto j = nlohmann::json::parse(line);
  FitResult r;
  r.user = j.at("user").get<std::int64_t>();
  r.item = j.at("item").get<std::int64_t>();
  r.xi = {j.at("n").get<int>(), j.at("g").get<double>(), j.at("w").get<double>(), j.at("o").get<double>(),
          j.at("s").get<double>()};
  r.decoder = parse_decoder_spec(j.at("decoder").get<std::string>());
  r.score = {parse_objective(j.at("objective").get<std::string>()), j.at("score").get<double>()};
  r.ambiguity = j.at("ambiguity").get<std::uint64_t>();
  r.energy = j.at("energy").get<double>();
  return r;
}

}  // namespace nppc
