#include "nppc/cf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "nppc/errors.hpp"
#include "nppc/format.hpp"
#include "nppc/parallel.hpp"
#include "nppc/rng.hpp"

namespace nppc {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

std::size_t weighted_pick(const std::vector<double>& mass, Engine& eng) {
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  const double target = uniform01(eng) * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    cum += mass[i];
    if (target < cum) return i;
  }
  // Rounding left the target at the total: take the last point with mass.
  for (std::size_t i = mass.size(); i-- > 0;) {
    if (mass[i] > 0.0) return i;
  }
  return 0;
}

}  // namespace

ClusterModel kmeans(const std::vector<std::vector<double>>& points, int k, std::uint64_t seed,
                    const std::vector<double>& weights, int max_iterations) {
  const std::size_t N = points.size();
  if (N == 0) throw std::invalid_argument("kmeans: no points");
  if (k < 1 || static_cast<std::size_t>(k) > N) throw std::invalid_argument("kmeans: k must be in [1, number of points]");
  const std::size_t dim = points[0].size();
  for (const auto& p : points) {
    if (p.size() != dim) throw std::invalid_argument("kmeans: points differ in dimension");
  }
  std::vector<double> w(N, 1.0);
  if (!weights.empty()) {
    if (weights.size() != N) throw std::invalid_argument("kmeans: one weight per point");
    const double lo = *std::min_element(weights.begin(), weights.end());
    if (!(lo > 0.0)) throw std::invalid_argument("kmeans: weights must be positive");
    for (std::size_t i = 0; i < N; ++i) w[i] = weights[i] / lo;
  }

  ClusterModel m;
  m.k = k;
  Engine eng = make_engine(seed);
  m.centroids.push_back(points[weighted_pick(w, eng)]);
  std::vector<double> d2(N);
  while (m.centroids.size() < static_cast<std::size_t>(k)) {
    for (std::size_t i = 0; i < N; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : m.centroids) best = std::min(best, sq_dist(points[i], c));
      d2[i] = w[i] * best;
    }
    const bool all_zero = std::all_of(d2.begin(), d2.end(), [](double v) { return v == 0.0; });
    m.centroids.push_back(points[all_zero ? uniform_below(eng, N) : weighted_pick(d2, eng)]);
  }

  m.assignments.assign(N, -1);
  for (m.iterations = 1; m.iterations <= max_iterations; ++m.iterations) {
    bool changed = false;
    for (std::size_t i = 0; i < N; ++i) {
      int best = 0;
      double best_d = sq_dist(points[i], m.centroids[0]);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(points[i], m.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (m.assignments[i] != best) {
        m.assignments[i] = best;
        changed = true;
      }
    }
    std::vector<std::vector<double>> sum(k, std::vector<double>(dim, 0.0));
    std::vector<double> mass(k, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
      const int c = m.assignments[i];
      mass[c] += w[i];
      for (std::size_t d = 0; d < dim; ++d) sum[c][d] += w[i] * points[i][d];
    }
    for (int c = 0; c < k; ++c) {
      if (mass[c] > 0.0) {
        for (std::size_t d = 0; d < dim; ++d) m.centroids[c][d] = sum[c][d] / mass[c];
        continue;
      }
      // Empty cluster: move its centroid onto the point farthest from its own centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double d = sq_dist(points[i], m.centroids[m.assignments[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far_d > 0.0) {
        m.centroids[c] = points[far];
        m.assignments[far] = c;
        changed = true;
      }
    }
    if (!changed) break;
  }
  m.iterations = std::min(m.iterations, max_iterations);
  m.inertia = 0.0;
  for (std::size_t i = 0; i < N; ++i) m.inertia += w[i] * sq_dist(points[i], m.centroids[m.assignments[i]]);
  return m;
}

std::vector<double> elbow_inertia(const std::vector<std::vector<double>>& points, int k_max, std::uint64_t seed) {
  std::vector<double> out;
  const int top = std::min<int>(k_max, static_cast<int>(points.size()));
  for (int k = 1; k <= top; ++k) out.push_back(kmeans(points, k, seed).inertia);
  return out;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("adjusted_rand_index: label vectors must match");
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1;
    rows[a[i]] += 1;
    cols[b[i]] += 1;
  }
  const auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sum_rows = 0, sum_cols = 0;
  for (const auto& [key, v] : table) index += c2(v);
  for (const auto& [key, v] : rows) sum_rows += c2(v);
  for (const auto& [key, v] : cols) sum_cols += c2(v);
  const double expected = sum_rows * sum_cols / c2(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

void standardize(std::vector<std::vector<double>>& points) {
  if (points.empty()) return;
  const std::size_t dim = points[0].size();
  const double n = static_cast<double>(points.size());
  for (std::size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (const auto& p : points) mean += p[d];
    mean /= n;
    double var = 0.0;
    for (const auto& p : points) var += (p[d] - mean) * (p[d] - mean);
    const double sd = std::sqrt(var / n);
    for (auto& p : points) p[d] = sd > 0.0 ? (p[d] - mean) / sd : p[d] - mean;
  }
}

double rmse(const std::vector<double>& predictions, const std::vector<double>& targets) {
  if (predictions.size() != targets.size()) throw std::invalid_argument("rmse: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("rmse: no values");
  double ss = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    ss += (predictions[i] - targets[i]) * (predictions[i] - targets[i]);
  }
  return std::sqrt(ss / static_cast<double>(predictions.size()));
}

std::string_view to_string(CfMethod method) noexcept {
  switch (method) {
    case CfMethod::Noiseless: return "noiseless";
    case CfMethod::Noisy: return "noisy";
    case CfMethod::Xi: return "xi";
    case CfMethod::SubN: return "sub_n";
    case CfMethod::SubG: return "sub_g";
    case CfMethod::SubW: return "sub_w";
    case CfMethod::SubO: return "sub_o";
    case CfMethod::Profiling: return "profiling";
  }
  return "?";
}

CfMethod parse_cf_method(std::string_view text) {
  for (CfMethod m : all_cf_methods()) {
    if (to_string(m) == text) return m;
  }
  throw std::invalid_argument("unknown cf method '" + std::string(text) + "'");
}

std::vector<CfMethod> all_cf_methods() {
  return {CfMethod::Noiseless, CfMethod::Noisy, CfMethod::Xi,   CfMethod::SubN,
          CfMethod::SubG,      CfMethod::SubW,  CfMethod::SubO, CfMethod::Profiling};
}

bool needs_fits(CfMethod method) noexcept { return method != CfMethod::Noiseless && method != CfMethod::Noisy; }

void CfConfig::validate() const {
  if (k < 1) throw std::invalid_argument("cf: k must be >= 1");
  if (!(holdout_frac > 0.0 && holdout_frac < 1.0)) throw std::invalid_argument("cf: holdout fraction must be in (0,1)");
  if (repeats < 1) throw std::invalid_argument("cf: repeats must be >= 1");
  if (profile_grid_points < 2) throw std::invalid_argument("cf: profile grid needs >= 2 points");
  if (profile_samples < 2) throw std::invalid_argument("cf: profile samples must be >= 2");
  scale.validate();
}

std::vector<double> RmseDistribution::values() const {
  std::vector<double> out;
  for (const auto& s : scores) out.push_back(s.rmse);
  return out;
}

double split_key(std::uint64_t seed, int trial, int repeat, std::int64_t user) {
  Engine eng = make_engine(derive_seed(seed, {static_cast<std::uint64_t>(Stream::Split),
                                              static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(repeat),
                                              static_cast<std::uint64_t>(user)}));
  return uniform01(eng);
}

namespace {

// Clustered points of one protocol view. Points belong to users; `value` is
// what a training point contributes to its cluster's predictor.
struct View {
  std::vector<int> cluster;
  std::vector<std::size_t> owner;
  std::vector<double> weight;
  std::vector<double> value;
};

// What one trial asks: the point standing for each user (-1 when the user
// takes no part) and the value to predict.
struct Frame {
  const View* view = nullptr;
  std::vector<long> home;
  std::vector<double> target;
};

struct Layout {
  std::vector<std::int64_t> users;
  std::vector<std::int64_t> items;
  int trials = 0;
  std::int64_t target_item = 0;
  std::vector<std::int64_t> feature_items;
};

Layout layout_of(const RatingDataset& data) {
  if (!data.is_complete()) throw DataError("cf needs every user to rate every item with the same trial count");
  Layout l;
  l.users = data.users();
  l.items = data.items();
  l.trials = data.uniform_trials();
  if (l.items.size() < 2) throw DataError("cf needs at least two items");
  l.target_item = l.items.back();
  l.feature_items.assign(l.items.begin(), l.items.end() - 1);
  return l;
}

int effective_k(int k, std::size_t points, const std::string& label, const WarnFn& warn) {
  if (static_cast<std::size_t>(k) <= points) return k;
  if (warn) warn(label + ": k reduced to " + std::to_string(points) + " clustered points");
  return static_cast<int>(points);
}

RmseDistribution run_protocol(const std::string& label, const Layout& layout, const std::vector<Frame>& frames,
                              const CfConfig& config, std::uint64_t seed, const WarnFn& warn) {
  const int R = config.repeats;
  RmseDistribution out{label, std::vector<CfScore>(frames.size() * R)};
  std::vector<std::string> notes(out.scores.size());
  parallel_for(out.scores.size(), config.workers, [&](std::size_t cell) {
    const int t = static_cast<int>(cell / R) + 1;
    const int rep = static_cast<int>(cell % R) + 1;
    const Frame& f = frames[t - 1];
    const View& v = *f.view;
    const int k = 1 + (v.cluster.empty() ? 0 : *std::max_element(v.cluster.begin(), v.cluster.end()));

    std::vector<std::vector<std::pair<double, std::size_t>>> members(k);
    for (std::size_t u = 0; u < layout.users.size(); ++u) {
      if (f.home[u] < 0) continue;
      members[v.cluster[f.home[u]]].push_back({split_key(seed, t, rep, layout.users[u]), u});
    }
    std::vector<bool> test(layout.users.size(), false);
    for (auto& m : members) {
      std::sort(m.begin(), m.end());
      const auto n_test = static_cast<std::size_t>(std::lround(config.holdout_frac * static_cast<double>(m.size())));
      for (std::size_t i = 0; i < n_test && i < m.size(); ++i) test[m[i].second] = true;
    }

    std::vector<double> sum(k, 0.0), mass(k, 0.0);
    double global_sum = 0.0, global_mass = 0.0;
    for (std::size_t p = 0; p < v.cluster.size(); ++p) {
      if (test[v.owner[p]]) continue;
      sum[v.cluster[p]] += v.weight[p] * v.value[p];
      mass[v.cluster[p]] += v.weight[p];
      global_sum += v.weight[p] * v.value[p];
      global_mass += v.weight[p];
    }
    if (!(global_mass > 0.0)) throw std::runtime_error(label + ": no training data left after the holdout");
    std::vector<double> preds, targets;
    bool fallback = false;
    for (std::size_t u = 0; u < layout.users.size(); ++u) {
      if (!test[u]) continue;
      const int c = v.cluster[f.home[u]];
      if (mass[c] > 0.0) {
        preds.push_back(sum[c] / mass[c]);
      } else {
        preds.push_back(global_sum / global_mass);
        fallback = true;
      }
      targets.push_back(f.target[u]);
    }
    if (preds.empty()) throw std::runtime_error(label + ": the holdout selected no test users");
    out.scores[cell] = {t, rep, rmse(preds, targets)};
    if (fallback) {
      notes[cell] = label + " trial " + std::to_string(t) + " repeat " + std::to_string(rep) +
                    ": a cluster without training ratings used the global mean";
    }
  });
  if (warn) {
    for (const auto& n : notes) {
      if (!n.empty()) warn(n);
    }
  }
  return out;
}

std::uint64_t kmeans_seed(std::uint64_t seed) { return derive_seed(seed, Stream::KMeans); }

double pair_mean(const RatingDataset& data, std::int64_t user, std::int64_t item) {
  return data.find(user, item)->mean();
}

// One point per participating user, valued by the target pair mean.
RmseDistribution unit_protocol(const std::string& label, const RatingDataset& data, const Layout& layout,
                               const std::vector<long>& unit_of_user,
                               std::vector<std::vector<double>> features, FeatureSpace space,
                               const CfConfig& config, std::uint64_t seed, const WarnFn& warn) {
  if (features.empty()) throw DataError(label + ": no user has fitted vectors for every non-target item");
  standardize(features);
  View view;
  const auto model = kmeans(features, effective_k(config.k, features.size(), label, warn), kmeans_seed(seed));
  (void)space;
  view.cluster = model.assignments;
  view.owner.resize(features.size());
  view.weight.assign(features.size(), 1.0);
  view.value.resize(features.size());
  Frame frame;
  frame.view = &view;
  frame.home = unit_of_user;
  frame.target.assign(layout.users.size(), 0.0);
  for (std::size_t u = 0; u < layout.users.size(); ++u) {
    if (unit_of_user[u] < 0) continue;
    const double m = pair_mean(data, layout.users[u], layout.target_item);
    view.owner[unit_of_user[u]] = u;
    view.value[unit_of_user[u]] = m;
    frame.target[u] = m;
  }
  const std::vector<Frame> frames(static_cast<std::size_t>(layout.trials), frame);
  return run_protocol(label, layout, frames, config, seed, warn);
}

using FitIndex = std::map<std::pair<std::int64_t, std::int64_t>, const FitResult*>;

FitIndex index_fits(const std::vector<FitResult>& fits) {
  FitIndex idx;
  for (const auto& f : fits) idx[{f.user, f.item}] = &f;
  return idx;
}

// Fits of the non-target items per user; users missing one are reported and left out.
std::vector<std::vector<const FitResult*>> user_fits(const Layout& layout, const FitIndex& idx,
                                                     const std::string& label, const WarnFn& warn) {
  std::vector<std::vector<const FitResult*>> out(layout.users.size());
  for (std::size_t u = 0; u < layout.users.size(); ++u) {
    for (std::int64_t item : layout.feature_items) {
      const auto it = idx.find({layout.users[u], item});
      if (it == idx.end()) {
        if (warn) warn(label + ": user " + std::to_string(layout.users[u]) + " lacks a fit for item " + std::to_string(item) + ", excluded");
        out[u].clear();
        break;
      }
      out[u].push_back(it->second);
    }
  }
  return out;
}

double component(const CognitionVector& xi, FeatureSpace space) {
  switch (space) {
    case FeatureSpace::N: return xi.n;
    case FeatureSpace::G: return xi.g;
    case FeatureSpace::W: return xi.w;
    case FeatureSpace::O: return xi.o;
    default: throw std::invalid_argument("not a single neural dimension");
  }
}

}  // namespace

RmseDistribution noiseless_reference(const RatingDataset& data, const CfConfig& config, std::uint64_t seed,
                                     const WarnFn& warn) {
  config.validate();
  const Layout layout = layout_of(data);
  const std::size_t U = layout.users.size();
  std::vector<View> views(static_cast<std::size_t>(layout.trials));
  std::vector<Frame> frames(views.size());
  for (int t = 0; t < layout.trials; ++t) {
    std::vector<std::vector<double>> points(U);
    View& v = views[t];
    v.owner.resize(U);
    v.weight.assign(U, 1.0);
    v.value.resize(U);
    frames[t].view = &v;
    frames[t].home.resize(U);
    frames[t].target.resize(U);
    for (std::size_t u = 0; u < U; ++u) {
      for (std::int64_t item : layout.feature_items) points[u].push_back(data.find(layout.users[u], item)->ratings[t]);
      const double r = data.find(layout.users[u], layout.target_item)->ratings[t];
      v.owner[u] = u;
      v.value[u] = r;
      frames[t].home[u] = static_cast<long>(u);
      frames[t].target[u] = r;
    }
    v.cluster = kmeans(points, effective_k(config.k, U, "noiseless", warn), kmeans_seed(seed)).assignments;
  }
  return run_protocol("noiseless", layout, frames, config, seed, warn);
}

RmseDistribution noisy_reference(const RatingDataset& data, const CfConfig& config, std::uint64_t seed,
                                 const WarnFn& warn) {
  config.validate();
  const Layout layout = layout_of(data);
  const std::size_t U = layout.users.size();
  std::vector<std::vector<double>> points;
  View v;
  // home_of[u][t]: point holding the trial-t copy of user u.
  std::vector<std::vector<long>> home_of(U, std::vector<long>(layout.trials));
  for (std::size_t u = 0; u < U; ++u) {
    std::vector<std::vector<double>> seen;  // features followed by the target rating
    std::vector<long> ids;
    for (int t = 0; t < layout.trials; ++t) {
      std::vector<double> full;
      for (std::int64_t item : layout.feature_items) full.push_back(data.find(layout.users[u], item)->ratings[t]);
      full.push_back(data.find(layout.users[u], layout.target_item)->ratings[t]);
      const auto it = std::find(seen.begin(), seen.end(), full);
      if (it != seen.end()) {
        const long id = ids[it - seen.begin()];
        v.weight[id] += 1.0;
        home_of[u][t] = id;
        continue;
      }
      const long id = static_cast<long>(points.size());
      v.value.push_back(full.back());
      v.owner.push_back(u);
      v.weight.push_back(1.0);
      seen.push_back(full);
      ids.push_back(id);
      full.pop_back();
      points.push_back(std::move(full));
      home_of[u][t] = id;
    }
  }
  v.cluster = kmeans(points, effective_k(config.k, points.size(), "noisy", warn), kmeans_seed(seed), v.weight).assignments;
  const double lo = *std::min_element(v.weight.begin(), v.weight.end());
  for (double& w : v.weight) w /= lo;

  std::vector<Frame> frames(static_cast<std::size_t>(layout.trials));
  for (int t = 0; t < layout.trials; ++t) {
    frames[t].view = &v;
    frames[t].home.resize(U);
    frames[t].target.resize(U);
    for (std::size_t u = 0; u < U; ++u) {
      frames[t].home[u] = home_of[u][t];
      frames[t].target[u] = pair_mean(data, layout.users[u], layout.target_item);
    }
  }
  return run_protocol("noisy", layout, frames, config, seed, warn);
}

RmseDistribution xi_clustering(const RatingDataset& data, const std::vector<FitResult>& fits,
                               const CfConfig& config, std::uint64_t seed, const WarnFn& warn) {
  config.validate();
  const Layout layout = layout_of(data);
  const auto per_user = user_fits(layout, index_fits(fits), "xi", warn);
  std::vector<long> unit(layout.users.size(), -1);
  std::vector<std::vector<double>> features;
  for (std::size_t u = 0; u < per_user.size(); ++u) {
    if (per_user[u].empty()) continue;
    std::vector<double> x;
    for (const FitResult* f : per_user[u]) {
      x.insert(x.end(), {static_cast<double>(f->xi.n), f->xi.g, f->xi.w, f->xi.o, f->xi.s});
    }
    unit[u] = static_cast<long>(features.size());
    features.push_back(std::move(x));
  }
  return unit_protocol("xi", data, layout, unit, std::move(features), FeatureSpace::XiFull, config, seed, warn);
}

RmseDistribution subspace_clustering(const RatingDataset& data, const std::vector<FitResult>& fits,
                                     FeatureSpace dim, const CfConfig& config, std::uint64_t seed,
                                     const WarnFn& warn) {
  config.validate();
  std::string label;
  switch (dim) {
    case FeatureSpace::N: label = "sub_n"; break;
    case FeatureSpace::G: label = "sub_g"; break;
    case FeatureSpace::W: label = "sub_w"; break;
    case FeatureSpace::O: label = "sub_o"; break;
    default: throw std::invalid_argument("subspace clustering takes one of N, G, W, O");
  }
  const Layout layout = layout_of(data);
  const auto per_user = user_fits(layout, index_fits(fits), label, warn);
  std::vector<long> unit(layout.users.size(), -1);
  std::vector<std::vector<double>> features;
  for (std::size_t u = 0; u < per_user.size(); ++u) {
    if (per_user[u].empty()) continue;
    std::vector<double> x;
    for (const FitResult* f : per_user[u]) x.push_back(component(f->xi, dim));
    unit[u] = static_cast<long>(features.size());
    features.push_back(std::move(x));
  }
  return unit_protocol(label, data, layout, unit, std::move(features), dim, config, seed, warn);
}

std::vector<UserProfile> build_profiles(const RatingDataset& data, const std::vector<FitResult>& fits,
                                        const CfConfig& config, std::uint64_t seed, const WarnFn& warn) {
  config.validate();
  const Layout layout = layout_of(data);
  const auto per_user = user_fits(layout, index_fits(fits), "profiling", warn);
  std::vector<std::size_t> todo;
  for (std::size_t u = 0; u < per_user.size(); ++u) {
    if (!per_user[u].empty()) todo.push_back(u);
  }
  std::vector<double> s_grid(static_cast<std::size_t>(config.profile_grid_points));
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    s_grid[i] = config.scale.lo + (config.scale.hi - config.scale.lo) * static_cast<double>(i) /
                                      static_cast<double>(s_grid.size() - 1);
  }
  s_grid.back() = config.scale.hi;

  std::vector<UserProfile> out(todo.size());
  parallel_for(todo.size(), config.workers, [&](std::size_t idx) {
    const std::size_t u = todo[idx];
    const auto& fs = per_user[u];
    UserProfile p;
    p.user = layout.users[u];
    double n = 0, g = 0, w = 0, o = 0, var = 0;
    std::map<std::string, std::pair<int, std::size_t>> votes;  // label -> (count, first position)
    for (std::size_t i = 0; i < fs.size(); ++i) {
      n += fs[i]->xi.n;
      g += fs[i]->xi.g;
      w += fs[i]->xi.w;
      o += fs[i]->xi.o;
      var += data.find(p.user, fs[i]->item)->ml_variance();
      auto& v = votes.try_emplace(fs[i]->decoder.label(), 0, i).first->second;
      ++v.first;
    }
    const double m = static_cast<double>(fs.size());
    p.xi = {std::max(1, static_cast<int>(std::lround(n / m))), g / m, w / m, o / m, config.scale.midpoint()};
    p.observed_variance = var / m;
    // Most frequent fitted decoder; ties go to the one fitted first.
    std::size_t pick = 0;
    int best_count = -1;
    for (const auto& [label, v] : votes) {
      if (v.first > best_count || (v.first == best_count && v.second < pick)) {
        best_count = v.first;
        pick = v.second;
      }
    }
    p.decoder = fs[pick]->decoder;
    double best_gap = std::numeric_limits<double>::infinity();
    for (std::size_t si = 0; si < s_grid.size(); ++si) {
      CognitionVector xi = p.xi;
      xi.s = s_grid[si];
      const auto fb = sample_feedback(xi, p.decoder, config.scale, config.profile_samples,
                                      derive_seed(seed, {static_cast<std::uint64_t>(Stream::Profile),
                                                         static_cast<std::uint64_t>(p.user), si}));
      const GaussianFit fit = gaussian_ml_fit(fb.values);
      const double model_var = fit.sigma * fit.sigma;
      const double gap = std::fabs(model_var - p.observed_variance);
      if (gap < best_gap) {
        best_gap = gap;
        p.xi.s = xi.s;
        p.model_variance = model_var;
      }
    }
    out[idx] = p;
  });
  return out;
}

namespace {

RmseDistribution profiling_from(const RatingDataset& data, const std::vector<UserProfile>& profiles,
                                const CfConfig& config, std::uint64_t seed, const WarnFn& warn) {
  const Layout layout = layout_of(data);
  std::map<std::int64_t, const UserProfile*> by_user;
  for (const auto& p : profiles) by_user[p.user] = &p;
  std::vector<long> unit(layout.users.size(), -1);
  std::vector<std::vector<double>> features;
  for (std::size_t u = 0; u < layout.users.size(); ++u) {
    const auto it = by_user.find(layout.users[u]);
    if (it == by_user.end()) continue;
    const auto& xi = it->second->xi;
    unit[u] = static_cast<long>(features.size());
    features.push_back({static_cast<double>(xi.n), xi.g, xi.w, xi.o, xi.s});
  }
  return unit_protocol("profiling", data, layout, unit, std::move(features), FeatureSpace::Profile, config, seed,
                       warn);
}

}  // namespace

RmseDistribution noise_profiling(const RatingDataset& data, const std::vector<FitResult>& fits,
                                 const CfConfig& config, std::uint64_t seed, const WarnFn& warn) {
  return profiling_from(data, build_profiles(data, fits, config, seed, warn), config, seed, warn);
}

BarrierEstimate magic_barrier(const RatingDataset& data, int bootstrap, std::uint64_t seed) {
  if (data.empty()) throw DataError("barrier undefined: empty dataset");
  if (bootstrap < 1) throw std::invalid_argument("bootstrap must be >= 1");
  std::vector<double> var;
  for (const auto& p : data.pairs()) {
    if (p.ratings.size() < 2) throw DataError("barrier undefined: a pair has a single trial");
    var.push_back(p.unbiased_variance());
  }
  BarrierEstimate out;
  out.bootstrap = bootstrap;
  out.barrier = std::sqrt(std::accumulate(var.begin(), var.end(), 0.0) / static_cast<double>(var.size()));
  Engine eng = make_engine(derive_seed(seed, Stream::Bootstrap));
  std::vector<double> reps(static_cast<std::size_t>(bootstrap));
  for (double& r : reps) {
    double sum = 0.0;
    for (std::size_t i = 0; i < var.size(); ++i) sum += var[uniform_below(eng, var.size())];
    r = std::sqrt(sum / static_cast<double>(var.size()));
  }
  std::sort(reps.begin(), reps.end());
  const auto pct = [&](double q) {
    const double pos = q * static_cast<double>(reps.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, reps.size() - 1);
    return reps[lo] + (pos - static_cast<double>(lo)) * (reps[hi] - reps[lo]);
  };
  out.ci_lo = pct(0.025);
  out.ci_hi = pct(0.975);
  return out;
}

CfReport run_cf(const RatingDataset& data, const std::vector<FitResult>* fits, const std::vector<CfMethod>& methods,
                const CfConfig& config, int bootstrap, std::uint64_t seed, const WarnFn& warn) {
  config.validate();
  for (CfMethod m : methods) {
    if (needs_fits(m) && !fits) {
      throw UsageError("cf method " + std::string(to_string(m)) + " needs a fits file");
    }
  }
  CfReport report;
  for (CfMethod m : methods) {
    switch (m) {
      case CfMethod::Noiseless: report.methods.push_back(noiseless_reference(data, config, seed, warn)); break;
      case CfMethod::Noisy: report.methods.push_back(noisy_reference(data, config, seed, warn)); break;
      case CfMethod::Xi: report.methods.push_back(xi_clustering(data, *fits, config, seed, warn)); break;
      case CfMethod::SubN:
        report.methods.push_back(subspace_clustering(data, *fits, FeatureSpace::N, config, seed, warn));
        break;
      case CfMethod::SubG:
        report.methods.push_back(subspace_clustering(data, *fits, FeatureSpace::G, config, seed, warn));
        break;
      case CfMethod::SubW:
        report.methods.push_back(subspace_clustering(data, *fits, FeatureSpace::W, config, seed, warn));
        break;
      case CfMethod::SubO:
        report.methods.push_back(subspace_clustering(data, *fits, FeatureSpace::O, config, seed, warn));
        break;
      case CfMethod::Profiling: report.methods.push_back(noise_profiling(data, *fits, config, seed, warn)); break;
    }
  }
  report.barrier = magic_barrier(data, bootstrap, seed);
  return report;
}

double median(std::vector<double> values) { return quartiles(std::move(values)).median; }

Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("quartiles of no values");
  std::sort(values.begin(), values.end());
  const auto at = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {values.front(), at(0.25), at(0.5), at(0.75), values.back()};
}

void write_scores_csv(const CfReport& report, std::ostream& out, std::string_view comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "method,trial,repeat,rmse\n";
  for (const auto& m : report.methods) {
    for (const auto& s : m.scores) out << m.method << ',' << s.trial << ',' << s.repeat << ',' << format_double(s.rmse) << '\n';
  }
}

void write_summary_csv(const CfReport& report, std::ostream& out, std::string_view comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "method,count,min,q1,median,q3,max,barrier,barrier_ci_lo,barrier_ci_hi\n";
  for (const auto& m : report.methods) {
    const Quartiles q = quartiles(m.values());
    out << m.method << ',' << m.scores.size() << ',' << format_double(q.min) << ',' << format_double(q.q1) << ','
        << format_double(q.median) << ',' << format_double(q.q3) << ',' << format_double(q.max) << ','
        << format_double(report.barrier.barrier) << ',' << format_double(report.barrier.ci_lo) << ','
        << format_double(report.barrier.ci_hi) << '\n';
  }
}

void write_barrier_csv(const BarrierEstimate& barrier, std::ostream& out, std::string_view comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "barrier,ci_lo,ci_hi,bootstrap\n";
  out << format_double(barrier.barrier) << ',' << format_double(barrier.ci_lo) << ',' << format_double(barrier.ci_hi)
      << ',' << barrier.bootstrap << '\n';
}

}  // namespace nppc
