#include "nppc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nppc/errors.hpp"
#include "nppc/format.hpp"
#include "nppc/parallel.hpp"

namespace nppc {

double PairRatings::mean() const {
  if (ratings.empty()) throw std::invalid_argument("pair has no ratings");
  double sum = 0.0;
  for (int r : ratings) sum += r;
  return sum / static_cast<double>(ratings.size());
}

double PairRatings::ml_variance() const {
  const double mu = mean();
  double ss = 0.0;
  for (int r : ratings) ss += (r - mu) * (r - mu);
  return ss / static_cast<double>(ratings.size());
}

double PairRatings::unbiased_variance() const {
  if (ratings.size() < 2) return 0.0;
  const double mu = mean();
  double ss = 0.0;
  for (int r : ratings) ss += (r - mu) * (r - mu);
  return ss / static_cast<double>(ratings.size() - 1);
}

int PairRatings::distinct() const {
  return static_cast<int>(std::set<int>(ratings.begin(), ratings.end()).size());
}

RatingDataset RatingDataset::from_records(std::vector<RatingRecord> records) {
  std::map<std::pair<std::int64_t, std::int64_t>, std::map<int, int>> grouped;
  for (const auto& r : records) {
    if (r.rating < 1 || r.rating > 5) {
      throw DataError("rating " + std::to_string(r.rating) + " outside [1,5] for user " + std::to_string(r.user) +
                      ", item " + std::to_string(r.item));
    }
    if (r.trial < 1) throw DataError("trial index must be >= 1");
    auto& trials = grouped[{r.user, r.item}];
    if (!trials.emplace(r.trial, r.rating).second) {
      throw DataError("duplicate (user,item,trial) = (" + std::to_string(r.user) + "," + std::to_string(r.item) +
                      "," + std::to_string(r.trial) + ")");
    }
  }
  RatingDataset out;
  out.pairs_.reserve(grouped.size());
  for (auto& [key, trials] : grouped) {
    PairRatings pair{key.first, key.second, {}};
    int expected = 1;
    for (const auto& [t, rating] : trials) {
      if (t != expected) {
        throw DataError("non-dense trials for user " + std::to_string(key.first) + ", item " +
                        std::to_string(key.second) + ": missing trial " + std::to_string(expected));
      }
      pair.ratings.push_back(rating);
      ++expected;
    }
    out.pairs_.push_back(std::move(pair));
  }
  return out;
}

RatingDataset RatingDataset::from_pairs(std::vector<PairRatings> pairs) {
  std::vector<RatingRecord> records;
  for (const auto& p : pairs) {
    for (std::size_t t = 0; t < p.ratings.size(); ++t) {
      records.push_back({p.user, p.item, static_cast<int>(t + 1), p.ratings[t]});
    }
  }
  return from_records(std::move(records));
}

std::vector<std::int64_t> RatingDataset::users() const {
  std::vector<std::int64_t> out;
  for (const auto& p : pairs_) {
    if (out.empty() || out.back() != p.user) out.push_back(p.user);
  }
  return out;
}

std::vector<std::int64_t> RatingDataset::items() const {
  std::set<std::int64_t> items;
  for (const auto& p : pairs_) items.insert(p.item);
  return {items.begin(), items.end()};
}

std::size_t RatingDataset::record_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : pairs_) n += p.ratings.size();
  return n;
}

std::vector<RatingRecord> RatingDataset::records() const {
  std::vector<RatingRecord> out;
  out.reserve(record_count());
  for (const auto& p : pairs_) {
    for (std::size_t t = 0; t < p.ratings.size(); ++t) {
      out.push_back({p.user, p.item, static_cast<int>(t + 1), p.ratings[t]});
    }
  }
  return out;
}

const PairRatings* RatingDataset::find(std::int64_t user, std::int64_t item) const {
  auto it = std::lower_bound(pairs_.begin(), pairs_.end(), std::make_pair(user, item),
                             [](const PairRatings& p, const std::pair<std::int64_t, std::int64_t>& key) {
                               return std::make_pair(p.user, p.item) < key;
                             });
  if (it == pairs_.end() || it->user != user || it->item != item) return nullptr;
  return &*it;
}

int RatingDataset::uniform_trials() const {
  if (pairs_.empty()) return 0;
  const std::size_t t = pairs_.front().ratings.size();
  for (const auto& p : pairs_) {
    if (p.ratings.size() != t) return 0;
  }
  return static_cast<int>(t);
}

bool RatingDataset::is_complete() const {
  if (pairs_.empty() || uniform_trials() == 0) return false;
  return pairs_.size() == users().size() * items().size();
}

RatingDataset parse_ratings_csv(std::istream& in, std::string_view source) {
  std::vector<RatingRecord> records;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto where = [&] { return std::string(source) + ":" + std::to_string(line_no) + ": "; };
    if (!header_seen) {
      std::string compact;
      for (char c : line) {
        if (c != ' ') compact.push_back(c);
      }
      if (compact != "user,item,trial,rating") {
        throw DataError(where() + "expected header 'user,item,trial,rating'");
      }
      header_seen = true;
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() != 4) throw DataError(where() + "expected 4 fields, got " + std::to_string(fields.size()));
    try {
      RatingRecord r;
      r.user = parse_int(fields[0]);
      r.item = parse_int(fields[1]);
      r.trial = static_cast<int>(parse_int(fields[2]));
      r.rating = static_cast<int>(parse_int(fields[3]));
      records.push_back(r);
    } catch (const std::invalid_argument& e) {
      throw DataError(where() + e.what());
    }
  }
  if (!header_seen) throw DataError(std::string(source) + ": missing header 'user,item,trial,rating'");
  return RatingDataset::from_records(std::move(records));
}

RatingDataset ingest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return parse_ratings_csv(in, path.string());
}

void export_csv(const RatingDataset& data, std::ostream& out, std::string_view comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "user,item,trial,rating\n";
  for (const auto& r : data.records()) out << r.user << ',' << r.item << ',' << r.trial << ',' << r.rating << '\n';
}

void ConsistencyMix::validate() const {
  if (constant < 0 || two < 0 || three_plus < 0) throw std::invalid_argument("consistency mix must be non-negative");
  if (std::fabs(constant + two + three_plus - 1.0) > 1e-9) throw std::invalid_argument("consistency mix must sum to 1");
}

void SynthSpec::validate() const {
  if (users < 1 || items < 1 || trials < 1) throw std::invalid_argument("synth spec: users, items, trials must be >= 1");
  mix.validate();
  if (!(variance_rate > 0.0)) throw std::invalid_argument("synth spec: variance_rate must be > 0");
  if (trials < 3 && mix.three_plus > 0.0) throw std::invalid_argument("three or more distinct ratings need >= 3 trials");
  if (trials < 2 && mix.two > 0.0) throw std::invalid_argument("two distinct ratings need >= 2 trials");
}

int round_rating(double value, const Scale& scale) {
  const double mid = scale.midpoint();
  const double d = value - mid;
  const double r = mid + (d < 0 ? -std::floor(-d + 0.5) : std::floor(d + 0.5));
  return static_cast<int>(std::clamp(r, std::ceil(scale.lo), std::floor(scale.hi)));
}

namespace {

constexpr std::uint64_t kUserTag = 0x55;
constexpr std::uint64_t kItemTag = 0x49;
constexpr std::uint64_t kPairTag = 0x50;

int category_of(int distinct) { return distinct <= 1 ? 0 : (distinct == 2 ? 1 : 2); }

}  // namespace

SynthResult synthesize_stochastic(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Scale scale{};
  const std::uint64_t base = derive_seed(seed, Stream::Synth);

  std::vector<double> user_effect(spec.users), item_effect(spec.items);
  for (int u = 0; u < spec.users; ++u) {
    Engine eng = make_engine(derive_seed(base, {kUserTag, static_cast<std::uint64_t>(u)}));
    user_effect[u] = std::normal_distribution<double>(0.0, 0.6)(eng);
  }
  for (int i = 0; i < spec.items; ++i) {
    Engine eng = make_engine(derive_seed(base, {kItemTag, static_cast<std::uint64_t>(i)}));
    item_effect[i] = std::normal_distribution<double>(0.0, 0.5)(eng);
  }

  const std::size_t pairs = static_cast<std::size_t>(spec.users) * spec.items;
  std::vector<PairRatings> out(pairs);
  std::vector<PairTruth> truth(pairs);
  const double cum[3] = {spec.mix.constant, spec.mix.constant + spec.mix.two, 1.0};

  parallel_for(pairs, 1, [&](std::size_t idx) {
    const int u = static_cast<int>(idx / spec.items);
    const int i = static_cast<int>(idx % spec.items);
    Engine eng = make_engine(derive_seed(base, {kPairTag, idx}));
    const double mu = std::clamp(3.5 + user_effect[u] + item_effect[i], scale.lo, scale.hi);
    const double c = uniform01(eng);
    const int category = c < cum[0] ? 0 : (c < cum[1] ? 1 : 2);
    std::exponential_distribution<double> variance_dist(spec.variance_rate);

    std::vector<int> ratings(spec.trials);
    double sigma = 0.0;
    bool accepted = false;
    for (int attempt = 0; attempt < 10000 && !accepted; ++attempt) {
      sigma = std::sqrt(variance_dist(eng));
      std::normal_distribution<double> noise(mu, sigma);
      for (int& r : ratings) r = round_rating(noise(eng), scale);
      const PairRatings probe{0, 0, ratings};
      accepted = category_of(probe.distinct()) == category;
    }
    if (!accepted) {
      // Construct the category directly around the rounded mean.
      const int lo = static_cast<int>(scale.lo), hi = static_cast<int>(scale.hi);
      const int base_rating = std::clamp(round_rating(mu, scale), lo + 1, hi - 1);
      std::fill(ratings.begin(), ratings.end(), base_rating);
      if (category >= 1) ratings[0] = base_rating + 1;
      if (category == 2) ratings[1] = base_rating - 1;
    }
    out[idx] = {u + 1, i + 1, ratings};
    truth[idx] = {u + 1, i + 1, -1, std::nullopt, std::nullopt, mu, sigma};
  });
  return {RatingDataset::from_pairs(std::move(out)), std::move(truth)};
}

GroupPlanting GroupPlanting::defaults(int items) {
  GroupPlanting p;
  PlantedGroup decisive{0.5, 40.0, 100.0, {}, std::nullopt};
  PlantedGroup uncertain{0.5, 1.0, 8.0, {}, std::nullopt};
  for (int i = 0; i < items; ++i) {
    const bool target = i == items - 1;
    const double wobble = (i % 2 == 0 ? 0.2 : -0.2);
    decisive.item_stimulus.push_back(target ? 4.5 : 3.5 + wobble);
    uncertain.item_stimulus.push_back(target ? 2.0 : 2.9 + wobble);
  }
  p.groups = {decisive, uncertain};
  return p;
}

namespace {

struct PlantedPair {
  CognitionVector xi;
  DecoderSpec decoder;
  int group;
};

std::vector<PlantedPair> plant(const SynthSpec& spec, const GridPlanting& planting, const Scale&,
                               std::uint64_t base) {
  if (planting.candidates.empty() || planting.decoders.empty()) {
    throw std::invalid_argument("grid planting needs candidates and decoders");
  }
  std::vector<PlantedPair> out;
  for (int u = 0; u < spec.users; ++u) {
    for (int i = 0; i < spec.items; ++i) {
      const std::uint64_t idx = static_cast<std::uint64_t>(u) * spec.items + i;
      Engine eng = make_engine(derive_seed(base, {kPairTag, idx}));
      const auto& xi = planting.candidates[uniform_below(eng, planting.candidates.size())];
      const auto& dec = planting.decoders[uniform_below(eng, planting.decoders.size())];
      out.push_back({xi, dec, -1});
    }
  }
  return out;
}

std::vector<PlantedPair> plant(const SynthSpec& spec, const GroupPlanting& planting, const Scale& scale,
                               std::uint64_t base) {
  if (planting.groups.empty()) throw std::invalid_argument("group planting needs at least one group");
  double total_weight = 0.0;
  for (const auto& g : planting.groups) {
    if (static_cast<int>(g.item_stimulus.size()) != spec.items) {
      throw std::invalid_argument("planted group needs one stimulus per item");
    }
    total_weight += g.weight;
  }
  std::vector<PlantedPair> out;
  for (int u = 0; u < spec.users; ++u) {
    Engine ueng = make_engine(derive_seed(base, {kUserTag, static_cast<std::uint64_t>(u)}));
    double pick = uniform01(ueng) * total_weight;
    std::size_t group = 0;
    while (group + 1 < planting.groups.size() && pick >= planting.groups[group].weight) {
      pick -= planting.groups[group].weight;
      ++group;
    }
    const PlantedGroup& grp = planting.groups[group];
    const int n = planting.n_lo + static_cast<int>(uniform_below(ueng, planting.n_hi - planting.n_lo + 1));
    const double g = grp.g_lo + (grp.g_hi - grp.g_lo) * uniform01(ueng);
    for (int i = 0; i < spec.items; ++i) {
      const std::uint64_t idx = static_cast<std::uint64_t>(u) * spec.items + i;
      Engine eng = make_engine(derive_seed(base, {kPairTag, idx}));
      CognitionVector xi;
      xi.n = n;
      xi.g = g;
      xi.w = planting.w_lo + (planting.w_hi - planting.w_lo) * uniform01(eng);
      xi.o = planting.o_lo + (planting.o_hi - planting.o_lo) * uniform01(eng);
      xi.s = scale.clamp(grp.item_stimulus[i] + std::normal_distribution<double>(0.0, planting.stimulus_jitter)(eng));
      out.push_back({xi, grp.decoder.value_or(planting.decoder), static_cast<int>(group)});
    }
  }
  return out;
}

}  // namespace

SynthResult synthesize_planted(const SynthSpec& spec, const Planting& planting, const Scale& scale,
                               std::uint64_t seed, int workers) {
  spec.validate();
  const std::uint64_t base = derive_seed(seed, Stream::Synth);
  const auto planted = std::visit([&](const auto& p) { return plant(spec, p, scale, base); }, planting);

  std::vector<PairRatings> out(planted.size());
  std::vector<PairTruth> truth(planted.size());
  parallel_for(planted.size(), workers, [&](std::size_t idx) {
    const auto& pp = planted[idx];
    const std::int64_t user = static_cast<std::int64_t>(idx / spec.items) + 1;
    const std::int64_t item = static_cast<std::int64_t>(idx % spec.items) + 1;
    const FeedbackSample fb = sample_feedback(pp.xi, pp.decoder, scale, static_cast<std::size_t>(spec.trials),
                                              derive_seed(base, Stream::Response, idx));
    std::vector<int> ratings;
    for (double v : fb.values) ratings.push_back(static_cast<int>(std::floor(scale.clamp(v) + 0.5)));
    out[idx] = {user, item, std::move(ratings)};
    truth[idx] = {user, item, pp.group, pp.xi, pp.decoder, 0.0, 0.0};
  });
  return {RatingDataset::from_pairs(std::move(out)), std::move(truth)};
}

void write_truth_jsonl(const std::vector<PairTruth>& truth, std::ostream& out) {
  for (const auto& t : truth) {
    nlohmann::ordered_json j;
    j["user"] = t.user;
    j["item"] = t.item;
    if (t.group >= 0) j["group"] = t.group;
    if (t.xi) {
      j["n"] = t.xi->n;
      j["g"] = t.xi->g;
      j["w"] = t.xi->w;
      j["o"] = t.xi->o;
      j["s"] = t.xi->s;
    }
    if (t.decoder) j["decoder"] = t.decoder->label();
    if (!t.xi) {
      j["mu"] = t.mu;
      j["sigma"] = t.sigma;
    }
    out << j.dump() << '\n';
  }
}

std::vector<PairTruth> read_truth_jsonl(std::istream& in) {
  std::vector<PairTruth> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    PairTruth t;
    t.user = j.at("user").get<std::int64_t>();
    t.item = j.at("item").get<std::int64_t>();
    t.group = j.value("group", -1);
    if (j.contains("n")) {
      t.xi = CognitionVector{j.at("n").get<int>(), j.at("g").get<double>(), j.at("w").get<double>(),
                             j.at("o").get<double>(), j.at("s").get<double>()};
    }
    if (j.contains("decoder")) t.decoder = parse_decoder_spec(j.at("decoder").get<std::string>());
    t.mu = j.value("mu", 0.0);
    t.sigma = j.value("sigma", 0.0);
    out.push_back(t);
  }
  return out;
}

}  // namespace nppc
