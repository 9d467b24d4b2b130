#include <doctest.h>

#include <map>
#include <sstream>

#include "nppc/dataset.hpp"
#include "nppc/errors.hpp"

using namespace nppc;

namespace {

RatingDataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_ratings_csv(in, "test");
}

}  // namespace

TEST_CASE("pair statistics") {
  const PairRatings p{1, 1, {3, 4, 4, 5, 3}};
  CHECK(p.mean() == doctest::Approx(3.8));
  CHECK(p.ml_variance() == doctest::Approx(0.56));
  CHECK(p.unbiased_variance() == doctest::Approx(0.7));
  CHECK(p.distinct() == 3);
  CHECK(PairRatings{1, 1, {2}}.unbiased_variance() == 0.0);
}

TEST_CASE("ratings CSV round trip") {
  const auto data = parse("# note\nuser,item,trial,rating\n1,10,1,3\n1,10,2,4\n2,10,1,5\n2,10,2,5\n");
  CHECK(data.pairs().size() == 2);
  CHECK(data.users() == std::vector<std::int64_t>{1, 2});
  CHECK(data.find(2, 10)->ratings == std::vector<int>{5, 5});
  CHECK(data.find(3, 10) == nullptr);
  std::ostringstream out;
  export_csv(data, out, "hello");
  CHECK(out.str().rfind("# hello\n", 0) == 0);
  CHECK(parse(out.str()) == data);
}

TEST_CASE("trial order is taken from the trial column") {
  const auto data = parse("user,item,trial,rating\n1,1,2,5\n1,1,1,2\n");
  CHECK(data.find(1, 1)->ratings == std::vector<int>{2, 5});
}

TEST_CASE("invalid ratings files are data errors") {
  CHECK_THROWS_AS(parse("user,item,trial,rating\n1,1,1,6\n"), DataError);
  CHECK_THROWS_AS(parse("user,item,trial,rating\n1,1,1,0\n"), DataError);
  CHECK_THROWS_AS(parse("user,item,trial,rating\n1,1,1,3\n1,1,1,4\n"), DataError);
  CHECK_THROWS_AS(parse("user,item,trial,rating\n1,1,1,3\n1,1,3,4\n"), DataError);
  CHECK_THROWS_AS(parse("user,item,trial,rating\n1,1,x,3\n"), DataError);
  CHECK_THROWS_AS(parse("user,item,rating\n1,1,3\n"), DataError);
  CHECK_THROWS_AS(parse("user,item,trial,rating\n1,1,1\n"), DataError);
}

TEST_CASE("uniform trials and completeness") {
  auto data = parse("user,item,trial,rating\n1,1,1,3\n1,1,2,3\n1,2,1,3\n1,2,2,1\n");
  CHECK(data.uniform_trials() == 2);
  CHECK(data.is_complete());
  data = parse("user,item,trial,rating\n1,1,1,3\n1,1,2,3\n2,2,1,3\n2,2,2,1\n");
  CHECK_FALSE(data.is_complete());
}

TEST_CASE("rating rounding is symmetric about the midpoint") {
  const Scale scale;
  CHECK(round_rating(2.5, scale) == 2);
  CHECK(round_rating(3.5, scale) == 4);
  CHECK(round_rating(3.0, scale) == 3);
  CHECK(round_rating(-4.0, scale) == 1);
  CHECK(round_rating(9.0, scale) == 5);
  CHECK(round_rating(1.49, scale) == 1);
  CHECK(round_rating(4.51, scale) == 5);
}

TEST_CASE("stochastic synthesis shape and determinism") {
  SynthSpec spec;
  spec.users = 20;
  const auto a = synthesize_stochastic(spec, 3);
  const auto b = synthesize_stochastic(spec, 3);
  CHECK(a.data == b.data);
  CHECK(a.data.pairs().size() == 100);
  CHECK(a.data.uniform_trials() == 5);
  CHECK(a.data.is_complete());
  CHECK(a.truth.size() == 100);
  CHECK_FALSE(a.data == synthesize_stochastic(spec, 4).data);
}

TEST_CASE("stochastic synthesis honors an extreme mix") {
  SynthSpec spec;
  spec.users = 30;
  spec.mix = {1.0, 0.0, 0.0};
  const auto constant = synthesize_stochastic(spec, 1);
  for (const auto& p : constant.data.pairs()) CHECK(p.distinct() == 1);
  spec.mix = {0.0, 0.0, 1.0};
  const auto spread = synthesize_stochastic(spec, 1);
  for (const auto& p : spread.data.pairs()) CHECK(p.distinct() >= 3);
  spec.mix = {0.0, 1.0, 0.0};
  spec.variance_rate = 1e6;  // near-zero variance forces the constructed fallback
  const auto forced = synthesize_stochastic(spec, 1);
  for (const auto& p : forced.data.pairs()) CHECK(p.distinct() == 2);
}

TEST_CASE("synthesis spec validation") {
  SynthSpec spec;
  spec.mix = {0.5, 0.5, 0.5};
  CHECK_THROWS(spec.validate());
  spec = {};
  spec.users = 0;
  CHECK_THROWS(spec.validate());
  spec = {};
  spec.variance_rate = 0;
  CHECK_THROWS(spec.validate());
}

TEST_CASE("planted synthesis with a fixed high-gain WAD is nearly constant") {
  SynthSpec spec;
  spec.users = 3;
  spec.items = 2;
  const GridPlanting plant{{CognitionVector{100, 100, 0.3, 0.5, 3.0}}, {DecoderSpec::wad()}};
  const auto out = synthesize_planted(spec, plant, Scale{}, 5);
  for (const auto& p : out.data.pairs()) CHECK(p.distinct() == 1);
  for (const auto& t : out.truth) {
    REQUIRE(t.xi);
    CHECK(*t.xi == CognitionVector{100, 100, 0.3, 0.5, 3.0});
    CHECK(*t.decoder == DecoderSpec::wad());
  }
}

TEST_CASE("planted synthesis does not depend on workers") {
  SynthSpec spec;
  spec.users = 6;
  const auto plant = GroupPlanting::defaults(spec.items);
  const auto a = synthesize_planted(spec, plant, Scale{}, 12, 1);
  const auto b = synthesize_planted(spec, plant, Scale{}, 12, 3);
  CHECK(a.data == b.data);
}

TEST_CASE("group planting assigns users to groups") {
  SynthSpec spec;
  spec.users = 40;
  const auto out = synthesize_planted(spec, GroupPlanting::defaults(spec.items), Scale{}, 8);
  std::map<std::int64_t, int> group;
  for (const auto& t : out.truth) {
    CHECK(t.group >= 0);
    if (group.count(t.user)) CHECK(group[t.user] == t.group);
    group[t.user] = t.group;
  }
}

TEST_CASE("truth JSONL round trip") {
  SynthSpec spec;
  spec.users = 2;
  const auto out = synthesize_planted(spec, GroupPlanting::defaults(spec.items), Scale{}, 2);
  std::stringstream ss;
  write_truth_jsonl(out.truth, ss);
  const auto back = read_truth_jsonl(ss);
  REQUIRE(back.size() == out.truth.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].user == out.truth[i].user);
    CHECK(*back[i].xi == *out.truth[i].xi);
    CHECK(*back[i].decoder == *out.truth[i].decoder);
  }
}
