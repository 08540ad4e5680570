#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "calib/error.hpp"
#include "calib/records.hpp"
#include "test_util.hpp"

namespace calib {
namespace {

using testing::Gen;
using testing::make_record;

RecordSet parse(const std::string& text, IngestOptions opts = {}, IngestStats* stats = nullptr) {
  std::istringstream in(text);
  return parse_records(in, opts, stats);
}

TEST(Prediction, UniqueArgmax) {
  const auto p = make_record({0.1, 0.7, 0.2}, 0).prediction();
  EXPECT_EQ(p.label, 1u);
  EXPECT_EQ(p.confidence, 0.7);
}

TEST(Prediction, TiesBreakToLowestIndex) {
  EXPECT_EQ(make_record({0.5, 0.5}, 0).prediction().label, 0u);
  const auto p = make_record({0.25, 0.25, 0.25, 0.25}, 2).prediction();
  EXPECT_EQ(p.label, 0u);
  EXPECT_EQ(p.confidence, 0.25);
}

TEST(Entropy, KnownValues) {
  EXPECT_DOUBLE_EQ(make_record({0.25, 0.25, 0.25, 0.25}, 0).entropy_bits(), 2.0);
  EXPECT_EQ(make_record({1, 0, 0, 0}, 0).entropy_bits(), 0.0);
  // 0.5*1 + 0.25*2 + 2*0.125*3
  EXPECT_DOUBLE_EQ(make_record({0.5, 0.25, 0.125, 0.125}, 0).entropy_bits(), 1.75);
}

TEST(Entropy, BoundsOverRandomVectors) {
  Gen gen(11);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t k = gen.index(2, 8);
    const auto r = make_record(gen.probs(k), 0);
    const double h = r.entropy_bits();
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log2(static_cast<double>(k)) + 1e-12);
    const auto p = r.prediction();
    EXPECT_GE(p.confidence, 1.0 / static_cast<double>(k) - 1e-15);
    EXPECT_LE(p.confidence, 1.0);
  }
}

TEST(ParseRecords, UniformLine) {
  const auto rs = parse(R"({"id":"a","probs":[0.25,0.25,0.25,0.25],"label":2})");
  ASSERT_EQ(rs.size(), 1u);
  EXPECT_EQ(rs[0].prediction().label, 0u);
  EXPECT_EQ(rs[0].prediction().confidence, 0.25);
  EXPECT_EQ(rs.uniform_k(), 4u);
}

TEST(ParseRecords, NearUnitSumIsRenormalizedAndCounted) {
  IngestStats stats;
  const auto rs = parse(R"({"id":"a","probs":[0.7,0.3000001],"label":0})", {}, &stats);
  EXPECT_EQ(stats.renormalized, 1u);
  EXPECT_NEAR(rs[0].probs[0] + rs[0].probs[1], 1.0, 1e-15);
}

TEST(ParseRecords, StrictRejectsLargeDeviation) {
  const std::string line = R"({"id":"a","probs":[0.7,0.4],"label":0})";
  IngestStats stats;
  const auto loose = parse(line, {}, &stats);
  EXPECT_EQ(stats.renormalized, 1u);
  EXPECT_NEAR(loose[0].probs[0], 0.7 / 1.1, 1e-15);
  IngestOptions strict;
  strict.strict = true;
  EXPECT_THROW(parse(line, strict), DataError);
  // Within tolerance is still accepted when strict.
  EXPECT_NO_THROW(parse(R"({"probs":[0.7,0.3000001],"label":0})", strict));
}

TEST(ParseRecords, ErrorsNameTheLine) {
  const std::string text =
      "{\"probs\":[0.5,0.5],\"label\":0}\n"
      "\n"
      "{\"probs\":[0.5,0.5],\"label\":2}\n";
  try {
    parse(text);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(ParseRecords, RejectsBadValues) {
  EXPECT_THROW(parse("{not json"), DataError);
  EXPECT_THROW(parse(R"({"probs":[0.5,-0.1,0.6],"label":0})"), DataError);
  EXPECT_THROW(parse(R"({"probs":[1.0],"label":0})"), DataError);
  EXPECT_THROW(parse(R"({"probs":[0,0],"label":0})"), DataError);
  EXPECT_THROW(parse(R"({"probs":[0.5,0.5],"label":-1})"), DataError);
  EXPECT_THROW(parse(R"({"probs":[0.5,0.5],"label":"0"})"), DataError);
  EXPECT_THROW(parse(R"({"probs":[0.5,0.5]})"), DataError);
  EXPECT_THROW(parse(R"({"probs":[0.5,0.5],"perplexities":[2,2],"label":0})"), DataError);
  EXPECT_THROW(parse(R"({"probs":[0.5,0.5],"label":0,"group":{"smoothing":2}})"), DataError);
  EXPECT_THROW(parse(R"({"probs":[0.5,0.5],"label":0,"group":{"seed":3}})"), DataError);
  EXPECT_THROW(parse(R"({"perplexities":[2,0],"label":0})"), DataError);
}

TEST(ParseRecords, PerplexitiesBecomeProbabilities) {
  IngestStats stats;
  const auto rs = parse(R"({"id":"q","perplexities":[2,4,8],"label":0})", {}, &stats);
  EXPECT_EQ(stats.from_perplexities, 1u);
  EXPECT_NEAR(rs[0].probs[0], 4.0 / 7.0, 1e-15);
  EXPECT_NEAR(rs[0].probs[2], 1.0 / 7.0, 1e-15);
}

TEST(ParseRecords, GroupFields) {
  const auto rs = parse(
      R"({"id":"a","probs":[0.5,0.5],"label":1,"group":{"model":"m","sft_dataset":"base","language":"yo","smoothing":0.1,"split":"test","arch":"x"}})");
  const GroupKey& g = rs[0].group;
  EXPECT_EQ(g.model, "m");
  EXPECT_EQ(g.language, "yo");
  ASSERT_TRUE(g.smoothing);
  EXPECT_EQ(*g.smoothing, 0.1);
  ASSERT_EQ(g.extra.size(), 2u);
  EXPECT_EQ(g.extra[0].first, "arch");  // key order
  EXPECT_EQ(g.field("split"), "test");
  EXPECT_EQ(g.field("smoothing"), "0.1");
  EXPECT_FALSE(g.field("nope"));
  EXPECT_EQ(g.label(), "model=m,sft_dataset=base,language=yo,smoothing=0.1,arch=x,split=test");
}

TEST(ParseRecords, FixtureShape) {
  const auto rs = load_records(testing::fixture("tiny.jsonl"));
  EXPECT_EQ(rs.size(), 12u);
  EXPECT_EQ(rs.uniform_k(), 4u);
  std::set<GroupKey> groups;
  for (const auto& r : rs) groups.insert(r.group);
  EXPECT_EQ(groups.size(), 2u);
}

TEST(ParseRecords, MissingFileIsDataError) {
  EXPECT_THROW(load_records("/nonexistent/missing.jsonl"), DataError);
}

TEST(RecordSet, MixedKHasNoUniformK) {
  RecordSet rs({make_record({0.5, 0.5}, 0), make_record({0.2, 0.3, 0.5}, 0)});
  EXPECT_FALSE(rs.uniform_k());
  EXPECT_THROW(rs.require_uniform_k(), DataError);
}

TEST(GroupKey, OrderingIsFieldwise) {
  GroupKey a{"m", "base", "en", std::nullopt, {}};
  GroupKey b{"m", "base", "en", 0.0, {}};
  GroupKey c{"m", "base", "en", 0.1, {}};
  GroupKey d{"m", "base", "fr", 0.0, {}};
  EXPECT_LT(a, b);
  EXPECT_LT(b, c);
  EXPECT_LT(c, d);
  EXPECT_EQ(b, (GroupKey{"m", "base", "en", 0.0, {}}));
}

// serialize(parse(x)) parses back to the same RecordSet.
TEST(WriteRecords, RoundTripProperty) {
  Gen gen(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::ostringstream raw;
    const std::size_t n = gen.index(1, 20);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = gen.index(2, 6);
      auto p = gen.probs(k);
      p[0] *= 1.0 + gen.uniform(-1e-7, 1e-7);  // sum noise
      raw << "{\"id\":\"r" << i << "\",\"probs\":[";
      for (std::size_t j = 0; j < k; ++j) raw << (j ? "," : "") << std::setprecision(17) << p[j];
      raw << "],\"label\":" << gen.index(0, k - 1)
          << ",\"group\":{\"model\":\"m\\\"q\",\"language\":\"l" << gen.index(0, 2)
          << "\",\"smoothing\":0.1,\"extra\":\"e\"}}\n";
    }
    const RecordSet first = parse(raw.str());
    std::ostringstream written;
    write_records(written, first);
    IngestStats stats;
    const RecordSet second = parse(written.str(), {}, &stats);
    EXPECT_EQ(first, second);
    EXPECT_EQ(stats.renormalized, 0u);
  }
}

}  // namespace
}  // namespace calib
