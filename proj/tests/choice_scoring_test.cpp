#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <gtest/gtest.h>

#include "calib/choice_scoring.hpp"
#include "test_util.hpp"

namespace calib {
namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

TEST(ScoresToProbs, SymmetricInputIsUniform) {
  for (ScoreMode mode : {ScoreMode::reciprocal, ScoreMode::softmax_neg_log}) {
    const auto p = scores_to_probs(std::vector<double>{2, 2, 2}, mode);
    for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  }
}

TEST(ScoresToProbs, ReciprocalHandNormalization) {
  // 1/2 : 1/4 : 1/8 = 4 : 2 : 1
  const auto p = scores_to_probs(std::vector<double>{2, 4, 8});
  EXPECT_NEAR(p[0], 4.0 / 7.0, 1e-15);
  EXPECT_NEAR(p[1], 2.0 / 7.0, 1e-15);
  EXPECT_NEAR(p[2], 1.0 / 7.0, 1e-15);
}

TEST(ScoresToProbs, SoftmaxNegLogMatchesReciprocal) {
  // exp(-ln x) = 1/x, so both modes agree on every input.
  testing::Gen gen(3);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> ppl(gen.index(2, 8));
    for (double& v : ppl) v = std::exp(gen.uniform(-5, 5));
    const auto a = scores_to_probs(ppl, ScoreMode::reciprocal);
    const auto b = scores_to_probs(ppl, ScoreMode::softmax_neg_log);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
  }
}

TEST(ScoresToProbs, Properties) {
  testing::Gen gen(4);
  for (int i = 0; i < 500; ++i) {
    const std::size_t k = gen.index(2, 10);
    std::vector<double> ppl(k);
    for (double& v : ppl) v = std::exp(gen.uniform(-30, 30));
    for (ScoreMode mode : {ScoreMode::reciprocal, ScoreMode::softmax_neg_log}) {
      const auto p = scores_to_probs(ppl, mode);
      EXPECT_NEAR(sum(p), 1.0, 1e-12);
      for (std::size_t a = 0; a < k; ++a) {
        EXPECT_GE(p[a], 0.0);
        for (std::size_t b = 0; b < k; ++b) {
          if (ppl[a] < ppl[b]) EXPECT_GT(p[a], p[b]);
        }
      }
      // permutation equivariance (reverse)
      std::vector<double> rev(ppl.rbegin(), ppl.rend());
      const auto q = scores_to_probs(rev, mode);
      for (std::size_t a = 0; a < k; ++a) EXPECT_NEAR(q[a], p[k - 1 - a], 1e-15);
    }
    // reciprocal mode is scale free
    std::vector<double> scaled = ppl;
    const double c = std::exp(gen.uniform(-3, 3));
    for (double& v : scaled) v *= c;
    const auto p = scores_to_probs(ppl);
    const auto q = scores_to_probs(scaled);
    for (std::size_t a = 0; a < k; ++a) EXPECT_NEAR(p[a], q[a], 1e-14);
  }
}

TEST(ScoresToProbs, RejectsInvalid) {
  EXPECT_THROW(scores_to_probs(std::vector<double>{2.0}), std::invalid_argument);
  EXPECT_THROW(scores_to_probs(std::vector<double>{2.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(scores_to_probs(std::vector<double>{2.0, -1.0}), std::invalid_argument);
  EXPECT_THROW(scores_to_probs(std::vector<double>{2.0, INFINITY}), std::invalid_argument);
  EXPECT_THROW(scores_to_probs(std::vector<double>{2.0, NAN}), std::invalid_argument);
}

TEST(ScoreMode, Names) {
  EXPECT_EQ(parse_score_mode("softmax-neg-log"), ScoreMode::softmax_neg_log);
  EXPECT_EQ(to_string(ScoreMode::reciprocal), "reciprocal");
  EXPECT_FALSE(parse_score_mode("bogus"));
}

}  // namespace
}  // namespace calib
