#include "calib/choice_scoring.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace calib {

std::string_view to_string(ScoreMode mode) {
  switch (mode) {
    case ScoreMode::reciprocal:
      return "reciprocal";
    case ScoreMode::softmax_neg_log:
      return "softmax-neg-log";
  }
  return "unknown";
}

std::optional<ScoreMode> parse_score_mode(std::string_view name) {
  if (name == "reciprocal") return ScoreMode::reciprocal;
  if (name == "softmax-neg-log") return ScoreMode::softmax_neg_log;
  return std::nullopt;
}

std::vector<double> scores_to_probs(std::span<const double> perplexities, ScoreMode mode) {
  if (perplexities.size() < 2) {
    throw std::invalid_argument("need at least 2 candidate perplexities");
  }
  for (double ppl : perplexities) {
    if (!std::isfinite(ppl) || ppl <= 0.0) {
      throw std::invalid_argument("perplexity must be finite and > 0, got " + std::to_string(ppl));
    }
  }

  std::vector<double> out(perplexities.size());
  if (mode == ScoreMode::reciprocal) {
    // Divide by the smallest perplexity first so 1/ppl cannot overflow for
    // subnormal inputs; the ratio is unchanged.
    const double lo = *std::min_element(perplexities.begin(), perplexities.end());
    double total = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] = lo / perplexities[k];
      total += out[k];
    }
    for (double& p : out) p /= total;
    return out;
  }

  // softmax over -ln(ppl), max-subtracted.
  double top = -std::log(perplexities[0]);
  for (double ppl : perplexities) top = std::max(top, -std::log(ppl));
  double total = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = std::exp(-std::log(perplexities[k]) - top);
    total += out[k];
  }
  for (double& p : out) p /= total;
  return out;
}

}  // namespace calib
