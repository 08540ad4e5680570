#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace calib {

/// How per-candidate perplexities become a probability vector.
///   reciprocal:      p_k ∝ 1 / ppl_k
///   softmax_neg_log: p_k = softmax(-ln ppl)_k
/// Incoming perplexities are taken to be per-token already; no length
/// normalisation is applied here.
enum class ScoreMode { reciprocal, softmax_neg_log };

std::string_view to_string(ScoreMode mode);
std::optional<ScoreMode> parse_score_mode(std::string_view name);

/// Throws std::invalid_argument for K < 2 or a non-positive / non-finite
/// perplexity.
std::vector<double> scores_to_probs(std::span<const double> perplexities,
                                    ScoreMode mode = ScoreMode::reciprocal);

}  // namespace calib
