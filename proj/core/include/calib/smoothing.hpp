#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace calib {

/// Smoothing rate beta in [0,1] over k >= 2 classes. Use make() to validate.
struct SmoothingConfig {
  double beta = 0.0;
  std::size_t k = 2;

  static SmoothingConfig make(double beta, std::size_t k);
};

/// Loss in nats, the smoothed target it was measured against, and
/// d loss / d logits.
struct SmoothedLossResult {
  double loss = 0.0;
  std::vector<double> targets;
  std::vector<double> grad;
};

/// max_k x_k + log Σ_k exp(x_k - max); finite for any finite input.
double log_sum_exp(std::span<const double> logits);

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

/// (1 - beta) * onehot(label) + beta / k.
std::vector<double> smooth_targets(std::size_t label, const SmoothingConfig& cfg);

/// Cross-entropy of `logits` against the smoothed target; beta = 0 is plain
/// CE. Gradient is softmax(logits) - targets.
SmoothedLossResult ls_loss(std::span<const double> logits, std::size_t label,
                           const SmoothingConfig& cfg);

/// Cross-entropy against an arbitrary target distribution, in nats.
double cross_entropy(std::span<const double> logits, std::span<const double> targets);

/// d_k = max(logits) - logits_k.
std::vector<double> logit_distance(std::span<const double> logits);

/// Exact KL(u || softmax(logits)) with u uniform, in nats (constant kept).
double kl_uniform(std::span<const double> logits);

/// Result of checking the logit-distance sandwich
///
///   penalty - ln K  <=  mean(d)  <=  penalty,
///
/// where penalty = -(1/K) Σ_k ln softmax(logits)_k is the per-example term
/// label smoothing adds (it equals kl_uniform + ln K). The bounds follow from
/// max(l) <= LSE(l) <= max(l) + ln K.
struct BoundWitness {
  double kl = 0.0;        // exact KL(u || softmax)
  double lower = 0.0;     // penalty - ln K
  double mid = 0.0;       // mean logit distance
  double upper = 0.0;     // penalty
  double slack_low = 0.0;   // mid - lower
  double slack_high = 0.0;  // upper - mid

  bool holds(double tolerance = 1e-9) const {
    return slack_low >= -tolerance && slack_high >= -tolerance;
  }
};

BoundWitness check_logit_distance_bound(std::span<const double> logits);

}  // namespace calib
