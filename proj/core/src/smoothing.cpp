#include "calib/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace calib {

namespace {

void require_logits(std::span<const double> logits) {
  if (logits.size() < 2) throw std::invalid_argument("need at least 2 logits");
  for (double v : logits) {
    if (!std::isfinite(v)) throw std::invalid_argument("logits must be finite");
  }
}

double max_of(std::span<const double> xs) { return *std::max_element(xs.begin(), xs.end()); }

}  // namespace

SmoothingConfig SmoothingConfig::make(double beta, std::size_t k) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("smoothing rate must lie in [0,1]");
  }
  if (k < 2) throw std::invalid_argument("class count must be >= 2");
  return SmoothingConfig{beta, k};
}

double log_sum_exp(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("log_sum_exp of empty vector");
  const double top = max_of(logits);
  double acc = 0.0;
  for (double v : logits) acc += std::exp(v - top);
  return top + std::log(acc);
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) out[k] = logits[k] - lse;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax of empty vector");
  const double top = max_of(logits);
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - top);
    total += out[k];
  }
  for (double& p : out) p /= total;
  return out;
}

std::vector<double> smooth_targets(std::size_t label, const SmoothingConfig& cfg) {
  if (label >= cfg.k) {
    throw std::invalid_argument("label " + std::to_string(label) + " out of range");
  }
  const double floor = cfg.beta / static_cast<double>(cfg.k);
  std::vector<double> out(cfg.k, floor);
  out[label] += 1.0 - cfg.beta;
  return out;
}

double cross_entropy(std::span<const double> logits, std::span<const double> targets) {
  if (logits.size() != targets.size()) {
    throw std::invalid_argument("logits and targets differ in length");
  }
  const auto logp = log_softmax(logits);
  double loss = 0.0;
  for (std::size_t k = 0; k < logp.size(); ++k) {
    if (targets[k] != 0.0) loss -= targets[k] * logp[k];
  }
  return loss;
}

SmoothedLossResult ls_loss(std::span<const double> logits, std::size_t label,
                           const SmoothingConfig& cfg) {
  require_logits(logits);
  if (logits.size() != cfg.k) throw std::invalid_argument("logit count does not match k");
  SmoothedLossResult out;
  out.targets = smooth_targets(label, cfg);
  out.loss = cross_entropy(logits, out.targets);
  out.grad = softmax(logits);
  for (std::size_t k = 0; k < cfg.k; ++k) out.grad[k] -= out.targets[k];
  return out;
}

std::vector<double> logit_distance(std::span<const double> logits) {
  require_logits(logits);
  const double top = max_of(logits);
  std::vector<double> d(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) d[k] = top - logits[k];
  return d;
}

double kl_uniform(std::span<const double> logits) {
  require_logits(logits);
  const double k = static_cast<double>(logits.size());
  const auto logp = log_softmax(logits);
  double kl = 0.0;
  for (double lp : logp) kl += (-std::log(k) - lp) / k;
  return std::max(kl, 0.0);
}

BoundWitness check_logit_distance_bound(std::span<const double> logits) {
  require_logits(logits);
  const double k = static_cast<double>(logits.size());
  const auto logp = log_softmax(logits);
  double penalty = 0.0;
  for (double lp : logp) penalty -= lp;
  penalty /= k;

  const auto d = logit_distance(logits);
  double mid = 0.0;
  for (double v : d) mid += v;
  mid /= k;

  BoundWitness w;
  w.kl = kl_uniform(logits);
  w.lower = penalty - std::log(k);
  w.mid = mid;
  w.upper = penalty;
  w.slack_low = w.mid - w.lower;
  w.slack_high = w.upper - w.mid;
  return w;
}

}  // namespace calib
