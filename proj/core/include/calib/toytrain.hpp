#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "calib/records.hpp"
#include "calib/smoothing.hpp"

namespace calib {

/// Dense labelled examples, features stored row-major (size() x dim).
struct LabeledSet {
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::vector<double> features;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * dim, dim};
  }

  /// FNV-1a over the little-endian bytes of every feature then every label
  /// (as uint64).
  std::uint64_t checksum() const;
};

/// Synthetic covariate-shift benchmark: K Gaussian clusters (unit variance)
/// whose means are drawn with scale `separation`; the shifted evaluation
/// split translates every point by `shift_magnitude` along one random unit
/// direction.
struct ShiftSpec {
  std::size_t dim = 2;
  std::size_t classes = 4;
  std::size_t n_train = 2000;
  std::size_t n_eval = 2000;
  double shift_magnitude = 2.0;
  double label_noise = 0.0;
  double separation = 2.0;
  std::uint64_t seed = 7;

  /// Throws std::invalid_argument for classes < 2, dim == 0, counts below
  /// `classes`, negative shift or noise outside [0, 1).
  void validate() const;
};

struct ShiftData {
  LabeledSet train;
  LabeledSet eval_id;
  LabeledSet eval_shifted;
};

/// Stream layout from SplitMix64(seed): split() in order for the class
/// means, the shift direction, train, in-distribution eval and shifted eval.
/// Labels cycle 0..K-1 so every class is present; label noise then flips a
/// label to a uniformly chosen different class.
ShiftData generate(const ShiftSpec& spec);

/// Linear softmax classifier: logits = x * weights + bias, weights dim x K
/// row-major.
struct ToyClassifier {
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  static ToyClassifier zeros(std::size_t dim, std::size_t classes);

  std::vector<double> logits(std::span<const double> x) const;
  std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }
  /// Parameter i in [weights..., bias...] order.
  double& parameter(std::size_t i);
};

struct OptimizerSpec {
  double learning_rate = 0.1;
  std::size_t epochs = 500;
};

/// Mean smoothed loss over `data`; when `grad` is non-null it receives the
/// gradient in ToyClassifier::parameter order. NaN if any logit overflows.
double batch_loss(const ToyClassifier& model, const LabeledSet& data, double beta,
                  std::vector<double>* grad = nullptr);

struct TrainOutcome {
  ToyClassifier model;
  /// Loss at the start of every epoch plus the final loss (epochs + 1 values).
  std::vector<double> loss_history;
};

/// Full-batch gradient descent from zero parameters. Throws
/// std::invalid_argument if a class has no examples and std::runtime_error
/// on a non-finite loss.
TrainOutcome train(const LabeledSet& data, double beta, const OptimizerSpec& opt = {});

/// Predicted distributions as prediction records (ids "i<n>").
RecordSet predict(const ToyClassifier& model, const LabeledSet& data, const GroupKey& group = {});

struct SplitMetrics {
  double accuracy = 0.0;
  double mean_entropy = 0.0;  // bits
  double ece = 0.0;
  double rmsce = 0.0;
};

struct ToyRunResult {
  std::uint64_t seed = 0;
  double beta = 0.0;
  double final_train_loss = 0.0;
  SplitMetrics in_distribution;
  SplitMetrics shifted;
  /// Predictions on the shifted split, kept for reliability plots.
  RecordSet shifted_predictions;
};

struct BetaSummary {
  double beta = 0.0;
  std::size_t runs = 0;
  double median_final_loss = 0.0;
  SplitMetrics median_in_distribution;
  SplitMetrics median_shifted;
};

struct ExperimentResult {
  std::vector<ToyRunResult> runs;  // ordered by (beta, seed) as given
  std::vector<BetaSummary> summary;
};

struct ExperimentConfig {
  OptimizerSpec optimizer;
  std::size_t bins = 10;
  std::size_t ranges = 10;
  /// Worker threads; 0 picks hardware concurrency. Results do not depend on it.
  std::size_t threads = 0;
};

/// Trains one model per (beta, seed). Every seed regenerates the data with
/// spec.seed replaced by that seed, shared across betas.
ExperimentResult experiment(const ShiftSpec& spec, const std::vector<double>& betas,
                            const std::vector<std::uint64_t>& seeds,
                            const ExperimentConfig& cfg = {});

double median(std::vector<double> values);

}  // namespace calib
