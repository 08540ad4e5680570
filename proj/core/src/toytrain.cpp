#include "calib/toytrain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <future>
#include <limits>
#include <stdexcept>
#include <thread>

#include "calib/calibration.hpp"
#include "calib/format.hpp"
#include "calib/rng.hpp"

namespace calib {

namespace {

void append_le(std::string& bytes, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

LabeledSet sample(std::size_t n, const std::vector<std::vector<double>>& means, double noise,
                  SplitMix64 rng) {
  const std::size_t k = means.size();
  const std::size_t d = means.front().size();
  LabeledSet out;
  out.dim = d;
  out.classes = k;
  out.features.resize(n * d);
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = i % k;
    for (std::size_t j = 0; j < d; ++j) out.features[i * d + j] = means[y][j] + rng.normal();
    std::size_t label = y;
    if (noise > 0.0 && rng.uniform() < noise) {
      label = (y + 1 + rng.below(static_cast<std::uint32_t>(k - 1))) % k;
    }
    out.labels[i] = label;
  }
  return out;
}

SplitMetrics split_metrics(const RecordSet& rs, std::size_t bins, std::size_t ranges) {
  return {accuracy(rs), mean_entropy_bits(rs), ece(rs, bins), rmsce(rs, ranges)};
}

ToyRunResult run_one(const ShiftData& data, std::uint64_t seed, double beta,
                     const ExperimentConfig& cfg) {
  TrainOutcome fit = train(data.train, beta, cfg.optimizer);
  ToyRunResult out;
  out.seed = seed;
  out.beta = beta;
  out.final_train_loss = fit.loss_history.back();
  GroupKey key;
  key.language = "id";
  key.smoothing = beta;
  out.in_distribution = split_metrics(predict(fit.model, data.eval_id, key), cfg.bins, cfg.ranges);
  key.language = "shifted";
  out.shifted_predictions = predict(fit.model, data.eval_shifted, key);
  out.shifted = split_metrics(out.shifted_predictions, cfg.bins, cfg.ranges);
  return out;
}

}  // namespace

std::uint64_t LabeledSet::checksum() const {
  std::string bytes;
  bytes.reserve(features.size() * 8 + labels.size() * 8);
  for (double f : features) append_le(bytes, std::bit_cast<std::uint64_t>(f));
  for (std::size_t y : labels) append_le(bytes, static_cast<std::uint64_t>(y));
  return fnv1a64(bytes);
}

void ShiftSpec::validate() const {
  if (classes < 2) throw std::invalid_argument("shift spec needs at least 2 classes");
  if (dim == 0) throw std::invalid_argument("shift spec needs dim >= 1");
  if (n_train < classes || n_eval < classes) {
    throw std::invalid_argument("shift spec needs at least one example per class in every split");
  }
  if (!(shift_magnitude >= 0.0) || !std::isfinite(shift_magnitude)) {
    throw std::invalid_argument("shift magnitude must be finite and >= 0");
  }
  if (!(label_noise >= 0.0 && label_noise < 1.0)) {
    throw std::invalid_argument("label noise must lie in [0,1)");
  }
  if (!(separation >= 0.0) || !std::isfinite(separation)) {
    throw std::invalid_argument("separation must be finite and >= 0");
  }
}

ShiftData generate(const ShiftSpec& spec) {
  spec.validate();
  SplitMix64 root(spec.seed);

  SplitMix64 mean_rng = root.split();
  std::vector<std::vector<double>> means(spec.classes, std::vector<double>(spec.dim));
  for (auto& mu : means) {
    for (double& v : mu) v = spec.separation * mean_rng.normal();
  }

  SplitMix64 dir_rng = root.split();
  std::vector<double> direction(spec.dim);
  double norm = 0.0;
  for (double& v : direction) {
    v = dir_rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    direction.assign(spec.dim, 0.0);
    direction[0] = 1.0;
  } else {
    for (double& v : direction) v /= norm;
  }

  ShiftData out;
  out.train = sample(spec.n_train, means, spec.label_noise, root.split());
  out.eval_id = sample(spec.n_eval, means, spec.label_noise, root.split());
  out.eval_shifted = sample(spec.n_eval, means, spec.label_noise, root.split());
  for (std::size_t i = 0; i < out.eval_shifted.size(); ++i) {
    for (std::size_t j = 0; j < spec.dim; ++j) {
      out.eval_shifted.features[i * spec.dim + j] += spec.shift_magnitude * direction[j];
    }
  }
  return out;
}

ToyClassifier ToyClassifier::zeros(std::size_t dim, std::size_t classes) {
  return {dim, classes, std::vector<double>(dim * classes, 0.0), std::vector<double>(classes, 0.0)};
}

std::vector<double> ToyClassifier::logits(std::span<const double> x) const {
  std::vector<double> out(bias);
  for (std::size_t j = 0; j < dim; ++j) {
    const double xj = x[j];
    const double* w = weights.data() + j * classes;
    for (std::size_t c = 0; c < classes; ++c) out[c] += xj * w[c];
  }
  return out;
}

double& ToyClassifier::parameter(std::size_t i) {
  return i < weights.size() ? weights[i] : bias[i - weights.size()];
}

double batch_loss(const ToyClassifier& model, const LabeledSet& data, double beta,
                  std::vector<double>* grad) {
  const auto cfg = SmoothingConfig::make(beta, model.classes);
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("batch loss over an empty set");
  if (grad) grad->assign(model.parameter_count(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = data.row(i);
    const auto z = model.logits(x);
    for (double v : z) {
      if (!std::isfinite(v)) return std::numeric_limits<double>::quiet_NaN();
    }
    const auto res = ls_loss(z, data.labels[i], cfg);
    total += res.loss;
    if (!grad) continue;
    double* gw = grad->data();
    double* gb = grad->data() + model.weights.size();
    for (std::size_t j = 0; j < model.dim; ++j) {
      for (std::size_t c = 0; c < model.classes; ++c) gw[j * model.classes + c] += x[j] * res.grad[c];
    }
    for (std::size_t c = 0; c < model.classes; ++c) gb[c] += res.grad[c];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  if (grad) {
    for (double& g : *grad) g *= inv_n;
  }
  return total * inv_n;
}

TrainOutcome train(const LabeledSet& data, double beta, const OptimizerSpec& opt) {
  std::vector<std::size_t> per_class(data.classes, 0);
  for (std::size_t y : data.labels) ++per_class.at(y);
  if (std::find(per_class.begin(), per_class.end(), 0) != per_class.end()) {
    throw std::invalid_argument("training set is missing a class");
  }
  TrainOutcome out{ToyClassifier::zeros(data.dim, data.classes), {}};
  out.loss_history.reserve(opt.epochs + 1);
  std::vector<double> grad;
  for (std::size_t epoch = 0; epoch <= opt.epochs; ++epoch) {
    const bool last = epoch == opt.epochs;
    const double loss = batch_loss(out.model, data, beta, last ? nullptr : &grad);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch) +
                               "; learning rate too large?");
    }
    out.loss_history.push_back(loss);
    if (last) break;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      out.model.parameter(i) -= opt.learning_rate * grad[i];
    }
  }
  return out;
}

RecordSet predict(const ToyClassifier& model, const LabeledSet& data, const GroupKey& group) {
  std::vector<PredictionRecord> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    PredictionRecord r;
    r.id = "i" + std::to_string(i);
    r.probs = softmax(model.logits(data.row(i)));
    r.label = data.labels[i];
    r.group = group;
    out.push_back(std::move(r));
  }
  return RecordSet(std::move(out));
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of no values");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

ExperimentResult experiment(const ShiftSpec& spec, const std::vector<double>& betas,
                            const std::vector<std::uint64_t>& seeds,
                            const ExperimentConfig& cfg) {
  if (betas.empty()) throw std::invalid_argument("experiment needs at least one beta");
  if (seeds.empty()) throw std::invalid_argument("experiment needs at least one seed");
  for (double b : betas) SmoothingConfig::make(b, spec.classes);
  spec.validate();

  // One task per seed: generate once, train every beta on it.
  auto task = [&](std::uint64_t seed) {
    ShiftSpec s = spec;
    s.seed = seed;
    const ShiftData data = generate(s);
    std::vector<ToyRunResult> runs;
    for (double b : betas) runs.push_back(run_one(data, seed, b, cfg));
    return runs;
  };

  std::size_t workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, seeds.size());
  std::vector<std::vector<ToyRunResult>> by_seed(seeds.size());
  for (std::size_t start = 0; start < seeds.size(); start += workers) {
    const std::size_t stop = std::min(seeds.size(), start + workers);
    std::vector<std::future<std::vector<ToyRunResult>>> pending;
    for (std::size_t i = start; i < stop; ++i) {
      pending.push_back(std::async(std::launch::async, task, seeds[i]));
    }
    for (std::size_t i = start; i < stop; ++i) by_seed[i] = pending[i - start].get();
  }

  ExperimentResult out;
  for (std::size_t b = 0; b < betas.size(); ++b) {
    BetaSummary summary;
    summary.beta = betas[b];
    std::vector<double> loss, id_acc, id_ent, id_ece, id_rms, sh_acc, sh_ent, sh_ece, sh_rms;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      ToyRunResult& run = by_seed[s][b];
      loss.push_back(run.final_train_loss);
      id_acc.push_back(run.in_distribution.accuracy);
      id_ent.push_back(run.in_distribution.mean_entropy);
      id_ece.push_back(run.in_distribution.ece);
      id_rms.push_back(run.in_distribution.rmsce);
      sh_acc.push_back(run.shifted.accuracy);
      sh_ent.push_back(run.shifted.mean_entropy);
      sh_ece.push_back(run.shifted.ece);
      sh_rms.push_back(run.shifted.rmsce);
      out.runs.push_back(std::move(run));
    }
    summary.runs = seeds.size();
    summary.median_final_loss = median(loss);
    summary.median_in_distribution = {median(id_acc), median(id_ent), median(id_ece), median(id_rms)};
    summary.median_shifted = {median(sh_acc), median(sh_ent), median(sh_ece), median(sh_rms)};
    out.summary.push_back(summary);
  }
  return out;
}

}  // namespace calib
