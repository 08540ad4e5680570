#include "calib/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "calib/error.hpp"

namespace calib {

namespace {

void check_lengths(std::span<const double> quantity, std::span<const double> hits) {
  if (quantity.size() != hits.size()) {
    throw std::invalid_argument("quantity and hit sequences differ in length");
  }
}

// Fills count/acc/conf from `members`, summing in member order.
void aggregate(Bin& bin, std::span<const double> quantity, std::span<const double> hits) {
  bin.count = bin.members.size();
  if (bin.count == 0) {
    bin.acc = bin.conf = 0.0;
    return;
  }
  double sum_hit = 0.0;
  double sum_q = 0.0;
  for (std::size_t i : bin.members) {
    sum_hit += hits[i];
    sum_q += quantity[i];
  }
  bin.acc = sum_hit / static_cast<double>(bin.count);
  bin.conf = sum_q / static_cast<double>(bin.count);
}

void require_nonempty(const RecordSet& rs) {
  if (rs.empty()) throw DataError("record set is empty");
}

// Σ_m |B_m|/N · |acc - conf|^power over a partition.
double weighted_gap(const BinPartition& part, int power) {
  double total = 0.0;
  for (std::size_t m = 0; m < part.bins.size(); ++m) {
    const Bin& b = part.bins[m];
    if (b.count == 0) continue;
    const double gap = std::abs(b.acc - b.conf);
    total += part.weight(m) * (power == 2 ? gap * gap : gap);
  }
  return total;
}

std::vector<double> class_column(const RecordSet& rs, std::size_t k) {
  std::vector<double> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(r.probs[k]);
  return out;
}

std::vector<double> class_indicator(const RecordSet& rs, std::size_t k) {
  std::vector<double> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(r.label == k ? 1.0 : 0.0);
  return out;
}

}  // namespace

std::size_t BinPartition::empty_bins() const {
  return static_cast<std::size_t>(
      std::count_if(bins.begin(), bins.end(), [](const Bin& b) { return b.count == 0; }));
}

double BinPartition::weight(std::size_t m) const {
  if (total == 0) return 0.0;
  return static_cast<double>(bins[m].count) / static_cast<double>(total);
}

double uniform_bin_edge(std::size_t m, std::size_t bins) {
  return static_cast<double>(m) / static_cast<double>(bins);
}

std::size_t uniform_bin_index(double q, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("number of bins must be >= 1");
  if (!(q >= 0.0 && q <= 1.0)) {
    throw std::invalid_argument("binned quantity must lie in [0,1]");
  }
  std::size_t idx = 0;
  if (q > 0.0) {
    const double scaled = std::ceil(q * static_cast<double>(bins));
    idx = scaled < 1.0 ? 0 : static_cast<std::size_t>(scaled) - 1;
    idx = std::min(idx, bins - 1);
  }
  // q * M can round across an edge; settle against the exact edge values.
  while (idx > 0 && q <= uniform_bin_edge(idx, bins)) --idx;
  while (idx + 1 < bins && q > uniform_bin_edge(idx + 1, bins)) ++idx;
  return idx;
}

BinPartition partition_uniform(std::span<const double> quantity, std::span<const double> hits,
                               std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("number of bins must be >= 1");
  check_lengths(quantity, hits);
  BinPartition part;
  part.strategy = BinningStrategy::uniform;
  part.total = quantity.size();
  part.bins.resize(bins);
  for (std::size_t m = 0; m < bins; ++m) {
    part.bins[m].lo = uniform_bin_edge(m, bins);
    part.bins[m].hi = uniform_bin_edge(m + 1, bins);
  }
  for (std::size_t i = 0; i < quantity.size(); ++i) {
    part.bins[uniform_bin_index(quantity[i], bins)].members.push_back(i);
  }
  for (Bin& b : part.bins) aggregate(b, quantity, hits);
  return part;
}

BinPartition partition_equal_mass(std::span<const double> quantity, std::span<const double> hits,
                                  std::size_t ranges) {
  if (ranges == 0) throw std::invalid_argument("number of ranges must be >= 1");
  check_lengths(quantity, hits);
  for (double q : quantity) {
    if (std::isnan(q)) throw std::invalid_argument("binned quantity is NaN");
  }
  const std::size_t n = quantity.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return quantity[a] < quantity[b]; });

  BinPartition part;
  part.strategy = BinningStrategy::equal_mass;
  part.total = n;
  part.bins.resize(ranges);
  const std::size_t base = n / ranges;
  const std::size_t extra = n % ranges;
  std::size_t cursor = 0;
  for (std::size_t r = 0; r < ranges; ++r) {
    Bin& b = part.bins[r];
    const std::size_t size = base + (r < extra ? 1 : 0);
    b.members.assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                     order.begin() + static_cast<std::ptrdiff_t>(cursor + size));
    cursor += size;
    if (size > 0) {
      b.lo = quantity[b.members.front()];
      b.hi = quantity[b.members.back()];
    }
    aggregate(b, quantity, hits);
  }
  return part;
}

std::vector<double> confidences(const RecordSet& rs) {
  std::vector<double> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(r.prediction().confidence);
  return out;
}

std::vector<double> correctness(const RecordSet& rs) {
  std::vector<double> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(r.correct() ? 1.0 : 0.0);
  return out;
}

double accuracy(const RecordSet& rs) {
  require_nonempty(rs);
  std::size_t hits = 0;
  for (const auto& r : rs) hits += r.correct() ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(rs.size());
}

double mean_entropy_bits(const RecordSet& rs) {
  require_nonempty(rs);
  double total = 0.0;
  for (const auto& r : rs) total += r.entropy_bits();
  return total / static_cast<double>(rs.size());
}

double ece(const RecordSet& rs, std::size_t bins) {
  require_nonempty(rs);
  const auto conf = confidences(rs);
  const auto hit = correctness(rs);
  return weighted_gap(partition_uniform(conf, hit, bins), 1);
}

double sce(const RecordSet& rs, std::size_t bins) {
  const std::size_t k = rs.require_uniform_k();
  if (bins == 0) throw std::invalid_argument("number of bins must be >= 1");
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const auto q = class_column(rs, c);
    const auto hit = class_indicator(rs, c);
    total += weighted_gap(partition_uniform(q, hit, bins), 1);
  }
  return total / static_cast<double>(k);
}

double ace(const RecordSet& rs, std::size_t ranges, double epsilon, AceDiagnostics* diagnostics) {
  const std::size_t k = rs.require_uniform_k();
  if (ranges == 0) throw std::invalid_argument("number of ranges must be >= 1");
  AceDiagnostics diag;
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> q;
    std::vector<double> hit;
    for (const auto& r : rs) {
      if (r.probs[c] < epsilon) continue;
      q.push_back(r.probs[c]);
      hit.push_back(r.label == c ? 1.0 : 0.0);
    }
    const BinPartition part = partition_equal_mass(q, hit, ranges);
    diag.empty_ranges += part.empty_bins();
    for (const Bin& b : part.bins) {
      if (b.count > 0) total += std::abs(b.acc - b.conf);
    }
  }
  if (diagnostics) *diagnostics = diag;
  return total / (static_cast<double>(k) * static_cast<double>(ranges));
}

double rmsce(const RecordSet& rs, std::size_t ranges) {
  require_nonempty(rs);
  const auto conf = confidences(rs);
  const auto hit = correctness(rs);
  return std::sqrt(weighted_gap(partition_equal_mass(conf, hit, ranges), 2));
}

double mad(const RecordSet& rs, std::size_t ranges) {
  require_nonempty(rs);
  const auto conf = confidences(rs);
  const auto hit = correctness(rs);
  return weighted_gap(partition_equal_mass(conf, hit, ranges), 1);
}

MetricReport report(const RecordSet& rs, const MetricConfig& cfg) {
  rs.require_uniform_k();
  MetricReport out;
  out.n = rs.size();
  out.accuracy = accuracy(rs);
  out.mean_entropy = mean_entropy_bits(rs);
  out.ece = ece(rs, cfg.bins);
  out.sce = sce(rs, cfg.bins);
  AceDiagnostics diag;
  out.ace = ace(rs, cfg.ranges, cfg.ace_epsilon, &diag);
  out.empty_ace_ranges = diag.empty_ranges;
  out.rmsce = rmsce(rs, cfg.ranges);
  out.mad = mad(rs, cfg.ranges);
  out.ranges_exceed_n = cfg.ranges > rs.size();
  return out;
}

}  // namespace calib
