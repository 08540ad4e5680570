#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "calib/records.hpp"

namespace calib {

enum class BinningStrategy { uniform, equal_mass };

/// One bin of a partition. `acc` is the mean of the per-record hit values
/// (0/1 correctness, or the class indicator for per-class metrics) and
/// `conf` the mean binned quantity. Empty bins keep acc = conf = 0.
struct Bin {
  std::size_t count = 0;
  double acc = 0.0;
  double conf = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  /// Indices into the binned sequence, in the order they were aggregated.
  std::vector<std::size_t> members;
};

struct BinPartition {
  BinningStrategy strategy = BinningStrategy::uniform;
  std::vector<Bin> bins;
  std::size_t total = 0;

  std::size_t empty_bins() const;
  /// |B_m| / N, 0 for an empty partition.
  double weight(std::size_t m) const;
};

/// Left edge of uniform bin `m` out of `bins`, i.e. m / bins.
double uniform_bin_edge(std::size_t m, std::size_t bins);

/// Index of the uniform bin holding `q`. Bins are [0, 1/M], (1/M, 2/M], ...,
/// ((M-1)/M, 1], with edges exactly as returned by uniform_bin_edge.
std::size_t uniform_bin_index(double q, std::size_t bins);

/// Uniform-width partition of `quantity` over [0, 1]. `hits` supplies the
/// value averaged into each bin's `acc`. Throws std::invalid_argument for
/// bins == 0, mismatched lengths, or a quantity outside [0, 1].
BinPartition partition_uniform(std::span<const double> quantity, std::span<const double> hits,
                               std::size_t bins);

/// Equal-mass partition: stable ascending sort by quantity, then the first
/// N mod R bins take ceil(N/R) records and the rest floor(N/R). R > N is
/// allowed and leaves trailing bins empty. Throws for ranges == 0.
BinPartition partition_equal_mass(std::span<const double> quantity, std::span<const double> hits,
                                  std::size_t ranges);

/// Max-probability confidence of every record.
std::vector<double> confidences(const RecordSet& rs);
/// 1.0 where the argmax matches the label, else 0.0.
std::vector<double> correctness(const RecordSet& rs);

double accuracy(const RecordSet& rs);
double mean_entropy_bits(const RecordSet& rs);

// The estimators below throw DataError on an empty record set, and the
// per-class ones (sce, ace) also when records disagree on K. Zero bins or
// ranges is std::invalid_argument.

/// Expected calibration error over `bins` uniform confidence bins.
double ece(const RecordSet& rs, std::size_t bins);

/// Static calibration error: ECE applied to every class probability
/// (hit = label is that class), summed with |B_mk|/N weights, averaged over K.
double sce(const RecordSet& rs, std::size_t bins);

struct AceDiagnostics {
  /// Number of (class, range) cells that held no predictions.
  std::size_t empty_ranges = 0;
};

/// Adaptive calibration error: per class, `ranges` equal-mass ranges over the
/// class probability (dropping probabilities below `epsilon` first); the
/// unweighted mean of |acc - conf| over all K * R cells, empty cells
/// counting as zero.
double ace(const RecordSet& rs, std::size_t ranges, double epsilon = 0.0,
           AceDiagnostics* diagnostics = nullptr);

/// Root-mean-square calibration error over equal-mass confidence bins.
double rmsce(const RecordSet& rs, std::size_t ranges);

/// Mean absolute calibration error over the same bins as rmsce.
double mad(const RecordSet& rs, std::size_t ranges);

struct MetricConfig {
  std::size_t bins = 10;
  std::size_t ranges = 10;
  double ace_epsilon = 0.0;
};

struct MetricReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  double mean_entropy = 0.0;  // bits
  double ece = 0.0;
  double sce = 0.0;
  double ace = 0.0;
  double rmsce = 0.0;
  double mad = 0.0;

  /// More ranges than records: some equal-mass bins are necessarily empty.
  bool ranges_exceed_n = false;
  std::size_t empty_ace_ranges = 0;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

MetricReport report(const RecordSet& rs, const MetricConfig& cfg = {});

}  // namespace calib
