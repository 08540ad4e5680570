#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "calib/calibration.hpp"
#include "calib/records.hpp"

namespace calib {

// ---------------------------------------------------------------------------
// Student t machinery

/// Regularized incomplete beta I_x(a, b), continued fraction evaluated with
/// the modified Lentz method (switching to 1 - I_{1-x}(b, a) above the mean
/// so the fraction converges fast). Absolute error well below 1e-12 for the
/// parameter ranges t tests produce.
double incomplete_beta(double a, double b, double x);

/// P(|T| >= |t|) for T ~ Student t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
  /// Zero standard error with a non-zero mean difference: t = ±inf, p = 0.
  bool degenerate = false;
};

/// Paired: one-sample Student t on a - b (needs |a| = |b| >= 2).
/// Unpaired: Welch t with Welch-Satterthwaite df (needs |a|, |b| >= 2).
/// Zero standard error gives (0, 1) when the means agree.
TTestResult t_test(std::span<const double> a, std::span<const double> b, bool paired = true);

// ---------------------------------------------------------------------------
// Grouping

/// Names accepted by GroupKey::field besides extras.
inline constexpr std::string_view kStandardGroupFields[] = {"model", "sft_dataset", "language",
                                                            "smoothing"};

/// Copy of `key` keeping only `fields`.
GroupKey project(const GroupKey& key, const std::vector<std::string>& fields);

/// Copy of `key` with `fields` cleared.
GroupKey drop(const GroupKey& key, const std::vector<std::string>& fields);

/// Partitions `rs` by the projection of each record's GroupKey onto `fields`
/// and reports each part. Map order is GroupKey order. Throws
/// std::invalid_argument for an empty field list or a field that is neither
/// standard nor an extra present on any record.
std::map<GroupKey, RecordSet> group_records(const RecordSet& rs,
                                            const std::vector<std::string>& fields);

std::map<GroupKey, MetricReport> group_reports(const RecordSet& rs,
                                               const std::vector<std::string>& fields,
                                               const MetricConfig& cfg = {});

// ---------------------------------------------------------------------------
// Comparison across one axis

enum class Metric { accuracy, entropy, ece, rmsce, sce, ace, mad };

inline constexpr Metric kAllMetrics[] = {Metric::accuracy, Metric::entropy, Metric::ece,
                                         Metric::rmsce,    Metric::sce,     Metric::ace,
                                         Metric::mad};

std::string_view metric_name(Metric m);
/// Column heading in comparison tables ("ECE", "RMS", ...).
std::string_view metric_heading(Metric m);
double metric_value(const MetricReport& r, Metric m);
/// +1 higher is better, -1 lower is better, 0 no preference (entropy).
int metric_direction(Metric m);

struct CompareOptions {
  bool paired = true;
  double alpha = 0.05;
  /// Fewer sample pairs than this marks a contrast as low power.
  std::size_t low_power_below = 5;
};

/// One setting of the compared axis inside a block.
struct Arm {
  GroupKey value;                        // only the axis field is set
  std::map<GroupKey, MetricReport> samples;  // keyed by sample unit
  std::map<Metric, double> mean;
};

struct MetricContrast {
  TTestResult test;
  double baseline_mean = 0.0;
  double arm_mean = 0.0;
  bool arm_better = false;
  bool baseline_better = false;
  bool significant = false;
};

/// Baseline arm vs one other arm of the same block.
struct Contrast {
  std::size_t arm = 0;  // index into Block::arms
  std::size_t pairs = 0;
  bool low_power = false;
  std::map<Metric, MetricContrast> metrics;
};

struct Block {
  GroupKey key;  // group fields other than axis and sample fields
  std::vector<Arm> arms;  // GroupKey order of the axis value
  std::size_t baseline = 0;
  std::vector<Contrast> contrasts;
};

struct Comparison {
  std::string axis;
  std::string baseline;
  std::vector<std::string> sample_fields;
  CompareOptions options;
  std::vector<Block> blocks;

  /// Marker for a table cell: 0 plain, 1 better, 2 better and significant.
  int marker(const Block& block, std::size_t arm, Metric m) const;
};

/// `reports` must be keyed by GroupKeys carrying the axis field and the
/// sample fields (plus any block fields). Blocks are the distinct values of
/// the remaining fields; inside a block each non-baseline arm is tested
/// against the baseline over the sample units they share (paired) or over
/// all their units (Welch). Throws std::invalid_argument when the axis has
/// fewer than two values in every block or the baseline value never occurs.
Comparison compare(const std::map<GroupKey, MetricReport>& reports, const std::string& axis,
                   const std::string& baseline, const std::vector<std::string>& sample_fields,
                   const CompareOptions& opts = {});

// ---------------------------------------------------------------------------
// Output

enum class TableFormat { csv, tsv, md };

std::optional<TableFormat> parse_table_format(std::string_view name);

/// One row per group. csv/tsv print numbers at round-trip precision, md at
/// 6 significant digits.
void write_metric_table(std::ostream& out, const std::map<GroupKey, MetricReport>& reports,
                        const std::vector<std::string>& columns, TableFormat format);

/// Side-by-side results table. md: **x** better, ***x*** better and significant,
/// followed by the per-metric test statistics. csv/tsv: each metric column
/// is followed by a flag column holding "", "*" or "**".
void write_comparison(std::ostream& out, const Comparison& cmp, TableFormat format);

}  // namespace calib
