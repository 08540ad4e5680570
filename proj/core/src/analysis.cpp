#include "calib/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <set>
#include <stdexcept>

#include "calib/error.hpp"
#include "calib/format.hpp"

namespace calib {

namespace {

double continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double sample_mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs, double mean) {
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return s / static_cast<double>(xs.size() - 1);
}

TTestResult from_statistic(double diff, double se, double df) {
  TTestResult out;
  out.df = df;
  if (se == 0.0 || !std::isfinite(se)) {
    if (diff == 0.0) return out;
    out.t = diff > 0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity();
    out.p = 0.0;
    out.degenerate = true;
    return out;
  }
  out.t = diff / se;
  out.p = student_t_two_sided_p(out.t, df);
  return out;
}

bool is_standard_field(const std::string& name) {
  return std::find(std::begin(kStandardGroupFields), std::end(kStandardGroupFields), name) !=
         std::end(kStandardGroupFields);
}

bool axis_matches(const GroupKey& arm, const std::string& axis, const std::string& baseline) {
  const auto value = arm.field(axis);
  if (!value) return baseline.empty();
  if (axis == "smoothing") {
    char* end = nullptr;
    const double want = std::strtod(baseline.c_str(), &end);
    return end != baseline.c_str() && *end == '\0' && arm.smoothing && *arm.smoothing == want;
  }
  return *value == baseline;
}

std::string csv_escape(const std::string& s, char sep) {
  if (s.find_first_of(std::string(1, sep) + "\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

template <typename Row>
void emit_row(std::ostream& out, const Row& cells, TableFormat format) {
  if (format == TableFormat::md) {
    out << '|';
    for (const auto& c : cells) out << ' ' << c << " |";
    out << '\n';
    return;
  }
  const char sep = format == TableFormat::csv ? ',' : '\t';
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << sep;
    out << cells[i];
  }
  out << '\n';
}

void emit_md_rule(std::ostream& out, std::size_t columns) {
  out << '|';
  for (std::size_t i = 0; i < columns; ++i) out << " --- |";
  out << '\n';
}

std::string cell_text(const std::string& s, TableFormat format) {
  if (format == TableFormat::md) return md_escape(s);
  return csv_escape(s, format == TableFormat::csv ? ',' : '\t');
}

std::string number(double v, TableFormat format) {
  return format == TableFormat::md ? format_sig6(v) : format_roundtrip(v);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("incomplete beta needs a, b > 0");
  if (std::isnan(x)) throw std::invalid_argument("incomplete beta at NaN");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                                a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * continued_fraction(a, b, x) / a;
  return 1.0 - front * continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("degrees of freedom must be > 0");
  if (std::isnan(t)) throw std::invalid_argument("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  const double p = incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return std::clamp(p, 0.0, 1.0);
}

TTestResult t_test(std::span<const double> a, std::span<const double> b, bool paired) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("t test needs >= 2 samples per side");
  if (paired) {
    if (a.size() != b.size()) throw std::invalid_argument("paired t test needs equal sample sizes");
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    const double n = static_cast<double>(diff.size());
    const double m = sample_mean(diff);
    const double se = std::sqrt(sample_variance(diff, m) / n);
    return from_statistic(m, se, n - 1.0);
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = sample_mean(a);
  const double mb = sample_mean(b);
  const double va = sample_variance(a, ma) / na;
  const double vb = sample_variance(b, mb) / nb;
  const double se2 = va + vb;
  const double df = se2 > 0.0 ? se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0))
                              : na + nb - 2.0;
  return from_statistic(ma - mb, std::sqrt(se2), df);
}

GroupKey project(const GroupKey& key, const std::vector<std::string>& fields) {
  auto wants = [&](const std::string& f) {
    return std::find(fields.begin(), fields.end(), f) != fields.end();
  };
  GroupKey out;
  if (wants("model")) out.model = key.model;
  if (wants("sft_dataset")) out.sft_dataset = key.sft_dataset;
  if (wants("language")) out.language = key.language;
  if (wants("smoothing")) out.smoothing = key.smoothing;
  for (const auto& kv : key.extra) {
    if (wants(kv.first)) out.extra.push_back(kv);
  }
  return out;
}

GroupKey drop(const GroupKey& key, const std::vector<std::string>& fields) {
  auto drops = [&](const std::string& f) {
    return std::find(fields.begin(), fields.end(), f) != fields.end();
  };
  GroupKey out = key;
  if (drops("model")) out.model.clear();
  if (drops("sft_dataset")) out.sft_dataset.clear();
  if (drops("language")) out.language.clear();
  if (drops("smoothing")) out.smoothing.reset();
  std::erase_if(out.extra, [&](const auto& kv) { return drops(kv.first); });
  return out;
}

std::map<GroupKey, RecordSet> group_records(const RecordSet& rs,
                                            const std::vector<std::string>& fields) {
  if (fields.empty()) throw std::invalid_argument("group by needs at least one field");
  std::set<std::string> extras;
  for (const auto& r : rs) {
    for (const auto& kv : r.group.extra) extras.insert(kv.first);
  }
  for (const auto& f : fields) {
    if (!is_standard_field(f) && !extras.contains(f)) {
      throw std::invalid_argument("unknown group field '" + f + "'");
    }
  }
  std::map<GroupKey, std::vector<PredictionRecord>> parts;
  for (const auto& r : rs) parts[project(r.group, fields)].push_back(r);
  std::map<GroupKey, RecordSet> out;
  for (auto& [key, records] : parts) out.emplace(key, RecordSet(std::move(records)));
  return out;
}

std::map<GroupKey, MetricReport> group_reports(const RecordSet& rs,
                                               const std::vector<std::string>& fields,
                                               const MetricConfig& cfg) {
  std::map<GroupKey, MetricReport> out;
  for (const auto& [key, part] : group_records(rs, fields)) {
    out.emplace(key, report(part, cfg));
  }
  return out;
}

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::accuracy: return "accuracy";
    case Metric::entropy: return "entropy_bits";
    case Metric::ece: return "ece";
    case Metric::rmsce: return "rmsce";
    case Metric::sce: return "sce";
    case Metric::ace: return "ace";
    case Metric::mad: return "mad";
  }
  return "?";
}

std::string_view metric_heading(Metric m) {
  switch (m) {
    case Metric::accuracy: return "Accuracy";
    case Metric::entropy: return "Entropy";
    case Metric::ece: return "ECE";
    case Metric::rmsce: return "RMS";
    case Metric::sce: return "SCE";
    case Metric::ace: return "ACE";
    case Metric::mad: return "MAD";
  }
  return "?";
}

double metric_value(const MetricReport& r, Metric m) {
  switch (m) {
    case Metric::accuracy: return r.accuracy;
    case Metric::entropy: return r.mean_entropy;
    case Metric::ece: return r.ece;
    case Metric::rmsce: return r.rmsce;
    case Metric::sce: return r.sce;
    case Metric::ace: return r.ace;
    case Metric::mad: return r.mad;
  }
  return 0.0;
}

int metric_direction(Metric m) {
  switch (m) {
    case Metric::accuracy: return 1;
    case Metric::entropy: return 0;
    default: return -1;
  }
}

int Comparison::marker(const Block& block, std::size_t arm, Metric m) const {
  if (block.contrasts.empty()) return 0;
  if (arm != block.baseline) {
    for (const Contrast& c : block.contrasts) {
      if (c.arm != arm) continue;
      const MetricContrast& mc = c.metrics.at(m);
      return mc.arm_better ? (mc.significant ? 2 : 1) : 0;
    }
    return 0;
  }
  bool all_better = true;
  bool all_significant = true;
  for (const Contrast& c : block.contrasts) {
    const MetricContrast& mc = c.metrics.at(m);
    all_better = all_better && mc.baseline_better;
    all_significant = all_significant && mc.significant;
  }
  return all_better ? (all_significant ? 2 : 1) : 0;
}

Comparison compare(const std::map<GroupKey, MetricReport>& reports, const std::string& axis,
                   const std::string& baseline, const std::vector<std::string>& sample_fields,
                   const CompareOptions& opts) {
  if (std::find(sample_fields.begin(), sample_fields.end(), axis) != sample_fields.end()) {
    throw std::invalid_argument("comparison axis cannot also be a sample field");
  }
  std::vector<std::string> non_block = sample_fields;
  non_block.push_back(axis);

  std::map<GroupKey, std::map<GroupKey, std::map<GroupKey, MetricReport>>> nested;
  for (const auto& [key, rep] : reports) {
    if (!key.field(axis)) {
      throw std::invalid_argument("group " + key.label() + " has no value for axis '" + axis + "'");
    }
    nested[drop(key, non_block)][project(key, {axis})][project(key, sample_fields)] = rep;
  }

  Comparison out;
  out.axis = axis;
  out.baseline = baseline;
  out.sample_fields = sample_fields;
  out.options = opts;
  bool saw_baseline = false;
  for (auto& [block_key, arms] : nested) {
    Block block;
    block.key = block_key;
    std::optional<std::size_t> base;
    for (auto& [arm_key, samples] : arms) {
      Arm arm;
      arm.value = arm_key;
      arm.samples = std::move(samples);
      for (Metric m : kAllMetrics) {
        double s = 0.0;
        for (const auto& [unit, rep] : arm.samples) s += metric_value(rep, m);
        arm.mean[m] = s / static_cast<double>(arm.samples.size());
      }
      if (axis_matches(arm_key, axis, baseline)) base = block.arms.size();
      block.arms.push_back(std::move(arm));
    }
    if (!base) continue;
    saw_baseline = true;
    if (block.arms.size() < 2) continue;
    block.baseline = *base;
    const Arm& ref = block.arms[*base];
    for (std::size_t j = 0; j < block.arms.size(); ++j) {
      if (j == *base) continue;
      const Arm& arm = block.arms[j];
      Contrast contrast;
      contrast.arm = j;
      for (Metric m : kAllMetrics) {
        std::vector<double> a;
        std::vector<double> b;
        if (opts.paired) {
          for (const auto& [unit, rep] : ref.samples) {
            auto it = arm.samples.find(unit);
            if (it == arm.samples.end()) continue;
            a.push_back(metric_value(rep, m));
            b.push_back(metric_value(it->second, m));
          }
        } else {
          for (const auto& [unit, rep] : ref.samples) a.push_back(metric_value(rep, m));
          for (const auto& [unit, rep] : arm.samples) b.push_back(metric_value(rep, m));
        }
        MetricContrast mc;
        if (!a.empty() && !b.empty()) {
          mc.baseline_mean = sample_mean(a);
          mc.arm_mean = sample_mean(b);
        }
        if (a.size() >= 2 && b.size() >= 2) mc.test = t_test(a, b, opts.paired);
        const int dir = metric_direction(m);
        const double gap = mc.arm_mean - mc.baseline_mean;
        mc.arm_better = !a.empty() && dir * gap > 0;
        mc.baseline_better = !a.empty() && dir * gap < 0;
        mc.significant = (mc.arm_better || mc.baseline_better) && mc.test.p < opts.alpha;
        contrast.pairs = opts.paired ? a.size() : std::min(a.size(), b.size());
        contrast.metrics[m] = mc;
      }
      contrast.low_power = contrast.pairs < opts.low_power_below;
      block.contrasts.push_back(std::move(contrast));
    }
    out.blocks.push_back(std::move(block));
  }
  if (!saw_baseline) {
    throw std::invalid_argument("baseline " + axis + "=" + baseline + " does not occur");
  }
  if (out.blocks.empty()) {
    throw std::invalid_argument("axis '" + axis + "' has fewer than two values in every group");
  }
  return out;
}

std::optional<TableFormat> parse_table_format(std::string_view name) {
  if (name == "csv") return TableFormat::csv;
  if (name == "tsv") return TableFormat::tsv;
  if (name == "md") return TableFormat::md;
  return std::nullopt;
}

void write_metric_table(std::ostream& out, const std::map<GroupKey, MetricReport>& reports,
                        const std::vector<std::string>& columns, TableFormat format) {
  std::vector<std::string> header = columns.empty() ? std::vector<std::string>{"group"} : columns;
  header.insert(header.end(), {"n", "accuracy", "entropy_bits", "ece", "sce", "ace", "rmsce",
                               "mad", "empty_ace_ranges"});
  emit_row(out, header, format);
  if (format == TableFormat::md) emit_md_rule(out, header.size());
  for (const auto& [key, r] : reports) {
    std::vector<std::string> row;
    if (columns.empty()) {
      row.push_back(cell_text(key.label(), format));
    } else {
      for (const auto& c : columns) row.push_back(cell_text(key.field(c).value_or(""), format));
    }
    row.push_back(std::to_string(r.n));
    for (double v : {r.accuracy, r.mean_entropy, r.ece, r.sce, r.ace, r.rmsce, r.mad}) {
      row.push_back(number(v, format));
    }
    row.push_back(std::to_string(r.empty_ace_ranges));
    emit_row(out, row, format);
  }
}

void write_comparison(std::ostream& out, const Comparison& cmp, TableFormat format) {
  const bool md = format == TableFormat::md;
  std::string samples;
  for (const auto& f : cmp.sample_fields) samples += (samples.empty() ? "" : ",") + f;
  if (samples.empty()) samples = "-";

  if (md) {
    out << "Comparison along `" << cmp.axis << "` against baseline " << cmp.baseline
        << "; samples: " << samples << "; "
        << (cmp.options.paired ? "paired Student's t" : "Welch's t") << ", two-sided, alpha = "
        << format_sig6(cmp.options.alpha) << ".\n";
    out << "Bold marks the better setting; bold italic marks a significant gap.\n\n";
  }

  std::vector<std::string> header = {"group", cmp.axis, "samples"};
  for (Metric m : kAllMetrics) {
    if (md) {
      header.emplace_back(metric_heading(m));
    } else {
      header.emplace_back(metric_name(m));
      header.push_back(std::string(metric_name(m)) + "_flag");
    }
  }
  emit_row(out, header, format);
  if (md) emit_md_rule(out, header.size());

  for (const Block& block : cmp.blocks) {
    for (std::size_t a = 0; a < block.arms.size(); ++a) {
      const Arm& arm = block.arms[a];
      std::vector<std::string> row = {cell_text(block.key.label(), format),
                                      cell_text(arm.value.field(cmp.axis).value_or(""), format),
                                      std::to_string(arm.samples.size())};
      for (Metric m : kAllMetrics) {
        const std::string value = number(arm.mean.at(m), format);
        const int mark = cmp.marker(block, a, m);
        if (md) {
          row.push_back(mark == 2 ? "***" + value + "***" : mark == 1 ? "**" + value + "**" : value);
        } else {
          row.push_back(value);
          row.emplace_back(mark == 2 ? "**" : mark == 1 ? "*" : "");
        }
      }
      emit_row(out, row, format);
    }
  }

  if (!md) return;
  out << "\n";
  const std::vector<std::string> stats_header = {"group", "contrast", "metric", "t",
                                                 "p",     "df",       "pairs",  "note"};
  emit_row(out, stats_header, format);
  emit_md_rule(out, stats_header.size());
  for (const Block& block : cmp.blocks) {
    const std::string base = block.arms[block.baseline].value.field(cmp.axis).value_or("");
    for (const Contrast& c : block.contrasts) {
      const std::string other = block.arms[c.arm].value.field(cmp.axis).value_or("");
      for (Metric m : kAllMetrics) {
        const MetricContrast& mc = c.metrics.at(m);
        std::string note;
        if (c.low_power) note = "low power";
        if (mc.test.degenerate) note += std::string(note.empty() ? "" : "; ") + "zero variance";
        std::string t_text = std::isinf(mc.test.t) ? (mc.test.t > 0 ? "inf" : "-inf")
                                                   : format_sig6(mc.test.t);
        emit_row(out,
                 std::vector<std::string>{md_escape(block.key.label()), base + " vs " + other,
                                          std::string(metric_heading(m)), t_text,
                                          format_sig6(mc.test.p), format_sig6(mc.test.df),
                                          std::to_string(c.pairs), note.empty() ? "-" : note},
                 format);
      }
    }
  }
}

}  // namespace calib
