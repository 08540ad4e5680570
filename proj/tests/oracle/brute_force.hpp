#pragma once

// Reference implementations used only by tests. They deliberately avoid the
// library's binning code: every estimator re-derives bin membership by a
// direct scan over interval predicates or an explicit sort, and
// aggregates without any shared helpers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle {

struct Row {
  std::vector<double> probs;
  std::size_t label = 0;
};

inline std::size_t argmax(const std::vector<double>& p) {
  std::size_t best = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] > p[best]) best = k;
  }
  return best;
}

inline double max_prob(const Row& r) { return r.probs[argmax(r.probs)]; }
inline double hit(const Row& r) { return argmax(r.probs) == r.label ? 1.0 : 0.0; }

/// Membership test for uniform bin m of M: [0, 1/M] for m = 0, else (m/M, (m+1)/M].
inline bool in_uniform_bin(double q, std::size_t m, std::size_t bins) {
  const double lo = static_cast<double>(m) / static_cast<double>(bins);
  const double hi = static_cast<double>(m + 1) / static_cast<double>(bins);
  return m == 0 ? (q >= lo && q <= hi) : (q > lo && q <= hi);
}

/// Σ_m (n_m / N) |mean(hit) - mean(q)| over uniform bins, O(N·M) scan.
inline double uniform_gap(const std::vector<double>& q, const std::vector<double>& h,
                          std::size_t bins, std::size_t n_total) {
  double total = 0.0;
  for (std::size_t m = 0; m < bins; ++m) {
    std::size_t n = 0;
    double sh = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (!in_uniform_bin(q[i], m, bins)) continue;
      ++n;
      sh += h[i];
      sq += q[i];
    }
    if (n == 0) continue;
    const double acc = sh / static_cast<double>(n);
    const double conf = sq / static_cast<double>(n);
    total += (static_cast<double>(n) / static_cast<double>(n_total)) * std::abs(acc - conf);
  }
  return total;
}

inline double ece(const std::vector<Row>& rows, std::size_t bins) {
  std::vector<double> q;
  std::vector<double> h;
  for (const Row& r : rows) {
    q.push_back(max_prob(r));
    h.push_back(hit(r));
  }
  return uniform_gap(q, h, bins, rows.size());
}

inline double sce(const std::vector<Row>& rows, std::size_t bins) {
  const std::size_t k = rows.front().probs.size();
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> q;
    std::vector<double> h;
    for (const Row& r : rows) {
      q.push_back(r.probs[c]);
      h.push_back(r.label == c ? 1.0 : 0.0);
    }
    total += uniform_gap(q, h, bins, rows.size());
  }
  return total / static_cast<double>(k);
}

/// Bin sizes of an equal-mass split: bin r covers sorted positions
/// [r*floor(N/R) + min(r, N mod R), ...).
inline std::pair<std::size_t, std::size_t> equal_mass_span(std::size_t r, std::size_t n,
                                                           std::size_t ranges) {
  const std::size_t base = n / ranges;
  const std::size_t rem = n % ranges;
  const std::size_t start = r * base + std::min(r, rem);
  const std::size_t stop = (r + 1) * base + std::min(r + 1, rem);
  return {start, stop};
}

struct MassBin {
  std::size_t n = 0;
  double acc = 0.0;
  double conf = 0.0;
};

/// Sort (quantity, original index) pairs lexicographically, which is the
/// same order a stable sort on quantity produces, then cut.
inline std::vector<MassBin> equal_mass(const std::vector<double>& q, const std::vector<double>& h,
                                       std::size_t ranges) {
  std::vector<std::pair<double, std::size_t>> keyed;
  for (std::size_t i = 0; i < q.size(); ++i) keyed.emplace_back(q[i], i);
  std::sort(keyed.begin(), keyed.end());
  std::vector<MassBin> out(ranges);
  for (std::size_t r = 0; r < ranges; ++r) {
    const auto [start, stop] = equal_mass_span(r, q.size(), ranges);
    double sh = 0.0;
    double sq = 0.0;
    for (std::size_t p = start; p < stop; ++p) {
      sh += h[keyed[p].second];
      sq += keyed[p].first;
    }
    out[r].n = stop - start;
    if (out[r].n > 0) {
      out[r].acc = sh / static_cast<double>(out[r].n);
      out[r].conf = sq / static_cast<double>(out[r].n);
    }
  }
  return out;
}

inline double ace(const std::vector<Row>& rows, std::size_t ranges, double epsilon = 0.0) {
  const std::size_t k = rows.front().probs.size();
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> q;
    std::vector<double> h;
    for (const Row& r : rows) {
      if (r.probs[c] < epsilon) continue;
      q.push_back(r.probs[c]);
      h.push_back(r.label == c ? 1.0 : 0.0);
    }
    for (const MassBin& b : equal_mass(q, h, ranges)) {
      if (b.n > 0) total += std::abs(b.acc - b.conf);
    }
  }
  return total / (static_cast<double>(k) * static_cast<double>(ranges));
}

inline std::vector<MassBin> confidence_mass_bins(const std::vector<Row>& rows, std::size_t ranges) {
  std::vector<double> q;
  std::vector<double> h;
  for (const Row& r : rows) {
    q.push_back(max_prob(r));
    h.push_back(hit(r));
  }
  return equal_mass(q, h, ranges);
}

inline double rmsce(const std::vector<Row>& rows, std::size_t ranges) {
  double total = 0.0;
  for (const MassBin& b : confidence_mass_bins(rows, ranges)) {
    if (b.n == 0) continue;
    const double gap = b.acc - b.conf;
    total += (static_cast<double>(b.n) / static_cast<double>(rows.size())) * gap * gap;
  }
  return std::sqrt(total);
}

inline double mad(const std::vector<Row>& rows, std::size_t ranges) {
  double total = 0.0;
  for (const MassBin& b : confidence_mass_bins(rows, ranges)) {
    if (b.n == 0) continue;
    total += (static_cast<double>(b.n) / static_cast<double>(rows.size())) * std::abs(b.acc - b.conf);
  }
  return total;
}

inline double accuracy(const std::vector<Row>& rows) {
  double s = 0.0;
  for (const Row& r : rows) s += hit(r);
  return s / static_cast<double>(rows.size());
}

inline double mean_entropy_bits(const std::vector<Row>& rows) {
  double s = 0.0;
  for (const Row& r : rows) {
    double h = 0.0;
    for (double p : r.probs) {
      if (p > 0.0) h -= p * std::log2(p);
    }
    s += h;
  }
  return s / static_cast<double>(rows.size());
}

// ---------------------------------------------------------------------------
// Student t reference: closed-form finite sums for integer degrees of
// freedom (Abramowitz & Stegun 26.7.3 / 26.7.4). A(t|v) = P(|T| <= |t|).

inline double student_a(double t, int df) {
  const double theta = std::atan(std::abs(t) / std::sqrt(static_cast<double>(df)));
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  const double c2 = c * c;
  if (df % 2 == 1) {
    if (df == 1) return 2.0 * theta / std::numbers::pi;
    double term = 1.0;
    double sum = 1.0;
    for (int j = 3; j <= df - 2; j += 2) {
      term *= static_cast<double>(j - 1) / static_cast<double>(j) * c2;
      sum += term;
    }
    return 2.0 / std::numbers::pi * (theta + s * c * sum);
  }
  double term = 1.0;
  double sum = 1.0;
  for (int j = 2; j <= df - 2; j += 2) {
    term *= static_cast<double>(j - 1) / static_cast<double>(j) * c2;
    sum += term;
  }
  return s * sum;
}

inline double two_sided_p(double t, int df) { return 1.0 - student_a(t, df); }

/// Paired t statistic on a - b, computed directly.
inline double paired_t(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return mean / (sd / std::sqrt(static_cast<double>(n)));
}

}  // namespace oracle
