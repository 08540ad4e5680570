#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "calib/records.hpp"
#include "oracle/brute_force.hpp"

namespace calib::testing {

inline std::string fixture(const std::string& name) {
  return std::string(CALIB_SOURCE_DIR) + "/fixtures/" + name;
}

/// Small deterministic generator for property tests. Uses mt19937_64 (fully
/// specified by the standard) and converts to doubles by hand so results do
/// not depend on the standard library's distribution implementations.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return lo + static_cast<std::size_t>(eng_() % (hi - lo + 1));
  }

  /// Random probability vector; with probability 1/4 snaps entries to a
  /// coarse grid so ties and bin-edge values show up.
  std::vector<double> probs(std::size_t k) {
    std::vector<double> p(k);
    const bool coarse = index(0, 3) == 0;
    double total = 0.0;
    for (double& v : p) {
      v = coarse ? static_cast<double>(index(0, 4)) : -std::log(1.0 - uniform());
      total += v;
    }
    if (total == 0.0) {
      p.assign(k, 1.0 / static_cast<double>(k));
      return p;
    }
    for (double& v : p) v /= total;
    return p;
  }

  RecordSet records(std::size_t n, std::size_t k) {
    std::vector<PredictionRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
      PredictionRecord r;
      r.id = "r" + std::to_string(i);
      r.probs = probs(k);
      r.label = index(0, k - 1);
      out.push_back(std::move(r));
    }
    return RecordSet(std::move(out));
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

inline std::vector<oracle::Row> to_rows(const RecordSet& rs) {
  std::vector<oracle::Row> rows;
  for (const auto& r : rs) rows.push_back({r.probs, r.label});
  return rows;
}

inline PredictionRecord make_record(std::vector<double> probs, std::size_t label,
                                    std::string id = "x") {
  PredictionRecord r;
  r.id = std::move(id);
  r.probs = std::move(probs);
  r.label = label;
  return r;
}

}  // namespace calib::testing
