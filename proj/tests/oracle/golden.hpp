#pragma once

// Builds the expected `calib metrics --out csv` text for an ungrouped run
// from the brute-force oracles alone.

#include <array>
#include <charconv>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "brute_force.hpp"

namespace oracle {

inline std::string shortest(double v) {
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

/// Reads a record log without touching the library's parser. Only handles
/// well-formed `probs` records whose sums are already exact.
inline std::vector<Row> read_rows(const std::string& path) {
  std::vector<Row> rows;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    Row r;
    for (const auto& p : j.at("probs")) r.probs.push_back(p.get<double>());
    r.label = j.at("label").get<std::size_t>();
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::size_t empty_ace_cells(const std::vector<Row>& rows, std::size_t ranges) {
  std::size_t empty = 0;
  for (std::size_t c = 0; c < rows.front().probs.size(); ++c) {
    std::vector<double> q;
    std::vector<double> h;
    for (const Row& r : rows) {
      q.push_back(r.probs[c]);
      h.push_back(r.label == c ? 1.0 : 0.0);
    }
    for (const MassBin& b : equal_mass(q, h, ranges)) empty += b.n == 0 ? 1 : 0;
  }
  return empty;
}

inline std::string golden_csv(const std::vector<Row>& rows, std::size_t bins, std::size_t ranges) {
  std::string out = "group,n,accuracy,entropy_bits,ece,sce,ace,rmsce,mad,empty_ace_ranges\n";
  out += "all," + std::to_string(rows.size());
  for (double v : {accuracy(rows), mean_entropy_bits(rows), ece(rows, bins), sce(rows, bins),
                   ace(rows, ranges), rmsce(rows, ranges), mad(rows, ranges)}) {
    out += "," + shortest(v);
  }
  out += "," + std::to_string(empty_ace_cells(rows, ranges)) + "\n";
  return out;
}

}  // namespace oracle
