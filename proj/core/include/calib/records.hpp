#pragma once

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "calib/choice_scoring.hpp"

namespace calib {

/// Grouping axes of a prediction log. Ordering is lexicographic over
/// (model, sft_dataset, language, smoothing, extra); an absent smoothing
/// sorts before any present value.
struct GroupKey {
  std::string model;
  std::string sft_dataset;
  std::string language;
  std::optional<double> smoothing;
  std::vector<std::pair<std::string, std::string>> extra;

  friend bool operator==(const GroupKey&, const GroupKey&) = default;
  friend std::strong_ordering operator<=>(const GroupKey& a, const GroupKey& b);

  /// Value of a named field ("model", "sft_dataset", "language", "smoothing"
  /// or an extra key); nullopt when the field is not set on this key.
  std::optional<std::string> field(const std::string& name) const;

  /// "language=yo,smoothing=0.1" style label over the populated fields.
  std::string label() const;
};

struct Prediction {
  std::size_t label;
  double confidence;
};

struct PredictionRecord {
  std::string id;
  std::vector<double> probs;
  std::size_t label = 0;
  GroupKey group;

  std::size_t k() const noexcept { return probs.size(); }

  /// Argmax with lowest-index tie-break, and its probability.
  Prediction prediction() const;

  bool correct() const { return prediction().label == label; }

  /// Shannon entropy of `probs` in bits; 0 log 0 = 0.
  double entropy_bits() const;

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

/// Ordered records plus the shared class count when every record agrees.
class RecordSet {
 public:
  RecordSet() = default;
  explicit RecordSet(std::vector<PredictionRecord> records);

  const std::vector<PredictionRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const PredictionRecord& operator[](std::size_t i) const { return records_[i]; }
  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }

  std::optional<std::size_t> uniform_k() const noexcept { return uniform_k_; }

  /// Class count shared by all records; throws DataError when K is mixed or
  /// the set is empty.
  std::size_t require_uniform_k() const;

  friend bool operator==(const RecordSet&, const RecordSet&) = default;

 private:
  std::vector<PredictionRecord> records_;
  std::optional<std::size_t> uniform_k_;
};

struct IngestOptions {
  bool strict = false;
  ScoreMode score_mode = ScoreMode::reciprocal;
};

/// Tallies from one ingestion pass.
struct IngestStats {
  std::size_t lines = 0;
  std::size_t records = 0;
  std::size_t blank_lines = 0;
  /// Records whose probability vector did not already sum to 1 and was rescaled.
  std::size_t renormalized = 0;
  /// Records built from a `perplexities` field.
  std::size_t from_perplexities = 0;
};

/// Probability vectors may deviate from unit sum by at most this much in
/// strict mode.
inline constexpr double kSumTolerance = 1e-6;

/// Validates a record in place: K >= 2, finite non-negative probs, label < K,
/// unit sum (rescaled as described on parse_records). Returns true when the
/// vector was rescaled. `line` is only used in diagnostics.
bool normalize_record(PredictionRecord& record, bool strict, std::size_t line = 0);

/// Reads one JSON object per line. Blank lines are skipped. Throws DataError
/// naming the offending line on malformed input, a negative or non-finite
/// probability, an out-of-range label, or (strict only) a probability sum
/// more than kSumTolerance away from 1. Other sums are rescaled to 1 and
/// counted in `stats->renormalized`.
RecordSet parse_records(std::istream& in, const IngestOptions& opts = {},
                        IngestStats* stats = nullptr);

RecordSet load_records(const std::string& path, const IngestOptions& opts = {},
                       IngestStats* stats = nullptr);

/// One JSON object per record, `\n` terminated, probabilities written with
/// round-trip precision.
void write_records(std::ostream& out, const RecordSet& records);

}  // namespace calib
