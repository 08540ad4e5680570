#include "calib/records.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "calib/error.hpp"
#include "calib/format.hpp"

namespace calib {

namespace {

using json = nlohmann::json;

// Sums closer to 1 than this are float rounding noise and are left alone;
// this also makes normalisation idempotent (a rescaled vector sums to 1
// within a few ulp).
constexpr double kNoiseTolerance = 1e-12;

std::strong_ordering compare_smoothing(const std::optional<double>& a,
                                       const std::optional<double>& b) {
  if (!a && !b) return std::strong_ordering::equal;
  if (!a) return std::strong_ordering::less;
  if (!b) return std::strong_ordering::greater;
  if (*a < *b) return std::strong_ordering::less;
  if (*b < *a) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

std::string require_string(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) throw DataError(std::string("group.") + key + " must be a string", line);
  return it->get<std::string>();
}

GroupKey parse_group(const json& obj, std::size_t line) {
  GroupKey key;
  if (!obj.is_object()) throw DataError("group must be an object", line);
  key.model = require_string(obj, "model", line);
  key.sft_dataset = require_string(obj, "sft_dataset", line);
  key.language = require_string(obj, "language", line);
  if (auto it = obj.find("smoothing"); it != obj.end() && !it->is_null()) {
    if (!it->is_number()) throw DataError("group.smoothing must be a number", line);
    const double beta = it->get<double>();
    if (!(beta >= 0.0 && beta <= 1.0)) throw DataError("group.smoothing must lie in [0,1]", line);
    key.smoothing = beta;
  }
  // nlohmann::json keeps object keys sorted, so extras come out in key order.
  for (const auto& [name, value] : obj.items()) {
    if (name == "model" || name == "sft_dataset" || name == "language" || name == "smoothing") {
      continue;
    }
    if (!value.is_string()) throw DataError("group." + name + " must be a string", line);
    key.extra.emplace_back(name, value.get<std::string>());
  }
  return key;
}

std::vector<double> number_array(const json& arr, const char* key, std::size_t line) {
  if (!arr.is_array()) throw DataError(std::string(key) + " must be an array", line);
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) throw DataError(std::string(key) + " must contain only numbers", line);
    out.push_back(v.get<double>());
  }
  return out;
}

PredictionRecord parse_line(const std::string& text, std::size_t line, const IngestOptions& opts,
                            bool& from_perplexities) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what(), line);
  }
  if (!obj.is_object()) throw DataError("record must be a JSON object", line);

  PredictionRecord rec;
  if (auto it = obj.find("id"); it != obj.end()) {
    if (it->is_string()) {
      rec.id = it->get<std::string>();
    } else if (it->is_number_integer()) {
      rec.id = it->dump();
    } else {
      throw DataError("id must be a string", line);
    }
  }

  const bool has_probs = obj.contains("probs");
  const bool has_ppl = obj.contains("perplexities");
  if (has_probs == has_ppl) {
    throw DataError("record needs exactly one of `probs` or `perplexities`", line);
  }
  from_perplexities = has_ppl;
  if (has_probs) {
    rec.probs = number_array(obj["probs"], "probs", line);
  } else {
    const auto ppl = number_array(obj["perplexities"], "perplexities", line);
    try {
      rec.probs = scores_to_probs(ppl, opts.score_mode);
    } catch (const std::invalid_argument& e) {
      throw DataError(e.what(), line);
    }
  }

  auto label = obj.find("label");
  if (label == obj.end() || !label->is_number_integer()) {
    throw DataError("label must be an integer", line);
  }
  const auto raw_label = label->get<long long>();
  if (raw_label < 0) throw DataError("label must be non-negative", line);
  rec.label = static_cast<std::size_t>(raw_label);

  if (auto it = obj.find("group"); it != obj.end() && !it->is_null()) {
    rec.group = parse_group(*it, line);
  }
  return rec;
}

}  // namespace

std::strong_ordering operator<=>(const GroupKey& a, const GroupKey& b) {
  if (auto c = a.model <=> b.model; c != 0) return c;
  if (auto c = a.sft_dataset <=> b.sft_dataset; c != 0) return c;
  if (auto c = a.language <=> b.language; c != 0) return c;
  if (auto c = compare_smoothing(a.smoothing, b.smoothing); c != 0) return c;
  return a.extra <=> b.extra;
}

std::optional<std::string> GroupKey::field(const std::string& name) const {
  if (name == "model") return model.empty() ? std::nullopt : std::optional(model);
  if (name == "sft_dataset") return sft_dataset.empty() ? std::nullopt : std::optional(sft_dataset);
  if (name == "language") return language.empty() ? std::nullopt : std::optional(language);
  if (name == "smoothing") {
    return smoothing ? std::optional(format_roundtrip(*smoothing)) : std::nullopt;
  }
  for (const auto& [k, v] : extra) {
    if (k == name) return v;
  }
  return std::nullopt;
}

std::string GroupKey::label() const {
  std::string out;
  auto add = [&out](std::string_view k, const std::string& v) {
    if (!out.empty()) out += ',';
    out.append(k).append("=").append(v);
  };
  if (!model.empty()) add("model", model);
  if (!sft_dataset.empty()) add("sft_dataset", sft_dataset);
  if (!language.empty()) add("language", language);
  if (smoothing) add("smoothing", format_roundtrip(*smoothing));
  for (const auto& [k, v] : extra) add(k, v);
  return out.empty() ? "all" : out;
}

Prediction PredictionRecord::prediction() const {
  std::size_t best = 0;
  for (std::size_t k = 1; k < probs.size(); ++k) {
    if (probs[k] > probs[best]) best = k;
  }
  return {best, probs.empty() ? 0.0 : probs[best]};
}

double PredictionRecord::entropy_bits() const {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

RecordSet::RecordSet(std::vector<PredictionRecord> records) : records_(std::move(records)) {
  if (records_.empty()) return;
  const std::size_t k = records_.front().k();
  for (const auto& r : records_) {
    if (r.k() != k) return;
  }
  uniform_k_ = k;
}

std::size_t RecordSet::require_uniform_k() const {
  if (records_.empty()) throw DataError("record set is empty");
  if (!uniform_k_) throw DataError("records have differing class counts K");
  return *uniform_k_;
}

bool normalize_record(PredictionRecord& rec, bool strict, std::size_t line) {
  if (rec.probs.size() < 2) throw DataError("need at least 2 class probabilities", line);
  double total = 0.0;
  for (double p : rec.probs) {
    if (!std::isfinite(p)) throw DataError("non-finite probability", line);
    if (p < 0.0) throw DataError("negative probability", line);
    total += p;
  }
  if (rec.label >= rec.probs.size()) {
    throw DataError("label " + std::to_string(rec.label) + " out of range for K=" +
                        std::to_string(rec.probs.size()),
                    line);
  }
  if (!(total > 0.0)) throw DataError("probabilities sum to zero", line);
  const double deviation = std::abs(total - 1.0);
  if (strict && deviation > kSumTolerance) {
    throw DataError("probabilities sum to " + format_roundtrip(total) + ", off by more than 1e-6",
                    line);
  }
  if (deviation <= kNoiseTolerance) return false;
  for (double& p : rec.probs) p /= total;
  return true;
}

RecordSet parse_records(std::istream& in, const IngestOptions& opts, IngestStats* stats) {
  IngestStats local;
  std::vector<PredictionRecord> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) {
      ++local.blank_lines;
      continue;
    }
    bool from_ppl = false;
    PredictionRecord rec = parse_line(text, line, opts, from_ppl);
    if (normalize_record(rec, opts.strict, line)) ++local.renormalized;
    if (from_ppl) ++local.from_perplexities;
    out.push_back(std::move(rec));
  }
  local.lines = line;
  local.records = out.size();
  if (stats) *stats = local;
  return RecordSet(std::move(out));
}

RecordSet load_records(const std::string& path, const IngestOptions& opts, IngestStats* stats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return parse_records(in, opts, stats);
}

void write_records(std::ostream& out, const RecordSet& records) {
  for (const auto& r : records) {
    // Hand-assembled so the key order and number text are stable.
    std::string line = "{\"id\":" + json(r.id).dump() + ",\"probs\":[";
    for (std::size_t k = 0; k < r.probs.size(); ++k) {
      if (k) line += ',';
      line += format_roundtrip(r.probs[k]);
    }
    line += "],\"label\":" + std::to_string(r.label) + ",\"group\":{";
    line += "\"model\":" + json(r.group.model).dump();
    line += ",\"sft_dataset\":" + json(r.group.sft_dataset).dump();
    line += ",\"language\":" + json(r.group.language).dump();
    if (r.group.smoothing) line += ",\"smoothing\":" + format_roundtrip(*r.group.smoothing);
    for (const auto& [k, v] : r.group.extra) line += "," + json(k).dump() + ":" + json(v).dump();
    line += "}}\n";
    out << line;
  }
}

}  // namespace calib
