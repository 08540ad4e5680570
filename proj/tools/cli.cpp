#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "calib/analysis.hpp"
#include "calib/calibration.hpp"
#include "calib/error.hpp"
#include "calib/format.hpp"
#include "calib/records.hpp"
#include "calib/reliability.hpp"
#include "calib/rng.hpp"
#include "calib/smoothing.hpp"
#include "calib/toytrain.hpp"

namespace calib::cli {

namespace {

namespace fs = std::filesystem;

struct Globals {
  std::uint64_t seed = 0;
  bool strict = false;
  bool quiet = false;
  std::string score_mode = "reciprocal";
};

struct MetricsArgs {
  std::string in;
  std::size_t bins = 10;
  std::size_t ranges = 10;
  double ace_epsilon = 0.0;
  std::vector<std::string> groupby;
  std::string format = "csv";
};

struct IngestArgs {
  std::string in;
  std::string out;
};

struct ReliabilityArgs {
  std::string in;
  std::vector<std::string> groupby;
  std::size_t bins = 10;
  std::string out_dir;
  bool fixed_markers = false;
};

struct CompareArgs {
  std::string in;
  std::string axis = "smoothing";
  std::string baseline = "0.0";
  std::vector<std::string> groupby{"language"};
  std::string format = "md";
  bool unpaired = false;
  double alpha = 0.05;
  std::size_t bins = 10;
  std::size_t ranges = 10;
  double ace_epsilon = 0.0;
};

struct VerifyArgs {
  std::size_t samples = 100000;
  std::string k_range = "2:20";
  double logit_range = 10.0;
};

struct ToyArgs {
  std::string spec;
  std::vector<double> betas{0.0, 0.1};
  std::size_t seeds = 20;
  std::string out;
  std::string plot_dir;
  double learning_rate = 0.1;
  std::size_t epochs = 500;
  std::size_t threads = 0;
};

IngestOptions ingest_options(const Globals& g) {
  IngestOptions opts;
  opts.strict = g.strict;
  opts.score_mode = *parse_score_mode(g.score_mode);
  return opts;
}

RecordSet load(const std::string& path, const Globals& g, std::ostream& err) {
  IngestStats stats;
  RecordSet rs = load_records(path, ingest_options(g), &stats);
  if (!g.quiet && stats.renormalized > 0) {
    err << "warning: " << stats.renormalized << " record(s) renormalized to unit sum\n";
  }
  return rs;
}

MetricConfig metric_config(std::size_t bins, std::size_t ranges, double eps) {
  if (bins == 0) throw std::invalid_argument("--bins must be >= 1");
  if (ranges == 0) throw std::invalid_argument("--ranges must be >= 1");
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("--ace-epsilon must lie in [0,1]");
  return {bins, ranges, eps};
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  return f;
}

std::string file_stem(const GroupKey& key) {
  std::string out = key.label();
  for (char& c : out) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_';
    if (c == '=') {
      c = '-';
    } else if (!keep) {
      c = '_';
    }
  }
  return out;
}

// --- subcommands -----------------------------------------------------------

int cmd_ingest(const IngestArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  IngestStats stats;
  const RecordSet rs = load_records(a.in, ingest_options(g), &stats);
  if (!g.quiet) {
    err << "records=" << stats.records << " lines=" << stats.lines
        << " blank=" << stats.blank_lines << " renormalized=" << stats.renormalized
        << " from_perplexities=" << stats.from_perplexities
        << " score_mode=" << g.score_mode << "\n";
  }
  if (a.out.empty()) {
    write_records(out, rs);
  } else {
    auto f = open_out(a.out);
    write_records(f, rs);
  }
  return kOk;
}

int cmd_metrics(const MetricsArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  const auto format = parse_table_format(a.format);
  const MetricConfig cfg = metric_config(a.bins, a.ranges, a.ace_epsilon);
  const RecordSet rs = load(a.in, g, err);
  if (rs.empty()) throw DataError(a.in + ": no records");
  std::map<GroupKey, MetricReport> reports;
  if (a.groupby.empty()) {
    reports.emplace(GroupKey{}, report(rs, cfg));
  } else {
    reports = group_reports(rs, a.groupby, cfg);
  }
  if (!g.quiet) {
    for (const auto& [key, r] : reports) {
      if (r.ranges_exceed_n) {
        err << "note: " << key.label() << " has fewer records (" << r.n << ") than ranges ("
            << cfg.ranges << "); " << r.empty_ace_ranges << " empty ACE cells\n";
      }
    }
  }
  write_metric_table(out, reports, a.groupby, *format);
  return kOk;
}

int cmd_reliability(const ReliabilityArgs& a, const Globals& g, std::ostream& out,
                    std::ostream& err) {
  if (a.bins == 0) throw std::invalid_argument("--bins must be >= 1");
  const RecordSet rs = load(a.in, g, err);
  if (rs.empty()) throw DataError(a.in + ": no records");
  std::map<GroupKey, RecordSet> groups;
  if (a.groupby.empty()) {
    groups.emplace(GroupKey{}, rs);
  } else {
    groups = group_records(rs, a.groupby);
  }
  fs::create_directories(a.out_dir);
  PlotStyle style;
  style.size_by_weight = !a.fixed_markers;
  for (const auto& [key, part] : groups) {
    style.title = "Reliability: " + key.label();
    const RenderedPlot plot = render({reliability_curve(part, a.bins, key)}, style);
    const std::string stem = file_stem(key);
    open_out(fs::path(a.out_dir) / (stem + ".svg")) << plot.svg;
    open_out(fs::path(a.out_dir) / (stem + ".csv")) << plot.csv;
    out << stem << ".svg\n";
  }
  return kOk;
}

int cmd_compare(const CompareArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  const auto format = parse_table_format(a.format);
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw std::invalid_argument("--alpha must lie in (0,1)");
  const MetricConfig cfg = metric_config(a.bins, a.ranges, a.ace_epsilon);
  const RecordSet rs = load(a.in, g, err);
  if (rs.empty()) throw DataError(a.in + ": no records");

  // Group by every populated standard field plus the sample fields and axis,
  // so blocks come out as (model, sft_dataset, ...) like the rows of a
  // results table.
  std::vector<std::string> fields = a.groupby;
  fields.push_back(a.axis);
  for (const char* f : {"model", "sft_dataset", "language"}) {
    const bool used = std::any_of(rs.begin(), rs.end(), [&](const PredictionRecord& r) {
      return r.group.field(f).has_value();
    });
    if (used && std::find(fields.begin(), fields.end(), f) == fields.end()) fields.emplace_back(f);
  }
  const auto reports = group_reports(rs, fields, cfg);
  CompareOptions opts;
  opts.paired = !a.unpaired;
  opts.alpha = a.alpha;
  const Comparison cmp = compare(reports, a.axis, a.baseline, a.groupby, opts);
  if (!g.quiet) {
    for (const Block& b : cmp.blocks) {
      for (const Contrast& c : b.contrasts) {
        if (c.low_power) {
          err << "note: " << b.key.label() << ": only " << c.pairs
              << " sample pair(s); significance flags are low power\n";
        }
      }
    }
  }
  write_comparison(out, cmp, *format);
  return kOk;
}

int cmd_verify(const VerifyArgs& a, const Globals& g, std::ostream& out) {
  std::size_t k_lo = 0;
  std::size_t k_hi = 0;
  {
    const auto colon = a.k_range.find(':');
    try {
      if (colon == std::string::npos) throw std::invalid_argument("");
      k_lo = std::stoul(a.k_range.substr(0, colon));
      k_hi = std::stoul(a.k_range.substr(colon + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("--k-range must look like LO:HI");
    }
    if (k_lo < 2 || k_hi < k_lo) throw std::invalid_argument("--k-range needs 2 <= LO <= HI");
  }
  if (!(a.logit_range > 0.0)) throw std::invalid_argument("--logit-range must be > 0");

  SplitMix64 rng(g.seed);
  std::size_t violations = 0;
  double worst_low = std::numeric_limits<double>::infinity();
  double worst_high = std::numeric_limits<double>::infinity();
  std::vector<double> logits;
  for (std::size_t s = 0; s < a.samples; ++s) {
    const std::size_t k = k_lo + rng.below(static_cast<std::uint32_t>(k_hi - k_lo + 1));
    logits.resize(k);
    for (double& v : logits) v = (2.0 * rng.uniform() - 1.0) * a.logit_range;
    const BoundWitness w = check_logit_distance_bound(logits);
    worst_low = std::min(worst_low, w.slack_low);
    worst_high = std::min(worst_high, w.slack_high);
    if (!w.holds(1e-9)) ++violations;
  }
  out << "samples\t" << a.samples << "\n";
  out << "k_range\t" << k_lo << ":" << k_hi << "\n";
  out << "logit_range\t" << format_sig6(a.logit_range) << "\n";
  out << "violations\t" << violations << "\n";
  if (a.samples > 0) {
    out << "worst_slack_low\t" << format_roundtrip(worst_low) << "\n";
    out << "worst_slack_high\t" << format_roundtrip(worst_high) << "\n";
  }
  if (violations > 0) {
    throw InvariantViolation(std::to_string(violations) + " logit-distance bound violation(s)");
  }
  return kOk;
}

ShiftSpec load_spec(const std::string& path, std::uint64_t fallback_seed, bool seed_given) {
  ShiftSpec spec;
  if (seed_given) spec.seed = fallback_seed;
  if (path.empty()) return spec;
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (!j.is_object()) throw DataError(path + ": spec must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "dim") spec.dim = value.get<std::size_t>();
      else if (key == "classes") spec.classes = value.get<std::size_t>();
      else if (key == "n_train") spec.n_train = value.get<std::size_t>();
      else if (key == "n_eval") spec.n_eval = value.get<std::size_t>();
      else if (key == "shift_magnitude") spec.shift_magnitude = value.get<double>();
      else if (key == "label_noise") spec.label_noise = value.get<double>();
      else if (key == "separation") spec.separation = value.get<double>();
      else if (key == "seed") spec.seed = value.get<std::uint64_t>();
      else throw DataError(path + ": unknown spec field '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  spec.validate();
  return spec;
}

void write_split(std::vector<std::string>& row, const SplitMetrics& m) {
  for (double v : {m.accuracy, m.mean_entropy, m.ece, m.rmsce}) row.push_back(format_roundtrip(v));
}

int cmd_toy(const ToyArgs& a, const Globals& g, bool seed_given, std::ostream& out,
            std::ostream& err) {
  if (a.seeds == 0) throw std::invalid_argument("--seeds must be >= 1");
  const ShiftSpec spec = load_spec(a.spec, g.seed, seed_given);
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < a.seeds; ++i) seeds.push_back(spec.seed + i);
  ExperimentConfig cfg;
  cfg.optimizer.learning_rate = a.learning_rate;
  cfg.optimizer.epochs = a.epochs;
  cfg.threads = a.threads;
  const ExperimentResult res = experiment(spec, a.betas, seeds, cfg);

  if (!a.out.empty()) {
    auto f = open_out(a.out);
    f << "beta,seed,final_train_loss,id_accuracy,id_entropy_bits,id_ece,id_rmsce,"
         "shifted_accuracy,shifted_entropy_bits,shifted_ece,shifted_rmsce\n";
    for (const ToyRunResult& r : res.runs) {
      std::vector<std::string> row = {format_roundtrip(r.beta), std::to_string(r.seed),
                                      format_roundtrip(r.final_train_loss)};
      write_split(row, r.in_distribution);
      write_split(row, r.shifted);
      for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << row[i];
      f << "\n";
    }
  }

  out << "| beta | runs | train loss | id acc | id entropy | id ECE | id RMS | shifted acc | "
         "shifted entropy | shifted ECE | shifted RMS |\n";
  out << "| --- | --- | --- | --- | --- | --- | --- | --- | --- | --- | --- |\n";
  for (const BetaSummary& s : res.summary) {
    out << "| " << format_sig6(s.beta) << " | " << s.runs << " | "
        << format_sig6(s.median_final_loss);
    for (const SplitMetrics* m : {&s.median_in_distribution, &s.median_shifted}) {
      for (double v : {m->accuracy, m->mean_entropy, m->ece, m->rmsce}) out << " | " << format_sig6(v);
    }
    out << " |\n";
  }
  out << "\nMedians over " << seeds.size() << " seed(s); entropy in bits; ECE with 10 uniform "
      << "bins, RMS with 10 equal-mass bins.\n";

  if (!a.plot_dir.empty()) {
    fs::create_directories(a.plot_dir);
    std::vector<ReliabilityCurve> curves;
    for (double beta : a.betas) {
      std::vector<PredictionRecord> pooled;
      for (const ToyRunResult& r : res.runs) {
        if (r.beta != beta) continue;
        pooled.insert(pooled.end(), r.shifted_predictions.begin(), r.shifted_predictions.end());
      }
      GroupKey key;
      key.language = "shifted";
      key.smoothing = beta;
      curves.push_back(reliability_curve(RecordSet(std::move(pooled)), cfg.bins, key));
      PlotStyle style;
      style.title = "Shifted split, beta = " + format_sig6(beta);
      const RenderedPlot plot = render({curves.back()}, style);
      const std::string stem = "reliability_beta-" + format_roundtrip(beta);
      open_out(fs::path(a.plot_dir) / (stem + ".svg")) << plot.svg;
      open_out(fs::path(a.plot_dir) / (stem + ".csv")) << plot.csv;
    }
    PlotStyle style;
    style.title = "Shifted split";
    const RenderedPlot overlay = render(curves, style);
    open_out(fs::path(a.plot_dir) / "reliability_overlay.svg") << overlay.svg;
    open_out(fs::path(a.plot_dir) / "reliability_overlay.csv") << overlay.csv;
    if (!g.quiet) err << "plots written to " << a.plot_dir << "\n";
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Calibration analysis for classifier prediction logs", "calib"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "Read flags from a key=value file ([subcommand] sections allowed)");

  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_flag("--strict", g.strict, "Reject probability vectors whose sum is off by more than 1e-6");
  app.add_flag("-q,--quiet", g.quiet, "Suppress the reproducibility header and notes");
  app.add_option("--score-mode", g.score_mode, "Perplexity normalisation for `perplexities` records")
      ->check(CLI::IsMember({"reciprocal", "softmax-neg-log"}))
      ->capture_default_str();

  IngestArgs ingest;
  auto* sc_ingest = app.add_subcommand("ingest", "Validate, normalise and re-emit a prediction log");
  sc_ingest->add_option("--in", ingest.in, "Input JSONL")->required();
  sc_ingest->add_option("--out", ingest.out, "Output JSONL (default: stdout)");

  MetricsArgs metrics;
  auto* sc_metrics = app.add_subcommand("metrics", "Accuracy, entropy and calibration errors");
  sc_metrics->add_option("--in", metrics.in, "Input JSONL")->required();
  sc_metrics->add_option("--bins", metrics.bins, "Uniform bins for ECE/SCE")->capture_default_str();
  sc_metrics->add_option("--ranges", metrics.ranges, "Equal-mass ranges for ACE/RMSCE/MAD")
      ->capture_default_str();
  sc_metrics->add_option("--ace-epsilon", metrics.ace_epsilon,
                         "Drop class probabilities below this before ACE ranges")
      ->capture_default_str();
  sc_metrics->add_option("--groupby", metrics.groupby, "Group fields, comma separated")
      ->delimiter(',');
  sc_metrics->add_option("--out", metrics.format, "Output format")
      ->check(CLI::IsMember({"csv", "tsv", "md"}))
      ->capture_default_str();

  ReliabilityArgs rel;
  auto* sc_rel = app.add_subcommand("reliability", "Reliability diagrams (SVG + CSV) per group");
  sc_rel->add_option("--in", rel.in, "Input JSONL")->required();
  sc_rel->add_option("--groupby", rel.groupby, "Group fields, comma separated")->delimiter(',');
  sc_rel->add_option("--bins", rel.bins, "Uniform confidence bins")->capture_default_str();
  sc_rel->add_option("--out-dir", rel.out_dir, "Directory for <group>.svg / <group>.csv")
      ->required();
  sc_rel->add_flag("--fixed-markers", rel.fixed_markers, "Do not scale markers by bin weight");

  CompareArgs cmp;
  auto* sc_cmp = app.add_subcommand("compare", "Table-style comparison with t-test markers");
  sc_cmp->add_option("--in", cmp.in, "Input JSONL")->required();
  sc_cmp->add_option("--axis", cmp.axis, "Group field being contrasted")->capture_default_str();
  sc_cmp->add_option("--baseline", cmp.baseline, "Baseline value of the axis")
      ->capture_default_str();
  sc_cmp->add_option("--groupby", cmp.groupby, "Sample-unit fields (pairing keys)")
      ->delimiter(',')
      ->capture_default_str();
  sc_cmp->add_option("--format", cmp.format, "Output format")
      ->check(CLI::IsMember({"csv", "tsv", "md"}))
      ->capture_default_str();
  sc_cmp->add_flag("--unpaired", cmp.unpaired, "Welch's t instead of paired Student's t");
  sc_cmp->add_option("--alpha", cmp.alpha, "Significance level (two-sided)")->capture_default_str();
  sc_cmp->add_option("--bins", cmp.bins, "Uniform bins for ECE/SCE")->capture_default_str();
  sc_cmp->add_option("--ranges", cmp.ranges, "Equal-mass ranges")->capture_default_str();
  sc_cmp->add_option("--ace-epsilon", cmp.ace_epsilon, "ACE probability threshold")
      ->capture_default_str();

  VerifyArgs verify;
  auto* sc_verify =
      app.add_subcommand("verify-bounds", "Check the logit-distance / KL sandwich on random logits");
  sc_verify->add_option("--samples", verify.samples, "Number of random logit vectors")
      ->capture_default_str();
  sc_verify->add_option("--k-range", verify.k_range, "Class counts LO:HI")->capture_default_str();
  sc_verify->add_option("--logit-range", verify.logit_range, "Logits drawn from [-L, L]")
      ->capture_default_str();

  ToyArgs toy;
  auto* sc_toy = app.add_subcommand("toy-train", "Smoothing vs overconfidence toy experiment");
  sc_toy->add_option("--spec", toy.spec, "JSON shift spec (defaults built in)");
  sc_toy->add_option("--betas", toy.betas, "Smoothing rates")->delimiter(',')->capture_default_str();
  sc_toy->add_option("--seeds", toy.seeds, "Number of seeds, starting at the spec seed")
      ->capture_default_str();
  sc_toy->add_option("--out", toy.out, "Per-run CSV");
  sc_toy->add_option("--plot-dir", toy.plot_dir, "Write shifted-split reliability SVGs here");
  sc_toy->add_option("--lr", toy.learning_rate, "Learning rate")->capture_default_str();
  sc_toy->add_option("--epochs", toy.epochs, "Gradient steps")->capture_default_str();
  sc_toy->add_option("--threads", toy.threads, "Worker threads (0 = auto)")->capture_default_str();

  std::vector<std::string> argv_rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(argv_rest.begin(), argv_rest.end());
  try {
    app.parse(argv_rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  if (!g.quiet) {
    std::string sub = app.get_subcommands().front()->get_name();
    err << "# calib " << kVersion << " command=" << sub << " seed=" << g.seed
        << " score_mode=" << g.score_mode
        << " config=" << hex64(fnv1a64(app.config_to_str(true, false))) << "\n";
  }

  try {
    if (sc_ingest->parsed()) return cmd_ingest(ingest, g, out, err);
    if (sc_metrics->parsed()) return cmd_metrics(metrics, g, out, err);
    if (sc_rel->parsed()) return cmd_reliability(rel, g, out, err);
    if (sc_cmp->parsed()) return cmd_compare(cmp, g, out, err);
    if (sc_verify->parsed()) return cmd_verify(verify, g, out);
    if (sc_toy->parsed()) return cmd_toy(toy, g, seed_opt->count() > 0, out, err);
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvariantViolation& e) {
    err << "invariant violated: " << e.what() << "\n";
    return kInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

}  // namespace calib::cli
