#pragma once

#include <string>
#include <vector>

#include "calib/calibration.hpp"
#include "calib/records.hpp"

namespace calib {

struct CurvePoint {
  double conf = 0.0;
  double acc = 0.0;
  double weight = 0.0;  // |B_m| / N
  std::size_t count = 0;
};

/// Reliability-diagram data for one record group: one point per occupied
/// bin, ascending by confidence, bins with equal mean confidence merged.
struct ReliabilityCurve {
  GroupKey group;
  std::string descriptor;  // e.g. "uniform bins=10"
  std::vector<CurvePoint> points;

  std::string label() const;
};

/// Curve over an existing partition. Throws DataError when the partition is
/// empty.
ReliabilityCurve curve(const BinPartition& partition, GroupKey group = {});

/// Convenience: uniform max-confidence bins over `rs`.
ReliabilityCurve reliability_curve(const RecordSet& rs, std::size_t bins, GroupKey group = {});

struct PlotStyle {
  int width = 480;
  int height = 480;
  int margin = 56;
  std::string title = "Reliability diagram";
  /// Scale marker area with bin weight; fixed-radius markers otherwise.
  bool size_by_weight = true;
  double marker_radius = 4.0;
};

struct RenderedPlot {
  std::string svg;
  std::string csv;
};

/// Deterministic SVG (fixed float formatting, no timestamps) plus a CSV of
/// the plotted points. Curves are drawn and listed in the legend in GroupKey
/// order. Throws std::invalid_argument for an empty curve list.
RenderedPlot render(std::vector<ReliabilityCurve> curves, const PlotStyle& style = {});

}  // namespace calib
