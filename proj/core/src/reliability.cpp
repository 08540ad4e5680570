#include "calib/reliability.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "calib/error.hpp"
#include "calib/format.hpp"

namespace calib {

namespace {

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string px(double v) { return format_fixed(v, 2); }

}  // namespace

std::string ReliabilityCurve::label() const {
  std::string out = group.label();
  if (!descriptor.empty()) out += " (" + descriptor + ")";
  return out;
}

ReliabilityCurve curve(const BinPartition& partition, GroupKey group) {
  if (partition.total == 0) throw DataError("cannot build a reliability curve from no records");
  ReliabilityCurve out;
  out.group = std::move(group);
  out.descriptor = std::string(partition.strategy == BinningStrategy::uniform ? "uniform"
                                                                              : "equal-mass") +
                   " bins=" + std::to_string(partition.bins.size());

  std::vector<CurvePoint> raw;
  for (std::size_t m = 0; m < partition.bins.size(); ++m) {
    const Bin& b = partition.bins[m];
    if (b.count == 0) continue;
    raw.push_back({b.conf, b.acc, partition.weight(m), b.count});
  }
  std::stable_sort(raw.begin(), raw.end(),
                   [](const CurvePoint& a, const CurvePoint& b) { return a.conf < b.conf; });
  for (const CurvePoint& p : raw) {
    if (!out.points.empty() && out.points.back().conf == p.conf) {
      CurvePoint& q = out.points.back();
      const double n = static_cast<double>(q.count + p.count);
      q.acc = (q.acc * static_cast<double>(q.count) + p.acc * static_cast<double>(p.count)) / n;
      q.weight += p.weight;
      q.count += p.count;
    } else {
      out.points.push_back(p);
    }
  }
  return out;
}

ReliabilityCurve reliability_curve(const RecordSet& rs, std::size_t bins, GroupKey group) {
  if (rs.empty()) throw DataError("cannot build a reliability curve from no records");
  const auto conf = confidences(rs);
  const auto hit = correctness(rs);
  return curve(partition_uniform(conf, hit, bins), std::move(group));
}

RenderedPlot render(std::vector<ReliabilityCurve> curves, const PlotStyle& style) {
  if (curves.empty()) throw std::invalid_argument("render needs at least one curve");
  std::stable_sort(curves.begin(), curves.end(),
                   [](const ReliabilityCurve& a, const ReliabilityCurve& b) {
                     return a.group < b.group;
                   });

  const double w = style.width;
  const double h = style.height;
  const double m = style.margin;
  const double plot_w = w - 2 * m;
  const double plot_h = h - 2 * m;
  auto x_of = [&](double conf) { return m + conf * plot_w; };
  auto y_of = [&](double acc) { return h - m - acc * plot_h; };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(style.width) +
         "\" height=\"" + std::to_string(style.height) + "\" viewBox=\"0 0 " +
         std::to_string(style.width) + " " + std::to_string(style.height) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + px(w) + "\" height=\"" + px(h) +
         "\" fill=\"#ffffff\"/>\n";
  svg += "<text x=\"" + px(w / 2) + "\" y=\"" + px(m / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
         xml_escape(style.title) + "</text>\n";

  // Frame, grid and tick labels.
  svg += "<rect x=\"" + px(m) + "\" y=\"" + px(m) + "\" width=\"" + px(plot_w) + "\" height=\"" +
         px(plot_h) + "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = t / 5.0;
    const std::string label = format_fixed(v, 1);
    svg += "<line x1=\"" + px(x_of(v)) + "\" y1=\"" + px(y_of(0)) + "\" x2=\"" + px(x_of(v)) +
           "\" y2=\"" + px(y_of(1)) + "\" stroke=\"#e0e0e0\" stroke-width=\"0.5\"/>\n";
    svg += "<line x1=\"" + px(x_of(0)) + "\" y1=\"" + px(y_of(v)) + "\" x2=\"" + px(x_of(1)) +
           "\" y2=\"" + px(y_of(v)) + "\" stroke=\"#e0e0e0\" stroke-width=\"0.5\"/>\n";
    svg += "<text x=\"" + px(x_of(v)) + "\" y=\"" + px(y_of(0) + 16) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + label +
           "</text>\n";
    svg += "<text x=\"" + px(x_of(0) - 6) + "\" y=\"" + px(y_of(v) + 3) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + label +
           "</text>\n";
  }
  svg += "<text x=\"" + px(w / 2) + "\" y=\"" + px(h - m / 4) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">Confidence</text>\n";
  svg += "<text x=\"" + px(m / 4) + "\" y=\"" + px(h / 2) + "\" transform=\"rotate(-90 " +
         px(m / 4) + " " + px(h / 2) +
         ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">Accuracy</text>\n";

  // Perfect calibration reference.
  svg += "<line class=\"diagonal\" x1=\"" + px(x_of(0)) + "\" y1=\"" + px(y_of(0)) + "\" x2=\"" +
         px(x_of(1)) + "\" y2=\"" + px(y_of(1)) +
         "\" stroke=\"#808080\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>\n";

  std::string csv = "curve,conf,acc,weight,count\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const ReliabilityCurve& cv = curves[c];
    const char* colour = kPalette[c % kPalette.size()];
    std::string pts;
    for (const CurvePoint& p : cv.points) {
      if (!pts.empty()) pts += ' ';
      pts += px(x_of(p.conf)) + "," + px(y_of(p.acc));
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(colour) +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    for (const CurvePoint& p : cv.points) {
      const double r = style.size_by_weight
                           ? std::max(1.5, style.marker_radius * 3.0 * std::sqrt(p.weight))
                           : style.marker_radius;
      svg += "<circle cx=\"" + px(x_of(p.conf)) + "\" cy=\"" + px(y_of(p.acc)) + "\" r=\"" +
             px(r) + "\" fill=\"" + colour + "\" fill-opacity=\"0.6\"/>\n";
      csv += csv_field(cv.label()) + "," + format_roundtrip(p.conf) + "," +
             format_roundtrip(p.acc) + "," + format_roundtrip(p.weight) + "," +
             std::to_string(p.count) + "\n";
    }
    const double ly = m + 14 + 16.0 * static_cast<double>(c);
    svg += "<rect x=\"" + px(m + 8) + "\" y=\"" + px(ly - 8) +
           "\" width=\"10\" height=\"10\" fill=\"" + colour + "\"/>\n";
    svg += "<text class=\"legend\" x=\"" + px(m + 22) + "\" y=\"" + px(ly + 1) +
           "\" font-family=\"sans-serif\" font-size=\"10\">" + xml_escape(cv.label()) +
           "</text>\n";
  }
  svg += "</svg>\n";
  return {std::move(svg), std::move(csv)};
}

}  // namespace calib
