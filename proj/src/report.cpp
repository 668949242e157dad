#include "ddptrack/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ddptrack {
namespace report {
namespace {

using nlohmann::json;

struct Panel {
  double x0, y0, w, h;  // plot area in SVG coordinates
  double xmin, xmax, ymin, ymax;

  double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
  double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
};

void axes(std::ostringstream& svg, const Panel& p, const std::string& title,
          const std::string& xlabel) {
  svg << "<rect x='" << p.x0 << "' y='" << p.y0 << "' width='" << p.w << "' height='" << p.h
      << "' fill='none' stroke='black'/>\n";
  svg << "<text x='" << p.x0 + p.w / 2 << "' y='" << p.y0 - 8
      << "' text-anchor='middle' font-size='13'>" << title << "</text>\n";
  svg << "<text x='" << p.x0 + p.w / 2 << "' y='" << p.y0 + p.h + 30
      << "' text-anchor='middle' font-size='11'>" << xlabel << "</text>\n";
  for (double f : {0.0, 0.5, 1.0}) {
    svg << "<text x='" << p.x0 - 6 << "' y='" << p.py(f) + 4
        << "' text-anchor='end' font-size='10'>" << f << "</text>\n";
    svg << "<line x1='" << p.x0 << "' y1='" << p.py(f) << "' x2='" << p.x0 + p.w << "' y2='"
        << p.py(f) << "' stroke='#ddd'/>\n";
  }
}

void polyline(std::ostringstream& svg, const Panel& p, const std::vector<std::pair<double, double>>& pts,
              const std::string& color, bool dashed = false) {
  if (pts.empty()) return;
  svg << "<polyline fill='none' stroke='" << color << "'";
  if (dashed) svg << " stroke-dasharray='6,3'";
  svg << " points='";
  for (const auto& [x, y] : pts) svg << p.px(x) << "," << p.py(std::clamp(y, p.ymin, p.ymax)) << " ";
  svg << "'/>\n";
}

}  // namespace

void writeSvg(const std::vector<ReportInput>& inputs, const std::string& headerComment,
              const std::string& path) {
  if (inputs.empty()) throw DataError("writeSvg: no reports");
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='900' height='360'>\n";
  svg << "<!-- " << headerComment << " -->\n";

  const auto& fda = inputs.front().report.fdaPerFrame;
  double tmax = 1.0;
  for (const auto& [t, v] : fda) tmax = std::max(tmax, double(t));
  Panel left{60, 40, 340, 250, 1.0, tmax, 0.0, 1.0};
  axes(svg, left, "FDA per frame", "frame");
  std::vector<std::pair<double, double>> pts;
  for (const auto& [t, v] : fda) pts.emplace_back(double(t), v);
  polyline(svg, left, pts, "steelblue");

  std::vector<ReportInput> sorted = inputs;
  std::sort(sorted.begin(), sorted.end(),
            [](const ReportInput& a, const ReportInput& b) { return a.confidence < b.confidence; });
  double cmin = sorted.front().confidence, cmax = sorted.back().confidence;
  if (cmax <= cmin) {
    cmin = 0.0;
    cmax = 1.0;
  }
  Panel right{520, 40, 340, 250, cmin, cmax, 0.0, 1.0};
  axes(svg, right, "SFDA (solid) and ATA (dashed) vs confidence", "confidence");
  std::vector<std::pair<double, double>> sfda, ata;
  for (const auto& in : sorted) {
    sfda.emplace_back(in.confidence, in.report.sfda);
    ata.emplace_back(in.confidence, in.report.ata);
  }
  polyline(svg, right, sfda, "steelblue");
  polyline(svg, right, ata, "firebrick", true);

  svg << "</svg>\n";
  std::ofstream out(path);
  if (!out) throw DataError("cannot write SVG: " + path);
  out << svg.str();
}

ReportInput readReportJson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("bad report JSON: " + std::string(e.what()));
  }
  ReportInput r;
  if (j.contains("header") && j["header"].contains("confidence"))
    r.confidence = j["header"]["confidence"].get<double>();
  r.report.sfda = j.value("sfda", 0.0);
  r.report.stda = j.value("stda", 0.0);
  r.report.ata = j.value("ata", 0.0);
  if (j.contains("fdaPerFrame"))
    for (const auto& e : j["fdaPerFrame"])
      r.report.fdaPerFrame.emplace_back(e.at("t").get<int>(), e.at("fda").get<double>());
  return r;
}

}  // namespace report
}  // namespace ddptrack
