#ifndef DDPTRACK_REPORT_HPP
#define DDPTRACK_REPORT_HPP

#include <string>

#include "ddptrack/eval.hpp"

namespace ddptrack {
namespace report {

struct ReportInput {
  double confidence = 0.0;
  eval::EvalReport report;
};

// FDA-per-frame curve for the first report plus SFDA/ATA against confidence when
// several reports at different confidences are given. Plain polyline SVG.
void writeSvg(const std::vector<ReportInput>& inputs, const std::string& headerComment,
              const std::string& path);

ReportInput readReportJson(const std::string& path);

}  // namespace report
}  // namespace ddptrack

#endif  // DDPTRACK_REPORT_HPP
