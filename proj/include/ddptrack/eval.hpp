#ifndef DDPTRACK_EVAL_HPP
#define DDPTRACK_EVAL_HPP

#include <map>
#include <string>

#include "ddptrack/common.hpp"

namespace ddptrack {
namespace eval {

struct Box {
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;

  bool wellFormed() const { return xmin < xmax && ymin < ymax; }
};

// One object's per-frame boxes, keyed by 1-based frame.
struct BoxTrack {
  int id = 0;
  std::map<int, Box> boxes;
};

struct GroundTruth {
  std::vector<BoxTrack> objects;
};

struct EvalReport {
  std::vector<std::pair<int, double>> fdaPerFrame;  // (frame, FDA)
  double sfda = 0.0;
  double stda = 0.0;
  double ata = 0.0;
  struct PairTerm {
    int gtId = 0;
    int trackId = 0;
    double term = 0.0;
  };
  std::vector<PairTerm> stdaTerms;
  std::vector<std::pair<int, int>> mapping;  // (gtId, trackId)
  std::vector<int> falsePositiveTracks;
  std::vector<int> missedGtTracks;
};

// |A ∩ B| / |A ∪ B| over rectangles.
double overlapRatio(const Box& a, const Box& b);

// Globally optimal one-to-one assignment minimizing total cost over an n x m matrix.
// Returns, for each row, the assigned column or -1. Rectangular inputs are padded
// internally; ties break toward lower indices.
std::vector<int> hungarianAssign(const std::vector<std::vector<double>>& cost);

double computeFda(const std::vector<Box>& gtBoxes, const std::vector<Box>& detBoxes);
double computeSfda(const GroundTruth& gt, const std::vector<BoxTrack>& tracks);

struct AtaResult {
  double stda = 0.0;
  double ata = 0.0;
  std::vector<EvalReport::PairTerm> terms;
  std::vector<std::pair<int, int>> mapping;
};
AtaResult computeAta(const GroundTruth& gt, const std::vector<BoxTrack>& tracks);

EvalReport evaluate(const GroundTruth& gt, const std::vector<BoxTrack>& tracks);

GroundTruth readGroundTruth(const std::string& path);
std::vector<BoxTrack> readTrackBoxes(const std::string& path);  // from the track JSON format
void writeReport(const EvalReport& report, const std::string& headerJson, const std::string& path);
void writeFdaCsv(const EvalReport& report, const std::string& path);

}  // namespace eval
}  // namespace ddptrack

#endif  // DDPTRACK_EVAL_HPP
