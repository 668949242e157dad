#ifndef DDPTRACK_SYNTHGEN_HPP
#define DDPTRACK_SYNTHGEN_HPP

#include <array>
#include <string>

#include "ddptrack/extract.hpp"

namespace ddptrack {
namespace synth {

struct SquareSpec {
  std::array<std::uint8_t, 3> color{};
  std::vector<int> sizeTimeline;                    // side length per frame, >= 1
  std::vector<std::pair<int, int>> pathTimeline;    // integer center per frame
  int zOrder = 0;                                   // higher draws on top
};

struct Scenario {
  std::string name;
  int frames = 200;
  int width = 500;
  int height = 500;
  std::vector<SquareSpec> squares;
};

// cross-continue | cross-reverse | three-squares, exactly as used in the experiments.
Scenario makeScenario(const std::string& name);

extract::Frame renderFrame(const Scenario& scenario, int frameIndex);  // 1-based frame index

// Nominal bounding box [xmin, ymin, xmax, ymax) in continuous pixel coordinates of
// square s at 1-based frame t, clipped to the image.
std::array<int, 4> squareBox(const Scenario& scenario, int squareIndex, int frameIndex);

// True when at least one pixel of the square is visible under the z-order.
bool squareVisible(const Scenario& scenario, int squareIndex, int frameIndex);

// Writes <outDir>/f0001.ppm .. , manifest.json and gt.json.
void generateScenario(const std::string& name, const std::string& outDir);

}  // namespace synth
}  // namespace ddptrack

#endif  // DDPTRACK_SYNTHGEN_HPP
