#ifndef DDPTRACK_EXTRACT_HPP
#define DDPTRACK_EXTRACT_HPP

#include <optional>
#include <string>

#include "ddptrack/model.hpp"

namespace ddptrack {
namespace extract {

// Row-major 8-bit RGB frame.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // 3 * width * height bytes

  std::uint8_t r(int x, int y) const { return pixels[3 * (y * width + x)]; }
  std::uint8_t g(int x, int y) const { return pixels[3 * (y * width + x) + 1]; }
  std::uint8_t b(int x, int y) const { return pixels[3 * (y * width + x) + 2]; }
  void set(int x, int y, std::uint8_t rr, std::uint8_t gg, std::uint8_t bb) {
    auto* p = &pixels[3 * (y * width + x)];
    p[0] = rr;
    p[1] = gg;
    p[2] = bb;
  }
};

struct PixelCoord {
  int x = 0;
  int y = 0;
};

// Which frame supplies the hue patch for a changed pixel.
enum class PatchSource {
  kCurrent,   // always the current frame
  kDominant,  // whichever of prev/cur has the more saturated center pixel
};

struct ExtractionConfig {
  int diffThreshold = 30;      // tau, on 0..255 max-channel difference
  int patchHalfWidth = 1;      // L = 2*patchHalfWidth + 1
  int hueBins = 10;            // V
  std::optional<int> maxObsPerFrame = 500;
  double saturationFloor = 0.1;
  double spatialScale = 0.0;   // <= 0 means default: larger frame dimension / 9
  std::uint64_t seed = 0;
  PatchSource patchSource = PatchSource::kDominant;

  int L() const { return 2 * patchHalfWidth + 1; }
  double scaleFor(int width, int height) const {
    return spatialScale > 0.0 ? spatialScale : std::max(width, height) / 9.0;
  }
  void validate() const;
};

// Frame file I/O: binary PPM (P6) and PGM (P5) only.
Frame readImage(const std::string& path);
void writePpm(const Frame& frame, const std::string& path, const std::string& comment = "");

// Manifest: {"frames": [...], "width": W, "height": H}; frame paths relative to the manifest.
std::vector<std::string> readManifest(const std::string& manifestPath, int& width, int& height);

// Coordinates where the max-channel absolute difference exceeds the threshold, row-major order.
std::vector<PixelCoord> frameDifference(const Frame& prev, const Frame& cur,
                                        const ExtractionConfig& config);

// Hue counts over the L x L patch around center, clipped at frame borders.
// Pixels below the saturation floor (or with undefined hue) land in bin 0.
VecXi hueHistogram(const Frame& frame, PixelCoord center, const ExtractionConfig& config);

// Recenters to the frame middle, divides by the spatial scale, y axis up.
Vec2 normalizeCoords(PixelCoord p, int width, int height, const ExtractionConfig& config);
PixelCoord denormalizeCoords(const Vec2& scenePos, int width, int height,
                             const ExtractionConfig& config);

// Full extraction: frame 1 yields nothing; later frames yield one observation per
// differenced pixel, subsampled to the per-frame cap (seeded per frame index).
ObservationSet extractSequence(const std::vector<Frame>& frames, const ExtractionConfig& config,
                               int workers = 1);

// Observation JSON-lines I/O. The header line echoes the configuration.
void writeObservations(const ObservationSet& obs, const ExtractionConfig& config, int width,
                       int height, const std::string& path);
ObservationSet readObservations(const std::string& path, ExtractionConfig& configOut, int& width,
                                int& height);

}  // namespace extract
}  // namespace ddptrack

#endif  // DDPTRACK_EXTRACT_HPP
