#pragma once

// Minimal SVG writer for 2D overlays: polylines, point markers and
// uncertainty bands drawn around a curve. Data coordinates are mapped with a
// uniform scale so shapes are not distorted.

#include <string>
#include <vector>

#include "poltrans/types.hpp"

namespace poltrans {

class SvgPlot {
 public:
  explicit SvgPlot(std::string title = {}) : title_(std::move(title)) {}

  void add_polyline(std::vector<Vector> points, std::string color, std::string label = {}, double width = 1.5,
                    bool dashed = false);
  void add_markers(std::vector<Vector> points, std::string color, std::string label = {}, double radius = 3.0);
  /// Filled band of half-width `half_width[i]` around the curve, measured
  /// along the curve's local normal.
  void add_band(std::vector<Vector> center, std::vector<double> half_width, std::string color,
                std::string label = {}, double opacity = 0.3);

  std::string render(int width = 640, int height = 480) const;

 private:
  enum class Kind { polyline, markers, band };
  struct Item {
    Kind kind;
    std::vector<Vector> points;
    std::vector<double> half_width;
    std::string color;
    std::string label;
    double size = 1.0;
    bool dashed = false;
  };
  std::string title_;
  std::vector<Item> items_;
};

}  // namespace poltrans
