#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mmlf/geometry.hpp"

namespace mmlf {

// One box drawn in the bird's-eye-view plot.
struct BevPlotBox {
  Box3D box;
  std::optional<double> uncertainty;  // rendered as a text label when set
  int class_label = 0;
  bool is_ground_truth = false;  // dashed stroke, no label
};

// Plot frame: x in [x_min, x_max] meters maps left-to-right, z in
// [0, z_max] meters maps bottom-to-top. pixels_per_meter scales both axes.
struct BevPlotOptions {
  double x_min = -40.0;
  double x_max = 40.0;
  double z_max = 80.0;
  double pixels_per_meter = 8.0;
  double grid_step = 10.0;  // meters between grid lines
};

// Pixel position of a ground-plane point under the options above.
Vec2 bev_to_pixels(const Vec2& xz, const BevPlotOptions& opt);

// SVG 1.1 document: background, grid, one polygon per box (dashed for
// ground truth) and one text node per uncertainty label.
std::string render_bev_svg(const std::vector<BevPlotBox>& boxes,
                           const BevPlotOptions& opt = {});

}  // namespace mmlf
