#include "mmlf/bev_svg.hpp"

#include <cstdio>

namespace mmlf {

namespace {

const char* stroke_for_class(int label) {
  static const char* palette[] = {"#d62728", "#1f77b4", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  if (label < 0) {
    return "#7f7f7f";
  }
  return palette[label % 6];
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

Vec2 bev_to_pixels(const Vec2& xz, const BevPlotOptions& opt) {
  return {(xz[0] - opt.x_min) * opt.pixels_per_meter,
          (opt.z_max - xz[1]) * opt.pixels_per_meter};
}

std::string render_bev_svg(const std::vector<BevPlotBox>& boxes,
                           const BevPlotOptions& opt) {
  const double width = (opt.x_max - opt.x_min) * opt.pixels_per_meter;
  const double height = opt.z_max * opt.pixels_per_meter;

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
         num(width) + "\" height=\"" + num(height) + "\" viewBox=\"0 0 " +
         num(width) + " " + num(height) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" +
         num(height) + "\" fill=\"#111418\"/>\n";

  // ground grid
  svg += "<g stroke=\"#2e3742\" stroke-width=\"1\">\n";
  for (double x = opt.x_min; x <= opt.x_max + 1e-9; x += opt.grid_step) {
    const Vec2 top = bev_to_pixels({x, opt.z_max}, opt);
    const Vec2 bottom = bev_to_pixels({x, 0.0}, opt);
    svg += "<line x1=\"" + num(top[0]) + "\" y1=\"" + num(top[1]) +
           "\" x2=\"" + num(bottom[0]) + "\" y2=\"" + num(bottom[1]) +
           "\"/>\n";
  }
  for (double z = 0.0; z <= opt.z_max + 1e-9; z += opt.grid_step) {
    const Vec2 left = bev_to_pixels({opt.x_min, z}, opt);
    const Vec2 right = bev_to_pixels({opt.x_max, z}, opt);
    svg += "<line x1=\"" + num(left[0]) + "\" y1=\"" + num(left[1]) +
           "\" x2=\"" + num(right[0]) + "\" y2=\"" + num(right[1]) +
           "\"/>\n";
  }
  svg += "</g>\n";

  for (const BevPlotBox& b : boxes) {
    const auto poly = bev_polygon(b.box);
    std::string points;
    for (const Vec2& corner : poly) {
      const Vec2 px = bev_to_pixels(corner, opt);
      if (!points.empty()) points += ' ';
      points += num(px[0]) + "," + num(px[1]);
    }
    svg += "<polygon points=\"" + points + "\" fill=\"none\" stroke=\"" +
           stroke_for_class(b.class_label) + "\" stroke-width=\"2\"";
    if (b.is_ground_truth) {
      svg += " stroke-dasharray=\"6,4\"";
    }
    svg += "/>\n";
    if (b.uncertainty) {
      char label[48];
      std::snprintf(label, sizeof(label), "%.4f", *b.uncertainty);
      const Vec2 anchor = bev_to_pixels({b.box.x + b.box.l * 0.5 + 0.5,
                                         b.box.z}, opt);
      svg += "<text x=\"" + num(anchor[0]) + "\" y=\"" + num(anchor[1]) +
             "\" fill=\"#e8e8e8\" font-size=\"12\" "
             "font-family=\"monospace\">" +
             label + "</text>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace mmlf
