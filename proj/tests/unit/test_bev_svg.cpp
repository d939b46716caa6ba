#include "doctest.h"
#include "mmlf/bev_svg.hpp"

using namespace mmlf;

TEST_CASE("empty plots are a grid-only document") {
  const std::string svg = render_bev_svg({});
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("version=\"1.1\"") != std::string::npos);
  CHECK(svg.find("<line") != std::string::npos);
  CHECK(svg.find("<polygon") == std::string::npos);
  CHECK(svg.find("<text") == std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("one box renders one polygon and one label") {
  BevPlotBox box;
  box.box = {3.0, 1.5, 25.0, 1.5, 1.7, 4.0, 0.35};
  box.uncertainty = 0.0451;
  const std::string svg = render_bev_svg({box});

  std::size_t polygons = 0, texts = 0, pos = 0;
  while ((pos = svg.find("<polygon", pos)) != std::string::npos) {
    ++polygons;
    ++pos;
  }
  pos = 0;
  while ((pos = svg.find("<text", pos)) != std::string::npos) {
    ++texts;
    ++pos;
  }
  CHECK(polygons == 1);
  CHECK(texts == 1);
  CHECK(svg.find("0.0451") != std::string::npos);
}

TEST_CASE("polygon vertices are the scaled footprint corners") {
  BevPlotBox box;
  box.box = {0.0, 1.5, 40.0, 1.5, 2.0, 4.0, 0.0};
  const BevPlotOptions opt;
  const std::string svg = render_bev_svg({box});

  std::string expected = "points=\"";
  bool first = true;
  for (const Vec2& corner : bev_polygon(box.box)) {
    const Vec2 px = bev_to_pixels(corner, opt);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f", px[0], px[1]);
    if (!first) expected += ' ';
    expected += buf;
    first = false;
  }
  expected += '"';
  CHECK(svg.find(expected) != std::string::npos);

  // the documented mapping: 8 px per meter, x offset 40 m, z flipped
  const Vec2 origin = bev_to_pixels({0.0, 0.0}, opt);
  CHECK(origin[0] == 320.0);
  CHECK(origin[1] == 640.0);
}

TEST_CASE("ground-truth boxes are dashed and unlabeled") {
  BevPlotBox gt;
  gt.box = {1.0, 1.5, 20.0, 1.5, 1.7, 4.0, 0.0};
  gt.is_ground_truth = true;
  const std::string svg = render_bev_svg({gt});
  CHECK(svg.find("stroke-dasharray") != std::string::npos);
  CHECK(svg.find("<text") == std::string::npos);
}
