#include "mmlf/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mmlf/errors.hpp"

namespace mmlf {

namespace {

constexpr double kMinCameraDepth = 0.1;  // meters

double polygon_area(const std::vector<Vec2>& poly) {
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    twice += p[0] * q[1] - q[0] * p[1];
  }
  return std::abs(twice) * 0.5;
}

// Sutherland-Hodgman clip of `subject` against the half-plane on the
// inner side of edge a->b of a counter-clockwise polygon.
std::vector<Vec2> clip_against_edge(const std::vector<Vec2>& subject,
                                    const Vec2& a, const Vec2& b) {
  std::vector<Vec2> out;
  out.reserve(subject.size() + 2);
  auto side = [&](const Vec2& p) {
    return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
  };
  const std::size_t n = subject.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& cur = subject[i];
    const Vec2& nxt = subject[(i + 1) % n];
    const double sc = side(cur);
    const double sn = side(nxt);
    if (sc >= 0.0) {
      out.push_back(cur);
    }
    if ((sc > 0.0 && sn < 0.0) || (sc < 0.0 && sn > 0.0)) {
      const double t = sc / (sc - sn);
      out.push_back({cur[0] + t * (nxt[0] - cur[0]),
                     cur[1] + t * (nxt[1] - cur[1])});
    }
  }
  return out;
}

double signed_area(const std::array<Vec2, 4>& poly) {
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    twice += p[0] * q[1] - q[0] * p[1];
  }
  return twice * 0.5;
}

double convex_intersection_area(const std::array<Vec2, 4>& a,
                                std::array<Vec2, 4> b) {
  // The clip polygon must wind counter-clockwise for the side test below.
  if (signed_area(b) < 0.0) {
    std::reverse(b.begin(), b.end());
  }
  std::vector<Vec2> poly(a.begin(), a.end());
  for (std::size_t i = 0; i < 4 && poly.size() >= 3; ++i) {
    poly = clip_against_edge(poly, b[i], b[(i + 1) % 4]);
  }
  if (poly.size() < 3) {
    return 0.0;
  }
  return polygon_area(poly);
}

Eigen::Matrix4d rect_to_velo_transform(const Calibration& c) {
  Eigen::Matrix4d velo_to_rect = Eigen::Matrix4d::Identity();
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 4; ++k) {
      double v = 0.0;
      for (int m = 0; m < 3; ++m) {
        v += c.r0[r][m] * c.tr_velo_to_cam[m][k];
      }
      velo_to_rect(r, k) = v;
    }
  }
  if (std::abs(velo_to_rect.determinant()) < 1e-12) {
    throw CalibrationError("r0 * tr_velo_to_cam is singular");
  }
  return velo_to_rect.inverse();
}

}  // namespace

Calibration make_pinhole_calibration(double focal, double cx, double cy,
                                     double image_width,
                                     double image_height) {
  Calibration c;
  c.p2 = {{{focal, 0.0, cx, 0.0}, {0.0, focal, cy, 0.0}, {0.0, 0.0, 1.0, 0.0}}};
  c.r0 = {{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
  c.tr_velo_to_cam = {
      {{1.0, 0.0, 0.0, 0.0}, {0.0, 1.0, 0.0, 0.0}, {0.0, 0.0, 1.0, 0.0}}};
  c.image_width = image_width;
  c.image_height = image_height;
  return c;
}

std::array<Vec3, 8> box3d_corners(const Box3D& b) {
  const double cy = std::cos(b.ry);
  const double sy = std::sin(b.ry);
  const double hl = b.l * 0.5;
  const double hw = b.w * 0.5;
  // Bottom face first (y = 0 in box frame), then top (y = -h); the box
  // origin sits on the bottom face per the KITTI label convention.
  static constexpr double sx[8] = {+1, +1, -1, -1, +1, +1, -1, -1};
  static constexpr double sz[8] = {+1, -1, -1, +1, +1, -1, -1, +1};
  std::array<Vec3, 8> corners;
  for (int i = 0; i < 8; ++i) {
    const double lx = sx[i] * hl;
    const double lz = sz[i] * hw;
    const double ly = i < 4 ? 0.0 : -b.h;
    corners[i] = {b.x + cy * lx + sy * lz, b.y + ly, b.z - sy * lx + cy * lz};
  }
  return corners;
}

std::array<Vec2, 4> bev_polygon(const Box3D& b) {
  const auto corners = box3d_corners(b);
  std::array<Vec2, 4> poly;
  for (int i = 0; i < 4; ++i) {
    poly[i] = {corners[i][0], corners[i][2]};
  }
  return poly;
}

std::optional<Box2D> project_to_image(const Box3D& b, const Calibration& c) {
  const auto corners = box3d_corners(b);
  double min_u = std::numeric_limits<double>::infinity();
  double min_v = std::numeric_limits<double>::infinity();
  double max_u = -std::numeric_limits<double>::infinity();
  double max_v = -std::numeric_limits<double>::infinity();
  int in_front = 0;
  for (const Vec3& p : corners) {
    const double w = c.p2[2][0] * p[0] + c.p2[2][1] * p[1] +
                     c.p2[2][2] * p[2] + c.p2[2][3];
    if (w <= kMinCameraDepth) {
      continue;
    }
    ++in_front;
    const double u = (c.p2[0][0] * p[0] + c.p2[0][1] * p[1] +
                      c.p2[0][2] * p[2] + c.p2[0][3]) /
                     w;
    const double v = (c.p2[1][0] * p[0] + c.p2[1][1] * p[1] +
                      c.p2[1][2] * p[2] + c.p2[1][3]) /
                     w;
    min_u = std::min(min_u, u);
    max_u = std::max(max_u, u);
    min_v = std::min(min_v, v);
    max_v = std::max(max_v, v);
  }
  if (in_front < 2) {
    return std::nullopt;
  }
  Box2D box{std::max(min_u, 0.0), std::max(min_v, 0.0),
            std::min(max_u, c.image_width), std::min(max_v, c.image_height)};
  if (box.x1 >= box.x2 || box.y1 >= box.y2) {
    return std::nullopt;
  }
  return box;
}

double iou_axis_aligned(const Box2D& a, const Box2D& b) {
  const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0.0 || iy <= 0.0) {
    return 0.0;
  }
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) {
    return 0.0;
  }
  return inter / uni;
}

namespace {

// Clipping is not bit-symmetric in its arguments; order the operands so
// iou(a, b) and iou(b, a) run the identical computation.
bool bev_before(const Box3D& a, const Box3D& b) {
  if (a.x != b.x) return a.x < b.x;
  if (a.z != b.z) return a.z < b.z;
  if (a.l != b.l) return a.l < b.l;
  if (a.w != b.w) return a.w < b.w;
  return a.ry < b.ry;
}

}  // namespace

double rotated_bev_iou(const Box3D& a, const Box3D& b) {
  if (bev_before(b, a)) {
    return rotated_bev_iou(b, a);
  }
  const double area_a = a.w * a.l;
  const double area_b = b.w * b.l;
  const double inter = convex_intersection_area(bev_polygon(a), bev_polygon(b));
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) {
    return 0.0;
  }
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  if (bev_before(b, a)) {
    return iou_3d(b, a);
  }
  const double inter_area =
      convex_intersection_area(bev_polygon(a), bev_polygon(b));
  // y grows downward; the box spans [y - h, y].
  const double y_overlap =
      std::min(a.y, b.y) - std::max(a.y - a.h, b.y - b.h);
  if (inter_area <= 0.0 || y_overlap <= 0.0) {
    return 0.0;
  }
  const double inter_vol = inter_area * y_overlap;
  const double uni = a.w * a.l * a.h + b.w * b.l * b.h - inter_vol;
  if (uni <= 0.0) {
    return 0.0;
  }
  return std::clamp(inter_vol / uni, 0.0, 1.0);
}

double planar_distance_normalized(const Box3D& b, const Calibration& c,
                                  double max_range) {
  if (max_range <= 0.0) {
    throw InvalidParameterError("max_range must be positive");
  }
  const Eigen::Matrix4d rect_to_velo = rect_to_velo_transform(c);
  const Eigen::Vector4d center(b.x, b.y, b.z, 1.0);
  const Eigen::Vector4d in_velo = rect_to_velo * center;
  const double dist = std::hypot(in_velo(0), in_velo(1));
  return std::clamp(dist / max_range, 0.0, 1.0);
}

}  // namespace mmlf
