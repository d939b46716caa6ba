#pragma once

#include <array>
#include <cstddef>
#include <optional>

namespace mmlf {

// Axis-aligned image-plane box, pixels. (x1, y1) top-left, (x2, y2)
// bottom-right.
struct Box2D {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
};

// Oriented 3D box in the rectified camera frame (x right, y down, z
// forward). (x, y, z) is the center of the bottom face, h/w/l are the
// box dimensions in meters and ry the yaw about the camera y axis.
struct Box3D {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double h = 0.0;
  double w = 0.0;
  double l = 0.0;
  double ry = 0.0;
};

// Camera-2 projection, rectification rotation and LiDAR-to-camera rigid
// transform, row-major. Image dimensions default to the usual KITTI
// camera-2 frame size since calibration files do not carry them.
struct Calibration {
  std::array<std::array<double, 4>, 3> p2{};
  std::array<std::array<double, 3>, 3> r0{};
  std::array<std::array<double, 4>, 3> tr_velo_to_cam{};
  double image_width = 1242.0;
  double image_height = 375.0;
};

// Identity-like calibration: pinhole p2 with the given intrinsics, r0 = I,
// tr_velo_to_cam = [I | 0]. Convenient for tests and synthetic data.
Calibration make_pinhole_calibration(double focal, double cx, double cy,
                                     double image_width, double image_height);

using Vec3 = std::array<double, 3>;
using Vec2 = std::array<double, 2>;

// The 8 corners of the oriented cuboid in camera coordinates.
// Corners 0..3 are the bottom face, 4..7 the top face.
std::array<Vec3, 8> box3d_corners(const Box3D& b);

// The 4 bottom-face corners as (x, z) points in the ground plane, in
// box3d_corners order.
std::array<Vec2, 4> bev_polygon(const Box3D& b);

// Axis-aligned hull of the projected box corners, clipped to the image.
// Corners at camera depth z <= 0.1 m are dropped; returns nullopt when
// fewer than 2 corners remain in front of the camera or the clipped hull
// is empty.
std::optional<Box2D> project_to_image(const Box3D& b, const Calibration& c);

// Intersection over union of two axis-aligned boxes; 0 when disjoint or
// the union is degenerate.
double iou_axis_aligned(const Box2D& a, const Box2D& b);

// IoU of the two yaw-rotated box footprints in the x-z plane, computed by
// convex polygon clipping.
double rotated_bev_iou(const Box3D& a, const Box3D& b);

// Volumetric IoU: BEV polygon intersection times vertical interval
// overlap, over the union volume.
double iou_3d(const Box3D& a, const Box3D& b);

// Distance of the box center from the LiDAR origin in the LiDAR ground
// plane, divided by max_range and clamped to [0, 1]. The center is moved
// to the LiDAR frame through the inverse of r0 * tr_velo_to_cam; throws
// CalibrationError when that transform is singular.
double planar_distance_normalized(const Box3D& b, const Calibration& c,
                                  double max_range);

}  // namespace mmlf
