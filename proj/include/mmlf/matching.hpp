#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "mmlf/evidence.hpp"
#include "mmlf/fusion_net.hpp"
#include "mmlf/geometry.hpp"

namespace mmlf {

// Sentinel written into the 2D objectness channel of fallback pairs.
inline constexpr double kNoMatchObjectness = -10.0;
// j index of a fallback pair.
inline constexpr std::size_t kNoMatch = static_cast<std::size_t>(-1);

struct Detection3D {
  Box3D box;
  double objectness = 0.0;
  std::vector<double> class_scores;
  int class_label = 0;
};

struct Detection2D {
  Box2D box;
  double objectness = 0.0;
  std::vector<double> class_scores;
  int class_label = 0;
};

// One cell of the m x n matching grid: the four channels of the matching
// tensor.
struct MatchEntry {
  double iou = 0.0;
  double objs3d = 0.0;
  double objs2d = 0.0;
  double dis = 0.0;
};

// The full grid plus the per-3D-candidate quantities it was built from.
struct MatchGrid {
  std::size_t num3d = 0;
  std::size_t num2d = 0;
  std::vector<MatchEntry> entries;              // row-major, num3d x num2d
  std::vector<std::optional<Box2D>> projected;  // per 3D candidate
  std::vector<double> dis3d;                    // per 3D candidate

  const MatchEntry& at(std::size_t i, std::size_t j) const {
    return entries[i * num2d + j];
  }
};

// One 3D-2D candidate pairing. Fallback pairs (no 2D candidate with
// non-zero IoU) keep j = kNoMatch, carry the -10 sentinel in
// entry.objs2d and reuse the 3D opinion as the fused opinion.
struct HypotheticalPair {
  std::size_t i = 0;
  std::size_t j = kNoMatch;
  MatchEntry entry;
  Opinion opinion3d;
  std::optional<Opinion> opinion2d;
  Opinion fused;
  bool is_matched = false;
};

// Fills the grid per the matching-tensor definition: cell (i, j) holds the
// IoU of the projected i-th 3D candidate with the j-th 2D box (0 when the
// projection is absent), both objectness scores and the normalized planar
// distance of candidate i.
MatchGrid build_match_matrix(const std::vector<Detection3D>& dets3d,
                             const std::vector<Detection2D>& dets2d,
                             const Calibration& calib, double max_range);

// One pair per grid cell with iou > pairing_floor, plus one fallback pair
// for every 3D candidate whose row has none. Opinions come from the
// evidence heads applied to the per-class detector scores; matched pairs
// still carry fused = opinion3d until fuse_pair_classes runs.
std::vector<HypotheticalPair> enumerate_pairs(
    const MatchGrid& grid, const std::vector<Detection3D>& dets3d,
    const std::vector<Detection2D>& dets2d, const EvidenceHead& head3d,
    const EvidenceHead& head2d, double pairing_floor = 0.0);

// Dempster-combines the two modality opinions of a matched pair.
void fuse_pair_classes(HypotheticalPair& pair);

// fuse_pair_classes over every matched pair.
void fuse_all_pairs(std::vector<HypotheticalPair>& pairs);

// The five score-network channels of a pair.
ObjsFeature pair_feature(const HypotheticalPair& pair);

}  // namespace mmlf
