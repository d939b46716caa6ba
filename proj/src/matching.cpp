#include "mmlf/matching.hpp"

#include "mmlf/errors.hpp"

namespace mmlf {

MatchGrid build_match_matrix(const std::vector<Detection3D>& dets3d,
                             const std::vector<Detection2D>& dets2d,
                             const Calibration& calib, double max_range) {
  MatchGrid grid;
  grid.num3d = dets3d.size();
  grid.num2d = dets2d.size();
  grid.entries.resize(grid.num3d * grid.num2d);
  grid.projected.resize(grid.num3d);
  grid.dis3d.resize(grid.num3d);

  for (std::size_t i = 0; i < grid.num3d; ++i) {
    grid.projected[i] = project_to_image(dets3d[i].box, calib);
    grid.dis3d[i] =
        planar_distance_normalized(dets3d[i].box, calib, max_range);
    for (std::size_t j = 0; j < grid.num2d; ++j) {
      MatchEntry& e = grid.entries[i * grid.num2d + j];
      e.iou = grid.projected[i]
                  ? iou_axis_aligned(*grid.projected[i], dets2d[j].box)
                  : 0.0;
      e.objs3d = dets3d[i].objectness;
      e.objs2d = dets2d[j].objectness;
      e.dis = grid.dis3d[i];
    }
  }
  return grid;
}

std::vector<HypotheticalPair> enumerate_pairs(
    const MatchGrid& grid, const std::vector<Detection3D>& dets3d,
    const std::vector<Detection2D>& dets2d, const EvidenceHead& head3d,
    const EvidenceHead& head2d, double pairing_floor) {
  if (grid.num3d != dets3d.size() || grid.num2d != dets2d.size()) {
    throw DimensionError("grid does not match detection lists");
  }

  std::vector<Opinion> opinions3d(dets3d.size());
  for (std::size_t i = 0; i < dets3d.size(); ++i) {
    const auto evidence = head3d.apply(dets3d[i].class_scores);
    opinions3d[i] = opinion_from_evidence(evidence, evidence.size());
  }
  std::vector<Opinion> opinions2d(dets2d.size());
  for (std::size_t j = 0; j < dets2d.size(); ++j) {
    const auto evidence = head2d.apply(dets2d[j].class_scores);
    opinions2d[j] = opinion_from_evidence(evidence, evidence.size());
  }

  std::vector<HypotheticalPair> pairs;
  pairs.reserve(grid.num3d);
  for (std::size_t i = 0; i < grid.num3d; ++i) {
    bool any_match = false;
    for (std::size_t j = 0; j < grid.num2d; ++j) {
      const MatchEntry& e = grid.at(i, j);
      if (e.iou > pairing_floor) {
        HypotheticalPair p;
        p.i = i;
        p.j = j;
        p.entry = e;
        p.opinion3d = opinions3d[i];
        p.opinion2d = opinions2d[j];
        p.fused = opinions3d[i];
        p.is_matched = true;
        pairs.push_back(std::move(p));
        any_match = true;
      }
    }
    if (!any_match) {
      HypotheticalPair p;
      p.i = i;
      p.j = kNoMatch;
      p.entry.iou = 0.0;
      p.entry.objs3d = dets3d[i].objectness;
      p.entry.objs2d = kNoMatchObjectness;
      p.entry.dis = grid.dis3d[i];
      p.opinion3d = opinions3d[i];
      p.fused = opinions3d[i];
      p.is_matched = false;
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

void fuse_pair_classes(HypotheticalPair& pair) {
  if (!pair.is_matched || !pair.opinion2d) {
    throw InvalidParameterError(
        "class fusion needs a matched pair with both opinions");
  }
  pair.fused = combine_opinions(pair.opinion3d, *pair.opinion2d);
}

void fuse_all_pairs(std::vector<HypotheticalPair>& pairs) {
  for (auto& pair : pairs) {
    if (pair.is_matched) {
      fuse_pair_classes(pair);
    }
  }
}

ObjsFeature pair_feature(const HypotheticalPair& pair) {
  return ObjsFeature{pair.entry.iou, pair.entry.objs3d, pair.entry.objs2d,
                     pair.entry.dis, pair.fused.uncertainty};
}

}  // namespace mmlf
