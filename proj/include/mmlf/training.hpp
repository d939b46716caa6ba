#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mmlf/fusion_net.hpp"
#include "mmlf/matching.hpp"

namespace mmlf {

// Ground-truth assignment of one hypothetical pair. Negative pairs carry
// no class target.
struct PairTarget {
  bool is_object = false;
  int class_label = 0;
};

// Image-plane ground-truth box with a resolved class index.
struct GtBox2D {
  Box2D bbox;
  int class_label = 0;
};

// A pair is positive when the projection of its 3D candidate overlaps a
// ground-truth box of the pair's own class (argmax of the fused beliefs)
// with IoU at or above that class's threshold; the class target is that
// class. Pairs without a projection and pairs below threshold are
// negatives.
std::vector<PairTarget> assign_targets(
    std::span<const HypotheticalPair> pairs, const MatchGrid& grid,
    std::span<const GtBox2D> gts, std::span<const double> iou_thresholds);

// Frame loss: for every positive matched pair
//   ssl(alpha_fused) + ssl(alpha_3d) + ssl(alpha_2d),
// for every positive fallback pair ssl(alpha_3d), plus the two-mask
// objectness BCE over `scores` (probabilities) with targets
// 1/0 = object/no-object. Empty input is a zero loss.
double total_loss(std::span<const HypotheticalPair> pairs,
                  std::span<const double> scores,
                  std::span<const PairTarget> targets, double lambda_t);

// Gradients of total_loss. The classification terms flow back through the
// Dempster combination and the evidence construction into both evidence
// heads; the objectness term flows into the score network only (the
// fused-uncertainty input channel is treated as a constant feature).
struct FrameGradients {
  double loss = 0.0;
  ScoreNetGrads net;
  EvidenceHeadGrads head3d;
  EvidenceHeadGrads head2d;
};

FrameGradients total_loss_backward(const std::vector<Detection3D>& dets3d,
                                   const std::vector<Detection2D>& dets2d,
                                   std::span<const HypotheticalPair> pairs,
                                   const FusionParams& params,
                                   std::span<const PairTarget> targets,
                                   double lambda_t);

}  // namespace mmlf
