#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmlf/fusion_net.hpp"
#include "mmlf/matching.hpp"
#include "mmlf/training.hpp"

namespace mmlf {

// One final fused detection. beliefs/uncertainty come from the selected
// pair's fused opinion; for fallback pairs they are the untouched 3D
// opinion.
struct FusedDetection {
  Box3D box3d;
  double score = 0.0;
  std::vector<double> beliefs;
  double uncertainty = 1.0;
  int class_label = 0;
  std::size_t source_i = 0;
  std::size_t source_j = kNoMatch;
};

struct PipelineConfig {
  double conf_threshold = 0.95;
  double nms_iou = 0.4;
  double u_max = 0.10;
  double max_range = 80.0;
  double pairing_floor = 0.0;
  double target_iou_car = 0.5;
  double target_iou_small = 0.25;
  std::size_t lambda_anneal_epochs = 10;
  double evidence_scale = 25.0;
};

// Grid -> pairs -> per-pair class fusion -> score network -> best pair per
// 3D candidate -> confidence threshold -> BEV NMS -> uncertainty filter.
// Output sorted by score descending.
std::vector<FusedDetection> fuse_frame(const std::vector<Detection3D>& dets3d,
                                       const std::vector<Detection2D>& dets2d,
                                       const Calibration& calib,
                                       const FusionParams& params,
                                       const PipelineConfig& cfg);

// Indices into `pairs`, one per distinct 3D candidate, choosing the pair
// with the highest score; ties prefer larger IoU, then lower 2D index.
// Result ordered by ascending 3D index.
std::vector<std::size_t> select_best_per_candidate(
    std::span<const HypotheticalPair> pairs, std::span<const double> scores);

// Greedy class-wise suppression by descending score using rotated BEV IoU.
std::vector<FusedDetection> nms(const std::vector<FusedDetection>& dets,
                                double iou_thresh);

// Keeps detections with uncertainty <= u_max.
std::vector<FusedDetection> filter_uncertainty(
    const std::vector<FusedDetection>& dets, double u_max);

// One training frame: detector outputs, calibration and image-plane ground
// truth already mapped to class indices.
struct TrainingFrame {
  std::string id;
  std::vector<Detection3D> dets3d;
  std::vector<Detection2D> dets2d;
  Calibration calib;
  std::vector<GtBox2D> gts;
};

struct TrainConfig {
  PipelineConfig pipeline;
  // Target-assignment IoU threshold per class index.
  std::vector<double> target_iou_by_class;
  std::size_t num_classes = 3;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  double lr = 0.003;
};

struct TrainResult {
  FusionParams params;
  std::vector<double> epoch_losses;  // mean frame loss per epoch
  std::size_t skipped_frames = 0;    // frames without ground truth, total
};

// Sequential per-frame training: Adam on the evidence heads, SGD on the
// score network, both at the same learning rate. Deterministic for a fixed
// seed and frame order.
TrainResult train(const std::vector<TrainingFrame>& frames,
                  const TrainConfig& cfg);

}  // namespace mmlf
