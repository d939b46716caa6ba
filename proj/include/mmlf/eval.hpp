#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mmlf/geometry.hpp"

namespace mmlf {

enum class Metric { k2D, kAOS, kBEV, k3D };

Metric metric_from_name(const std::string& name);  // "2d", "aos", "bev", "3d"
std::string metric_name(Metric m);

// Ground-truth strata by projected box height, occlusion and truncation.
struct DifficultyBucket {
  std::string name;
  double min_height = 25.0;
  int max_occlusion = 2;
  double max_truncation = 0.5;
};

// Easy (40, 0, 0.15), Moderate (25, 1, 0.30), Hard (25, 2, 0.50).
const std::array<DifficultyBucket, 3>& standard_buckets();

// One pooled prediction or ground truth, already reduced to what the
// matcher needs.
struct EvalDetection {
  Box2D bbox;
  Box3D box;
  double alpha = 0.0;
  double score = 0.0;
  int class_label = 0;
};

struct EvalGroundTruth {
  Box2D bbox;
  Box3D box;
  double alpha = 0.0;
  int class_label = 0;
  double truncation = 0.0;
  int occlusion = 0;
  bool dont_care = false;
};

// Per-prediction outcome of the greedy same-class matching: true
// positives, false positives and ignored predictions (matched an
// out-of-bucket ground truth or a DontCare region).
enum class PredOutcome { kTruePositive, kFalsePositive, kIgnored };

struct MatchOutcome {
  std::vector<PredOutcome> outcome;       // per prediction
  std::vector<double> orientation_sim;    // valid for true positives
  std::vector<bool> gt_matched;           // per ground truth
  std::size_t num_valid_gts = 0;          // in-bucket, non-DontCare
};

// Greedy protocol over one frame, predictions in descending score order:
// each prediction claims the highest-IoU unmatched in-bucket ground truth
// of its class at or above `iou_threshold`, otherwise it is a false
// positive unless it overlaps an ignored ground truth at the threshold or
// a DontCare region (intersection over prediction area).
MatchOutcome match_greedy(std::span<const EvalDetection> preds,
                          std::span<const EvalGroundTruth> gts,
                          Metric metric, double iou_threshold,
                          const DifficultyBucket& bucket);

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
};
using PRCurve = std::vector<PRPoint>;

// Interpolated average precision in percent: the mean over `points`
// recall samples of the maximum precision at or beyond each sample.
// points must be 11 or 40.
double ap_interp(const PRCurve& curve, int points);

// Pools frames, matches per frame, and returns interpolated AP (percent)
// for the class under the named metric. AOS replaces the precision
// numerator with accumulated orientation similarity (1 + cos dalpha) / 2.
// IoU thresholds follow the benchmark convention: 0.7 for the class named
// "car" (case-insensitive), 0.5 otherwise.
double evaluate(const std::vector<std::vector<EvalDetection>>& preds_by_frame,
                const std::vector<std::vector<EvalGroundTruth>>& gts_by_frame,
                Metric metric, int class_label,
                const std::string& class_name, const DifficultyBucket& bucket,
                int interp_points = 11);

// Arithmetic mean uncertainty keyed by class label; classes without
// detections are absent.
struct LabeledUncertainty {
  int class_label = 0;
  double uncertainty = 0.0;
};
std::map<int, double> mean_uncertainty_per_class(
    std::span<const LabeledUncertainty> dets);

}  // namespace mmlf
