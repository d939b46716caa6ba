#include "mmlf/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "mmlf/errors.hpp"

namespace mmlf {

namespace {

double metric_iou(Metric metric, const EvalDetection& pred,
                  const EvalGroundTruth& gt) {
  switch (metric) {
    case Metric::k2D:
    case Metric::kAOS:
      return iou_axis_aligned(pred.bbox, gt.bbox);
    case Metric::kBEV:
      return rotated_bev_iou(pred.box, gt.box);
    case Metric::k3D:
      return iou_3d(pred.box, gt.box);
  }
  return 0.0;
}

// Overlap with a DontCare region, normalized by the prediction area.
double dontcare_overlap(const EvalDetection& pred, const EvalGroundTruth& dc) {
  const double ix = std::min(pred.bbox.x2, dc.bbox.x2) -
                    std::max(pred.bbox.x1, dc.bbox.x1);
  const double iy = std::min(pred.bbox.y2, dc.bbox.y2) -
                    std::max(pred.bbox.y1, dc.bbox.y1);
  if (ix <= 0.0 || iy <= 0.0 || pred.bbox.area() <= 0.0) {
    return 0.0;
  }
  return ix * iy / pred.bbox.area();
}

bool in_bucket(const EvalGroundTruth& gt, const DifficultyBucket& bucket) {
  return gt.bbox.height() >= bucket.min_height &&
         gt.occlusion <= bucket.max_occlusion &&
         gt.truncation <= bucket.max_truncation;
}

bool iequal(const std::string& a, const char* b) {
  std::size_t i = 0;
  for (; i < a.size() && b[i] != '\0'; ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return i == a.size() && b[i] == '\0';
}

}  // namespace

Metric metric_from_name(const std::string& name) {
  if (name == "2d") return Metric::k2D;
  if (name == "aos") return Metric::kAOS;
  if (name == "bev") return Metric::kBEV;
  if (name == "3d") return Metric::k3D;
  throw InvalidParameterError("unknown metric '" + name +
                              "' (use 2d, aos, bev or 3d)");
}

std::string metric_name(Metric m) {
  switch (m) {
    case Metric::k2D: return "2d";
    case Metric::kAOS: return "aos";
    case Metric::kBEV: return "bev";
    case Metric::k3D: return "3d";
  }
  return "?";
}

const std::array<DifficultyBucket, 3>& standard_buckets() {
  static const std::array<DifficultyBucket, 3> buckets = {{
      {"Easy", 40.0, 0, 0.15},
      {"Moderate", 25.0, 1, 0.30},
      {"Hard", 25.0, 2, 0.50},
  }};
  return buckets;
}

MatchOutcome match_greedy(std::span<const EvalDetection> preds,
                          std::span<const EvalGroundTruth> gts,
                          Metric metric, double iou_threshold,
                          const DifficultyBucket& bucket) {
  MatchOutcome out;
  out.outcome.assign(preds.size(), PredOutcome::kFalsePositive);
  out.orientation_sim.assign(preds.size(), 0.0);
  out.gt_matched.assign(gts.size(), false);

  for (const EvalGroundTruth& gt : gts) {
    if (!gt.dont_care && in_bucket(gt, bucket)) {
      ++out.num_valid_gts;
    }
  }

  for (std::size_t p = 0; p < preds.size(); ++p) {
    const EvalDetection& pred = preds[p];
    long best_gt = -1;
    double best_iou = iou_threshold;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const EvalGroundTruth& gt = gts[g];
      if (gt.dont_care || out.gt_matched[g] ||
          gt.class_label != pred.class_label || !in_bucket(gt, bucket)) {
        continue;
      }
      const double iou = metric_iou(metric, pred, gt);
      if (iou >= best_iou && (best_gt < 0 || iou > best_iou)) {
        best_iou = iou;
        best_gt = static_cast<long>(g);
      }
    }
    if (best_gt >= 0) {
      out.gt_matched[static_cast<std::size_t>(best_gt)] = true;
      out.outcome[p] = PredOutcome::kTruePositive;
      const double dalpha =
          pred.alpha - gts[static_cast<std::size_t>(best_gt)].alpha;
      out.orientation_sim[p] = (1.0 + std::cos(dalpha)) / 2.0;
      continue;
    }
    // Not a hit: ignore predictions explained by out-of-bucket ground
    // truths of the same class or by DontCare regions.
    bool ignored = false;
    for (const EvalGroundTruth& gt : gts) {
      if (gt.dont_care) {
        if (dontcare_overlap(pred, gt) >= iou_threshold) {
          ignored = true;
          break;
        }
        continue;
      }
      if (gt.class_label == pred.class_label && !in_bucket(gt, bucket) &&
          metric_iou(metric, pred, gt) >= iou_threshold) {
        ignored = true;
        break;
      }
    }
    if (ignored) {
      out.outcome[p] = PredOutcome::kIgnored;
    }
  }
  return out;
}

double ap_interp(const PRCurve& curve, int points) {
  if (points != 11 && points != 40) {
    throw InvalidParameterError("interpolation points must be 11 or 40");
  }
  if (curve.empty()) {
    return 0.0;
  }
  double total = 0.0;
  for (int k = 0; k < points; ++k) {
    // 11-point: recall 0, 0.1, ..., 1.  40-point: 1/40, 2/40, ..., 1.
    const double r = points == 11 ? static_cast<double>(k) / 10.0
                                  : static_cast<double>(k + 1) / 40.0;
    double best = 0.0;
    for (const PRPoint& pt : curve) {
      if (pt.recall >= r - 1e-12) {
        best = std::max(best, pt.precision);
      }
    }
    total += best;
  }
  return total / static_cast<double>(points) * 100.0;
}

double evaluate(const std::vector<std::vector<EvalDetection>>& preds_by_frame,
                const std::vector<std::vector<EvalGroundTruth>>& gts_by_frame,
                Metric metric, int class_label,
                const std::string& class_name, const DifficultyBucket& bucket,
                int interp_points) {
  if (preds_by_frame.size() != gts_by_frame.size()) {
    throw DimensionError("prediction and ground-truth frame counts differ");
  }
  const double iou_threshold = iequal(class_name, "car") ? 0.7 : 0.5;

  struct Scored {
    double score;
    bool is_tp;
    double os;
  };
  std::vector<Scored> pooled;
  std::size_t num_gts = 0;

  for (std::size_t f = 0; f < preds_by_frame.size(); ++f) {
    std::vector<EvalDetection> preds;
    for (const EvalDetection& d : preds_by_frame[f]) {
      if (d.class_label == class_label) {
        preds.push_back(d);
      }
    }
    std::stable_sort(preds.begin(), preds.end(),
                     [](const EvalDetection& a, const EvalDetection& b) {
                       return a.score > b.score;
                     });
    std::vector<EvalGroundTruth> gts;
    for (const EvalGroundTruth& g : gts_by_frame[f]) {
      if (g.dont_care || g.class_label == class_label) {
        gts.push_back(g);
      }
    }
    const MatchOutcome m =
        match_greedy(preds, gts, metric, iou_threshold, bucket);
    num_gts += m.num_valid_gts;
    for (std::size_t p = 0; p < preds.size(); ++p) {
      if (m.outcome[p] == PredOutcome::kIgnored) {
        continue;
      }
      pooled.push_back({preds[p].score,
                        m.outcome[p] == PredOutcome::kTruePositive,
                        m.orientation_sim[p]});
    }
  }

  if (num_gts == 0 || pooled.empty()) {
    return 0.0;
  }

  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const Scored& a, const Scored& b) {
                     return a.score > b.score;
                   });

  PRCurve curve;
  curve.reserve(pooled.size());
  double tp = 0.0, fp = 0.0, os_sum = 0.0;
  for (const Scored& s : pooled) {
    if (s.is_tp) {
      tp += 1.0;
      os_sum += s.os;
    } else {
      fp += 1.0;
    }
    const double numerator = metric == Metric::kAOS ? os_sum : tp;
    curve.push_back({tp / static_cast<double>(num_gts),
                     numerator / (tp + fp)});
  }
  return ap_interp(curve, interp_points);
}

std::map<int, double> mean_uncertainty_per_class(
    std::span<const LabeledUncertainty> dets) {
  std::map<int, double> sums;
  std::map<int, std::size_t> counts;
  for (const LabeledUncertainty& d : dets) {
    sums[d.class_label] += d.uncertainty;
    counts[d.class_label] += 1;
  }
  std::map<int, double> means;
  for (const auto& [label, sum] : sums) {
    means[label] = sum / static_cast<double>(counts[label]);
  }
  return means;
}

}  // namespace mmlf
