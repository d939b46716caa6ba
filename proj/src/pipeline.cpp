#include "mmlf/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "mmlf/errors.hpp"

namespace mmlf {

namespace {

int argmax_class(std::span<const double> beliefs) {
  std::size_t best = 0;
  for (std::size_t h = 1; h < beliefs.size(); ++h) {
    if (beliefs[h] > beliefs[best]) {
      best = h;
    }
  }
  return static_cast<int>(best);
}

void sort_by_score_desc(std::vector<FusedDetection>& dets) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const FusedDetection& a, const FusedDetection& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.source_i < b.source_i;
                   });
}

}  // namespace

std::vector<std::size_t> select_best_per_candidate(
    std::span<const HypotheticalPair> pairs, std::span<const double> scores) {
  if (pairs.size() != scores.size()) {
    throw DimensionError("pairs and scores must align");
  }
  std::vector<std::size_t> best;  // keyed by position in `best` via moved map
  std::vector<std::size_t> order;
  // candidate index -> position of its best pair, lazily discovered
  std::vector<long> slot;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const std::size_t i = pairs[p].i;
    if (i >= slot.size()) {
      slot.resize(i + 1, -1);
    }
    if (slot[i] < 0) {
      slot[i] = static_cast<long>(best.size());
      best.push_back(p);
      continue;
    }
    const std::size_t cur = best[static_cast<std::size_t>(slot[i])];
    const bool better =
        scores[p] > scores[cur] ||
        (scores[p] == scores[cur] &&
         (pairs[p].entry.iou > pairs[cur].entry.iou ||
          (pairs[p].entry.iou == pairs[cur].entry.iou &&
           pairs[p].j < pairs[cur].j)));
    if (better) {
      best[static_cast<std::size_t>(slot[i])] = p;
    }
  }
  std::sort(best.begin(), best.end(), [&](std::size_t a, std::size_t b) {
    return pairs[a].i < pairs[b].i;
  });
  return best;
}

std::vector<FusedDetection> nms(const std::vector<FusedDetection>& dets,
                                double iou_thresh) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (dets[a].score != dets[b].score)
                       return dets[a].score > dets[b].score;
                     return dets[a].source_i < dets[b].source_i;
                   });
  std::vector<FusedDetection> kept;
  for (std::size_t k : order) {
    bool suppressed = false;
    for (const FusedDetection& winner : kept) {
      if (winner.class_label == dets[k].class_label &&
          rotated_bev_iou(winner.box3d, dets[k].box3d) >= iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) {
      kept.push_back(dets[k]);
    }
  }
  return kept;
}

std::vector<FusedDetection> filter_uncertainty(
    const std::vector<FusedDetection>& dets, double u_max) {
  std::vector<FusedDetection> kept;
  kept.reserve(dets.size());
  for (const FusedDetection& d : dets) {
    if (d.uncertainty <= u_max) {
      kept.push_back(d);
    }
  }
  return kept;
}

std::vector<FusedDetection> fuse_frame(const std::vector<Detection3D>& dets3d,
                                       const std::vector<Detection2D>& dets2d,
                                       const Calibration& calib,
                                       const FusionParams& params,
                                       const PipelineConfig& cfg) {
  if (dets3d.empty()) {
    return {};
  }
  const MatchGrid grid =
      build_match_matrix(dets3d, dets2d, calib, cfg.max_range);
  auto pairs = enumerate_pairs(grid, dets3d, dets2d, params.head3d,
                               params.head2d, cfg.pairing_floor);
  fuse_all_pairs(pairs);

  std::vector<double> scores(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    scores[p] = score_forward(params.net, pair_feature(pairs[p]));
  }

  std::vector<FusedDetection> dets;
  for (std::size_t idx : select_best_per_candidate(pairs, scores)) {
    const HypotheticalPair& pair = pairs[idx];
    if (scores[idx] < cfg.conf_threshold) {
      continue;
    }
    FusedDetection d;
    d.box3d = dets3d[pair.i].box;
    d.score = scores[idx];
    d.beliefs = pair.fused.belief;
    d.uncertainty = pair.fused.uncertainty;
    d.class_label = argmax_class(d.beliefs);
    d.source_i = pair.i;
    d.source_j = pair.j;
    dets.push_back(std::move(d));
  }

  dets = nms(dets, cfg.nms_iou);
  dets = filter_uncertainty(dets, cfg.u_max);
  sort_by_score_desc(dets);
  return dets;
}

TrainResult train(const std::vector<TrainingFrame>& frames,
                  const TrainConfig& cfg) {
  if (cfg.target_iou_by_class.size() != cfg.num_classes) {
    throw DimensionError("target IoU table must cover every class");
  }
  TrainResult result;
  result.params =
      init_params(cfg.seed, cfg.num_classes, cfg.pipeline.evidence_scale);

  AdamState adam;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lambda_t =
        cfg.pipeline.lambda_anneal_epochs == 0
            ? 1.0
            : std::min(1.0, static_cast<double>(epoch) /
                                static_cast<double>(
                                    cfg.pipeline.lambda_anneal_epochs));
    double epoch_loss = 0.0;
    std::size_t steps = 0;
    for (const TrainingFrame& frame : frames) {
      if (frame.gts.empty()) {
        if (epoch == 1) {
          ++result.skipped_frames;
        }
        continue;
      }
      ++steps;
      if (frame.dets3d.empty()) {
        continue;  // nothing to fuse, zero loss
      }
      const MatchGrid grid = build_match_matrix(frame.dets3d, frame.dets2d,
                                                frame.calib,
                                                cfg.pipeline.max_range);
      auto pairs =
          enumerate_pairs(grid, frame.dets3d, frame.dets2d,
                          result.params.head3d, result.params.head2d,
                          cfg.pipeline.pairing_floor);
      fuse_all_pairs(pairs);
      const auto targets =
          assign_targets(pairs, grid, frame.gts, cfg.target_iou_by_class);
      auto grads = total_loss_backward(frame.dets3d, frame.dets2d, pairs,
                                       result.params, targets, lambda_t);
      epoch_loss += grads.loss;

      auto head_params = param_blocks(result.params.head3d);
      {
        auto more = param_blocks(result.params.head2d);
        head_params.insert(head_params.end(), more.begin(), more.end());
      }
      auto head_grads = grad_blocks(grads.head3d);
      {
        auto more = grad_blocks(grads.head2d);
        head_grads.insert(head_grads.end(), more.begin(), more.end());
      }
      adam_step(head_params, head_grads, adam, cfg.lr);
      sgd_step(param_blocks(result.params.net), grad_blocks(grads.net),
               cfg.lr);
    }
    result.epoch_losses.push_back(
        steps > 0 ? epoch_loss / static_cast<double>(steps) : 0.0);
  }
  return result;
}

}  // namespace mmlf
