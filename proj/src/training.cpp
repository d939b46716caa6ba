#include "mmlf/training.hpp"

#include <algorithm>
#include <cmath>

#include "mmlf/errors.hpp"

namespace mmlf {

namespace {

std::size_t argmax_belief(const Opinion& o) {
  std::size_t best = 0;
  for (std::size_t h = 1; h < o.belief.size(); ++h) {
    if (o.belief[h] > o.belief[best]) {
      best = h;
    }
  }
  return best;
}

double clamped_bce(double p, double target) {
  constexpr double eps = 1e-12;
  p = std::clamp(p, eps, 1.0 - eps);
  return -(target * std::log(p) + (1.0 - target) * std::log1p(-p));
}

// Adjoints of one modality opinion inside a Dempster combination.
struct OpinionAdjoint {
  std::vector<double> d_belief;
  double d_uncertainty = 0.0;
};

// Pulls d(loss)/d(alpha_fused) back to the two source opinions of
// combine_opinions.
void combine_backward(const Opinion& a, const Opinion& b, const Opinion& fused,
                      std::span<const double> d_alpha_fused,
                      OpinionAdjoint& adj_a, OpinionAdjoint& adj_b) {
  const std::size_t H = fused.num_classes;
  const double u_f = fused.uncertainty;

  // alpha_f[h] = belief_f[h] * H / u_f + 1
  std::vector<double> d_belief_f(H);
  double d_u_f = 0.0;
  for (std::size_t h = 0; h < H; ++h) {
    d_belief_f[h] = d_alpha_fused[h] * static_cast<double>(H) / u_f;
    d_u_f -= d_alpha_fused[h] * fused.belief[h] * static_cast<double>(H) /
             (u_f * u_f);
  }

  const double conflict_norm = u_f > 0.0
                                   ? a.uncertainty * b.uncertainty / u_f
                                   : 1.0;  // = 1 - C
  // <d_belief_f, belief_f> + d_u_f * u_f appears in every conflict path.
  double mass_dot = d_u_f * u_f;
  for (std::size_t h = 0; h < H; ++h) {
    mass_dot += d_belief_f[h] * fused.belief[h];
  }

  const double sum_belief_a = 1.0 - a.uncertainty;
  const double sum_belief_b = 1.0 - b.uncertainty;

  adj_a.d_belief.assign(H, 0.0);
  adj_b.d_belief.assign(H, 0.0);
  double d_u_a = 0.0, d_u_b = 0.0;
  for (std::size_t h = 0; h < H; ++h) {
    adj_a.d_belief[h] =
        (d_belief_f[h] * (b.belief[h] + b.uncertainty) +
         (sum_belief_b - b.belief[h]) * mass_dot) /
        conflict_norm;
    adj_b.d_belief[h] =
        (d_belief_f[h] * (a.belief[h] + a.uncertainty) +
         (sum_belief_a - a.belief[h]) * mass_dot) /
        conflict_norm;
    d_u_a += d_belief_f[h] * b.belief[h] / conflict_norm;
    d_u_b += d_belief_f[h] * a.belief[h] / conflict_norm;
  }
  d_u_a += d_u_f * b.uncertainty / conflict_norm;
  d_u_b += d_u_f * a.uncertainty / conflict_norm;
  adj_a.d_uncertainty = d_u_a;
  adj_b.d_uncertainty = d_u_b;
}

// Pulls an opinion adjoint back to the evidence vector it was built from:
// belief_h = e_h / S, u = H / S, S = sum(e) + H.
void opinion_backward(const Opinion& o, const OpinionAdjoint& adj,
                      std::span<double> d_evidence) {
  const std::size_t H = o.num_classes;
  double dot = adj.d_uncertainty * o.uncertainty;
  for (std::size_t h = 0; h < H; ++h) {
    dot += adj.d_belief[h] * o.belief[h];
  }
  for (std::size_t h = 0; h < H; ++h) {
    d_evidence[h] += (adj.d_belief[h] - dot) / o.strength;
  }
}

// softplus(W s + c) backward: folds d(loss)/d(evidence) into head grads.
void head_backward(const EvidenceHead& head, std::span<const double> scores,
                   std::span<const double> d_evidence,
                   EvidenceHeadGrads& grads) {
  const auto z = head.pre_activation(scores);
  for (std::size_t h = 0; h < z.size(); ++h) {
    const double dz = d_evidence[h] * sigmoid(z[h]);
    grads.affine.bias[h] += dz;
    for (std::size_t k = 0; k < scores.size(); ++k) {
      grads.affine.weight(h, k) += dz * scores[k];
    }
  }
}

}  // namespace

std::vector<PairTarget> assign_targets(
    std::span<const HypotheticalPair> pairs, const MatchGrid& grid,
    std::span<const GtBox2D> gts, std::span<const double> iou_thresholds) {
  std::vector<PairTarget> targets(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const HypotheticalPair& pair = pairs[p];
    const std::size_t cls = argmax_belief(pair.fused);
    if (cls >= iou_thresholds.size()) {
      throw DimensionError("class index outside threshold table");
    }
    const auto& proj = grid.projected[pair.i];
    if (!proj) {
      continue;
    }
    double best = 0.0;
    for (const GtBox2D& gt : gts) {
      if (gt.class_label != static_cast<int>(cls)) {
        continue;
      }
      best = std::max(best, iou_axis_aligned(*proj, gt.bbox));
    }
    if (best >= iou_thresholds[cls]) {
      targets[p].is_object = true;
      targets[p].class_label = static_cast<int>(cls);
    }
  }
  return targets;
}

double total_loss(std::span<const HypotheticalPair> pairs,
                  std::span<const double> scores,
                  std::span<const PairTarget> targets, double lambda_t) {
  if (pairs.size() != scores.size() || pairs.size() != targets.size()) {
    throw DimensionError("pairs, scores and targets must align");
  }
  double loss = 0.0;

  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (!targets[p].is_object) {
      continue;
    }
    const auto y = static_cast<std::size_t>(targets[p].class_label);
    const HypotheticalPair& pair = pairs[p];
    loss += ssl_loss(pair.opinion3d.alpha, y, lambda_t);
    if (pair.is_matched) {
      loss += ssl_loss(pair.fused.alpha, y, lambda_t);
      loss += ssl_loss(pair.opinion2d->alpha, y, lambda_t);
    }
  }

  double pos_sum = 0.0, neg_sum = 0.0;
  std::size_t pos_n = 0, neg_n = 0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (targets[p].is_object) {
      pos_sum += clamped_bce(scores[p], 1.0);
      ++pos_n;
    } else {
      neg_sum += clamped_bce(scores[p], 0.0);
      ++neg_n;
    }
  }
  if (pos_n > 0) loss += pos_sum / static_cast<double>(pos_n);
  if (neg_n > 0) loss += neg_sum / static_cast<double>(neg_n);
  return loss;
}

FrameGradients total_loss_backward(const std::vector<Detection3D>& dets3d,
                                   const std::vector<Detection2D>& dets2d,
                                   std::span<const HypotheticalPair> pairs,
                                   const FusionParams& params,
                                   std::span<const PairTarget> targets,
                                   double lambda_t) {
  if (pairs.size() != targets.size()) {
    throw DimensionError("pairs and targets must align");
  }
  const std::size_t H = params.num_classes;

  FrameGradients out;
  out.net = zeros_like(params.net);
  out.head3d = zeros_like(params.head3d);
  out.head2d = zeros_like(params.head2d);

  // d(loss)/d(evidence) per detection, accumulated across its pairs.
  std::vector<std::vector<double>> d_ev3(dets3d.size(),
                                         std::vector<double>(H, 0.0));
  std::vector<std::vector<double>> d_ev2(dets2d.size(),
                                         std::vector<double>(H, 0.0));

  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (!targets[p].is_object) {
      continue;
    }
    const auto y = static_cast<std::size_t>(targets[p].class_label);
    const HypotheticalPair& pair = pairs[p];

    out.loss += ssl_loss(pair.opinion3d.alpha, y, lambda_t);
    {
      // alpha_3d = evidence_3d + 1, so the ssl gradient lands directly.
      const auto g = ssl_loss_grad(pair.opinion3d.alpha, y, lambda_t);
      for (std::size_t h = 0; h < H; ++h) {
        d_ev3[pair.i][h] += g[h];
      }
    }

    if (pair.is_matched) {
      out.loss += ssl_loss(pair.opinion2d->alpha, y, lambda_t);
      {
        const auto g = ssl_loss_grad(pair.opinion2d->alpha, y, lambda_t);
        for (std::size_t h = 0; h < H; ++h) {
          d_ev2[pair.j][h] += g[h];
        }
      }

      out.loss += ssl_loss(pair.fused.alpha, y, lambda_t);
      const auto g_fused = ssl_loss_grad(pair.fused.alpha, y, lambda_t);
      OpinionAdjoint adj3, adj2;
      combine_backward(pair.opinion3d, *pair.opinion2d, pair.fused, g_fused,
                       adj3, adj2);
      opinion_backward(pair.opinion3d, adj3, d_ev3[pair.i]);
      opinion_backward(*pair.opinion2d, adj2, d_ev2[pair.j]);
    }
  }

  for (std::size_t i = 0; i < dets3d.size(); ++i) {
    head_backward(params.head3d, dets3d[i].class_scores, d_ev3[i],
                  out.head3d);
  }
  for (std::size_t j = 0; j < dets2d.size(); ++j) {
    head_backward(params.head2d, dets2d[j].class_scores, d_ev2[j],
                  out.head2d);
  }

  // Objectness: the score network sees pair features as constants.
  std::vector<ObjsFeature> feats(pairs.size());
  std::vector<int> obj_targets(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    feats[p] = pair_feature(pairs[p]);
    obj_targets[p] = targets[p].is_object ? 1 : 0;
  }
  auto obj = score_backward(params.net, feats, obj_targets);
  out.loss += obj.loss;
  out.net = std::move(obj.grads);
  return out;
}

}  // namespace mmlf
