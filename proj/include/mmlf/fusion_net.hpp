#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mmlf {

// Dense row-major matrix. Small enough here that nothing fancier is needed.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) {
    return data[r * cols + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
};

// y = weight * x + bias
struct AffineLayer {
  Mat weight;
  std::vector<double> bias;

  AffineLayer() = default;
  AffineLayer(std::size_t out, std::size_t in)
      : weight(out, in), bias(out, 0.0) {}
};

// The score-fusion network: three affine maps 5 -> 18 -> 36 -> 1 applied
// independently per pair (the 1x1-convolution layout collapses to this),
// ReLU between layers, sigmoid on the output.
struct ScoreNet {
  AffineLayer l1{18, 5};
  AffineLayer l2{36, 18};
  AffineLayer l3{1, 36};
};

// Per-modality map from detector class scores to non-negative evidence:
// softplus(weight * scores + bias).
struct EvidenceHead {
  AffineLayer affine;

  EvidenceHead() = default;
  explicit EvidenceHead(std::size_t num_classes)
      : affine(num_classes, num_classes) {}

  std::vector<double> apply(std::span<const double> scores) const;
  // The affine output before the softplus.
  std::vector<double> pre_activation(std::span<const double> scores) const;
};

double sigmoid(double x);
double softplus(double x);

// Gradients share the parameter layout.
using ScoreNetGrads = ScoreNet;
using EvidenceHeadGrads = EvidenceHead;

// Everything trainable, plus the class count they are shaped for.
struct FusionParams {
  ScoreNet net;
  EvidenceHead head3d;
  EvidenceHead head2d;
  std::size_t num_classes = 0;
};

// The five input channels of the score network, one per hypothetical pair.
struct ObjsFeature {
  double iou = 0.0;
  double objs3d = 0.0;
  double objs2d = 0.0;  // -10 sentinel for fallback pairs
  double dis = 0.0;
  double fused_uncertainty = 1.0;
};

// sigmoid(l3(relu(l2(relu(l1(f)))))), strictly inside (0, 1).
// Throws InvalidFeatureError on non-finite input.
double score_forward(const ScoreNet& net, const ObjsFeature& f);

// Pre-sigmoid output; useful for numerically stable loss evaluation.
double score_logit(const ScoreNet& net, const ObjsFeature& f);

// Binary cross entropy of Loss_Obj: the mean over positive-target entries
// plus the mean over negative-target entries. Empty partitions contribute 0.
double objectness_loss(const ScoreNet& net, std::span<const ObjsFeature> feats,
                       std::span<const int> targets);

// Reverse-mode gradients of objectness_loss with respect to the network
// parameters. Returns the loss value alongside the gradients.
struct ObjectnessBackward {
  double loss = 0.0;
  ScoreNetGrads grads;
};
ObjectnessBackward score_backward(const ScoreNet& net,
                                  std::span<const ObjsFeature> feats,
                                  std::span<const int> targets);

// Sample-specific classification loss on Dirichlet parameters alpha
// (all >= 1) with one-hot target `target_class`:
//   sum_h y_h (psi(S) - psi(alpha_h))
//     + lambda_t * KL(Dirichlet(y + (1 - y) .* alpha) || Dirichlet(1,...,1))
double ssl_loss(std::span<const double> alpha, std::size_t target_class,
                double lambda_t);

// d ssl_loss / d alpha, same conventions as ssl_loss.
std::vector<double> ssl_loss_grad(std::span<const double> alpha,
                                  std::size_t target_class, double lambda_t);

// Bias-corrected Adam over parameter blocks. Moment buffers are created
// lazily on the first step and must keep matching the block shapes after.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

void adam_step(std::vector<std::span<double>> params,
               std::vector<std::span<const double>> grads, AdamState& state,
               double lr = 0.003);

// p <- p - lr * g
void sgd_step(std::vector<std::span<double>> params,
              std::vector<std::span<const double>> grads, double lr = 0.003);

// Mutable views of every parameter block, in a fixed documented order
// (l1.weight, l1.bias, l2.weight, l2.bias, l3.weight, l3.bias) and
// (affine.weight, affine.bias) respectively.
std::vector<std::span<double>> param_blocks(ScoreNet& net);
std::vector<std::span<double>> param_blocks(EvidenceHead& head);
std::vector<std::span<const double>> grad_blocks(const ScoreNet& net);
std::vector<std::span<const double>> grad_blocks(const EvidenceHead& head);

// Deterministic initialization: score-net entries uniform in
// [-sqrt(1/fan_in), +sqrt(1/fan_in)], evidence heads evidence_scale * I
// with zero bias so initial evidence is a scaled pass-through of the
// detector scores.
FusionParams init_params(std::uint64_t seed, std::size_t num_classes,
                         double evidence_scale = 25.0);

ScoreNetGrads zeros_like(const ScoreNet& net);
EvidenceHeadGrads zeros_like(const EvidenceHead& head);

}  // namespace mmlf
