#include "mmlf/fusion_net.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <random>
#include <string>

#include "mmlf/errors.hpp"

namespace mmlf {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

// -[t log p + (1-t) log(1-p)] evaluated from the logit.
double bce_from_logit(double logit, double target) {
  return std::max(logit, 0.0) - target * logit +
         std::log1p(std::exp(-std::abs(logit)));
}

std::vector<double> affine_forward(const AffineLayer& layer,
                                   std::span<const double> x) {
  if (layer.weight.cols != x.size() ||
      layer.bias.size() != layer.weight.rows) {
    throw DimensionError("affine layer shape mismatch");
  }
  std::vector<double> y(layer.weight.rows);
  for (std::size_t r = 0; r < layer.weight.rows; ++r) {
    double acc = layer.bias[r];
    for (std::size_t c = 0; c < layer.weight.cols; ++c) {
      acc += layer.weight(r, c) * x[c];
    }
    y[r] = acc;
  }
  return y;
}

void relu_inplace(std::vector<double>& v) {
  for (double& x : v) {
    x = x > 0.0 ? x : 0.0;
  }
}

std::array<double, 5> feature_array(const ObjsFeature& f) {
  return {f.iou, f.objs3d, f.objs2d, f.dis, f.fused_uncertainty};
}

void check_finite(const ObjsFeature& f) {
  const auto arr = feature_array(f);
  for (double x : arr) {
    if (!std::isfinite(x)) {
      throw InvalidFeatureError("score-network input must be finite");
    }
  }
}

struct ForwardTrace {
  std::vector<double> input;  // 5
  std::vector<double> z1, a1;
  std::vector<double> z2, a2;
  double logit = 0.0;
};

ForwardTrace traced_forward(const ScoreNet& net, const ObjsFeature& f) {
  check_finite(f);
  ForwardTrace t;
  const auto arr = feature_array(f);
  t.input.assign(arr.begin(), arr.end());
  t.z1 = affine_forward(net.l1, t.input);
  t.a1 = t.z1;
  relu_inplace(t.a1);
  t.z2 = affine_forward(net.l2, t.a1);
  t.a2 = t.z2;
  relu_inplace(t.a2);
  t.logit = affine_forward(net.l3, t.a2)[0];
  return t;
}

// Accumulates dL/dz into layer grads and returns dL/dx.
std::vector<double> affine_backward(const AffineLayer& layer,
                                    std::span<const double> x,
                                    std::span<const double> dz,
                                    AffineLayer& grads) {
  std::vector<double> dx(layer.weight.cols, 0.0);
  for (std::size_t r = 0; r < layer.weight.rows; ++r) {
    grads.bias[r] += dz[r];
    for (std::size_t c = 0; c < layer.weight.cols; ++c) {
      grads.weight(r, c) += dz[r] * x[c];
      dx[c] += layer.weight(r, c) * dz[r];
    }
  }
  return dx;
}

double uniform_from(std::mt19937_64& rng, double lo, double hi) {
  // 53-bit mantissa construction keeps the stream identical everywhere.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

void init_affine_uniform(AffineLayer& layer, std::mt19937_64& rng) {
  const double bound =
      std::sqrt(1.0 / static_cast<double>(layer.weight.cols));
  for (double& w : layer.weight.data) {
    w = uniform_from(rng, -bound, bound);
  }
  for (double& b : layer.bias) {
    b = uniform_from(rng, -bound, bound);
  }
}

}  // namespace

std::vector<double> EvidenceHead::apply(std::span<const double> scores) const {
  auto z = affine_forward(affine, scores);
  for (double& v : z) {
    v = softplus(v);
  }
  return z;
}

std::vector<double> EvidenceHead::pre_activation(
    std::span<const double> scores) const {
  return affine_forward(affine, scores);
}

double score_logit(const ScoreNet& net, const ObjsFeature& f) {
  return traced_forward(net, f).logit;
}

double score_forward(const ScoreNet& net, const ObjsFeature& f) {
  return sigmoid(score_logit(net, f));
}

double objectness_loss(const ScoreNet& net, std::span<const ObjsFeature> feats,
                       std::span<const int> targets) {
  if (feats.size() != targets.size()) {
    throw DimensionError("feature/target count mismatch");
  }
  double pos_sum = 0.0, neg_sum = 0.0;
  std::size_t pos_n = 0, neg_n = 0;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const double logit = score_logit(net, feats[i]);
    if (targets[i] != 0) {
      pos_sum += bce_from_logit(logit, 1.0);
      ++pos_n;
    } else {
      neg_sum += bce_from_logit(logit, 0.0);
      ++neg_n;
    }
  }
  double loss = 0.0;
  if (pos_n > 0) loss += pos_sum / static_cast<double>(pos_n);
  if (neg_n > 0) loss += neg_sum / static_cast<double>(neg_n);
  return loss;
}

ObjectnessBackward score_backward(const ScoreNet& net,
                                  std::span<const ObjsFeature> feats,
                                  std::span<const int> targets) {
  if (feats.size() != targets.size()) {
    throw DimensionError("feature/target count mismatch");
  }
  ObjectnessBackward out;
  out.grads = zeros_like(net);

  std::size_t pos_n = 0, neg_n = 0;
  for (int t : targets) {
    (t != 0 ? pos_n : neg_n) += 1;
  }

  for (std::size_t i = 0; i < feats.size(); ++i) {
    const ForwardTrace trace = traced_forward(net, feats[i]);
    const double target = targets[i] != 0 ? 1.0 : 0.0;
    const std::size_t n = targets[i] != 0 ? pos_n : neg_n;
    const double scale = 1.0 / static_cast<double>(n);

    out.loss += scale * bce_from_logit(trace.logit, target);

    const double dlogit = scale * (sigmoid(trace.logit) - target);
    std::vector<double> dz3 = {dlogit};
    auto da2 = affine_backward(net.l3, trace.a2, dz3, out.grads.l3);
    for (std::size_t k = 0; k < da2.size(); ++k) {
      if (trace.z2[k] <= 0.0) da2[k] = 0.0;
    }
    auto da1 = affine_backward(net.l2, trace.a1, da2, out.grads.l2);
    for (std::size_t k = 0; k < da1.size(); ++k) {
      if (trace.z1[k] <= 0.0) da1[k] = 0.0;
    }
    affine_backward(net.l1, trace.input, da1, out.grads.l1);
  }
  return out;
}

double ssl_loss(std::span<const double> alpha, std::size_t target_class,
                double lambda_t) {
  const std::size_t H = alpha.size();
  if (target_class >= H) {
    throw InvalidParameterError("target class out of range");
  }
  if (lambda_t < 0.0) {
    throw InvalidParameterError("lambda_t must be >= 0");
  }
  double strength = 0.0;
  for (double a : alpha) {
    if (!(a >= 1.0)) {
      throw InvalidParameterError("Dirichlet parameters must be >= 1");
    }
    strength += a;
  }

  // Adjusted cross entropy: sum_h y_h (psi(S) - psi(alpha_h)).
  double loss = boost::math::digamma(strength) -
                boost::math::digamma(alpha[target_class]);

  // KL(Dirichlet(alpha~) || Dirichlet(1,...,1)) with the target entry of
  // alpha~ pinned to 1.
  double s_tilde = 0.0;
  for (std::size_t h = 0; h < H; ++h) {
    s_tilde += h == target_class ? 1.0 : alpha[h];
  }
  double kl = std::lgamma(s_tilde) - std::lgamma(static_cast<double>(H));
  const double psi_s_tilde = boost::math::digamma(s_tilde);
  for (std::size_t h = 0; h < H; ++h) {
    const double at = h == target_class ? 1.0 : alpha[h];
    kl -= std::lgamma(at);
    kl += (at - 1.0) * (boost::math::digamma(at) - psi_s_tilde);
  }
  return loss + lambda_t * kl;
}

std::vector<double> ssl_loss_grad(std::span<const double> alpha,
                                  std::size_t target_class, double lambda_t) {
  const std::size_t H = alpha.size();
  if (target_class >= H) {
    throw InvalidParameterError("target class out of range");
  }
  double strength = 0.0;
  double s_tilde = 0.0;
  for (std::size_t h = 0; h < H; ++h) {
    if (!(alpha[h] >= 1.0)) {
      throw InvalidParameterError("Dirichlet parameters must be >= 1");
    }
    strength += alpha[h];
    s_tilde += h == target_class ? 1.0 : alpha[h];
  }
  const double psi1_strength = boost::math::trigamma(strength);
  const double psi1_s_tilde = boost::math::trigamma(s_tilde);

  std::vector<double> grad(H);
  for (std::size_t h = 0; h < H; ++h) {
    double g = psi1_strength;
    if (h == target_class) {
      g -= boost::math::trigamma(alpha[h]);
    } else {
      // d KL / d alpha~_h, and alpha~_h = alpha_h off the target class.
      g += lambda_t * ((alpha[h] - 1.0) * boost::math::trigamma(alpha[h]) -
                       (s_tilde - static_cast<double>(H)) * psi1_s_tilde);
    }
    grad[h] = g;
  }
  return grad;
}

void adam_step(std::vector<std::span<double>> params,
               std::vector<std::span<const double>> grads, AdamState& state,
               double lr) {
  if (params.size() != grads.size()) {
    throw DimensionError("parameter/gradient block count mismatch");
  }
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t b = 0; b < params.size(); ++b) {
      state.m[b].assign(params[b].size(), 0.0);
      state.v[b].assign(params[b].size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw DimensionError("Adam state does not match block count");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() ||
        params[b].size() != state.m[b].size()) {
      throw DimensionError("Adam block shape mismatch");
    }
    for (std::size_t k = 0; k < params[b].size(); ++k) {
      const double g = grads[b][k];
      state.m[b][k] = state.beta1 * state.m[b][k] + (1.0 - state.beta1) * g;
      state.v[b][k] =
          state.beta2 * state.v[b][k] + (1.0 - state.beta2) * g * g;
      const double m_hat = state.m[b][k] / bc1;
      const double v_hat = state.v[b][k] / bc2;
      params[b][k] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

void sgd_step(std::vector<std::span<double>> params,
              std::vector<std::span<const double>> grads, double lr) {
  if (params.size() != grads.size()) {
    throw DimensionError("parameter/gradient block count mismatch");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size()) {
      throw DimensionError("SGD block shape mismatch");
    }
    for (std::size_t k = 0; k < params[b].size(); ++k) {
      params[b][k] -= lr * grads[b][k];
    }
  }
}

std::vector<std::span<double>> param_blocks(ScoreNet& net) {
  return {net.l1.weight.data, net.l1.bias, net.l2.weight.data, net.l2.bias,
          net.l3.weight.data, net.l3.bias};
}

std::vector<std::span<double>> param_blocks(EvidenceHead& head) {
  return {head.affine.weight.data, head.affine.bias};
}

std::vector<std::span<const double>> grad_blocks(const ScoreNet& net) {
  return {net.l1.weight.data, net.l1.bias, net.l2.weight.data, net.l2.bias,
          net.l3.weight.data, net.l3.bias};
}

std::vector<std::span<const double>> grad_blocks(const EvidenceHead& head) {
  return {head.affine.weight.data, head.affine.bias};
}

FusionParams init_params(std::uint64_t seed, std::size_t num_classes,
                         double evidence_scale) {
  if (num_classes < 2) {
    throw DimensionError("need at least 2 classes");
  }
  FusionParams p;
  p.num_classes = num_classes;
  std::mt19937_64 rng(seed);
  init_affine_uniform(p.net.l1, rng);
  init_affine_uniform(p.net.l2, rng);
  init_affine_uniform(p.net.l3, rng);

  p.head3d = EvidenceHead(num_classes);
  p.head2d = EvidenceHead(num_classes);
  for (std::size_t h = 0; h < num_classes; ++h) {
    p.head3d.affine.weight(h, h) = evidence_scale;
    p.head2d.affine.weight(h, h) = evidence_scale;
  }
  return p;
}

ScoreNetGrads zeros_like(const ScoreNet&) { return ScoreNet{}; }

EvidenceHeadGrads zeros_like(const EvidenceHead& head) {
  return EvidenceHead(head.affine.weight.rows);
}

}  // namespace mmlf
