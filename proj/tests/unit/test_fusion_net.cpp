#include <cmath>
#include <random>

#include "doctest.h"
#include "mmlf/errors.hpp"
#include "mmlf/fusion_net.hpp"
#include "test_util.hpp"

using namespace mmlf;

namespace {

ObjsFeature random_feature(std::mt19937_64& rng) {
  ObjsFeature f;
  f.iou = test::uniform(rng, 0.0, 1.0);
  f.objs3d = test::uniform(rng, 0.0, 1.0);
  f.objs2d = rng() % 5 == 0 ? -10.0 : test::uniform(rng, 0.0, 1.0);
  f.dis = test::uniform(rng, 0.0, 1.0);
  f.fused_uncertainty = test::uniform(rng, 0.01, 1.0);
  return f;
}

// Plain-loop re-evaluation of the three affine maps, written without the
// library's layer machinery.
double straight_line_score(const ScoreNet& net, const ObjsFeature& f) {
  const double in[5] = {f.iou, f.objs3d, f.objs2d, f.dis,
                        f.fused_uncertainty};
  double h1[18];
  for (int r = 0; r < 18; ++r) {
    h1[r] = net.l1.bias[r];
    for (int c = 0; c < 5; ++c) h1[r] += net.l1.weight(r, c) * in[c];
    if (h1[r] < 0) h1[r] = 0;
  }
  double h2[36];
  for (int r = 0; r < 36; ++r) {
    h2[r] = net.l2.bias[r];
    for (int c = 0; c < 18; ++c) h2[r] += net.l2.weight(r, c) * h1[c];
    if (h2[r] < 0) h2[r] = 0;
  }
  double z = net.l3.bias[0];
  for (int c = 0; c < 36; ++c) z += net.l3.weight(0, c) * h2[c];
  return 1.0 / (1.0 + std::exp(-z));
}

bool gradient_close(double analytic, double numeric, double tol) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1.0});
  return std::abs(analytic - numeric) <= tol * scale;
}

// Sign pattern of every hidden ReLU over the batch. Central differences
// are meaningless on coordinates where the step flips an activation, so
// the checks below skip (rare) pattern changes.
std::vector<bool> relu_pattern(const ScoreNet& net,
                               std::span<const ObjsFeature> feats) {
  std::vector<bool> pattern;
  for (const ObjsFeature& f : feats) {
    const double in[5] = {f.iou, f.objs3d, f.objs2d, f.dis,
                          f.fused_uncertainty};
    double h1[18];
    for (int r = 0; r < 18; ++r) {
      h1[r] = net.l1.bias[r];
      for (int c = 0; c < 5; ++c) h1[r] += net.l1.weight(r, c) * in[c];
      pattern.push_back(h1[r] > 0);
      if (h1[r] < 0) h1[r] = 0;
    }
    for (int r = 0; r < 36; ++r) {
      double z = net.l2.bias[r];
      for (int c = 0; c < 18; ++c) z += net.l2.weight(r, c) * h1[c];
      pattern.push_back(z > 0);
    }
  }
  return pattern;
}

}  // namespace

TEST_CASE("score forward: zero net, range, straight-line oracle") {
  const ScoreNet zero_net;
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) {
    CHECK(score_forward(zero_net, random_feature(rng)) == 0.5);
  }

  for (int k = 0; k < 10000; ++k) {
    const FusionParams p = init_params(rng(), 3);
    const double s = score_forward(p.net, random_feature(rng));
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }

  for (int k = 0; k < 200; ++k) {
    const FusionParams p = init_params(k + 1, 3);
    const ObjsFeature f = random_feature(rng);
    CHECK(score_forward(p.net, f) ==
          doctest::Approx(straight_line_score(p.net, f)).epsilon(1e-12));
  }

  CHECK_THROWS_AS(
      score_forward(zero_net,
                    ObjsFeature{std::nan(""), 0.0, 0.0, 0.0, 0.5}),
      InvalidFeatureError);
}

TEST_CASE("objectness loss values") {
  const ScoreNet zero_net;  // every score is 0.5
  const std::vector<ObjsFeature> one = {ObjsFeature{1, 1, 1, 0, 0.1}};
  const std::vector<int> pos = {1};
  CHECK(objectness_loss(zero_net, one, pos) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // Confident correct prediction: drive the logit up through the bias.
  ScoreNet confident;
  confident.l3.bias[0] = 30.0;
  const auto bwd = score_backward(confident, one, pos);
  CHECK(bwd.loss <= 1e-12);
  for (const auto& block : grad_blocks(confident)) {
    (void)block;
  }
  double grad_mag = 0.0;
  for (const auto& block : grad_blocks(bwd.grads)) {
    for (double g : block) grad_mag += std::abs(g);
  }
  CHECK(grad_mag <= 1e-10);
}

TEST_CASE("score backward matches central finite differences") {
  std::mt19937_64 rng(1234);
  std::size_t checked = 0, skipped = 0;
  for (int trial = 0; trial < 20; ++trial) {
    FusionParams p = init_params(rng(), 3);
    const std::size_t n = 1 + rng() % 6;
    std::vector<ObjsFeature> feats;
    std::vector<int> targets;
    for (std::size_t i = 0; i < n; ++i) {
      feats.push_back(random_feature(rng));
      targets.push_back(static_cast<int>(rng() % 2));
    }
    const auto bwd = score_backward(p.net, feats, targets);

    auto params = param_blocks(p.net);
    const auto grads = grad_blocks(bwd.grads);
    const double step = 1e-5;
    for (std::size_t b = 0; b < params.size(); ++b) {
      for (std::size_t k = 0; k < params[b].size(); ++k) {
        const double saved = params[b][k];
        params[b][k] = saved + step;
        const double up = objectness_loss(p.net, feats, targets);
        const auto pattern_up = relu_pattern(p.net, feats);
        params[b][k] = saved - step;
        const double down = objectness_loss(p.net, feats, targets);
        const auto pattern_down = relu_pattern(p.net, feats);
        params[b][k] = saved;
        if (pattern_up != pattern_down) {
          ++skipped;
          continue;
        }
        ++checked;
        const double fd = (up - down) / (2.0 * step);
        CHECK(gradient_close(grads[b][k], fd, 1e-4));
      }
    }
  }
  CHECK(checked > 10000);
  CHECK(skipped * 100 < checked);  // kink crossings must stay rare
}

TEST_CASE("ssl loss: vacuous value, asymptotics, monotone sweep") {
  // alpha = (1,...,1): the adjusted cross entropy is psi(H) - psi(1),
  // a plain harmonic sum, and the KL term vanishes.
  const std::vector<double> vac3 = {1, 1, 1};
  CHECK(ssl_loss(vac3, 0, 0.0) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(ssl_loss(vac3, 2, 1.0) == doctest::Approx(1.5).epsilon(1e-12));
  const std::vector<double> vac4 = {1, 1, 1, 1};
  CHECK(ssl_loss(vac4, 1, 0.7) ==
        doctest::Approx(11.0 / 6.0).epsilon(1e-12));

  // Overwhelming target evidence drives the loss to zero.
  const std::vector<double> huge = {1e9 + 1.0, 1.0, 1.0};
  CHECK(ssl_loss(huge, 0, 1.0) <= 1e-6);

  double previous = ssl_loss(std::vector<double>{1, 1, 1}, 0, 0.5);
  for (double e : {1.0, 5.0, 25.0, 125.0, 625.0}) {
    const double cur = ssl_loss(std::vector<double>{e + 1.0, 1, 1}, 0, 0.5);
    CHECK(cur < previous);
    previous = cur;
  }

  CHECK(ssl_loss(huge, 0, 1.0) >= 0.0);
  CHECK_THROWS_AS(ssl_loss(std::vector<double>{0.5, 1, 1}, 0, 0.0),
                  InvalidParameterError);
  CHECK_THROWS_AS(ssl_loss(vac3, 7, 0.0), InvalidParameterError);
}

TEST_CASE("ssl loss is non-negative and gradient matches differences") {
  std::mt19937_64 rng(555);
  for (int k = 0; k < 300; ++k) {
    const std::size_t H = 2 + rng() % 4;
    std::vector<double> alpha(H);
    for (double& a : alpha) {
      a = 1.0 + test::uniform(rng, 0.0, 30.0);
    }
    const std::size_t y = rng() % H;
    const double lambda = test::uniform(rng, 0.0, 1.0);
    CHECK(ssl_loss(alpha, y, lambda) >= 0.0);

    const auto grad = ssl_loss_grad(alpha, y, lambda);
    const double step = 1e-6;
    for (std::size_t h = 0; h < H; ++h) {
      auto up = alpha, down = alpha;
      up[h] += step;
      down[h] -= step;
      const double fd =
          (ssl_loss(up, y, lambda) - ssl_loss(down, y, lambda)) /
          (2.0 * step);
      CHECK(gradient_close(grad[h], fd, 1e-5));
    }
  }
}

TEST_CASE("adam: zero grad, first-step sign, two-step recurrence") {
  std::vector<double> params = {1.0, -2.0, 3.0};
  std::vector<double> grads = {0.0, 0.0, 0.0};
  AdamState state;
  adam_step({std::span<double>(params)}, {std::span<const double>(grads)},
            state, 0.003);
  CHECK(params == std::vector<double>{1.0, -2.0, 3.0});

  // First step moves by ~ -lr * sign(g).
  params = {1.0, -2.0, 3.0};
  grads = {0.5, -0.25, 2.0};
  AdamState fresh;
  adam_step({std::span<double>(params)}, {std::span<const double>(grads)},
            fresh, 0.003);
  CHECK(params[0] == doctest::Approx(1.0 - 0.003).epsilon(1e-6));
  CHECK(params[1] == doctest::Approx(-2.0 + 0.003).epsilon(1e-6));
  CHECK(params[2] == doctest::Approx(3.0 - 0.003).epsilon(1e-6));

  // Two steps with a constant gradient, against the hand-unrolled update.
  const double g = 0.7, lr = 0.003;
  std::vector<double> x = {0.0};
  std::vector<double> gv = {g};
  AdamState two;
  adam_step({std::span<double>(x)}, {std::span<const double>(gv)}, two, lr);
  adam_step({std::span<double>(x)}, {std::span<const double>(gv)}, two, lr);

  double m = 0.0, v = 0.0, expected = 0.0;
  for (int t = 1; t <= 2; ++t) {
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double m_hat = m / (1.0 - std::pow(0.9, t));
    const double v_hat = v / (1.0 - std::pow(0.999, t));
    expected -= lr * m_hat / (std::sqrt(v_hat) + 1e-8);
  }
  CHECK(x[0] == doctest::Approx(expected).epsilon(1e-15));

  std::vector<double> wrong = {1.0};
  CHECK_THROWS_AS(
      adam_step({std::span<double>(wrong)},
                {std::span<const double>(grads)}, state, 0.003),
      DimensionError);
}

TEST_CASE("sgd: zero grad, fixed step, unit-gradient Adam comparison") {
  std::vector<double> params = {1.0, 2.0};
  std::vector<double> zeros = {0.0, 0.0};
  sgd_step({std::span<double>(params)}, {std::span<const double>(zeros)},
           0.003);
  CHECK(params == std::vector<double>{1.0, 2.0});

  std::vector<double> ones = {1.0, 1.0};
  sgd_step({std::span<double>(params)}, {std::span<const double>(ones)},
           0.003);
  CHECK(params[0] == doctest::Approx(1.0 - 0.003).epsilon(1e-15));
  CHECK(params[1] == doctest::Approx(2.0 - 0.003).epsilon(1e-15));

  // For unit-magnitude gradients an Adam step with beta1 = beta2 = 0
  // collapses to -lr * g / (1 + eps), i.e. SGD up to epsilon.
  std::vector<double> sgd_p = {0.5, -0.5};
  std::vector<double> adam_p = {0.5, -0.5};
  std::vector<double> g = {1.0, -1.0};
  sgd_step({std::span<double>(sgd_p)}, {std::span<const double>(g)}, 0.003);
  AdamState degenerate;
  degenerate.beta1 = 0.0;
  degenerate.beta2 = 0.0;
  adam_step({std::span<double>(adam_p)}, {std::span<const double>(g)},
            degenerate, 0.003);
  CHECK(std::abs(sgd_p[0] - adam_p[0]) <= 1e-8);
  CHECK(std::abs(sgd_p[1] - adam_p[1]) <= 1e-8);

  std::vector<double> wrong = {1.0};
  CHECK_THROWS_AS(
      sgd_step({std::span<double>(params)},
               {std::span<const double>(wrong)}, 0.003),
      DimensionError);
}

TEST_CASE("init: determinism, seed sensitivity, fan-in bound, head identity") {
  const FusionParams a = init_params(42, 3);
  const FusionParams b = init_params(42, 3);
  CHECK(a.net.l1.weight.data == b.net.l1.weight.data);
  CHECK(a.net.l2.weight.data == b.net.l2.weight.data);
  CHECK(a.net.l3.weight.data == b.net.l3.weight.data);
  CHECK(a.net.l1.bias == b.net.l1.bias);

  const FusionParams c = init_params(43, 3);
  CHECK(a.net.l1.weight.data != c.net.l1.weight.data);

  auto check_bound = [](const AffineLayer& layer) {
    const double bound =
        std::sqrt(1.0 / static_cast<double>(layer.weight.cols));
    for (double w : layer.weight.data) {
      CHECK(std::abs(w) <= bound);
    }
    for (double bv : layer.bias) {
      CHECK(std::abs(bv) <= bound);
    }
  };
  check_bound(a.net.l1);
  check_bound(a.net.l2);
  check_bound(a.net.l3);

  // Evidence heads start as a scaled pass-through.
  const std::vector<double> scores = {0.9, 0.02, 0.05};
  const auto evidence = a.head3d.apply(scores);
  for (std::size_t h = 0; h < 3; ++h) {
    CHECK(evidence[h] ==
          doctest::Approx(softplus(25.0 * scores[h])).epsilon(1e-12));
  }
}
