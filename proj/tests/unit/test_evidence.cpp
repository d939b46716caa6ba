#include <cmath>
#include <random>

#include "doctest.h"
#include "mmlf/errors.hpp"
#include "mmlf/evidence.hpp"
#include "test_util.hpp"

using namespace mmlf;

TEST_CASE("opinion from evidence: reported uncertainty values") {
  const std::vector<double> confident3d = {22.29, 0.01, 0.01};
  const Opinion a = opinion_from_evidence(confident3d, 3);
  CHECK(a.strength == doctest::Approx(25.31).epsilon(1e-12));
  CHECK(std::abs(a.uncertainty - 0.1186) <= 5e-4);
  CHECK(a.uncertainty == doctest::Approx(3.0 / 25.31).epsilon(1e-12));

  const std::vector<double> fused = {136.38, 0.01, 0.01};
  const Opinion b = opinion_from_evidence(fused, 3);
  CHECK(std::abs(b.uncertainty - 0.0215) <= 5e-4);
  CHECK(b.uncertainty == doctest::Approx(3.0 / 139.40).epsilon(1e-12));
}

TEST_CASE("opinion from evidence: zero and symmetric cases") {
  const Opinion vac = opinion_from_evidence(std::vector<double>{0, 0, 0}, 3);
  CHECK(vac.uncertainty == 1.0);
  for (double b : vac.belief) {
    CHECK(b == 0.0);
  }

  const Opinion sym = opinion_from_evidence(std::vector<double>{1, 1, 1}, 3);
  CHECK(sym.strength == 6.0);
  CHECK(sym.uncertainty == 0.5);
  for (double b : sym.belief) {
    CHECK(b == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  }
}

TEST_CASE("opinion from evidence: input validation") {
  CHECK_THROWS_AS(opinion_from_evidence(std::vector<double>{1, -0.5, 0}, 3),
                  InvalidEvidenceError);
  CHECK_THROWS_AS(
      opinion_from_evidence(std::vector<double>{1, std::nan(""), 0}, 3),
      InvalidEvidenceError);
  CHECK_THROWS_AS(opinion_from_evidence(std::vector<double>{1, 2}, 3),
                  DimensionError);
  CHECK_THROWS_AS(opinion_from_evidence(std::vector<double>{1}, 1),
                  DimensionError);
}

TEST_CASE("conflict: vacuous, crossed and aligned opinions") {
  const Opinion vac = vacuous_opinion(3);
  CHECK(conflict(vac, vac) == 0.0);

  Opinion a = vacuous_opinion(3);
  a.belief = {0.5, 0.0, 0.0};
  a.uncertainty = 0.5;
  Opinion b = vacuous_opinion(3);
  b.belief = {0.0, 0.5, 0.0};
  b.uncertainty = 0.5;
  CHECK(conflict(a, b) == doctest::Approx(0.25).epsilon(1e-15));

  Opinion c = vacuous_opinion(3);
  c.belief = {0.9, 0.0, 0.0};
  c.uncertainty = 0.1;
  CHECK(conflict(c, c) == 0.0);

  Opinion wrong = vacuous_opinion(4);
  CHECK_THROWS_AS(conflict(a, wrong), DimensionError);
}

TEST_CASE("combine: vacuous identity and hand-evaluated fusion") {
  std::mt19937_64 rng(7);
  const Opinion vac = vacuous_opinion(3);
  for (int k = 0; k < 50; ++k) {
    const Opinion x = test::random_opinion(rng, 3);
    const Opinion f = combine_opinions(x, vac);
    for (std::size_t h = 0; h < 3; ++h) {
      CHECK(std::abs(f.belief[h] - x.belief[h]) <= 1e-12);
    }
    CHECK(std::abs(f.uncertainty - x.uncertainty) <= 1e-12);
  }

  Opinion a = vacuous_opinion(3);
  a.belief = {0.5, 0.0, 0.0};
  a.uncertainty = 0.5;
  Opinion b = vacuous_opinion(3);
  b.belief = {0.0, 0.5, 0.0};
  b.uncertainty = 0.5;
  const Opinion f = combine_opinions(a, b);
  CHECK(f.belief[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(f.belief[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(f.belief[2] == 0.0);
  CHECK(f.uncertainty == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("combine: total conflict is an error") {
  Opinion a = vacuous_opinion(2);
  a.belief = {1.0, 0.0};
  a.uncertainty = 0.0;
  Opinion b = vacuous_opinion(2);
  b.belief = {0.0, 1.0};
  b.uncertainty = 0.0;
  CHECK_THROWS_AS(combine_opinions(a, b), TotalConflictError);
}

TEST_CASE("evidence round trip and inversion") {
  const std::vector<double> e = {22.29, 0.01, 0.01};
  const auto back = evidence_from_opinion(opinion_from_evidence(e, 3));
  for (std::size_t h = 0; h < 3; ++h) {
    CHECK(std::abs(back[h] - e[h]) <= 1e-9);
  }

  const auto zero = evidence_from_opinion(vacuous_opinion(3));
  for (double v : zero) {
    CHECK(v == 0.0);
  }

  Opinion o = vacuous_opinion(3);
  o.belief = {1.0 / 3.0, 1.0 / 3.0, 0.0};
  o.uncertainty = 1.0 / 3.0;
  const auto ev = evidence_from_opinion(o);
  CHECK(ev[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(ev[1] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(ev[2] == 0.0);

  Opinion degenerate = vacuous_opinion(3);
  degenerate.uncertainty = 0.0;
  CHECK_THROWS_AS(evidence_from_opinion(degenerate), DegenerateOpinionError);
}

TEST_CASE("evidence algebra properties over random opinions") {
  std::mt19937_64 rng(20240517);
  for (int k = 0; k < 10000; ++k) {
    const std::size_t H = 2 + (rng() % 4);
    const auto ev = test::random_evidence(rng, H);
    const Opinion a = opinion_from_evidence(ev, H);

    // normalization and alpha consistency
    double mass = a.uncertainty;
    for (std::size_t h = 0; h < H; ++h) {
      mass += a.belief[h];
      CHECK(std::abs(a.alpha[h] - (a.belief[h] * a.strength + 1.0)) <= 1e-9);
      CHECK(a.belief[h] >= 0.0);
    }
    CHECK(std::abs(mass - 1.0) <= 1e-9);

    const Opinion b = test::random_opinion(rng, H);
    const Opinion f = combine_opinions(a, b);
    const Opinion g = combine_opinions(b, a);

    // combination closure
    double fused_mass = f.uncertainty;
    for (double bh : f.belief) {
      fused_mass += bh;
    }
    CHECK(std::abs(fused_mass - 1.0) <= 1e-9);

    // uncertainty contraction
    CHECK(f.uncertainty <= std::min(a.uncertainty, b.uncertainty) + 1e-12);

    // commutativity
    CHECK(std::abs(f.uncertainty - g.uncertainty) <= 1e-12);
    for (std::size_t h = 0; h < H; ++h) {
      CHECK(std::abs(f.belief[h] - g.belief[h]) <= 1e-12);
    }
  }
}

TEST_CASE("uncertainty decreases strictly in any evidence entry") {
  std::mt19937_64 rng(99);
  for (int k = 0; k < 1000; ++k) {
    const std::size_t H = 2 + (rng() % 4);
    auto ev = test::random_evidence(rng, H);
    const Opinion before = opinion_from_evidence(ev, H);
    ev[rng() % H] += test::uniform(rng, 0.1, 5.0);
    const Opinion after = opinion_from_evidence(ev, H);
    CHECK(after.uncertainty < before.uncertainty);
  }
}
