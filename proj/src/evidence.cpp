#include "mmlf/evidence.hpp"

#include <cmath>
#include <string>

#include "mmlf/errors.hpp"

namespace mmlf {

namespace {
constexpr double kTotalConflictEps = 1e-12;

void check_same_classes(const Opinion& a, const Opinion& b) {
  if (a.num_classes != b.num_classes) {
    throw DimensionError("opinions disagree on class count: " +
                         std::to_string(a.num_classes) + " vs " +
                         std::to_string(b.num_classes));
  }
}
}  // namespace

Opinion vacuous_opinion(std::size_t num_classes) {
  Opinion o;
  o.num_classes = num_classes;
  o.belief.assign(num_classes, 0.0);
  o.alpha.assign(num_classes, 1.0);
  o.strength = static_cast<double>(num_classes);
  o.uncertainty = 1.0;
  return o;
}

Opinion opinion_from_evidence(std::span<const double> evidence,
                              std::size_t num_classes) {
  if (num_classes < 2) {
    throw DimensionError("need at least 2 classes, got " +
                         std::to_string(num_classes));
  }
  if (evidence.size() != num_classes) {
    throw DimensionError("evidence length " + std::to_string(evidence.size()) +
                         " does not match class count " +
                         std::to_string(num_classes));
  }
  for (double e : evidence) {
    if (!std::isfinite(e) || e < 0.0) {
      throw InvalidEvidenceError("evidence entries must be finite and >= 0");
    }
  }

  Opinion o;
  o.num_classes = num_classes;
  o.alpha.resize(num_classes);
  double strength = 0.0;
  for (std::size_t h = 0; h < num_classes; ++h) {
    o.alpha[h] = evidence[h] + 1.0;
    strength += o.alpha[h];
  }
  o.strength = strength;
  o.belief.resize(num_classes);
  for (std::size_t h = 0; h < num_classes; ++h) {
    o.belief[h] = evidence[h] / strength;
  }
  o.uncertainty = static_cast<double>(num_classes) / strength;
  return o;
}

double conflict(const Opinion& a, const Opinion& b) {
  check_same_classes(a, b);
  // sum_{i != j} a_i b_j == (sum a)(sum b) - sum_h a_h b_h
  double sum_a = 0.0, sum_b = 0.0, diag = 0.0;
  for (std::size_t h = 0; h < a.num_classes; ++h) {
    sum_a += a.belief[h];
    sum_b += b.belief[h];
    diag += a.belief[h] * b.belief[h];
  }
  double c = sum_a * sum_b - diag;
  return c < 0.0 ? 0.0 : c;
}

Opinion combine_opinions(const Opinion& a, const Opinion& b) {
  check_same_classes(a, b);
  const double c = conflict(a, b);
  if (c >= 1.0 - kTotalConflictEps) {
    throw TotalConflictError("total conflict between opinions (C = " +
                             std::to_string(c) + ")");
  }
  const double norm = 1.0 - c;
  const std::size_t H = a.num_classes;

  Opinion f;
  f.num_classes = H;
  f.belief.resize(H);
  for (std::size_t h = 0; h < H; ++h) {
    f.belief[h] = (a.belief[h] * b.belief[h] + a.belief[h] * b.uncertainty +
                   b.belief[h] * a.uncertainty) /
                  norm;
  }
  f.uncertainty = a.uncertainty * b.uncertainty / norm;
  f.strength = static_cast<double>(H) / f.uncertainty;
  f.alpha.resize(H);
  for (std::size_t h = 0; h < H; ++h) {
    f.alpha[h] = f.belief[h] * f.strength + 1.0;
  }
  return f;
}

std::vector<double> evidence_from_opinion(const Opinion& o) {
  if (o.uncertainty <= 0.0) {
    throw DegenerateOpinionError(
        "opinion with zero uncertainty has unbounded evidence");
  }
  const double strength = static_cast<double>(o.num_classes) / o.uncertainty;
  std::vector<double> evidence(o.num_classes);
  for (std::size_t h = 0; h < o.num_classes; ++h) {
    evidence[h] = o.belief[h] * strength;
  }
  return evidence;
}

}  // namespace mmlf
