#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mmlf {

// Subjective-logic opinion over H classes backed by a Dirichlet distribution.
//
// Maintains, for non-negative evidence e:
//   alpha_h = e_h + 1,  strength = sum(alpha),
//   belief_h = e_h / strength,  uncertainty = H / strength,
// so sum(belief) + uncertainty == 1.
struct Opinion {
  std::vector<double> belief;
  double uncertainty = 1.0;
  std::vector<double> alpha;
  double strength = 0.0;
  std::size_t num_classes = 0;
};

// The all-uncertain opinion (zero evidence). Identity of combine_opinions.
Opinion vacuous_opinion(std::size_t num_classes);

// Converts per-class evidence into an Opinion.
// Throws InvalidEvidenceError for negative or non-finite entries and
// DimensionError when the vector length does not equal num_classes.
Opinion opinion_from_evidence(std::span<const double> evidence,
                              std::size_t num_classes);

// Total belief mass the two opinions place on differing classes:
//   C = sum_{i != j} a.belief_i * b.belief_j.
double conflict(const Opinion& a, const Opinion& b);

// Dempster's combination of two opinions over the same classes:
//   belief_h = (a.b_h b.b_h + a.b_h b.u + b.b_h a.u) / (1 - C)
//   uncertainty = a.u b.u / (1 - C)
// Throws TotalConflictError when C >= 1 - 1e-12.
Opinion combine_opinions(const Opinion& a, const Opinion& b);

// Recovers the evidence vector, e_h = belief_h * (H / uncertainty).
// Throws DegenerateOpinionError when uncertainty is zero.
std::vector<double> evidence_from_opinion(const Opinion& o);

}  // namespace mmlf
