#include "dce/pair_emission.hpp"

#include <algorithm>
#include <cmath>

#include "dce/errors.hpp"

namespace dce {

namespace {

void check(double t, double alpha_mag, double gamma) {
  if (!(t >= 0.0)) throw DomainError("time must be non-negative");
  if (!(alpha_mag >= 0.0)) throw DomainError("|alpha| must be non-negative");
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
}

}  // namespace

PairProbability pair_probability(double t, double alpha_mag, double gamma) {
  check(t, alpha_mag, gamma);
  PairProbability out;
  out.expected_pairs = 2.0 * alpha_mag * alpha_mag * gamma * t;
  out.probability = std::min(out.expected_pairs, 1.0);
  out.saturated = out.expected_pairs > 1.0;
  out.perturbative = 2.0 * out.expected_pairs <= kPerturbativeLimit;
  return out;
}

double which_way_overlap(double t, double alpha_mag, double gamma, OverlapMode mode) {
  check(t, alpha_mag, gamma);
  const double rate = 4.0 * alpha_mag * alpha_mag * gamma;
  if (mode == OverlapMode::Exponentiated) return std::exp(-rate * t);
  return 1.0 - 2.0 * pair_probability(t, alpha_mag, gamma).probability;
}

double reduced_offdiagonal_weight(double t, double alpha_mag, double gamma, OverlapMode mode) {
  return 0.5 * which_way_overlap(t, alpha_mag, gamma, mode);
}

PairEmissionState pair_emission_state(double t, double alpha_mag, double gamma) {
  const auto p = pair_probability(t, alpha_mag, gamma);
  return {t, p.probability, 1.0 - p.probability, 1.0 - 2.0 * p.probability};
}

}  // namespace dce
