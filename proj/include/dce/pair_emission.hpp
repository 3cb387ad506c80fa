#pragma once

namespace dce {

// Aggregated two-photon emission from an oscillating cat state. Individual
// pair amplitudes b(l1, l2, t) are never resolved; only their total weight.

struct PairProbability {
  double probability = 0.0;     // sum |b|^2, clamped to [0, 1]
  double expected_pairs = 0.0;  // 2 |alpha|^2 Gamma t, unclamped
  bool perturbative = true;     // 4 |alpha|^2 Gamma t <= perturbative_limit
  bool saturated = false;       // clamp engaged
};

inline constexpr double kPerturbativeLimit = 0.1;

PairProbability pair_probability(double t, double alpha_mag, double gamma);

enum class OverlapMode { Linear, Exponentiated };

/// <eps-|eps+>. Linear: 1 - 2 sum|b|^2 = 1 - 4|alpha|^2 Gamma t, floored at -1.
/// Exponentiated: exp(-t / t_d) with t_d = 1 / (4 |alpha|^2 Gamma).
double which_way_overlap(double t, double alpha_mag, double gamma, OverlapMode mode);

/// Coefficient of |alpha><-alpha| in the reduced density matrix.
double reduced_offdiagonal_weight(double t, double alpha_mag, double gamma, OverlapMode mode);

struct PairEmissionState {
  double t = 0.0;
  double pair_prob = 0.0;
  double b_norm = 1.0;  // |B(t)|^2
  double overlap = 1.0;
};

/// Snapshot of the field-tag state in the linear (literal) branch.
PairEmissionState pair_emission_state(double t, double alpha_mag, double gamma);

}  // namespace dce
