#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace platoon {

enum class ActuationProfile { Simulation, Robot };

/// Linear command -> desired-speed channel  v = alpha*u + beta (+ residual).
struct ActuationParams {
  double alpha = 1.0;
  double beta = 0.0;
  ActuationProfile profile = ActuationProfile::Simulation;

  static ActuationParams simulation() { return {1.0, 0.0, ActuationProfile::Simulation}; }
  /// Motor constants of the reduced-scale robot platform.
  static ActuationParams robot() { return {615.4, 25.0, ActuationProfile::Robot}; }

  void validate() const;
};

std::string to_string(ActuationProfile p);
ActuationProfile actuation_profile_from_string(const std::string& s);

double forward_actuation(double u, const ActuationParams& params, double residual = 0.0);

/// Command that makes forward_actuation(u, params, residual_estimate) == v_desired.
double invert_actuation(double v_desired, const ActuationParams& params, double residual_estimate = 0.0);

/// Seeded normal stream: mt19937_64 words fed through the cosine branch of
/// Box-Muller, one fresh pair of words per sample:
///   u1 = ((w1 >> 11) + 1) * 2^-53,  u2 = (w2 >> 11) * 2^-53,
///   z  = sqrt(-2 ln u1) * cos(2 pi u2).
/// mt19937_64 is fully specified by the standard, so the stream is identical
/// on every conforming platform.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}
  double next();

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finaliser, used to derive independent stream seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

enum class DisturbanceKind { None, Affine, Quadratic };

std::string to_string(DisturbanceKind k);
DisturbanceKind disturbance_kind_from_string(const std::string& s);

/// Plant-side corruption of an applied command:
///   affine:    c1*u + c0 + x
///   quadratic: c2*u^2 + c1*u + c0 + x
/// with x ~ N(0, noise_sigma^2).
struct DisturbanceModel {
  DisturbanceKind kind = DisturbanceKind::None;
  double c2 = 0.0;
  double c1 = 1.0;
  double c0 = 0.0;
  double noise_sigma = 0.0;

  static DisturbanceModel none() { return {}; }
  static DisturbanceModel affine(double sigma = 1.0) { return {DisturbanceKind::Affine, 0.0, 1.1, -3.0, sigma}; }
  static DisturbanceModel quadratic(double sigma = 1.0) {
    return {DisturbanceKind::Quadratic, 0.01, 1.0, -3.0, sigma};
  }
};

/// Draws exactly one normal sample per call, whatever the kind, so that
/// streams stay aligned across disturbance settings.
double apply_disturbance(double u, const DisturbanceModel& model, NormalStream& rng);

}  // namespace platoon
