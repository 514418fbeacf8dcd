#include "platoon/actuation.hpp"

#include "platoon/errors.hpp"

#include <cmath>
#include <numbers>

namespace platoon {

void ActuationParams::validate() const {
  if (alpha == 0.0 || !std::isfinite(alpha)) throw ParameterError("actuation alpha must be finite and non-zero");
  if (!std::isfinite(beta)) throw ParameterError("actuation beta must be finite");
}

std::string to_string(ActuationProfile p) { return p == ActuationProfile::Robot ? "robot" : "simulation"; }

ActuationProfile actuation_profile_from_string(const std::string& s) {
  if (s == "simulation") return ActuationProfile::Simulation;
  if (s == "robot") return ActuationProfile::Robot;
  throw ParameterError("unknown actuation profile '" + s + "'");
}

double forward_actuation(double u, const ActuationParams& params, double residual) {
  return params.alpha * u + params.beta + residual;
}

double invert_actuation(double v_desired, const ActuationParams& params, double residual_estimate) {
  params.validate();
  return (v_desired - params.beta - residual_estimate) / params.alpha;
}

double NormalStream::next() {
  constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
  const double u1 = static_cast<double>((engine_() >> 11) + 1) * scale;
  const double u2 = static_cast<double>(engine_() >> 11) * scale;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string to_string(DisturbanceKind k) {
  switch (k) {
    case DisturbanceKind::None: return "none";
    case DisturbanceKind::Affine: return "affine";
    case DisturbanceKind::Quadratic: return "quadratic";
  }
  return "none";
}

DisturbanceKind disturbance_kind_from_string(const std::string& s) {
  if (s == "none") return DisturbanceKind::None;
  if (s == "affine") return DisturbanceKind::Affine;
  if (s == "quadratic") return DisturbanceKind::Quadratic;
  throw ParameterError("unknown disturbance kind '" + s + "'");
}

double apply_disturbance(double u, const DisturbanceModel& model, NormalStream& rng) {
  const double x = model.noise_sigma * rng.next();
  switch (model.kind) {
    case DisturbanceKind::None: return u;
    case DisturbanceKind::Affine: return model.c1 * u + model.c0 + x;
    case DisturbanceKind::Quadratic: return model.c2 * u * u + model.c1 * u + model.c0 + x;
  }
  return u;
}

}  // namespace platoon
