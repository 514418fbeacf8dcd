#pragma once

#include "platoon/mpc.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace platoon {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationOptions {
  std::uint64_t seed = 20240;
  int qp_instances = 1000;
  int prediction_instances = 100;
  int gradient_cases = 100;
  /// Builder under test for the prediction-consistency property. Tests swap in
  /// a deliberately wrong one to see the property fail.
  std::function<PredictionMatrices(const PlatoonModel&, int)> prediction_builder = build_prediction;
};

PropertyResult check_qp_oracle(const ValidationOptions& opts);
PropertyResult check_prediction_rollout(const ValidationOptions& opts);
PropertyResult check_gradients(const ValidationOptions& opts);
PropertyResult check_idm_jam();
PropertyResult check_idm_free_flow();
PropertyResult check_idm_platoon_drift();
PropertyResult check_disturbance_formulas();

/// Every property above, in a fixed order.
std::vector<PropertyResult> run_validation(const ValidationOptions& opts = {});

}  // namespace platoon
