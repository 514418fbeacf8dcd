#include "platoon/harness.hpp"

#include "platoon/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

namespace platoon {

std::string to_string(ControllerVariant v) {
  switch (v) {
    case ControllerVariant::Physics: return "physics";
    case ControllerVariant::NnOnly: return "nn-only";
    case ControllerVariant::Perl: return "perl";
  }
  return "perl";
}

ControllerVariant controller_variant_from_string(const std::string& s) {
  if (s == "physics") return ControllerVariant::Physics;
  if (s == "nn-only") return ControllerVariant::NnOnly;
  if (s == "perl") return ControllerVariant::Perl;
  throw ParameterError("unknown controller variant '" + s + "'");
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& what) { throw ConfigError(field, what); };
  if (vehicles < 1) fail("vehicles", "must be at least 1");
  if (!(dt > 0) || !std::isfinite(dt)) fail("dt", "must be positive");
  if (!(duration >= 0) || !std::isfinite(duration)) fail("duration_s", "must be non-negative");
  if (dt > 0 && std::abs(duration / dt - std::round(duration / dt)) > 1e-6) fail("duration_s", "must be a whole number of steps");
  if (!(tau > 0) || !std::isfinite(tau)) fail("vehicle.tau", "must be positive");
  if (mpc.horizon < 1) fail("mpc.horizon", "must be at least 1");
  if (mpc.weights.q1 < 0) fail("mpc.weights.q1", "must be non-negative");
  if (mpc.weights.q2 < 0) fail("mpc.weights.q2", "must be non-negative");
  if (mpc.weights.q3 < 0) fail("mpc.weights.q3", "must be non-negative");
  if (!(mpc.weights.q4 > 0)) fail("mpc.weights.q4", "must be positive");
  if (!(mpc.limits.d_min < mpc.limits.d_max)) fail("mpc.limits.d_min", "must be below d_max");
  if (!(mpc.limits.v_min < mpc.limits.v_max)) fail("mpc.limits.v_min", "must be below v_max");
  if (!(mpc.limits.a_min < mpc.limits.a_max)) fail("mpc.limits.a_min", "must be below a_max");
  if (!(mpc.solver.tol > 0)) fail("mpc.solver.tol", "must be positive");
  if (mpc.solver.max_iter < 1) fail("mpc.solver.max_iter", "must be at least 1");
  if (actuation.alpha == 0.0 || !std::isfinite(actuation.alpha)) fail("actuation.alpha", "must be finite and non-zero");
  if (!std::isfinite(actuation.beta)) fail("actuation.beta", "must be finite");
  if (!(disturbance.noise_sigma >= 0)) fail("disturbance.noise_sigma", "must be non-negative");
  if (update_period < 1) fail("online_update_period", "must be at least 1");
  if (buffer_capacity < 1) fail("buffer_capacity", "must be at least 1");
  try {
    mlp.validate();
  } catch (const ParameterError& e) {
    fail("mlp", e.what());
  }
  if (!initial_position_offsets.empty() && initial_position_offsets.size() != vehicles) {
    fail("initial_state_offsets.position", "needs one entry per vehicle");
  }
  if (!initial_speed_offsets.empty() && initial_speed_offsets.size() != vehicles) {
    fail("initial_state_offsets.speed", "needs one entry per vehicle");
  }
  if (reference.kind == ReferenceKind::Csv && reference.csv_path.empty()) fail("reference.csv_path", "is required");
  if (!reference.initial_gaps.empty() && reference.initial_gaps.size() != vehicles) {
    fail("reference.initial_gaps", "needs one entry per vehicle");
  }
  try {
    reference.idm.validate();
  } catch (const ParameterError& e) {
    fail("reference.idm", e.what());
  }
}

std::size_t ScenarioConfig::steps() const { return static_cast<std::size_t>(std::llround(duration / dt)); }

ScenarioConfig ScenarioConfig::robot_preset() {
  ScenarioConfig c;
  c.vehicles = 3;
  c.dt = 0.08;
  c.duration = 24.0;
  c.actuation = ActuationParams::robot();
  c.disturbance = DisturbanceModel::none();
  c.update_period = 5;
  return c;
}

ReferenceTrajectory build_reference(const ScenarioConfig& config) {
  const auto& src = config.reference;
  if (src.kind == ReferenceKind::Csv) {
    auto traj = load_trajectory_csv(src.csv_path, nullptr, config.dt);
    if (traj.vehicles() < config.vehicles) {
      throw ConfigError("reference.csv_path", "file provides " + std::to_string(traj.vehicles()) + " vehicles, " +
                                                  std::to_string(config.vehicles) + " required");
    }
    return traj;
  }
  // Generated references run one horizon past the end so no window needs padding.
  const double span = config.duration + config.dt * config.mpc.horizon;
  LeadProfile lead = src.lead == LeadKind::Constant ? LeadProfile::constant(src.lead_speed, config.dt, span)
                                                    : LeadProfile::default_scenario(config.dt, span);
  lead.initial_position = src.lead_initial_position;
  return generate_idm_reference(lead, config.vehicles, src.idm, config.dt, src.initial_gaps);
}

namespace {

enum Salt : std::uint64_t { kNoiseSalt = 0x100, kInitSalt = 0x200 };

// Per-vehicle learner: network plus its replay window.
struct Learner {
  residual::Mlp net;
  residual::ReplayBuffer buffer;
};

Vec column(const Mat& m, std::size_t k, std::size_t rows) {
  return m.col(static_cast<Eigen::Index>(k)).head(static_cast<Eigen::Index>(rows));
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& config) { return run_scenario(config, build_reference(config)); }

RunResult run_scenario(const ScenarioConfig& config, const ReferenceTrajectory& reference) {
  config.validate();
  if (reference.empty()) throw ConfigError("reference", "reference trajectory is empty");
  if (reference.vehicles() < config.vehicles) throw ConfigError("reference", "reference has too few vehicles");

  const std::size_t I = config.vehicles;
  const auto In = static_cast<Eigen::Index>(I);
  const std::size_t K = config.steps();
  const VehicleParams vp = config.vehicle_params();
  const PlatoonModel model = build_platoon_model(vp, I);
  const ActuationParams& act = config.actuation;
  const ActuationParams unit_prior{1.0, 0.0, act.profile};
  const bool learns = config.variant != ControllerVariant::Physics;

  MpcController controller(config.mpc, model);

  // Reference restricted to the controlled vehicles.
  ReferenceTrajectory ref(I, reference.samples(), reference.dt());
  ref.positions() = reference.positions().topRows(In);
  ref.velocities() = reference.velocities().topRows(In);
  ref.accelerations() = reference.accelerations().topRows(In);

  std::vector<NormalStream> noise;
  std::vector<Learner> learners;
  for (std::size_t i = 0; i < I; ++i) {
    noise.emplace_back(mix_seed(config.master_seed, kNoiseSalt + i));
    if (learns) {
      residual::MlpConfig mc = config.mlp;
      mc.init_seed = mix_seed(config.master_seed ^ config.mlp.init_seed, kInitSalt + i);
      mc.zero_output_head = config.variant == ControllerVariant::NnOnly;
      learners.push_back({residual::init_mlp(mc), residual::ReplayBuffer(config.buffer_capacity)});
    }
  }

  RunResult result;
  result.config = config;
  result.records.reserve(K);

  PlatoonState x = ref.state(0);
  x.accelerations().setZero();
  for (std::size_t i = 0; i < I; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (!config.initial_position_offsets.empty()) x.positions()(r) += config.initial_position_offsets[i];
    if (!config.initial_speed_offsets.empty()) x.velocities()(r) += config.initial_speed_offsets[i];
  }
  // Previous command: the one that holds the initial speed (zero next acceleration).
  Vec u_prev(In);
  for (Eigen::Index i = 0; i < In; ++i) u_prev(i) = invert_actuation(x.velocities()(i), act, 0.0);
  Vec last_residual = Vec::Zero(In);

  for (std::size_t k = 0; k < K; ++k) {
    StepRecord rec;
    rec.k = k;
    rec.p_ref = column(ref.positions(), std::min(k, ref.samples() - 1), I);
    rec.v_ref = column(ref.velocities(), std::min(k, ref.samples() - 1), I);
    rec.a_ref = column(ref.accelerations(), std::min(k, ref.samples() - 1), I);
    rec.p = x.positions();
    rec.v = x.velocities();
    rec.a = x.accelerations();

    const ControlPlan plan = controller.step(x, u_prev, ref.window(k, config.mpc.horizon));
    rec.qp_status = plan.status;
    rec.qp_iterations = plan.iterations;
    if (plan.ok()) {
      rec.u_nominal = plan.u_next;
    } else {
      rec.u_nominal = u_prev;
      rec.fallback = true;
      ++result.fallback_steps;
    }

    rec.v_desired.resize(In);
    rec.residual_pred = Vec::Zero(In);
    rec.u_compensated.resize(In);
    rec.u_applied.resize(In);
    std::vector<residual::FeatureVector> features(I);
    for (std::size_t i = 0; i < I; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double v_des = forward_actuation(rec.u_nominal(r), act, 0.0);
      rec.v_desired(r) = v_des;
      features[i] = {v_des, x.velocities()(r), last_residual(r)};
      double correction = 0.0;
      if (learns && learners[i].net.trained()) correction = residual::forward(learners[i].net, features[i]);
      rec.residual_pred(r) = correction;
      switch (config.variant) {
        case ControllerVariant::Physics: rec.u_compensated(r) = invert_actuation(v_des, act, 0.0); break;
        case ControllerVariant::Perl: rec.u_compensated(r) = invert_actuation(v_des, act, correction); break;
        case ControllerVariant::NnOnly: rec.u_compensated(r) = v_des / unit_prior.alpha + correction; break;
      }
      double applied = apply_disturbance(rec.u_compensated(r), config.disturbance, noise[i]);
      if (!config.truth_residual.zero()) applied += config.truth_residual(x.velocities()(r)) / act.alpha;
      rec.u_applied(r) = applied;
    }

    const PlatoonState next = step_platoon(x, rec.u_applied, model);

    // Effective actuation input recovered from the measured response:
    // a_{k+1} = (dt/tau)(s - v_k)  =>  s = a_{k+1} tau/dt + v_k.
    rec.residual_measured.resize(In);
    for (std::size_t i = 0; i < I; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double s_eff = next.accelerations()(r) * vp.tau / vp.dt + x.velocities()(r);
      const ActuationParams& prior = config.variant == ControllerVariant::NnOnly ? unit_prior : act;
      const double measured = s_eff - forward_actuation(rec.u_compensated(r), prior, 0.0);
      rec.residual_measured(r) = measured;
      // PERL learns the residual itself; NN-only learns the additive command correction.
      const double target = config.variant == ControllerVariant::NnOnly ? -measured / prior.alpha : measured;
      if (learns) learners[i].buffer.push(features[i], target);
    }
    last_residual = rec.residual_measured;

    if (learns && (k + 1) % static_cast<std::size_t>(config.update_period) == 0) {
      rec.training.reserve(I);
      for (auto& l : learners) rec.training.push_back(residual::train(l.net, l.buffer));
    }

    result.records.push_back(std::move(rec));
    u_prev = result.records.back().u_nominal;
    x = next;

    for (Eigen::Index i = 0; i + 1 < In; ++i) {
      if (!(x.positions()(i) - x.positions()(i + 1) > 0)) {
        result.outcome = RunOutcome::Collision;
        result.collision_step = k + 1;
        result.collision_vehicle = static_cast<std::size_t>(i) + 2;
        break;
      }
    }
    if (result.outcome == RunOutcome::Collision) break;
  }

  result.final_state = x;
  result.metrics = compute_metrics(result.records);
  return result;
}

std::vector<RunResult> run_parallel(const std::vector<ScenarioConfig>& configs, const ReferenceTrajectory* shared,
                                    unsigned threads) {
  std::vector<RunResult> results(configs.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(configs.size(), 1)));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(configs.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        results[i] = shared ? run_scenario(configs[i], *shared) : run_scenario(configs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

// ---------------------------------------------------------------- metrics

ErrorSeries error_series(const std::vector<StepRecord>& records) {
  ErrorSeries e;
  if (records.empty()) return e;
  const Eigen::Index I = records.front().p.size();
  const auto K = static_cast<Eigen::Index>(records.size());
  e.position.resize(I, K);
  e.speed.resize(I, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto& r = records[static_cast<std::size_t>(k)];
    e.position.col(k) = r.p - r.p_ref;
    e.speed.col(k) = r.v - r.v_ref;
  }
  return e;
}

Metrics compute_metrics(const ErrorSeries& errors) {
  Metrics m;
  const Eigen::Index I = errors.position.rows();
  const Eigen::Index K = errors.position.cols();
  m.steps = static_cast<std::size_t>(K);
  if (K == 0) return m;
  for (Eigen::Index i = 0; i < I; ++i) {
    VehicleMetrics v;
    const auto p = errors.position.row(i).array().abs();
    const auto s = errors.speed.row(i).array().abs();
    v.cae_p = p.sum();
    v.cae_v = s.sum();
    v.mae_p = p.maxCoeff();
    v.mae_v = s.maxCoeff();
    v.mse_p = errors.position.row(i).squaredNorm() / static_cast<double>(K);
    v.mse_v = errors.speed.row(i).squaredNorm() / static_cast<double>(K);
    m.vehicles.push_back(v);
    m.aggregate.cae_p += v.cae_p;
    m.aggregate.cae_v += v.cae_v;
    m.aggregate.mae_p = std::max(m.aggregate.mae_p, v.mae_p);
    m.aggregate.mae_v = std::max(m.aggregate.mae_v, v.mae_v);
    m.aggregate.mse_p += v.mse_p / static_cast<double>(I);
    m.aggregate.mse_v += v.mse_v / static_cast<double>(I);
  }
  return m;
}

Metrics compute_metrics(const std::vector<StepRecord>& records) { return compute_metrics(error_series(records)); }

std::string to_string(MetricId m) {
  switch (m) {
    case MetricId::CaeP: return "CAE_p";
    case MetricId::CaeV: return "CAE_v";
    case MetricId::MaeP: return "MAE_p";
    case MetricId::MaeV: return "MAE_v";
  }
  return "";
}

double metric_value(const VehicleMetrics& m, MetricId id) {
  switch (id) {
    case MetricId::CaeP: return m.cae_p;
    case MetricId::CaeV: return m.cae_v;
    case MetricId::MaeP: return m.mae_p;
    case MetricId::MaeV: return m.mae_v;
  }
  return 0.0;
}

std::optional<double> gap_percent(double baseline, double perl) {
  if (!(baseline > 0)) return std::nullopt;
  return 100.0 * (baseline - perl) / baseline;
}

GapTable compare_runs(const std::map<ControllerVariant, RunResult>& results) {
  GapTable t;
  for (const auto& [variant, run] : results) t.metrics[variant] = run.metrics.aggregate;
  const auto perl = t.metrics.find(ControllerVariant::Perl);
  for (const auto& [variant, m] : t.metrics) {
    for (MetricId id : kTableMetrics) {
      if (variant == ControllerVariant::Perl) {
        t.gaps[variant][id] = 0.0;
      } else if (perl != t.metrics.end()) {
        t.gaps[variant][id] = gap_percent(metric_value(m, id), metric_value(perl->second, id));
      } else {
        t.gaps[variant][id] = std::nullopt;
      }
    }
  }
  return t;
}

namespace {

constexpr std::array<ControllerVariant, 3> kColumns = {ControllerVariant::Physics, ControllerVariant::NnOnly,
                                                       ControllerVariant::Perl};

std::string column_name(ControllerVariant v) {
  switch (v) {
    case ControllerVariant::Physics: return "Physics";
    case ControllerVariant::NnOnly: return "NN";
    case ControllerVariant::Perl: return "PERL";
  }
  return "";
}

std::string fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

// Rows of the Table-2 layout: {label, values per column}; missing entries are "n/a".
std::vector<std::pair<std::string, std::vector<std::string>>> table_rows(const GapTable& t, int digits) {
  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
  for (MetricId id : kTableMetrics) {
    std::vector<std::string> values, gaps;
    for (ControllerVariant c : kColumns) {
      const auto m = t.metrics.find(c);
      values.push_back(m == t.metrics.end() ? "n/a" : fixed(metric_value(m->second, id), digits));
      std::optional<double> g;
      if (const auto gc = t.gaps.find(c); gc != t.gaps.end()) {
        if (const auto gm = gc->second.find(id); gm != gc->second.end()) g = gm->second;
      }
      gaps.push_back(g ? fixed(*g, digits) : "n/a");
    }
    rows.emplace_back(to_string(id), values);
    rows.emplace_back("Gap" + to_string(id), gaps);
  }
  return rows;
}

}  // namespace

std::string GapTable::to_csv() const {
  std::ostringstream out;
  out << "metric";
  for (auto c : kColumns) out << ',' << column_name(c);
  out << '\n';
  for (const auto& [label, values] : table_rows(*this, 6)) {
    out << label;
    for (const auto& v : values) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

std::string GapTable::to_text() const {
  std::ostringstream out;
  out << std::left << std::setw(10) << "Method";
  for (auto c : kColumns) out << std::right << std::setw(12) << column_name(c);
  out << '\n';
  for (const auto& [label, values] : table_rows(*this, 1)) {
    out << std::left << std::setw(10) << label;
    for (const auto& v : values) out << std::right << std::setw(12) << v;
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------- output

void write_steps_csv(std::ostream& out, const RunResult& result) {
  out << "k,vehicle,p_ref,v_ref,a_ref,p,v,a,u_nominal,residual_pred,u_compensated,u_applied,qp_status\n";
  out << std::setprecision(17);
  for (const auto& r : result.records) {
    for (Eigen::Index i = 0; i < r.p.size(); ++i) {
      out << r.k << ',' << (i + 1) << ',' << r.p_ref(i) << ',' << r.v_ref(i) << ',' << r.a_ref(i) << ',' << r.p(i)
          << ',' << r.v(i) << ',' << r.a(i) << ',' << r.u_nominal(i) << ',' << r.residual_pred(i) << ','
          << r.u_compensated(i) << ',' << r.u_applied(i) << ','
          << (r.fallback ? std::string("fallback-") : std::string()) << qp::to_string(r.qp_status) << '\n';
    }
  }
}

std::string metrics_json(const RunResult& result) {
  using nlohmann::ordered_json;
  auto encode = [](const VehicleMetrics& m) {
    return ordered_json{{"CAE_p", m.cae_p}, {"CAE_v", m.cae_v}, {"MAE_p", m.mae_p},
                        {"MAE_v", m.mae_v}, {"P_MSE", m.mse_p}, {"S_MSE", m.mse_v}};
  };
  ordered_json j;
  j["variant"] = to_string(result.config.variant);
  j["master_seed"] = result.config.master_seed;
  j["outcome"] = result.outcome == RunOutcome::Completed ? "completed" : "collision";
  if (result.outcome == RunOutcome::Collision) {
    j["collision_step"] = result.collision_step;
    j["collision_vehicle"] = result.collision_vehicle;
  }
  j["steps"] = result.metrics.steps;
  j["fallback_steps"] = result.fallback_steps;
  j["aggregate"] = encode(result.metrics.aggregate);
  j["vehicles"] = ordered_json::array();
  for (const auto& v : result.metrics.vehicles) j["vehicles"].push_back(encode(v));
  return j.dump(2) + "\n";
}

}  // namespace platoon
