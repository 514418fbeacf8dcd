#include "platoon/reference.hpp"

#include "platoon/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace platoon {

void IdmParams::validate() const {
  if (!(v0 > 0 && T > 0 && a_max > 0 && b > 0 && s0 > 0)) throw ParameterError("IDM parameters must be positive");
  if (!(s1 >= 0)) throw ParameterError("IDM s1 must be non-negative");
  if (!(delta >= 1)) throw ParameterError("IDM exponent must be at least 1");
}

double idm_desired_gap(double v, double dv, const IdmParams& p) {
  return p.s0 + p.s1 * std::sqrt(std::max(v, 0.0) / p.v0) + p.T * v + v * dv / (2.0 * std::sqrt(p.a_max * p.b));
}

double idm_accel(double v, double dv, double s, const IdmParams& p) {
  if (!(s > 0)) throw DomainError("IDM gap must be positive (collision state)");
  const double ratio = idm_desired_gap(v, dv, p) / s;
  return p.a_max * (1.0 - std::pow(v / p.v0, p.delta) - ratio * ratio);
}

double idm_equilibrium_gap(double v, const IdmParams& p) {
  const double free = 1.0 - std::pow(v / p.v0, p.delta);
  if (!(free > 0)) throw DomainError("no finite equilibrium gap at or above the desired speed");
  return idm_desired_gap(v, 0.0, p) / std::sqrt(free);
}

LeadProfile LeadProfile::default_scenario(double dt, double duration) {
  if (!(dt > 0)) throw ParameterError("dt must be positive");
  LeadProfile lead;
  const auto samples = static_cast<std::size_t>(std::llround(duration / dt)) + 1;
  lead.speeds.reserve(samples);
  auto ramp = [](double t, double t0, double t1, double v0, double v1) {
    return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
  };
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) * dt;
    double v;
    if (t <= 5.0) v = 20.0;
    else if (t <= 10.0) v = ramp(t, 5.0, 10.0, 20.0, 12.0);
    else if (t <= 15.0) v = 12.0;
    else if (t <= 25.0) v = ramp(t, 15.0, 25.0, 12.0, 25.0);
    else v = 25.0;
    lead.speeds.push_back(v);
  }
  return lead;
}

LeadProfile LeadProfile::constant(double speed, double dt, double duration) {
  if (!(dt > 0)) throw ParameterError("dt must be positive");
  LeadProfile lead;
  lead.speeds.assign(static_cast<std::size_t>(std::llround(duration / dt)) + 1, speed);
  return lead;
}

ReferenceTrajectory::ReferenceTrajectory(std::size_t vehicles, std::size_t samples, double dt)
    : p_(Mat::Zero(static_cast<Eigen::Index>(vehicles), static_cast<Eigen::Index>(samples))),
      v_(p_),
      a_(p_),
      dt_(dt) {}

PlatoonState ReferenceTrajectory::state(std::size_t k) const {
  if (empty()) throw DimensionError("reference trajectory is empty");
  const auto c = static_cast<Eigen::Index>(std::min(k, samples() - 1));
  return PlatoonState(p_.col(c), v_.col(c), a_.col(c));
}

ReferenceWindow ReferenceTrajectory::window(std::size_t k, int horizon) const {
  std::vector<PlatoonState> states;
  states.reserve(static_cast<std::size_t>(horizon));
  for (int n = 1; n <= horizon; ++n) states.push_back(state(k + static_cast<std::size_t>(n)));
  return ReferenceWindow::from_states(states);
}

void fill_accelerations(ReferenceTrajectory& traj) {
  const auto K = static_cast<Eigen::Index>(traj.samples());
  auto& a = traj.accelerations();
  a.setZero();
  for (Eigen::Index k = 0; k + 1 < K; ++k) {
    a.col(k) = (traj.velocities().col(k + 1) - traj.velocities().col(k)) / traj.dt();
  }
  if (K >= 2) a.col(K - 1) = a.col(K - 2);
}

ReferenceTrajectory generate_idm_reference(const LeadProfile& lead, std::size_t count, const IdmParams& params,
                                           double dt, std::vector<double> initial_gaps) {
  params.validate();
  if (!(dt > 0)) throw ParameterError("dt must be positive");
  if (count == 0) throw ParameterError("reference needs at least one vehicle");
  const std::size_t samples = lead.speeds.size();
  ReferenceTrajectory traj(count, samples, dt);
  if (samples == 0) return traj;
  for (double s : lead.speeds) {
    if (!(s >= 0) || !std::isfinite(s)) throw ParameterError("lead speeds must be finite and non-negative");
  }
  if (initial_gaps.empty()) initial_gaps.assign(count, idm_equilibrium_gap(lead.speeds.front(), params));
  if (initial_gaps.size() != count) throw DimensionError("one initial gap per vehicle is required");
  for (double g : initial_gaps) {
    if (!(g > params.s0)) throw ParameterError("initial gaps must exceed the jam distance s0");
  }

  auto& P = traj.positions();
  auto& V = traj.velocities();
  auto& A = traj.accelerations();
  const auto I = static_cast<Eigen::Index>(count);

  double lead_p = lead.initial_position;
  for (Eigen::Index i = 0; i < I; ++i) {
    P(i, 0) = (i == 0 ? lead_p : P(i - 1, 0)) - initial_gaps[static_cast<std::size_t>(i)];
    V(i, 0) = lead.speeds.front();
  }

  for (std::size_t k = 0; k + 1 < samples; ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    const double lead_v = lead.speeds[k];
    const double lead_a = (lead.speeds[k + 1] - lead_v) / dt;
    const double lead_next = lead_p + lead_v * dt + 0.5 * lead_a * dt * dt;
    for (Eigen::Index i = 0; i < I; ++i) {
      const double front_p = i == 0 ? lead_p : P(i - 1, c);
      const double front_v = i == 0 ? lead_v : V(i - 1, c);
      const double v = V(i, c);
      const double a = idm_accel(v, v - front_v, front_p - P(i, c), params);
      const double v_next = std::max(0.0, v + a * dt);
      const double a_eff = (v_next - v) / dt;
      A(i, c) = a_eff;
      V(i, c + 1) = v_next;
      P(i, c + 1) = P(i, c) + v * dt + 0.5 * a_eff * dt * dt;
    }
    for (Eigen::Index i = 0; i < I; ++i) {
      const double front_next = i == 0 ? lead_next : P(i - 1, c + 1);
      if (!(front_next - P(i, c + 1) > 0)) {
        throw GenerationError(k + 1, static_cast<std::size_t>(i),
                              "IDM reference collision at step " + std::to_string(k + 1) + ", vehicle " +
                                  std::to_string(i + 1));
      }
    }
    lead_p = lead_next;
  }
  if (samples >= 2) A.col(static_cast<Eigen::Index>(samples) - 1) = A.col(static_cast<Eigen::Index>(samples) - 2);
  return traj;
}

// ---------------------------------------------------------------- CSV

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw ParseError(row, "column '" + column + "' holds a non-numeric or non-finite value '" + cell + "'");
  }
  return value;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ParseError(1, "missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

double interpolate(const std::vector<double>& t, const std::vector<double>& y, double x, std::size_t& hint) {
  while (hint + 2 < t.size() && t[hint + 1] <= x) ++hint;
  if (t.size() == 1) return y[0];
  const double w = (x - t[hint]) / (t[hint + 1] - t[hint]);
  return y[hint] + w * (y[hint + 1] - y[hint]);
}

}  // namespace

ColumnMap ColumnMap::standard(std::size_t count, bool with_positions) {
  ColumnMap m;
  for (std::size_t i = 1; i <= count; ++i) {
    m.speed.push_back("v" + std::to_string(i) + "_speed_mps");
    m.position.push_back(with_positions ? "v" + std::to_string(i) + "_pos_m" : "");
  }
  return m;
}

ColumnMap ColumnMap::detect(const std::vector<std::string>& header) {
  ColumnMap m;
  for (std::size_t i = 1;; ++i) {
    const std::string speed = "v" + std::to_string(i) + "_speed_mps";
    if (std::find(header.begin(), header.end(), speed) == header.end()) break;
    const std::string pos = "v" + std::to_string(i) + "_pos_m";
    m.speed.push_back(speed);
    m.position.push_back(std::find(header.begin(), header.end(), pos) != header.end() ? pos : "");
  }
  if (m.speed.empty()) throw ParseError(1, "no v<i>_speed_mps columns found");
  return m;
}

ReferenceTrajectory read_trajectory_csv(std::istream& in, const ColumnMap* columns, double dt_target) {
  if (!(dt_target > 0)) throw ParameterError("dt_target must be positive");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty trajectory file");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = split_row(line);
  const ColumnMap map = columns ? *columns : ColumnMap::detect(header);
  if (map.speed.empty() || map.position.size() != map.speed.size()) {
    throw ParseError(0, "column map needs one speed and one (possibly empty) position name per vehicle");
  }

  const std::size_t t_col = column_index(header, map.time);
  std::vector<std::size_t> v_cols, p_cols;
  for (std::size_t i = 0; i < map.speed.size(); ++i) {
    v_cols.push_back(column_index(header, map.speed[i]));
    p_cols.push_back(map.position[i].empty() ? SIZE_MAX : column_index(header, map.position[i]));
  }

  const std::size_t count = map.speed.size();
  std::vector<double> t;
  std::vector<std::vector<double>> v(count), p(count);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != header.size()) {
      throw ParseError(row, "expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    const double time = parse_cell(cells[t_col], row, map.time);
    if (!t.empty() && !(time > t.back())) throw ParseError(row, "time column is not strictly increasing");
    t.push_back(time);
    for (std::size_t i = 0; i < count; ++i) {
      v[i].push_back(parse_cell(cells[v_cols[i]], row, map.speed[i]));
      if (p_cols[i] != SIZE_MAX) p[i].push_back(parse_cell(cells[p_cols[i]], row, map.position[i]));
    }
  }
  if (t.empty()) throw ParseError(row, "trajectory file has no data rows");

  // Trapezoidal integration where positions are absent.
  for (std::size_t i = 0; i < count; ++i) {
    if (p_cols[i] != SIZE_MAX) continue;
    p[i].assign(t.size(), 0.0);
    for (std::size_t k = 1; k < t.size(); ++k) p[i][k] = p[i][k - 1] + 0.5 * (v[i][k - 1] + v[i][k]) * (t[k] - t[k - 1]);
  }

  const double span = t.back() - t.front();
  const auto samples = static_cast<std::size_t>(std::floor(span / dt_target + 1e-9)) + 1;
  ReferenceTrajectory traj(count, samples, dt_target);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t hint_v = 0, hint_p = 0;
    for (std::size_t k = 0; k < samples; ++k) {
      const double x = std::min(t.front() + static_cast<double>(k) * dt_target, t.back());
      const auto r = static_cast<Eigen::Index>(i);
      const auto c = static_cast<Eigen::Index>(k);
      traj.velocities()(r, c) = interpolate(t, v[i], x, hint_v);
      traj.positions()(r, c) = interpolate(t, p[i], x, hint_p);
    }
  }
  fill_accelerations(traj);
  return traj;
}

ReferenceTrajectory load_trajectory_csv(const std::string& path, const ColumnMap* columns, double dt_target) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open trajectory file '" + path + "'");
  return read_trajectory_csv(in, columns, dt_target);
}

void write_trajectory_csv(std::ostream& out, const ReferenceTrajectory& traj) {
  out << "time_s";
  for (std::size_t i = 1; i <= traj.vehicles(); ++i) out << ",v" << i << "_speed_mps,v" << i << "_pos_m";
  out << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < traj.samples(); ++k) {
    out << static_cast<double>(k) * traj.dt();
    for (std::size_t i = 0; i < traj.vehicles(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const auto c = static_cast<Eigen::Index>(k);
      out << ',' << traj.velocities()(r, c) << ',' << traj.positions()(r, c);
    }
    out << '\n';
  }
}

void save_trajectory_csv(const std::string& path, const ReferenceTrajectory& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(0, "cannot write trajectory file '" + path + "'");
  write_trajectory_csv(out, traj);
}

}  // namespace platoon
