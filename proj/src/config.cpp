#include "platoon/config.hpp"

#include "platoon/errors.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace platoon {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Walks one JSON object, remembering which keys were consumed so that the
// leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  ~ObjectReader() = default;

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* j = find(key)) {
      if (!j->is_number()) throw ConfigError(child(key), "expected a number");
      out = j->get<double>();
    }
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (const json* j = find(key)) {
      if (!j->is_number_integer()) throw ConfigError(child(key), "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (j->is_number_unsigned()) {
          out = j->get<Int>();
          return;
        }
        if (j->get<long long>() < 0) throw ConfigError(child(key), "must be non-negative");
      }
      out = j->get<Int>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* j = find(key)) {
      if (!j->is_boolean()) throw ConfigError(child(key), "expected true or false");
      out = j->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* j = find(key)) {
      if (!j->is_string()) throw ConfigError(child(key), "expected a string");
      out = j->get<std::string>();
    }
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (const json* j = find(key)) {
      if (!j->is_array()) throw ConfigError(child(key), "expected an array of numbers");
      out.clear();
      for (std::size_t i = 0; i < j->size(); ++i) {
        if (!(*j)[i].is_number()) throw ConfigError(child(key) + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back((*j)[i].get<double>());
      }
    }
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(child(it.key()), "unknown key");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
void nested(ObjectReader& parent, const std::string& key, Fn&& fn) {
  if (const json* j = parent.find(key)) {
    ObjectReader r(*j, parent.child(key));
    fn(r);
    r.finish();
  }
}

template <typename Parse>
auto enum_field(ObjectReader& r, const std::string& key, Parse parse, decltype(parse(std::string())) fallback) {
  std::string text;
  r.string(key, text);
  if (text.empty()) return fallback;
  try {
    return parse(text);
  } catch (const ParameterError& e) {
    throw ConfigError(r.child(key), e.what());
  }
}

}  // namespace

CliConfig parse_config(const json& doc) {
  CliConfig cfg;
  ScenarioConfig& s = cfg.scenario;
  ObjectReader root(doc, "");

  root.integer("vehicles", s.vehicles);
  root.number("dt", s.dt);
  root.number("duration_s", s.duration);
  nested(root, "vehicle", [&](ObjectReader& r) { r.number("tau", s.tau); });

  nested(root, "mpc", [&](ObjectReader& r) {
    r.integer("horizon", s.mpc.horizon);
    nested(r, "weights", [&](ObjectReader& w) {
      w.number("q1", s.mpc.weights.q1);
      w.number("q2", s.mpc.weights.q2);
      w.number("q3", s.mpc.weights.q3);
      w.number("q4", s.mpc.weights.q4);
    });
    nested(r, "limits", [&](ObjectReader& l) {
      l.number("d_min", s.mpc.limits.d_min);
      l.number("d_max", s.mpc.limits.d_max);
      l.number("v_min", s.mpc.limits.v_min);
      l.number("v_max", s.mpc.limits.v_max);
      l.number("a_min", s.mpc.limits.a_min);
      l.number("a_max", s.mpc.limits.a_max);
    });
    nested(r, "solver", [&](ObjectReader& q) {
      q.number("tol", s.mpc.solver.tol);
      q.integer("max_iter", s.mpc.solver.max_iter);
    });
  });

  nested(root, "actuation", [&](ObjectReader& r) {
    const auto profile = enum_field(r, "profile", actuation_profile_from_string, ActuationProfile::Simulation);
    s.actuation = profile == ActuationProfile::Robot ? ActuationParams::robot() : ActuationParams::simulation();
    r.number("alpha", s.actuation.alpha);
    r.number("beta", s.actuation.beta);
  });

  nested(root, "disturbance", [&](ObjectReader& r) {
    const auto kind = enum_field(r, "kind", disturbance_kind_from_string, DisturbanceKind::Affine);
    switch (kind) {
      case DisturbanceKind::None: s.disturbance = DisturbanceModel::none(); break;
      case DisturbanceKind::Affine: s.disturbance = DisturbanceModel::affine(); break;
      case DisturbanceKind::Quadratic: s.disturbance = DisturbanceModel::quadratic(); break;
    }
    r.number("noise_sigma", s.disturbance.noise_sigma);
    nested(r, "coefficients", [&](ObjectReader& c) {
      c.number("c2", s.disturbance.c2);
      c.number("c1", s.disturbance.c1);
      c.number("c0", s.disturbance.c0);
    });
  });

  nested(root, "truth_residual", [&](ObjectReader& r) {
    r.number("c0", s.truth_residual.c0);
    r.number("c1", s.truth_residual.c1);
    r.number("c2", s.truth_residual.c2);
  });

  s.variant = enum_field(root, "controller_variant", controller_variant_from_string, s.variant);

  nested(root, "mlp", [&](ObjectReader& r) {
    r.integer("hidden_units", s.mlp.hidden_units);
    r.number("learning_rate", s.mlp.learning_rate);
    r.number("adam_beta1", s.mlp.adam_beta1);
    r.number("adam_beta2", s.mlp.adam_beta2);
    r.number("adam_epsilon", s.mlp.adam_epsilon);
    r.integer("epochs", s.mlp.epochs);
    r.number("validation_split", s.mlp.validation_split);
    r.integer("init_seed", s.mlp.init_seed);
    r.integer("min_samples", s.mlp.min_samples);
  });
  root.integer("buffer_capacity", s.buffer_capacity);
  root.integer("online_update_period", s.update_period);

  nested(root, "reference", [&](ObjectReader& r) {
    std::string source;
    r.string("source", source);
    if (source.empty() || source == "idm") s.reference.kind = ReferenceKind::Idm;
    else if (source == "csv") s.reference.kind = ReferenceKind::Csv;
    else throw ConfigError(r.child("source"), "expected \"idm\" or \"csv\"");
    r.string("csv_path", s.reference.csv_path);
    nested(r, "lead", [&](ObjectReader& l) {
      std::string profile;
      l.string("profile", profile);
      if (profile.empty() || profile == "default") s.reference.lead = LeadKind::Default;
      else if (profile == "constant") s.reference.lead = LeadKind::Constant;
      else throw ConfigError(l.child("profile"), "expected \"default\" or \"constant\"");
      l.number("speed", s.reference.lead_speed);
      l.number("initial_position", s.reference.lead_initial_position);
    });
    nested(r, "idm", [&](ObjectReader& p) {
      p.number("v0", s.reference.idm.v0);
      p.number("T", s.reference.idm.T);
      p.number("a_max", s.reference.idm.a_max);
      p.number("b", s.reference.idm.b);
      p.number("delta", s.reference.idm.delta);
      p.number("s0", s.reference.idm.s0);
      p.number("s1", s.reference.idm.s1);
    });
    r.numbers("initial_gaps", s.reference.initial_gaps);
  });

  nested(root, "initial_state_offsets", [&](ObjectReader& r) {
    r.numbers("position", s.initial_position_offsets);
    r.numbers("speed", s.initial_speed_offsets);
  });
  root.integer("master_seed", s.master_seed);
  nested(root, "output", [&](ObjectReader& r) { r.string("dir", cfg.out_dir); });
  root.finish();

  s.validate();
  return cfg;
}

CliConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

CliConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("<file>", "cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

ordered_json serialize_config(const CliConfig& cfg) {
  const ScenarioConfig& s = cfg.scenario;
  ordered_json j;
  j["vehicles"] = s.vehicles;
  j["dt"] = s.dt;
  j["duration_s"] = s.duration;
  j["vehicle"] = {{"tau", s.tau}};
  j["mpc"] = {{"horizon", s.mpc.horizon},
              {"weights", {{"q1", s.mpc.weights.q1}, {"q2", s.mpc.weights.q2}, {"q3", s.mpc.weights.q3}, {"q4", s.mpc.weights.q4}}},
              {"limits",
               {{"d_min", s.mpc.limits.d_min},
                {"d_max", s.mpc.limits.d_max},
                {"v_min", s.mpc.limits.v_min},
                {"v_max", s.mpc.limits.v_max},
                {"a_min", s.mpc.limits.a_min},
                {"a_max", s.mpc.limits.a_max}}},
              {"solver", {{"tol", s.mpc.solver.tol}, {"max_iter", s.mpc.solver.max_iter}}}};
  j["actuation"] = {{"profile", to_string(s.actuation.profile)}, {"alpha", s.actuation.alpha}, {"beta", s.actuation.beta}};
  j["disturbance"] = {{"kind", to_string(s.disturbance.kind)},
                      {"noise_sigma", s.disturbance.noise_sigma},
                      {"coefficients", {{"c2", s.disturbance.c2}, {"c1", s.disturbance.c1}, {"c0", s.disturbance.c0}}}};
  j["truth_residual"] = {{"c0", s.truth_residual.c0}, {"c1", s.truth_residual.c1}, {"c2", s.truth_residual.c2}};
  j["controller_variant"] = to_string(s.variant);
  j["mlp"] = {{"hidden_units", s.mlp.hidden_units},   {"learning_rate", s.mlp.learning_rate},
              {"adam_beta1", s.mlp.adam_beta1},       {"adam_beta2", s.mlp.adam_beta2},
              {"adam_epsilon", s.mlp.adam_epsilon},   {"epochs", s.mlp.epochs},
              {"validation_split", s.mlp.validation_split}, {"init_seed", s.mlp.init_seed},
              {"min_samples", s.mlp.min_samples}};
  j["buffer_capacity"] = s.buffer_capacity;
  j["online_update_period"] = s.update_period;
  j["reference"] = {{"source", s.reference.kind == ReferenceKind::Csv ? "csv" : "idm"},
                    {"csv_path", s.reference.csv_path},
                    {"lead",
                     {{"profile", s.reference.lead == LeadKind::Constant ? "constant" : "default"},
                      {"speed", s.reference.lead_speed},
                      {"initial_position", s.reference.lead_initial_position}}},
                    {"idm",
                     {{"v0", s.reference.idm.v0},
                      {"T", s.reference.idm.T},
                      {"a_max", s.reference.idm.a_max},
                      {"b", s.reference.idm.b},
                      {"delta", s.reference.idm.delta},
                      {"s0", s.reference.idm.s0},
                      {"s1", s.reference.idm.s1}}},
                    {"initial_gaps", s.reference.initial_gaps}};
  j["initial_state_offsets"] = {{"position", s.initial_position_offsets}, {"speed", s.initial_speed_offsets}};
  j["master_seed"] = s.master_seed;
  j["output"] = {{"dir", cfg.out_dir}};
  return j;
}

}  // namespace platoon
