#include "experiment.hpp"

#include <fstream>
#include <functional>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cfassign/errors.hpp"
#include "text_io.hpp"

namespace cfa::cli {

namespace {

struct Field {
  std::string section;
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

Field int_field(std::string section, std::string key, int& ref) {
  return {std::move(section), std::move(key), [&ref] { return std::to_string(ref); },
          [&ref](const std::string& v) { ref = text::parse_int<int>(v); }};
}

Field u64_field(std::string section, std::string key, std::uint64_t& ref) {
  return {std::move(section), std::move(key), [&ref] { return std::to_string(ref); },
          [&ref](const std::string& v) { ref = text::parse_int<std::uint64_t>(v); }};
}

Field double_field(std::string section, std::string key, double& ref) {
  return {std::move(section), std::move(key), [&ref] { return text::format_double(ref); },
          [&ref](const std::string& v) { ref = text::parse_double(v); }};
}

Field string_field(std::string section, std::string key, std::string& ref) {
  return {std::move(section), std::move(key), [&ref] { return ref; },
          [&ref](const std::string& v) { ref = v; }};
}

Field bool_field(std::string section, std::string key, bool& ref) {
  return {std::move(section), std::move(key), [&ref] { return std::string(ref ? "true" : "false"); },
          [&ref](const std::string& v) {
            if (v == "true" || v == "1") {
              ref = true;
            } else if (v == "false" || v == "0") {
              ref = false;
            } else {
              throw SchemaError("expected a boolean, got '" + v + "'");
            }
          }};
}

/// Every serialized field; scenario.name is handled separately.
std::vector<Field> fields(ExperimentConfig& c) {
  auto& s = c.scenario;
  auto& m = c.model;
  auto& t = c.training;
  auto& b = c.baseline;
  std::vector<Field> f = {
      u64_field("experiment", "seed", c.seed),
      string_field("experiment", "output_dir", c.output_dir),
      int_field("scenario", "n_aps", s.n_aps),
      int_field("scenario", "n_users", s.n_users),
      double_field("scenario", "area_width", s.area.width),
      double_field("scenario", "area_height", s.area.height),
      int_field("scenario", "grid_rows", s.layout.rows),
      int_field("scenario", "grid_cols", s.layout.cols),
      double_field("scenario", "margin_fraction", s.layout.margin_fraction),
      int_field("scenario", "min_serving_aps", s.min_serving_aps),
      int_field("scenario", "max_served_users", s.max_served_users),
      double_field("scenario", "noise_power", s.noise_power),
      double_field("scenario", "gain_scale", s.gain_scale),
      double_field("scenario", "rician_variance", s.rician_variance),
      int_field("scenario", "train_size", c.train_size),
      int_field("scenario", "test_size", c.test_size),
      int_field("model", "layers", m.layers),
      int_field("model", "hidden_width", m.hidden_width),
      int_field("model", "message_width", m.message_width),
      {"model", "topology", [&m] { return to_string(m.topology); },
       [&m](const std::string& v) { m.topology = topology_from_string(v); }},
      double_field("training", "learning_rate", t.learning_rate),
      int_field("training", "batch_size", t.batch_size),
      int_field("training", "convergence_window", t.convergence_window),
      double_field("training", "convergence_tol", t.convergence_tol),
      int_field("training", "max_inner_iters", t.max_inner_iters),
      int_field("training", "max_outer_iters", t.max_outer_iters),
      double_field("training", "delta_nu", t.delta_nu),
      double_field("training", "violation_tol", t.violation_tol),
      double_field("training", "entropy_tol", t.entropy_tol),
      int_field("training", "eval_batch_size", t.eval_batch_size),
      int_field("training", "test_every", t.test_every),
      int_field("training", "eval_chunk", t.eval_chunk),
      u64_field("training", "seed", t.seed),
      u64_field("baseline", "budget", b.budget),
      int_field("baseline", "random_draws", b.random_draws),
      bool_field("baseline", "require_lower", b.require_lower),
      string_field("baseline", "gsd_variant", b.gsd_variant),
  };
  return f;
}

}  // namespace

void ExperimentConfig::validate() const {
  scenario.validate();
  training.validate();
  if (train_size < 1 || test_size < 1) throw InvalidScenarioError("dataset sizes must be positive");
  if (model.layers < 0 || model.hidden_width < 1 || model.message_width < 1) {
    throw Error("model widths must be positive and depth non-negative");
  }
  if (baseline.random_draws < 1) throw Error("baseline.random_draws must be positive");
  if (baseline.gsd_variant != kGsdVariant) {
    throw Error("unsupported gsd variant '" + baseline.gsd_variant + "'");
  }
}

ExperimentConfig default_config(const std::string& scenario_name) {
  ExperimentConfig c;
  c.scenario = scenario_preset(scenario_name);
  return c;
}

void select_scenario(ExperimentConfig& config, const std::string& name) {
  if (name == "custom") {
    config.scenario.name = "custom";
    config.scenario.ap_positions =
        place_aps(config.scenario.layout, config.scenario.n_aps, config.scenario.area);
  } else {
    config.scenario = scenario_preset(name);
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw SchemaError(e.what());
  }
  const std::string name = tree.get<std::string>("scenario.name", "small");
  ExperimentConfig config = default_config(name == "custom" ? "small" : name);
  auto table = fields(config);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw SchemaError("key '" + section + "' outside a section");
    }
    for (const auto& [key, value] : body) {
      if (section == "scenario" && key == "name") continue;
      auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) {
        return f.section == section && f.key == key;
      });
      if (it == table.end()) throw SchemaError("unknown config key " + section + "." + key);
      if (name != "custom" && section == "scenario" && key != "train_size" && key != "test_size") {
        // presets are fixed; their fields are written out for provenance only
        if (it->get() != value.data()) {
          throw SchemaError("scenario." + key + " differs from preset '" + name +
                            "'; use scenario.name = custom");
        }
        continue;
      }
      it->set(value.data());
    }
  }
  select_scenario(config, name);
  config.validate();
  return config;
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  ExperimentConfig copy = config;
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  std::string current;
  for (const auto& f : fields(copy)) {
    if (f.section != current) {
      out << (current.empty() ? "" : "\n") << '[' << f.section << "]\n";
      current = f.section;
      if (current == "scenario") out << "name = " << copy.scenario.name << '\n';
    }
    out << f.key << " = " << f.get() << '\n';
  }
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

}  // namespace cfa::cli
