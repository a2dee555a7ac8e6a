#include "experiment_config.hpp"

#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

namespace swarmflow::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Strips a trailing '#' comment that is not inside a double-quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

const nlohmann::json* find(const ConfigTable& t, const std::string& section, const std::string& key) {
  const auto s = t.find(section);
  if (s == t.end()) return nullptr;
  const auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

template <class T>
T get_or(const ConfigTable& t, const std::string& section, const std::string& key, T fallback) {
  const nlohmann::json* v = find(t, section, key);
  if (v == nullptr) return fallback;
  try {
    return v->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("[" + section + "] " + key + " has the wrong type: " + v->dump());
  }
}

Matrix to_matrix(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError(what + " must be a non-empty nested array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array() || j[0].empty()) throw ConfigError(what + " rows must be non-empty arrays");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const nlohmann::json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(what + " is ragged at row " + std::to_string(i));
    }
    for (Eigen::Index k = 0; k < cols; ++k) {
      if (!row[static_cast<std::size_t>(k)].is_number()) {
        throw ConfigError(what + " has a non-numeric entry at (" + std::to_string(i) + ", " +
                          std::to_string(k) + ")");
      }
      m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
  }
  return m;
}

Vector to_vector(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError(what + " must be a non-empty numeric array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(what + " must be numeric");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

LtiSystem parse_system(const ConfigTable& t, std::string& description) {
  const std::string preset = get_or<std::string>(t, "system", "preset", "");
  if (!preset.empty()) {
    description = preset;
    if (preset == "identity-channel") {
      return LtiSystem::identity_channel(get_or<int>(t, "system", "dim", 2));
    }
    if (preset == "double-integrator") return LtiSystem::double_integrator();
    if (preset == "rotation2d") {
      const double omega = get_or<double>(t, "system", "omega", std::numbers::pi / 2.0);
      description += "(" + std::to_string(omega) + ")";
      return LtiSystem::rotation2d(omega);
    }
    if (preset == "rotation3d") {
      const double w1 = get_or<double>(t, "system", "omega_xy", std::numbers::pi / 2.0);
      const double w2 = get_or<double>(t, "system", "omega_yz", 0.0);
      description += "(" + std::to_string(w1) + ", " + std::to_string(w2) + ")";
      return LtiSystem::rotation3d(w1, w2);
    }
    throw ConfigError("unknown system preset '" + preset + "'");
  }
  const nlohmann::json* a = find(t, "system", "A");
  if (a == nullptr) throw ConfigError("[system] needs either preset or A");
  const Matrix am = to_matrix(*a, "[system] A");
  const nlohmann::json* b = find(t, "system", "B");
  const Matrix bm = b != nullptr ? to_matrix(*b, "[system] B") : Matrix::Identity(am.rows(), am.rows());
  description = "explicit";
  try {
    return LtiSystem(am, bm);
  } catch (const Error& e) {
    throw ConfigError(std::string("[system] ") + e.what());
  }
}

EnsembleSpec parse_ensemble_spec(const ConfigTable& t, const std::string& section) {
  const auto s = t.find(section);
  if (s == t.end()) throw ConfigError("missing [" + section + "] section");
  EnsembleSpec spec;
  for (const auto& [key, value] : s->second) {
    if (key == "kind") {
      if (!value.is_string()) throw ConfigError("[" + section + "] kind must be a string");
      spec.kind = value.get<std::string>();
    } else {
      spec.params[key] = value;
    }
  }
  if (spec.kind.empty()) throw ConfigError("[" + section + "] needs a kind");
  return spec;
}

std::uint64_t seed_from_env(std::uint64_t fallback) {
  const char* env = std::getenv("SWARMFLOW_SEED");
  if (env == nullptr || *env == '\0') return fallback;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0') throw ConfigError("SWARMFLOW_SEED must be a non-negative integer");
  return v;
}

}  // namespace

ConfigTable parse_config_text(const std::string& text, const std::string& origin) {
  ConfigTable table;
  table[""];
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      table[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError(where + ": empty key or value");
    if (table[section].count(key) != 0) throw ConfigError(where + ": duplicate key '" + key + "'");
    nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
    if (parsed.is_discarded()) {
      if (value.find_first_of("[]{},\"") != std::string::npos) {
        throw ConfigError(where + ": malformed value for '" + key + "'");
      }
      parsed = value;  // bare word
    }
    table[section][key] = std::move(parsed);
  }
  return table;
}

PropagationPlan ExperimentConfig::plan(std::optional<int> steps_override) const {
  if (steps_override) return PropagationPlan::uniform(*steps_override, train.window_gap_min);
  if (!propagate.explicit_grid.empty()) {
    return PropagationPlan(propagate.explicit_grid, train.window_gap_min);
  }
  return PropagationPlan::uniform(propagate.steps, train.window_gap_min);
}

ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::filesystem::path& base_dir,
                                         const std::string& origin) {
  const ConfigTable t = parse_config_text(text, origin);
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  cfg.seed = seed_from_env(get_or<std::uint64_t>(t, "", "seed", 0));
  cfg.threads = get_or<int>(t, "", "threads", 1);
  cfg.output_dir = get_or<std::string>(t, "", "output_dir", "swarmflow_out");
  if (cfg.output_dir.is_relative()) cfg.output_dir = base_dir / cfg.output_dir;

  cfg.system = parse_system(t, cfg.system_description);
  if (!check_controllability(*cfg.system)) {
    throw ConfigError("[system] (A, B) is not controllable: the Kalman matrix "
                      "[B, AB, ..., A^{d-1}B] has rank < d");
  }
  cfg.source = parse_ensemble_spec(t, "source");
  cfg.target = parse_ensemble_spec(t, "target");

  TrainConfig& tc = cfg.train;
  tc.seed = cfg.seed;
  tc.threads = cfg.threads;
  tc.steps = get_or<int>(t, "train", "steps", tc.steps);
  tc.batch_size = get_or<int>(t, "train", "batch_size", tc.batch_size);
  tc.learning_rate = get_or<double>(t, "train", "learning_rate", tc.learning_rate);
  if (const nlohmann::json* betas = find(t, "train", "adam_betas")) {
    const Vector b = to_vector(*betas, "[train] adam_betas");
    if (b.size() != 2) throw ConfigError("[train] adam_betas must have two entries");
    tc.beta1 = b[0];
    tc.beta2 = b[1];
  }
  tc.adam_eps = get_or<double>(t, "train", "adam_eps", tc.adam_eps);
  tc.window_gap_min = get_or<double>(t, "train", "window_gap_min", tc.window_gap_min);
  tc.log_every = get_or<int>(t, "train", "log_every", tc.log_every);
  tc.hidden = get_or<std::vector<int>>(t, "train", "hidden", tc.hidden);
  try {
    tc.coupling = parse_coupling(get_or<std::string>(t, "train", "coupling", "independent"));
    tc.loss_weighting = parse_loss_weighting(get_or<std::string>(t, "train", "loss_weighting", "plain"));
    tc.activation = parse_activation(get_or<std::string>(t, "train", "activation", "silu"));
    tc.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("[train] ") + e.what());
  }

  PropagateSettings& ps = cfg.propagate;
  ps.steps = get_or<int>(t, "propagate", "steps", ps.steps);
  ps.members = get_or<int>(t, "propagate", "members", ps.members);
  ps.svg = get_or<bool>(t, "propagate", "svg", ps.svg);
  if (const nlohmann::json* grid = find(t, "propagate", "grid")) {
    if (grid->is_array()) {
      const Vector g = to_vector(*grid, "[propagate] grid");
      ps.explicit_grid.assign(g.data(), g.data() + g.size());
    } else if (!(grid->is_string() && grid->get<std::string>() == "uniform")) {
      throw ConfigError("[propagate] grid must be \"uniform\" or an explicit list of times");
    }
  }
  try {
    (void)cfg.plan();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("[propagate] ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config file not found or unreadable: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str(), path.parent_path(), path.string());
}

Ensemble build_ensemble(const EnsembleSpec& spec, const ExperimentConfig& cfg, std::uint64_t salt) {
  const nlohmann::json& p = spec.params;
  const std::uint64_t seed = p.contains("seed") ? p["seed"].get<std::uint64_t>() : cfg.seed * 1000003ULL + salt;
  const int d = cfg.sys().state_dim();
  auto num = [&](const char* key, double fallback) {
    return p.contains(key) ? p[key].get<double>() : fallback;
  };
  const int n = p.contains("n") ? p["n"].get<int>() : 1000;
  try {
    if (spec.kind == "csv") {
      if (!p.contains("path")) throw ConfigError("csv ensemble needs a path");
      std::filesystem::path file = p["path"].get<std::string>();
      if (file.is_relative()) file = cfg.base_dir / file;
      if (!std::filesystem::exists(file)) throw IoError("point cloud file not found: " + file.string());
      return load_csv(file);
    }
    if (spec.kind == "points") {
      if (!p.contains("points")) throw ConfigError("points ensemble needs a points list");
      return Ensemble(to_matrix(p["points"], "points"), "points");
    }
    if (spec.kind == "gaussian") {
      const Vector mean = p.contains("mean") ? to_vector(p["mean"], "mean") : Vector::Zero(d);
      Matrix chol;
      if (p.contains("cov_cholesky")) {
        chol = to_matrix(p["cov_cholesky"], "cov_cholesky");
      } else {
        chol = num("std", 1.0) * Matrix::Identity(mean.size(), mean.size());
      }
      return gaussian(n, mean, chol, seed);
    }
    ShapeParams sp;
    sp.radius = num("radius", sp.radius);
    sp.width = num("width", sp.width);
    sp.half_width = num("half_width", sp.half_width);
    sp.height = num("height", sp.height);
    sp.major_radius = num("major_radius", sp.major_radius);
    sp.minor_radius = num("minor_radius", sp.minor_radius);
    sp.stddev = num("stddev", sp.stddev);
    if (p.contains("offset")) sp.offset = to_vector(p["offset"], "offset");
    if (p.contains("centers")) {
      const Matrix c = to_matrix(p["centers"], "centers");
      for (Eigen::Index i = 0; i < c.rows(); ++i) sp.centers.push_back(c.row(i).transpose());
    }
    return shape(parse_shape_kind(spec.kind), n, sp, seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad " + spec.kind + " ensemble parameter: " + e.what());
  } catch (const DomainError& e) {
    throw ConfigError("bad " + spec.kind + " ensemble: " + e.what());
  }
}

}  // namespace swarmflow::cli
