#include "eoslab/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace eos {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

ConfigFile ConfigFile::parse_string(const std::string& text,
                                    const std::string& name) {
  ConfigFile cfg;
  cfg.name_ = name;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(name + ":" + std::to_string(line_no) +
                          ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw ConfigError(name + ":" + std::to_string(line_no) +
                          ": empty section name");
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(name + ":" + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(name + ":" + std::to_string(line_no) + ": empty key");
    }
    auto& sec = cfg.data_[section];
    if (sec.count(key)) {
      throw ConfigError(name + ":" + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    }
    sec[key] = Entry{value, line_no};
  }
  return cfg;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  auto s = data_.find(section);
  return s != data_.end() && s->second.count(key) > 0;
}

const ConfigFile::Entry& ConfigFile::lookup(const std::string& section,
                                            const std::string& key) const {
  auto s = data_.find(section);
  if (s == data_.end() || !s->second.count(key)) {
    throw ConfigError(name_ + ": missing key '" + key + "' in section [" +
                      section + "]");
  }
  return s->second.at(key);
}

std::string ConfigFile::get_string(const std::string& section,
                                   const std::string& key) const {
  return lookup(section, key).value;
}

std::string ConfigFile::get_string(const std::string& section,
                                   const std::string& key,
                                   const std::string& fallback) const {
  return has(section, key) ? lookup(section, key).value : fallback;
}

double ConfigFile::get_double(const std::string& section,
                              const std::string& key) const {
  const Entry& e = lookup(section, key);
  double v = 0.0;
  auto [p, ec] =
      std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
  if (ec != std::errc() || p != e.value.data() + e.value.size()) {
    throw ConfigError(name_ + ":" + std::to_string(e.line) + ": '" + e.value +
                      "' is not a number");
  }
  return v;
}

double ConfigFile::get_double(const std::string& section,
                              const std::string& key, double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

long ConfigFile::get_long(const std::string& section,
                          const std::string& key) const {
  const Entry& e = lookup(section, key);
  // Integer keys accept scientific shorthand like 1e4.
  const double v = get_double(section, key);
  const long l = std::lround(v);
  if (std::abs(v - static_cast<double>(l)) > 1e-9) {
    throw ConfigError(name_ + ":" + std::to_string(e.line) + ": '" + e.value +
                      "' is not an integer");
  }
  return l;
}

long ConfigFile::get_long(const std::string& section, const std::string& key,
                          long fallback) const {
  return has(section, key) ? get_long(section, key) : fallback;
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
  if (!has(section, key)) return fallback;
  const Entry& e = lookup(section, key);
  std::string v = e.value;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(name_ + ":" + std::to_string(e.line) + ": '" + e.value +
                    "' is not a boolean");
}

std::vector<double> ConfigFile::get_doubles(const std::string& section,
                                            const std::string& key) const {
  const Entry& e = lookup(section, key);
  std::vector<double> out;
  std::stringstream ss(e.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    double v = 0.0;
    auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || p != item.data() + item.size()) {
      throw ConfigError(name_ + ":" + std::to_string(e.line) + ": '" + item +
                        "' is not a number");
    }
    out.push_back(v);
  }
  if (out.empty()) {
    throw ConfigError(name_ + ":" + std::to_string(e.line) + ": empty list");
  }
  return out;
}

std::vector<std::string> ConfigFile::sections() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : data_) out.push_back(k);
  return out;
}

// ---------------------------------------------------------------------------

std::unique_ptr<LossModel> ExperimentConfig::make_loss() const {
  if (loss_kind == "quadratic") {
    return quadratic_loss(QuadraticSpec::diagonal(quad_eigenvalues));
  }
  if (loss_kind == "toy") {
    return toy_product_loss();
  }
  if (loss_kind == "mlp") {
    MlpSpec spec;
    spec.widths = mlp_widths;
    spec.activation = mlp_activation;
    spec.data = make_synthetic_regression_dataset(mlp_widths, mlp_samples,
                                                  data_seed);
    return mlp_regression_loss(std::move(spec));
  }
  throw ConfigError("unknown loss kind '" + loss_kind + "'");
}

Vector ExperimentConfig::initial_point(const LossModel& model) const {
  if (x0.size() > 0) {
    if (x0.size() != model.dim()) {
      throw ConfigError("x0 has dimension " + std::to_string(x0.size()) +
                        ", loss expects " + std::to_string(model.dim()));
    }
    return x0;
  }
  if (loss_kind == "mlp") {
    return mlp_initial_point(mlp_widths, init_seed);
  }
  return Vector::Ones(model.dim());
}

ExperimentConfig load_experiment_config(const ConfigFile& f) {
  ExperimentConfig cfg;

  cfg.loss_kind = f.get_string("loss", "kind", "toy");
  if (cfg.loss_kind == "quadratic") {
    const auto vals = f.get_doubles("loss", "eigenvalues");
    cfg.quad_eigenvalues =
        Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size()));
  } else if (cfg.loss_kind == "mlp") {
    const auto w = f.get_doubles("loss", "widths");
    for (double v : w) cfg.mlp_widths.push_back(static_cast<Index>(v));
    const std::string act = f.get_string("loss", "activation", "tanh");
    if (act == "tanh") {
      cfg.mlp_activation = Activation::Tanh;
    } else if (act == "gelu") {
      cfg.mlp_activation = Activation::Gelu;
    } else {
      throw ConfigError("unknown activation '" + act + "'");
    }
    cfg.mlp_samples = f.get_long("loss", "samples", 16);
    cfg.data_seed = static_cast<std::uint64_t>(f.get_long("loss", "data_seed", 7));
  } else if (cfg.loss_kind != "toy") {
    throw ConfigError("unknown loss kind '" + cfg.loss_kind + "'");
  }

  const std::string ok = f.get_string("optimizer", "kind", "normalized_gd");
  if (ok == "gd") {
    cfg.run.kind = StepKind::GD;
  } else if (ok == "normalized_gd") {
    cfg.run.kind = StepKind::NormalizedGD;
  } else if (ok == "sqrt_gd") {
    cfg.run.kind = StepKind::SqrtLossGD;
  } else {
    throw ConfigError("unknown optimizer kind '" + ok + "'");
  }
  cfg.run.eta = f.get_double("optimizer", "eta", 0.02);
  if (!(cfg.run.eta > 0.0)) throw ConfigError("eta must be positive");
  cfg.run.steps = f.get_long("optimizer", "steps", 1000);
  if (cfg.run.steps < 1) throw ConfigError("steps must be >= 1");
  if (f.has("optimizer", "x0")) {
    const auto vals = f.get_doubles("optimizer", "x0");
    cfg.x0 = Eigen::Map<const Vector>(vals.data(),
                                      static_cast<Index>(vals.size()));
  }
  cfg.init_seed = static_cast<std::uint64_t>(f.get_long("optimizer", "seed", 1));
  cfg.run.noise.enabled = f.get_bool("optimizer", "noise_enabled", false);
  cfg.run.noise.radius = f.get_double("optimizer", "noise_radius", -1.0);
  cfg.run.noise.t_freq = f.get_long("optimizer", "noise_tfreq", 0);
  cfg.run.noise.seed = cfg.init_seed;

  cfg.run.diag_every = f.get_long("diagnostics", "cadence", 0);
  if (cfg.run.diag_every < 0) throw ConfigError("cadence must be >= 0");
  cfg.run.diagnostics.top_k = f.get_long("diagnostics", "top_k", 2);
  cfg.run.diagnostics.phi.top_k = cfg.run.diagnostics.top_k;
  cfg.run.diagnostics.with_stableness =
      f.get_bool("diagnostics", "stableness", false);
  cfg.run.diagnostics.stableness_grid =
      static_cast<int>(f.get_long("diagnostics", "stableness_grid", 16));
  cfg.run.diagnostics.rank_override =
      f.get_long("diagnostics", "rank_override", 0);

  const std::string fk = f.get_string("flow", "kind", "log");
  if (fk == "log") {
    cfg.flow.kind = FlowKind::LogSharpness;
  } else if (fk == "plain") {
    cfg.flow.kind = FlowKind::Sharpness;
  } else {
    throw ConfigError("unknown flow kind '" + fk + "'");
  }
  cfg.flow.eta_flow = f.get_double("flow", "eta_flow", 1e-3);
  cfg.flow.tau_end = f.get_double("flow", "tau_end", 1.0);
  const std::string coeff = f.get_string("flow", "coefficient", "auto");
  if (coeff != "auto") cfg.flow.coefficient = f.get_double("flow", "coefficient");
  const std::string pm = f.get_string("flow", "projection", "auto");
  if (pm == "hessian_eigvecs") {
    cfg.flow.proj.method = ProjectionMethod::HessianEigvecs;
  } else if (pm == "per_example_span") {
    cfg.flow.proj.method = ProjectionMethod::PerExampleSpan;
  } else if (pm != "auto") {
    throw ConfigError("unknown projection method '" + pm + "'");
  }
  cfg.flow.proj.eta_proj = f.get_double("flow", "eta_proj", 1e-2);
  cfg.flow.proj.t_proj = f.get_long("flow", "t_proj", 1000);
  cfg.flow.proj.tol_manifold = f.get_double("flow", "tol_manifold", 1e-9);

  if (f.has("compare", "c_time")) {
    cfg.compare.c_time = f.get_double("compare", "c_time");
  }
  cfg.compare.n_samples = static_cast<int>(f.get_long("compare", "samples", 21));

  cfg.out_dir = f.get_string("output", "dir", "out");
  cfg.prefix = f.get_string("output", "prefix", "trace");
  return cfg;
}

}  // namespace eos
