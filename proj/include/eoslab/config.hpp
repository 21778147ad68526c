#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eoslab/flow.hpp"
#include "eoslab/loss.hpp"
#include "eoslab/optimizer.hpp"

namespace eos {

/// Raised on malformed config input, with line information in the message.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Plain-text sectioned key/value file: `[section]` headers, `key = value`
/// entries, `#` comments. Keys are reported with their line numbers on
/// parse and lookup errors.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_string(const std::string& text,
                                 const std::string& name = "<string>");

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  long get_long(const std::string& section, const std::string& key) const;
  long get_long(const std::string& section, const std::string& key,
                long fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;
  std::vector<double> get_doubles(const std::string& section,
                                  const std::string& key) const;

  std::vector<std::string> sections() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::string name_;
  std::map<std::string, std::map<std::string, Entry>> data_;

  const Entry& lookup(const std::string& section, const std::string& key) const;
};

/// Everything one experiment needs: the loss, the optimizer run, the flow
/// and the comparison settings, and where outputs go.
struct ExperimentConfig {
  // loss
  std::string loss_kind = "toy";  // quadratic | toy | mlp
  Vector quad_eigenvalues;
  std::vector<Index> mlp_widths;
  Activation mlp_activation = Activation::Tanh;
  Index mlp_samples = 16;
  std::uint64_t data_seed = 7;

  // optimizer
  RunConfig run;
  Vector x0;                  // empty: model default
  std::uint64_t init_seed = 1;

  // flow + comparison
  FlowOptions flow;
  CompareOptions compare;

  // output
  std::string out_dir = "out";
  std::string prefix = "trace";

  std::unique_ptr<LossModel> make_loss() const;
  Vector initial_point(const LossModel& model) const;
};

ExperimentConfig load_experiment_config(const ConfigFile& file);

}  // namespace eos
