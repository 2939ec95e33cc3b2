#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "smallsep/cantor_measure.hpp"
#include "smallsep/nash_moser.hpp"
#include "smallsep/pde_instances.hpp"

namespace smallsep {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridSpec {
  double min = 0.9;
  double max = 1.1;
  int count = 64;

  // count equispaced points; a single point sits at min
  std::vector<double> points() const;
};

struct RunConfig {
  std::string problem_path;       // empty: the built-in problem named below
  std::string builtin = "nlw";    // nlw | nls
  PDEProblem problem;

  MultiscaleParams ledger;
  double sigma = 78.0;
  double frak_e = 7.0;
  double frak_s = 2.0;
  std::optional<double> K1;

  GridSpec grid;
  std::vector<double> epsilons{1e-4};
  InverseStrategy strategy = InverseStrategy::Dense;
  std::string output_dir = "smallsep_out";
  std::uint64_t seed = 1;

  NashMoserConfig nm;
  CantorParams cantor;

  // chains / census
  std::vector<int> chain_N{16, 32};
  double chain_lambda = 1.0;
  double chain_chi = 2.0;
  int chain_fiber_radius = -1;  // < 0: 6N
  int chain_Gamma = 2;
  int chain_K = 4;

  int property_matrices = 200;

  // Push the shared ledger values into the solver and Cantor settings.
  void sync();
  void validate() const;

  nlohmann::json to_json() const;
  // Relative problem paths resolve against base_dir.
  static RunConfig from_json(const nlohmann::json& j, const std::string& base_dir = ".");
  static RunConfig load(const std::string& path);
};

// Coefficient dump of a state: one record per site with the block entries.
nlohmann::json state_to_json(const SeqVec& u);
SeqVec state_from_json(const nlohmann::json& j, const ModelPtr& model, const std::vector<int>& comps);

// Minimal run record as read back by the Cantor scan: lambda, stage scales,
// membership flags, errors and the final state.
LambdaRun lambda_run_from_json(const nlohmann::json& j, const PDEProblem& p);

// Shortest round-trip text of a double.
std::string fmt17(double x);

}  // namespace smallsep
