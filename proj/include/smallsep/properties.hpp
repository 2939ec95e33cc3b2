#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "smallsep/decay_matrix.hpp"

namespace smallsep {

// One universally quantified property, evaluated on a sampled family.
struct PropertyCheck {
  std::string name;
  int cases = 0;
  int failures = 0;
  double worst = 0.0;  // largest lhs/rhs, or largest relative error for identities
  bool informational = false;  // measured constant, never fails

  bool pass() const { return informational || (cases > 0 && failures == 0); }
  void le(double lhs, double rhs, double rel = 1e-12);
  void eq(double a, double b, double rel);
  void record(double value);
};

struct SuiteResult {
  std::string suite;
  std::string model;
  std::vector<PropertyCheck> checks;
  double seconds = 0.0;

  bool pass() const;
  const PropertyCheck* find(const std::string& name) const;
  nlohmann::json to_json() const;
};

struct PropertyOptions {
  std::uint64_t seed = 1;
  int matrices = 200;  // per model
  double s0 = 2.0;
  std::optional<double> K1;  // override; the default comes from DecayContext::make
  std::vector<double> s_values{2.0, 3.5, 5.0};
  double nu = 2.0;
};

// Block matrix with entries of size about <h - h'>^{-decay}; blocks are zero
// with probability 1 - density.
BlockMatrix random_decay_matrix(const LayoutPtr& rows, const LayoutPtr& cols, std::mt19937_64& rng, double decay,
                                double density = 1.0);

SuiteResult run_decay_suite(const ModelPtr& model, const PropertyOptions& opts);
SuiteResult run_index_suite(const ModelPtr& model, const PropertyOptions& opts);
SuiteResult run_spectral_suite(const ModelPtr& model, const PropertyOptions& opts);

// The three suites on the torus T^1 x T^1, the torus T^1 x T^2 (decay suite
// only, small windows) and the rank-1 degenerate model.
std::vector<SuiteResult> run_all_properties(const PropertyOptions& opts);

}  // namespace smallsep
