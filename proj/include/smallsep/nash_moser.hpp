#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smallsep/multiscale.hpp"
#include "smallsep/pde_instances.hpp"

namespace smallsep {

enum class InverseStrategy { Dense, Multiscale };

std::string to_string(InverseStrategy s);
InverseStrategy inverse_strategy_from_string(const std::string& s);

struct NashMoserConfig {
  int N0 = 8;
  int N_cap = 16;  // Galerkin scales are N0^(2^n) clipped here
  double sigma = 78.0;
  double tau = 16.0;
  double delta = 0.2;
  double s1 = 6.5;
  double S = 10.0;
  double nu = 2.0;
  double smallness_c = 1.0;   // c in eps N0^S <= c
  double membership_C = 1.0;  // C(s) in the invertibility test
  int max_stages = 8;
  double residual_target = 1e-10;
  double contraction_tol = 1e-13;
  int max_contraction_iters = 60;
  InverseStrategy strategy = InverseStrategy::Dense;
  bool invariant_guard = true;
  double guard_tol = 1e-12;
  int jobs = 1;
  // multiscale strategy only
  MultiscaleParams multiscale;
  double chi = 2.0;

  double mu() const { return tau + delta * s1; }
  double p_exponent() const { return mu() + 0.5 * nu + 1.0; }
  int scale(int n) const;
  // Exponent and smallness inequalities, advisory at desk scale.
  std::vector<ConstraintCheck> ledger(double epsilon) const;

  nlohmann::json to_json() const;
  static NashMoserConfig from_json(const nlohmann::json& j);
};

// psi = 1 on dist <= w, C^1 cubic transition to 0 at dist = 2.5 w, with
// w = N^{-sigma/2}; the derivative peaks at exactly N^{sigma/2}.
double cutoff_value(double dist, double width);
double cutoff_derivative(double dist, double width);
// Cutoff factor for each grid point given the membership flags on the grid.
std::vector<double> lambda_cutoff_extend(const std::vector<double>& lambdas, const std::vector<bool>& in_A, int N,
                                         double sigma);

// Test of (lambda, u) in J^(N): L invertible and the weighted operator norms
// of L^{-1} at s1 and S below C N^mu (1 + N^{delta(s-s1)} ||u||_s).
struct MembershipTest {
  bool member = false;
  bool invertible = false;
  double condition = 0.0;
  double norm_s1 = 0.0;
  double norm_S = 0.0;
  double bound_s1 = 0.0;
  double bound_S = 0.0;
};

MembershipTest membership_test(const TruncatedOperator& L, const SeqVec& u, const NashMoserConfig& cfg);

// Operator norm of W L^{-1} W^{-1} with W = diag(w_k^s), by power iteration.
double weighted_inverse_norm(const Eigen::PartialPivLU<Eigen::MatrixXcd>& lu, const Layout& layout, double s,
                             int iterations = 40);

bool invariant_subspace_guard(const SeqVec& u, DispersionKind kind, double s, double tol, double* defect = nullptr);

struct StageRecord {
  int n = 0;
  int N = 0;
  double lambda = 0.0;
  double psi = 1.0;
  bool member = false;  // lambda in G^(N_n)(u_{n-1})
  bool in_A = false;    // lambda in A_n
  MembershipTest membership;
  double initial_residual_s1 = 0.0;  // ||Pi_n F(u_{n-1})||_{s1}
  double discarded_s1 = 0.0;         // ||Pi_{n-1} F(u_{n-1})||_{s1}, dropped by the r_n formula
  double residual_s1 = 0.0;          // ||Pi_n F(u_n)||_{s1}
  double residual_S = 0.0;
  double next_residual_s1 = 0.0;     // ||Pi_{n+1} F(u_n)||_{s1}
  double step_s1 = 0.0;              // ||u_n - u_{n-1}||_{s1}
  double u_s1 = 0.0;
  double B = 0.0;                    // 1 + ||u_n||_S
  std::optional<double> B_prime;     // ||d_lambda u_n||_S by finite differences
  int contraction_iters = 0;
  double contraction_factor = 0.0;
  double fixed_point_residual = 0.0;  // ||h - H(h)||_{s1} at acceptance
  double ball_radius = 0.0;
  bool ball_ok = true;
  bool S1 = true, S2 = true, S4 = true;
  double guard_defect = 0.0;
  bool guard_ok = true;
  std::string error;

  nlohmann::json to_json() const;
};

struct LambdaRun {
  double lambda = 0.0;
  std::vector<StageRecord> stages;
  std::vector<SeqVec> iterates;  // u_n per stage
  SeqVec u;                      // last iterate
  double initial_residual_s1 = 0.0;  // ||Pi_0 F(0)||_{s1}
  bool converged = false;
  int first_membership_failure = -1;
  int first_guard_failure = -1;
  std::string error;

  double final_residual() const;
  nlohmann::json to_json() const;
};

struct NashMoserReport {
  double epsilon = 0.0;
  std::vector<ConstraintCheck> ledger;
  std::vector<LambdaRun> runs;

  nlohmann::json to_json() const;
};

// One stage for one lambda: builds L_{n} at u_{n-1}, runs the contraction
// h <- H(h) = h - L^{-1} Pi_n F(u_{n-1} + h) from h = 0 and returns the
// correction together with the diagnostics. Throws std::runtime_error on
// divergence or an inverse failure.
struct StageResult {
  SeqVec h;
  StageRecord record;
};

StageResult newton_stage(const PDEProblem& p, const SeqVec& u_prev, double lambda, int n,
                         const NashMoserConfig& cfg);

NashMoserReport run_nash_moser(const PDEProblem& p, const std::vector<double>& lambdas, const NashMoserConfig& cfg);

}  // namespace smallsep
