#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "smallsep/multiscale.hpp"
#include "smallsep/nash_moser.hpp"
#include "smallsep/pde_instances.hpp"

namespace smallsep {

struct CantorParams {
  double tau0 = 5.5;
  double tau1 = 4.5;
  double frak_e = 7.0;      // covering exponent
  int N0 = 8;
  double gamma_tilde = -1;  // quadratic Diophantine constant; <= 0 means 1/N0
  int p_max = 20;
  double grid_factor = 0.25;  // theta step = grid_factor N^{-tau1}
  int max_exact_checks = 4000;
  // weakly-bad census
  MultiscaleParams ms;
  double C1 = 3.0;
  int max_exact_windows = 64;
  int exact_window_rows = 1200;

  double gamma() const { return gamma_tilde > 0 ? gamma_tilde : 1.0 / N0; }
  nlohmann::json to_json() const;
  static CantorParams from_json(const nlohmann::json& j);
};

// Constants c, C with c|j| <= |j|_2 <= C|j| for the lattice of the model.
std::pair<double, double> lattice_norm_constants(const SpectralModel& model);
// g = (2c + 8) C / c
double theta_range_factor(const SpectralModel& model);

struct FracGTest {
  bool pass = false;
  bool certified = false;  // decided by the diagonal bracket without an SVD
  double sigma_min_lo = 0.0;
  double sigma_min_hi = 0.0;
  double threshold = 0.0;  // 2 N^{-tau1}
};

// || L_N^{-1} ||_0 <= N^{tau1}/2 on the window of radius N around 0.
FracGTest frak_G_test(const PDEProblem& p, const SeqVec& u, double lambda, int N, const CantorParams& params);

struct ThetaInterval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
};

struct ThetaCover {
  int N = 0;
  IntVec l_center;
  IntVec j0;
  double lo = 0.0, hi = 0.0, step = 0.0;
  std::vector<ThetaInterval> intervals;  // dilated by one step on each side
  long long pieces = 0;                  // sum of ceil(length / N^{-tau1})
  double max_length = 0.0;
  double total_length = 0.0;
  int exact_checks = 0;
  bool exact_budget_hit = false;
  bool pass = false;

  nlohmann::json to_json() const;
};

// Grid scan of { theta : ||L_{N,(l,j0)}^{-1}(theta)||_0 > N^{tau1}/2 } on [lo, hi].
ThetaCover theta_cover(const PDEProblem& p, const TorusSymbol& sym, double lambda, int N, const IntVec& l_center,
                       const IntVec& j0, double lo, double hi, const CantorParams& params);

struct CoverSummary {
  int N = 0;
  bool pass = false;
  int fibers = 0;
  int fibers_failed = 0;
  long long max_pieces = 0;
  double max_length = 0.0;
  double bound = 0.0;        // N^frak_e
  double large_fiber_min = 0.0;  // smallest diagonal entry on the boundary fibre corners
  bool large_fiber_ok = false;

  nlohmann::json to_json() const;
};

// Covering test over every fibre |j0| < (c+5)N/c, plus the diagonal check that
// settles the remaining fibres on [-2N, 2N].
CoverSummary frak_G0_test(const PDEProblem& p, const SeqVec& u, double lambda, int N, const CantorParams& params);

// |D_k(lambda, 0)| >= N0^{-tau0} for |k| <= N0.
bool bar_I_test(const DispersionRule& rule, double lambda, int N0, double tau0, double* margin = nullptr);

// |p0 + sum_{a<=b} p_ab w_a w_b| >= gamma / (1 + |p|^{d(d+1)}) for w = lambda omega_bar, 0 < |p| <= p_max.
bool tilde_I_test(const std::vector<double>& omega_bar, double lambda, double gamma, int p_max,
                  double* margin = nullptr);

struct CantorPoint {
  double epsilon = 0.0;
  double lambda = 0.0;
  std::vector<int> scales;
  bool fracG = false;
  bool cover = false;
  bool barI = false;
  bool tildeI = false;
  bool in_cantor = false;
  bool nm_ok = false;       // run finished without error
  bool nm_members = false;  // every stage passed the invertibility test
  nlohmann::json detail;
};

CantorPoint cantor_point(const PDEProblem& p, const LambdaRun& run, const CantorParams& params);

struct MeasureRow {
  double epsilon = 0.0;
  int count = 0;
  int excluded = 0;
  double complement = 0.0;
};

struct MeasureScan {
  std::vector<CantorPoint> points;
  std::vector<MeasureRow> rows;  // in the order of the epsilon list
  bool monotone = true;          // complement non-increasing as epsilon decreases
  bool consistent = true;        // in_cantor implies every stage member
};

MeasureScan measure_scan(const PDEProblem& base, const std::vector<double>& lambdas,
                         const std::vector<double>& epsilons, const NashMoserConfig& cfg,
                         const CantorParams& params);
// Same from precomputed runs, one report per epsilon.
MeasureScan measure_from_runs(const PDEProblem& base, const std::vector<NashMoserReport>& reports,
                              const CantorParams& params, int jobs = 1);

struct FiberCensus {
  int j0 = 0;
  int weakly_singular = 0;  // sites (l, j0, a), |l| <= 2 N^chi
  int weakly_bad = 0;       // sites (l, j0, a), |l| <= N^chi
};

struct Census {
  int N = 0;
  double chi = 0.0;
  double theta = 0.0;
  int components = 1;
  std::vector<FiberCensus> fibers;
  int max_weakly_singular = 0;
  int max_weakly_bad = 0;
  double bound_singular = 0.0;  // |A| N^e
  double bound_bad = 0.0;       // N^{e+d+r+1}
  double certificate_threshold = 0.0;  // windows with min |D| above this are N-good
  int exact_windows = 0;
  int uncertified_windows = 0;
  bool singular_ok = true;
  bool bad_ok = true;
  ClusterReport clusters;

  nlohmann::json to_json() const;
};

// Counts of weakly-singular and weakly-bad sites per fibre |j0| <= fiber_radius
// (d = r = 1 torus), and the clusters of the weakly-bad sites at threshold N^2.
Census weakly_bad_census(const PDEProblem& p, const SeqVec& u, double lambda, int N, double chi, int fiber_radius,
                         const CantorParams& params, double theta = 0.0);

// Sufficient condition for N-goodness of D + P from min|D| and the s-norms of P.
bool diagonal_goodness_certificate(double min_abs_diag, const std::vector<double>& P_norms, double P_s0, int N,
                                   const MultiscaleParams& ms, const DecayContext& ctx);

}  // namespace smallsep
