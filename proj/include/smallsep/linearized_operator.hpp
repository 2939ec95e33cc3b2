#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smallsep/decay_matrix.hpp"
#include "smallsep/spectral_model.hpp"

namespace smallsep {

enum class DispersionKind { NLW, NLS };

std::string to_string(DispersionKind k);

using Interval = std::pair<double, double>;

// Diagonal symbol D_k(lambda, theta) = frak_D_{j,a}(lambda omega_bar . l + theta).
struct DispersionRule {
  DispersionKind kind = DispersionKind::NLW;
  double m = 1.0;
  std::vector<double> omega_bar;
  ModelPtr model;

  std::vector<int> components() const;
  double shift(const IntVec& l, double lambda) const;  // lambda omega_bar . l
  double frak_D(const IntVec& j, int a, double y) const;
  double diag_entry(const Site& k, double lambda, double theta) const;
  // d/dtheta of D_k.
  double theta_derivative(const Site& k, double lambda, double theta) const;
  // Closed-form { theta : |D_k(lambda, theta)| <= c }, sorted and disjoint.
  std::vector<Interval> sublevel_intervals(const Site& k, double lambda, double c) const;
  // Upper bound for |dD_k/dtheta| on [t0, t1].
  double theta_lipschitz(const Site& k, double lambda, double t0, double t1) const;
};

// Coefficients of a Toeplitz multiplication operator on the torus, one
// coefficient array per component pair (a, a').
struct TorusSymbol {
  int d = 1;
  int r = 1;
  std::vector<int> comps{1};
  std::map<std::pair<int, int>, CoeffBox> parts;

  cplx coeff(int a, int ap, const IntVec& diff) const;
  int radius() const;
  // Block of all component pairs at a difference i, rows/cols ordered like comps.
  Eigen::MatrixXcd block(const IntVec& diff) const;
  // [T(i)] for the infinite matrix, and derived norms.
  double s_norm(double s, const DecayContext& ctx) const;
  double schur_bound() const;
  bool is_hermitian(double tol = 0.0) const;
};

struct TruncatedOperator {
  LayoutPtr window;
  double lambda = 1.0;
  double theta = 0.0;
  double epsilon = 0.0;
  Eigen::VectorXd diag;  // per scalar row
  BlockMatrix T;

  Eigen::MatrixXcd dense() const;
  BlockMatrix as_block() const { return BlockMatrix(window, window, dense()); }
  double min_abs_diag() const;
};

BlockMatrix symbol_matrix(const TorusSymbol& sym, const LayoutPtr& rows, const LayoutPtr& cols);

TruncatedOperator assemble(const DispersionRule& rule, const TorusSymbol& sym, const LayoutPtr& window, double lambda,
                           double theta, double epsilon);
// Variant with an arbitrary perturbation matrix on the window.
TruncatedOperator assemble_with(const DispersionRule& rule, const BlockMatrix& T, double lambda, double theta,
                                double epsilon);

struct SiteClasses {
  std::vector<int> regular;   // site indices into the window
  std::vector<int> singular;
};

SiteClasses classify_sites(const TruncatedOperator& op);

struct ChainReport {
  int gamma = 1;
  int K = 1;
  int filtered_out = 0;  // sites dropped from fibers with more than K sites
  std::vector<std::vector<Site>> components;
  std::vector<int> diameters;  // graph diameter per component
  int max_size = 0;
  int max_diameter = 0;
  double frak_s = 0.0;
  double length_bound = 0.0;  // (Gamma K)^frak_s
  bool within_bound = true;

  nlohmann::json to_json() const;
};

ChainReport enumerate_chains(const std::vector<Site>& sites, int Gamma, int K, double frak_s);

struct ClusterReport {
  int N = 1;
  double C1 = 2.0;
  std::vector<std::vector<Site>> clusters;
  std::vector<int> diameters;
  int min_separation = -1;  // -1 with fewer than two clusters
  std::vector<bool> diameter_ok;
  bool all_ok = true;

  nlohmann::json to_json() const;
};

ClusterReport cluster_bad_sites(const std::vector<Site>& bad, int N, double C1);

struct DiophantineReport {
  bool linear_ok = true;
  bool quadratic_ok = true;
  double linear_margin = 0.0;     // min over scanned l of |w.l| |l|^d / (2 gamma0)
  double quadratic_margin = 0.0;  // min over scanned p of |sum| |p|^{d(d+1)} / gamma0
  IntVec worst_l;
  std::vector<int> worst_p;
};

DiophantineReport diophantine_check(const std::vector<double>& omega_bar, double gamma0, int Lmax, int Pmax = 20);

// Grid scan of { theta : |D_k(lambda, theta)| <= c } on theta_i = lo + i h,
// i in [0, count), with Lipschitz pruning; returns maximal runs of grid indices.
std::vector<std::pair<long long, long long>> scan_sublevel_runs(const DispersionRule& rule, const Site& k,
                                                                double lambda, double c, double lo, double h,
                                                                long long count);

}  // namespace smallsep
