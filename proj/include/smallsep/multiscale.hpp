#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "smallsep/linearized_operator.hpp"

namespace smallsep {

// One inequality of the parameter ledger, evaluated as lhs (op) rhs.
struct ConstraintCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool ok = false;
};

nlohmann::json to_json(const std::vector<ConstraintCheck>& checks);

struct MultiscaleParams {
  int d = 1;
  int r = 1;
  double s0 = 2.0;
  double s1 = 6.5;
  double s2 = 4.0;
  double S = 10.0;
  double tau = 16.0;
  double tau0 = 5.5;
  double tau1 = 4.5;
  double delta = 0.2;
  double chi0 = 2.0;
  double C1 = 3.0;
  double Upsilon = 10.0;
  double nu0 = 2.5;

  double kappa() const { return tau + d + r + s0; }
  // s0, (s0+s2)/2, s2
  std::vector<double> s_samples() const;
  // exponent zeta of the composite bound, for a given chi
  double zeta(double chi) const;
  std::vector<ConstraintCheck> ledger() const;

  nlohmann::json to_json() const;
  static MultiscaleParams from_json(const nlohmann::json& j, const MultiscaleParams& base);
  static MultiscaleParams from_json(const nlohmann::json& j) { return from_json(j, MultiscaleParams()); }
};

struct GoodnessCertificate {
  int N = 0;
  bool good = false;
  std::string reason;
  double sigma_min = 0.0;
  double condition = 0.0;
  std::vector<double> s_values;
  std::vector<double> norms;       // |A^{-1}|_s
  std::vector<double> thresholds;  // N^{tau + delta s}

  nlohmann::json to_json() const;
};

// Dense check of |A^{-1}|_s <= N^{tau+delta s} at the sampled s values.
// Writes the inverse when requested and A is invertible.
GoodnessCertificate certify_N_good(const BlockMatrix& A, int N, const MultiscaleParams& params,
                                   const DecayContext& ctx, Eigen::MatrixXcd* inverse = nullptr);

// Largest sup-distance between two groups of a layout.
int layout_diameter(const Layout& L);

struct SiteClassification {
  std::vector<int> regular;     // |D_k| >= 1
  std::vector<int> an_regular;  // singular, shielded by an N-good neighbourhood
  std::vector<int> good;        // regular and an_regular, sorted
  std::vector<int> bad;
  // Per site of the window: neighbourhood F (site indices) and the inverse of
  // A^F_F for good sites; empty for bad sites.
  std::vector<std::vector<int>> neighbourhood;
  std::vector<Eigen::MatrixXcd> local_inverse;
  std::vector<GoodnessCertificate> certificates;  // one per singular site
};

SiteClassification classify_AN_sites(const TruncatedOperator& A, int N, const MultiscaleParams& params,
                                     const DecayContext& ctx);

struct SemiReduction {
  LayoutPtr good;
  LayoutPtr bad;
  BlockMatrix W;      // G x E
  BlockMatrix R;      // G x E
  BlockMatrix calG;   // G x E
  BlockMatrix calB;   // G x B
  double RG_s0 = 0.0;
  NeumannInfo neumann;
};

// u_G = calB u_B + calG h for every solution of A u = h. Throws
// std::domain_error when |R^G|_{s0} >= 1/2.
SemiReduction semi_reduce(const TruncatedOperator& A, const SiteClassification& cls, const DecayContext& ctx,
                          const NeumannOptions& opts = {});

struct BadReduction {
  BlockMatrix A_prime;  // E x B
  BlockMatrix Z;        // E x E
  double regular_row_max = 0.0;  // largest entry of A' and Z on regular rows
};

BadReduction reduce_bad(const TruncatedOperator& A, const SiteClassification& cls, const SemiReduction& sr);

// Omega' = { k in E : dist(k, Omega) <= N^2/4 } for each cluster.
std::vector<std::vector<Site>> cluster_neighbourhoods(const Layout& E, const std::vector<std::vector<Site>>& clusters,
                                                      int N);

// Keep only the (Omega_a x Omega'_a) entries of a left inverse L (rows B, cols C).
BlockMatrix restrict_left_inverse(const BlockMatrix& L, const std::vector<std::vector<Site>>& omega,
                                  const std::vector<std::vector<Site>>& omega_prime);

struct LeftInverseInfo {
  int clusters = 0;
  int max_cluster_rank_deficit = 0;
  NeumannInfo neumann;
  double D_s0 = 0.0;  // |L D|_{s0}
  double R_s0 = 0.0;  // |A' - D|_{s0}
};

// Block-diagonal least-squares left inverses per cluster, corrected by the
// Neumann series for A' - D. Throws std::runtime_error on a rank-deficient block.
BlockMatrix block_left_inverse(const BlockMatrix& A_prime, const std::vector<std::vector<Site>>& clusters, int N,
                               const DecayContext& ctx, const NeumannOptions& opts = {},
                               LeftInverseInfo* info = nullptr);

class HypothesisError : public std::runtime_error {
 public:
  HypothesisError(std::string which, const std::string& detail)
      : std::runtime_error(which + " failed: " + detail), which_(std::move(which)) {}
  const std::string& which() const { return which_; }

 private:
  std::string which_;
};

struct MultiscaleOptions {
  bool enforce_hypotheses = true;
  NeumannOptions semi;
  NeumannOptions correction;
  int power_iterations = 60;
};

struct MultiscaleReport {
  int N = 0;
  double chi = 0.0;
  int window_rows = 0;
  int regular = 0;
  int an_regular = 0;
  int bad = 0;
  int clusters = 0;
  double T_s2 = 0.0;
  double inv_op_norm = 0.0;  // estimate of ||A^{-1}||_0
  bool H1 = false, H2 = false, H3 = false;
  double calG_s0 = 0.0, calB_s0 = 0.0;
  double semi_factor = 0.0;
  double regular_row_max = 0.0;
  LeftInverseInfo left;
  ClusterReport cluster_report;
  std::vector<double> s_values;
  std::vector<double> measured;  // |A^{-1}|_s
  std::vector<double> bound;     // N^{chi tau} (N^{chi delta s} + eps |T|_s) / 4
  double zeta = 0.0;
  std::vector<ConstraintCheck> ledger;

  nlohmann::json to_json() const;
};

struct MultiscaleResult {
  BlockMatrix inverse;
  MultiscaleReport report;
};

MultiscaleResult multiscale_inverse(const TruncatedOperator& A, int N, double chi, const MultiscaleParams& params,
                                    const DecayContext& ctx, const MultiscaleOptions& opts = {});

// ||A^{-1}||_0 by power iteration on an LU factorisation.
double inverse_norm_estimate(const Eigen::MatrixXcd& A, int iterations = 60);

}  // namespace smallsep
