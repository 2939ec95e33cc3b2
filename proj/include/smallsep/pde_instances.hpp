#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smallsep/linearized_operator.hpp"

namespace smallsep {

// c(phi, x) u^pu v^pv. For NLW v is unused; for NLS (u, v) = (u+, u-) and
// the right-hand side f(u) is read with v = conj(u).
struct Monomial {
  FourierFunction coeff;
  int pu = 0;
  int pv = 0;
};

struct Nonlinearity {
  std::vector<Monomial> terms;

  int degree() const;
  int coeff_radius() const;
  bool depends_on_u() const;
  // Pointwise value at one point with coefficient values given per term.
  cplx eval(const std::vector<cplx>& cvals, cplx u, cplx v) const;

  nlohmann::json to_json() const;
  static Nonlinearity from_json(const nlohmann::json& j, int d, int r);
};

// The pair (frak_F, frak_H) of the doubled NLS system obtained by
// substituting conj(u) -> v monomial-wise; frak_H(u, conj(u)) = conj(f(u)).
struct NLSPair {
  Nonlinearity frak_F;
  Nonlinearity frak_H;
};

NLSPair nls_extension_pair(const Nonlinearity& f);

// Real-variable extension of a scalar map f(u) = f1(r, s) + i f2(r, s) into
// (u, v) = (r + is, a + ib), used as an independent check of the pair above.
struct RealVariableExtension {
  std::function<cplx(cplx)> f;
  cplx frak_F(cplx u, cplx v) const;
  cplx frak_H(cplx u, cplx v) const;
};

struct PDEProblem {
  DispersionRule rule;
  Nonlinearity f;  // right-hand side of the PDE
  NLSPair pair;    // NLS only
  double epsilon = 0.0;
  int nu = 2;

  std::vector<int> comps() const { return rule.components(); }
  int d() const { return rule.model->d; }
  int r() const { return rule.model->r; }
  void refresh_pair();

  // T^1 wave equation with f = cos(phi) cos(x) + u^3, m = 1, golden frequency.
  static PDEProblem default_nlw(double epsilon);
  // T^1 NLS with f = cos(phi) cos(x) + |u|^2 u.
  static PDEProblem default_nls(double epsilon);

  nlohmann::json to_json() const;
  static PDEProblem from_json(const nlohmann::json& j);
};

// Golden-ratio frequency 1/phi.
double golden_frequency();

// Grid radius used for collocation of a product of the given total radius
// whose modes up to out_radius are kept.
int collocation_radius(int u_radius, int coeff_radius, int degree, int out_radius);

// F(eps, lambda, u) = D(lambda) u - eps f(u), projected on { |k| <= N }.
// grid_radius < 0 picks the alias-free size; a smaller explicit value that
// aliases onto kept modes throws std::domain_error.
SeqVec eval_F(const PDEProblem& p, const SeqVec& u, double lambda, int N, int grid_radius = -1);
// Only the nonlinear part f(u) on { |k| <= N }.
SeqVec eval_f(const PDEProblem& p, const SeqVec& u, int N, int grid_radius = -1);
// D(lambda) u on the layout of u.
SeqVec apply_D(const PDEProblem& p, const SeqVec& u, double lambda, double theta = 0.0);

// T(u) = -d_u f(u) as a Toeplitz symbol; for NLS the four blocks
// -d_u F, -d_v F, -d_u H, -d_v H.
TorusSymbol linear_symbol(const PDEProblem& p, const SeqVec& u);
TruncatedOperator linearize(const PDEProblem& p, const SeqVec& u, double lambda, int N, double theta = 0.0);

// Reality projector: NLW keeps conj-symmetric coefficients, NLS keeps
// u- = conj(u+). Idempotent and commutes with Pi^(N).
SeqVec reality_project(const SeqVec& u, DispersionKind kind);
double reality_defect(const SeqVec& u, DispersionKind kind, double s);

// C with ||D(lambda) h||_s <= C ||h||_{s+2} for every s.
double dispersion_bound_constant(const DispersionRule& rule, double lambda);

// Random element of the Galerkin space, real in the sense of the problem,
// with ||u||_{s0} scaled to target_norm.
SeqVec random_state(const PDEProblem& p, int N, double s0, double target_norm, std::mt19937_64& rng);

}  // namespace smallsep
