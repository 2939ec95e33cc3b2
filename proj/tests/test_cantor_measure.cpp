#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "smallsep/cantor_measure.hpp"

using namespace smallsep;

namespace {

double min_abs_diag(const PDEProblem& p, double lambda, int N) {
  const LayoutPtr W = Layout::ball(p.rule.model, N, p.comps());
  double m = INFINITY;
  for (const Site& k : W->sites()) m = std::min(m, std::abs(p.rule.diag_entry(k, lambda, 0.0)));
  return m;
}

SeqVec zero_state(const PDEProblem& p) { return SeqVec(Layout::ball(p.rule.model, 1, p.comps())); }

}  // namespace

TEST_CASE("lattice constants of the torus") {
  const auto [c, C] = lattice_norm_constants(SpectralModel::torus(1, 1));
  CHECK(c == doctest::Approx(1.0));
  CHECK(C == doctest::Approx(1.0));
  CHECK(theta_range_factor(SpectralModel::torus(1, 1)) == doctest::Approx(10.0));
}

TEST_CASE("inverse-norm test on the central window at eps = 0") {
  const PDEProblem p = PDEProblem::default_nlw(0.0);
  const CantorParams params;
  const int N = 4;
  const double thr = 2.0 * std::pow(N, -params.tau1);
  for (double lam : {0.9, 0.97, 1.0, 1.05}) {
    const FracGTest t = frak_G_test(p, zero_state(p), lam, N, params);
    CHECK(t.pass == (min_abs_diag(p, lam, N) >= thr));
    CHECK(t.threshold == doctest::Approx(thr));
  }
  const double res = 1.0 / p.rule.omega_bar[0];
  CHECK_FALSE(frak_G_test(p, zero_state(p), res, N, params).pass);
}

TEST_CASE("theta cover") {
  const PDEProblem p = PDEProblem::default_nlw(0.0);
  const CantorParams params;
  const TorusSymbol sym = linear_symbol(p, zero_state(p));
  const int N = 4;
  const double g = theta_range_factor(*p.rule.model);
  // far fibre: every diagonal entry stays above 1 on [-gN, gN]
  const ThetaCover far = theta_cover(p, sym, 1.0, N, IntVec{0}, IntVec{60}, -g * N, g * N, params);
  CHECK(far.intervals.empty());
  CHECK(far.pass);

  // central fibre: intervals cover every theta grid point with a small diagonal entry
  const ThetaCover c = theta_cover(p, sym, 1.0, N, IntVec{0}, IntVec{0}, -3.0, 3.0, params);
  CHECK(c.pass);
  CHECK(!c.intervals.empty());
  CHECK(c.pieces <= std::pow(N, params.frak_e));
  const LayoutPtr W = Layout::window(p.rule.model, IntVec{0}, IntVec{0}, N, p.comps());
  const double thr = 2.0 * std::pow(N, -params.tau1);
  for (int i = 0; i <= 6000; ++i) {
    const double th = -3.0 + 1e-3 * i;
    double m = INFINITY;
    for (const Site& k : W->sites()) m = std::min(m, std::abs(p.rule.diag_entry(k, 1.0, th)));
    if (m < thr) {
      bool covered = false;
      for (const auto& iv : c.intervals) covered = covered || (th >= iv.lo && th <= iv.hi);
      CHECK(covered);
    }
  }
}

TEST_CASE("covering test over all fibres") {
  const PDEProblem p = PDEProblem::default_nlw(1e-4);
  const CantorParams params;
  const CoverSummary s = frak_G0_test(p, zero_state(p), 0.97, 4, params);
  CHECK(s.pass);
  CHECK(s.large_fiber_ok);
  CHECK(s.max_pieces <= s.bound);
  CHECK(s.fibers > 0);
}

TEST_CASE("small-divisor tests on lambda") {
  const PDEProblem p = PDEProblem::default_nlw(0.0);
  CHECK(bar_I_test(p.rule, 1.0, 2, 5.5));
  const double res = 1.0 / p.rule.omega_bar[0];
  double margin = 1.0;
  CHECK_FALSE(bar_I_test(p.rule, res, 2, 5.5, &margin));
  CHECK(margin < 1e-12);

  // (lambda w)^2 = 1/2 solves 1 - 2 w^2 = 0
  const double half = std::sqrt(0.5) / p.rule.omega_bar[0];
  CHECK_FALSE(tilde_I_test(p.rule.omega_bar, half, 1.0 / 8, 20));
  CHECK(tilde_I_test(p.rule.omega_bar, 1.0, 1e-3, 20));
}

TEST_CASE("measure scan at eps = 0 counts only the lambda conditions") {
  const PDEProblem p = PDEProblem::default_nlw(0.0);
  const CantorParams params;
  const double res = 1.0 / p.rule.omega_bar[0];
  const std::vector<double> lams{1.0, res};
  const MeasureScan scan = measure_scan(p, lams, {0.0}, NashMoserConfig{}, params);
  REQUIRE(scan.rows.size() == 1);
  int fail = 0;
  for (double l : lams)
    fail += !(bar_I_test(p.rule, l, params.N0, params.tau0) && tilde_I_test(p.rule.omega_bar, l, params.gamma(), params.p_max));
  CHECK(scan.rows[0].excluded == fail);
  CHECK(scan.rows[0].complement == doctest::Approx(0.5));
  CHECK(scan.rows[0].count == 2);
  CHECK(scan.consistent);
  for (const auto& pt : scan.points) CHECK(pt.in_cantor == (pt.lambda == 1.0));
}

TEST_CASE("complement does not grow as eps decreases") {
  const PDEProblem p = PDEProblem::default_nlw(0.0);
  std::vector<double> lams;
  for (int i = 0; i < 6; ++i) lams.push_back(0.95 + 0.02 * i);
  const MeasureScan scan = measure_scan(p, lams, {1e-3, 1e-4, 0.0}, NashMoserConfig{}, CantorParams{});
  CHECK(scan.monotone);
  CHECK(scan.consistent);
  CHECK(scan.rows.size() == 3);
}

TEST_CASE("goodness certificate is monotone in the diagonal minimum") {
  const MultiscaleParams ms;
  const DecayContext ctx = DecayContext::make(1, 1, 2.0);
  const std::vector<double> Pn{1e-3, 2e-3, 4e-3};
  CHECK(diagonal_goodness_certificate(10.0, Pn, 1e-3, 8, ms, ctx));
  CHECK_FALSE(diagonal_goodness_certificate(1e-30, Pn, 1e-3, 8, ms, ctx));
  bool prev = false;
  for (double m = 1e-20; m < 1e3; m *= 3.0) {
    const bool now = diagonal_goodness_certificate(m, Pn, 1e-3, 8, ms, ctx);
    CHECK((!prev || now));
    prev = now;
  }
}

TEST_CASE("weakly-bad census") {
  CantorParams params;
  const PDEProblem p0 = PDEProblem::default_nlw(0.0);
  // lambda = 0: D = 1 + j^2, no weakly-singular site
  const Census none = weakly_bad_census(p0, zero_state(p0), 0.0, 4, 1.5, 12, params);
  CHECK(none.max_weakly_singular == 0);
  CHECK(none.max_weakly_bad == 0);

  params.ms.tau = 0.5;
  const PDEProblem p = PDEProblem::default_nlw(1e-4);
  const Census c = weakly_bad_census(p, zero_state(p), 1.0, 4, 1.5, 12, params);
  CHECK(c.max_weakly_singular > 0);
  CHECK(c.singular_ok);
  CHECK(c.bad_ok);
  CHECK(c.components == 1);
  CHECK(c.bound_singular == doctest::Approx(std::pow(4.0, params.frak_e)));
  for (const auto& f : c.fibers) CHECK(f.weakly_bad <= f.weakly_singular);

  const PDEProblem q = PDEProblem::default_nls(1e-4);
  const Census cn = weakly_bad_census(q, zero_state(q), 1.0, 4, 1.5, 12, params);
  CHECK(cn.components == 2);
  CHECK(cn.bound_singular == doctest::Approx(2.0 * std::pow(4.0, params.frak_e)));

  PDEProblem deg = p;
  deg.rule.model = make_model(SpectralModel::torus(1, 2));
  CHECK_THROWS_AS(weakly_bad_census(deg, zero_state(p), 1.0, 4, 1.5, 12, params), std::invalid_argument);
}

TEST_CASE("parameters JSON") {
  CantorParams params;
  params.tau1 = 3.25;
  params.gamma_tilde = 0.01;
  const CantorParams back = CantorParams::from_json(params.to_json());
  CHECK(back.tau1 == 3.25);
  CHECK(back.gamma() == 0.01);
  CHECK(CantorParams{}.gamma() == doctest::Approx(1.0 / 8));
}
