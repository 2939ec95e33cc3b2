#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "smallsep/spectral_model.hpp"

using namespace smallsep;

TEST_CASE("eigenvalues") {
  CHECK(SpectralModel::torus(1, 1).eigenvalue(IntVec{3}) == -9.0);
  CHECK(SpectralModel::degenerate(1).eigenvalue(IntVec{2}) == -8.0);
  CHECK(SpectralModel::torus(1, 2).eigenvalue(IntVec{1, 1}) == -2.0);
}

TEST_CASE("multiplicities") {
  const SpectralModel t = SpectralModel::torus(1, 2);
  CHECK(t.multiplicity(IntVec{5, -3}) == 1);
  const SpectralModel g = SpectralModel::degenerate(1);
  CHECK(g.multiplicity(IntVec{0}) == 1);
  CHECK(g.multiplicity(IntVec{4}) == 5);
  CHECK(g.multiplicity(IntVec{4}) <= 25);
  CHECK_FALSE(g.in_index_set(IntVec{-1}));
}

TEST_CASE("nu0") {
  CHECK(nu0(SpectralModel::torus(1, 1)) == doctest::Approx(2.5));
  CHECK(nu0(SpectralModel::degenerate(1)) == doctest::Approx(3.5));
}

TEST_CASE("multiplication matrices on the torus") {
  const ModelPtr m = make_model(SpectralModel::torus(1, 1));
  const LayoutPtr W = Layout::ball(m, 3, {1});
  const BlockMatrix I = multiplication_matrix(*m, FourierFunction::constant(1, 1, 1.0), W, W);
  CHECK((I.m - Eigen::MatrixXcd::Identity(W->dim(), W->dim())).norm() == 0.0);

  FourierFunction c(1, 1);
  c.add(IntVec{0}, IntVec{1}, 1.0);
  c.add(IntVec{0}, IntVec{-1}, 1.0);
  const BlockMatrix C = multiplication_matrix(*m, c, W, W);
  for (int a = 0; a < W->num_sites(); ++a)
    for (int b = 0; b < W->num_sites(); ++b) {
      const Site &k = W->sites()[a], &kp = W->sites()[b];
      const bool hit = k.l == kp.l && std::abs(k.j[0] - kp.j[0]) == 1;
      CHECK(C.m(W->offset(a), W->offset(b)) == cplx(hit ? 1.0 : 0.0));
    }

  std::mt19937_64 rng(3);
  const FourierFunction b = random_trig_poly(1, 1, 2, rng, true);
  CHECK(b.is_real(1e-15));
  const BlockMatrix B = multiplication_matrix(*m, b, W, W);
  CHECK((B.m - B.m.adjoint()).norm() <= 1e-14);
  for (int a = 0; a < W->num_sites(); ++a)
    for (int q = 0; q < W->num_sites(); ++q) {
      const Site &k = W->sites()[a], &kp = W->sites()[q];
      CHECK(B.m(W->offset(a), W->offset(q)) == b.at(concat(k.l - kp.l, k.j - kp.j)));
    }
}

TEST_CASE("synthetic degenerate symbol is Hermitian with the stated decay") {
  const ModelPtr m = make_model(SpectralModel::degenerate(1));
  const LayoutPtr W = Layout::ball(m, 3, {1});
  const BlockSymbol sym = synthetic_degenerate_symbol(*m, 5, 0.5, 3.0, 3);
  const BlockMatrix B = multiplication_matrix_blocks(sym, W, W);
  CHECK((B.m - B.m.adjoint()).norm() <= 1e-13);
  for (int a = 0; a < W->num_sites(); ++a)
    for (int q = 0; q < W->num_sites(); ++q) {
      const Site &k = W->sites()[a], &kp = W->sites()[q];
      const double br = bracket(concat(k.l - kp.l, k.j - kp.j));
      CHECK(block_op_norm(B.site_block(a, q)) <= 0.5 * std::pow(br, -3.0) * (1 + 1e-12));
    }
}

TEST_CASE("collocation grid against direct evaluation") {
  std::mt19937_64 rng(8);
  const FourierFunction f = random_trig_poly(1, 1, 3, rng, false);
  const int M = 16;
  const CollocationGrid grid(2, M);
  const CoeffBox box = CoeffBox::from_function(f, 3);
  const std::vector<cplx> vals = grid.synthesize(box);
  REQUIRE(vals.size() == static_cast<std::size_t>(M * M));
  // the grid point at the origin holds the coefficient sum
  cplx total = 0.0;
  for (const auto& [k, c] : f.coeffs) total += c;
  bool found = false;
  for (const cplx& v : vals) found = found || std::abs(v - total) <= 1e-12;
  CHECK(found);
  const CoeffBox back = grid.analyze(vals, 3);
  for (const auto& [k, c] : f.coeffs) CHECK(std::abs(back.at(k) - c) <= 1e-13);
}

TEST_CASE("Fourier function conjugate and JSON") {
  FourierFunction f(1, 1);
  f.add(IntVec{1}, IntVec{2}, cplx(1.0, 2.0));
  const FourierFunction g = f.conj();
  CHECK(g.at(IntVec{-1, -2}) == cplx(1.0, -2.0));
  const FourierFunction h = FourierFunction::from_json(f.to_json(), 1, 1);
  CHECK(h.at(IntVec{1, 2}) == cplx(1.0, 2.0));
  CHECK_FALSE(f.is_real());
}
