#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "smallsep/decay_matrix.hpp"
#include "smallsep/properties.hpp"

using namespace smallsep;

namespace {

ModelPtr t11() { return make_model(SpectralModel::torus(1, 1)); }

BlockMatrix random_matrix(const LayoutPtr& W, std::uint64_t seed, double decay = 3.0) {
  std::mt19937_64 rng(seed);
  return random_decay_matrix(W, W, rng, decay, 0.7);
}

}  // namespace

TEST_CASE("lattice sum against 1 + 8 zeta(3)") {
  // points with |i|_inf = n on Z^2: 8n
  const double zeta3 = 1.2020569031595942;
  const double S = lattice_weight_sum(2, 4.0);
  CHECK(S >= 1.0 + 8.0 * zeta3 - 1e-12);
  CHECK(S <= 1.0 + 8.0 * zeta3 + 1e-3);
  const DecayContext ctx = DecayContext::make(1, 1, 2.0);
  CHECK(ctx.K1 > ctx.K1_lower_bound());
  CHECK(ctx.interp_constant(ctx.s0) <= 1.0 + 1e-12);
}

TEST_CASE("s-norm examples") {
  const ModelPtr m = t11();
  const DecayContext ctx = DecayContext::make(1, 1, 2.0);
  const LayoutPtr W = Layout::ball(m, 3, {1});
  CHECK(s_norm(BlockMatrix::identity(W), 2.0, ctx) == doctest::Approx(std::sqrt(ctx.K1)).epsilon(1e-14));
  CHECK(s_norm(BlockMatrix(W, W), 2.0, ctx) == 0.0);

  BlockMatrix M(W, W);
  const int r = W->find(Site{IntVec{3}, IntVec{0}, 1});
  const int c = W->find(Site{IntVec{0}, IntVec{0}, 1});
  M.m(W->offset(r), W->offset(c)) = cplx(0.0, -2.0);
  CHECK(s_norm(M, 1.0, ctx) == doctest::Approx(std::sqrt(ctx.K1) * 2.0 * 3.0).epsilon(1e-14));
}

TEST_CASE("Toeplitz majorant") {
  const ModelPtr m = t11();
  const DecayContext ctx = DecayContext::make(1, 1, 2.0);
  const LayoutPtr W = Layout::ball(m, 3, {1});
  BlockMatrix D(W, W);
  for (int i = 0; i < W->dim(); ++i) D.m(i, i) = std::polar(1.0, 0.3 * i);
  const BlockMatrix MD = toeplitz_majorant(D);
  CHECK((MD.m - Eigen::MatrixXcd::Identity(W->dim(), W->dim())).norm() == doctest::Approx(0.0));
  CHECK(s_norm(MD, 3.0, ctx) == doctest::Approx(s_norm(D, 3.0, ctx)).epsilon(1e-13));

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const BlockMatrix M = random_matrix(W, seed);
    const BlockMatrix MM = toeplitz_majorant(M);
    for (double s : {2.0, 4.0}) CHECK(s_norm(MM, s, ctx) == doctest::Approx(s_norm(M, s, ctx)).epsilon(1e-12));
    // entrywise domination of each block
    CHECK(((MM.m.cwiseAbs() - M.m.cwiseAbs()).minCoeff()) >= -1e-14);
  }
}

TEST_CASE("products") {
  const ModelPtr m = t11();
  const DecayContext ctx = DecayContext::make(1, 1, 2.0);
  const LayoutPtr W = Layout::ball(m, 2, {1});
  const BlockMatrix M = random_matrix(W, 3);
  CHECK((multiply(M, BlockMatrix::identity(W)).m - M.m).norm() == 0.0);

  BlockMatrix A(W, W), B(W, W);
  const auto at = [&](int l, int j) { return W->offset(W->find(Site{IntVec{l}, IntVec{j}, 1})); };
  A.m(at(1, 0), at(0, 1)) = 2.0;   // difference (1,-1)
  B.m(at(0, 1), at(-1, 1)) = 3.0;  // difference (1, 0)
  const BlockMatrix C = multiply(A, B);
  CHECK(std::abs(C.m(at(1, 0), at(-1, 1))) == doctest::Approx(6.0));
  CHECK(C.m.cwiseAbs().sum() == doctest::Approx(6.0));

  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const BlockMatrix X = random_matrix(W, seed), Y = random_matrix(W, seed + 100);
    CHECK(s_norm(multiply(X, Y), 2.0, ctx) <= s_norm(X, 2.0, ctx) * s_norm(Y, 2.0, ctx) * (1 + 1e-12));
  }
}

TEST_CASE("apply") {
  const ModelPtr m = t11();
  const LayoutPtr W = Layout::ball(m, 2, {1});
  SeqVec h(W);
  for (int i = 0; i < W->dim(); ++i) h.data()(i) = cplx(i, -i);
  CHECK((apply(BlockMatrix::identity(W), h).data() - h.data()).norm() == 0.0);
  CHECK(apply(BlockMatrix(W, W), h).data().norm() == 0.0);
}

TEST_CASE("smoothing split") {
  const ModelPtr m = t11();
  const DecayContext ctx = DecayContext::make(1, 1, 2.0);
  const LayoutPtr W = Layout::ball(m, 4, {1});
  const auto [near_d, far_d] = smoothing_split(BlockMatrix::identity(W), 2);
  CHECK(far_d.m.norm() == 0.0);
  CHECK((near_d.m - Eigen::MatrixXcd::Identity(W->dim(), W->dim())).norm() == 0.0);

  BlockMatrix M(W, W);
  M.m(W->offset(W->find(Site{IntVec{4}, IntVec{0}, 1})), W->offset(W->find(Site{IntVec{-1}, IntVec{0}, 1}))) = 1.0;
  const auto [n5, f5] = smoothing_split(M, 3);
  CHECK(n5.m.norm() == 0.0);
  CHECK((f5.m - M.m).norm() == 0.0);

  const BlockMatrix R = random_matrix(W, 7, 1.0);
  const auto [nr, fr] = smoothing_split(R, 4);
  CHECK(s_norm(fr, 2.0, ctx) <= std::pow(4.0, -3.0) * s_norm(fr, 5.0, ctx) * (1 + 1e-12));
  CHECK(((nr.m + fr.m) - R.m).norm() == 0.0);
}

TEST_CASE("operator norm") {
  const ModelPtr m = t11();
  const DecayContext ctx = DecayContext::make(1, 1, 2.0);
  const LayoutPtr W = Layout::ball(m, 2, {1});
  CHECK(op_norm(BlockMatrix::identity(W)) == doctest::Approx(1.0));
  CHECK(1.0 <= std::sqrt(ctx.K1));
  Eigen::VectorXcd u = Eigen::VectorXcd::Random(W->dim()), v = Eigen::VectorXcd::Random(W->dim());
  u.normalize();
  v.normalize();
  CHECK(op_norm(Eigen::MatrixXcd(3.5 * u * v.adjoint())) == doctest::Approx(3.5).epsilon(1e-12));
  for (std::uint64_t seed = 40; seed < 50; ++seed) {
    const BlockMatrix M = random_matrix(W, seed);
    CHECK(op_norm(M) <= s_norm(M, 2.0, ctx) * (1 + 1e-12));
  }
}

TEST_CASE("block operator norm matches SVD") {
  Eigen::MatrixXcd b(2, 2);
  b << cplx(1, 2), cplx(0, -1), cplx(3, 0), cplx(0.5, 0.5);
  CHECK(block_op_norm(b) == doctest::Approx(Eigen::JacobiSVD<Eigen::MatrixXcd>(b).singularValues()(0)).epsilon(1e-14));
}

TEST_CASE("perturbed left inverse") {
  const ModelPtr m = t11();
  const DecayContext ctx = DecayContext::make(1, 1, 2.0);
  const LayoutPtr W = Layout::ball(m, 2, {1});
  const int n = W->dim();
  const BlockMatrix Minv = BlockMatrix::identity(W);
  CHECK((perturbed_left_inverse(Minv, BlockMatrix(W, W), ctx).m - Minv.m).norm() == 0.0);

  BlockMatrix P(W, W);
  for (int i = 0; i < n; ++i) P.m(i, i) = 0.1;
  // |Minv|_{s0}|P|_{s0} = 0.1 K1 exceeds 1/2; the measured term ratio is 0.1
  NeumannOptions loose;
  loose.check_precondition = false;
  const BlockMatrix L = perturbed_left_inverse(Minv, P, ctx, loose);
  CHECK((L.m - Eigen::MatrixXcd::Identity(n, n) / 1.1).cwiseAbs().maxCoeff() <= 1e-13);

  BlockMatrix M = random_matrix(W, 5);
  M.m *= 0.05;
  for (int i = 0; i < n; ++i) M.m(i, i) += 2.0;
  const BlockMatrix Mi(W, W, M.m.inverse());
  BlockMatrix Q = random_matrix(W, 6);
  Q.m *= 0.3 / (s_norm(Mi, 2.0, ctx) * s_norm(Q, 2.0, ctx));
  const BlockMatrix LQ = perturbed_left_inverse(Mi, Q, ctx);
  CHECK((LQ.m * (M.m + Q.m) - Eigen::MatrixXcd::Identity(n, n)).norm() <= 1e-10);

  Q.m *= 10.0;  // |Minv|_{s0}|P|_{s0} = 3
  CHECK_THROWS(perturbed_left_inverse(Mi, Q, ctx));
}

TEST_CASE("decay along lines") {
  const ModelPtr m = t11();
  const DecayContext ctx = DecayContext::make(1, 1, 2.0);
  const LayoutPtr W = Layout::ball(m, 2, {1});
  CHECK(decay_along_lines_bound(BlockMatrix::identity(W), 2.0, ctx) >= std::sqrt(ctx.K1));
  for (std::uint64_t seed = 60; seed < 66; ++seed) {
    const BlockMatrix M = random_matrix(W, seed);
    CHECK(s_norm(M, 2.0, ctx) <= decay_along_lines_bound(M, 2.0, ctx) * (1 + 1e-12));
  }
}

TEST_CASE("near part operator norm bound") {
  const ModelPtr m = t11();
  const DecayContext ctx = DecayContext::make(1, 1, 2.0);
  const LayoutPtr W = Layout::ball(m, 4, {1});
  for (std::uint64_t seed = 70; seed < 76; ++seed) {
    const auto [nearM, farM] = smoothing_split(random_matrix(W, seed, 1.0), 2);
    CHECK(s_norm(nearM, 3.0, ctx) <= near_part_bound(2, 3.0, op_norm(nearM), ctx) * (1 + 1e-12));
  }
}
