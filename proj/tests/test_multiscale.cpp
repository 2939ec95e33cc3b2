#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "smallsep/multiscale.hpp"
#include "smallsep/pde_instances.hpp"
#include "smallsep/properties.hpp"

using namespace smallsep;

namespace {

const DecayContext& ctx() {
  static const DecayContext c = DecayContext::make(1, 1, 2.0);
  return c;
}

TorusSymbol zero_symbol() {
  TorusSymbol z;
  z.parts[{1, 1}] = CoeffBox(2, 0);
  return z;
}

// Perturbed NLW operator on a window with a Hermitian random T.
TruncatedOperator noisy_operator(const LayoutPtr& W, double lambda, double theta, double eps, std::uint64_t seed) {
  const PDEProblem p = PDEProblem::default_nlw(0.0);
  std::mt19937_64 rng(seed);
  BlockMatrix T = random_decay_matrix(W, W, rng, 4.0, 0.8);
  T.m = 0.5 * (T.m + T.m.adjoint());
  return assemble_with(p.rule, T, lambda, theta, eps);
}

double direct_norm(const Eigen::MatrixXcd& inv, const LayoutPtr& W, double s) {
  return s_norm(BlockMatrix(W, W, inv), s, ctx());
}

}  // namespace

TEST_CASE("goodness of diagonal matrices") {
  const ModelPtr m = make_model(SpectralModel::torus(1, 1));
  const LayoutPtr W = Layout::ball(m, 2, {1});
  // |D^{-1}|_s = sqrt(K1) max 1/|D_ii| for every s; tau = 1 is too small at N <= 5
  MultiscaleParams params;
  BlockMatrix D(W, W);
  for (int i = 0; i < W->dim(); ++i) D.m(i, i) = (i % 2 ? -1.0 : 1.0) * (1.0 + 0.1 * i);
  for (int N : {2, 3, 5}) {
    const GoodnessCertificate c = certify_N_good(D, N, params, ctx());
    CHECK(c.good);
    MultiscaleParams low = params;
    low.tau = 1.0;
    CHECK(certify_N_good(D, N, low, ctx()).good == (std::pow(N, 1.0 + low.delta * low.s0) >= std::sqrt(ctx().K1)));
    for (double v : c.norms) CHECK(v <= std::sqrt(ctx().K1) * (1 + 1e-12));
  }
  D.m(3, 3) = 0.0;
  const GoodnessCertificate bad = certify_N_good(D, 2, params, ctx());
  CHECK_FALSE(bad.good);
  CHECK_FALSE(bad.reason.empty());
}

TEST_CASE("goodness verdict matches the direct norm evaluation") {
  const ModelPtr m = make_model(SpectralModel::torus(1, 1));
  MultiscaleParams params;
  params.tau = 1.0;
  int good = 0, bad = 0;
  for (int it = 0; it < 30; ++it) {
    const LayoutPtr W = Layout::window(m, IntVec{it - 15}, IntVec{(it * 7) % 11 - 5}, 2, {1});
    const TruncatedOperator A = noisy_operator(W, 0.95 + 0.003 * it, 0.1 * (it % 5), 0.05, 100 + it);
    const GoodnessCertificate c = certify_N_good(A.as_block(), 2, params, ctx());
    const Eigen::MatrixXcd inv = A.dense().inverse();
    bool want = true;
    for (double s : params.s_samples())
      want = want && direct_norm(inv, W, s) <= std::pow(2.0, params.tau + params.delta * s);
    CHECK(c.good == want);
    (want ? good : bad) += 1;
  }
  CHECK(good > 0);
  CHECK(bad > 0);
}

TEST_CASE("site classification") {
  const PDEProblem p = PDEProblem::default_nlw(0.0);
  MultiscaleParams params;
  // lambda = 0: D = 1 + j^2 >= 1 everywhere
  const LayoutPtr W = Layout::ball(p.rule.model, 4, {1});
  const TruncatedOperator A = assemble(p.rule, zero_symbol(), W, 0.0, 0.0, 0.0);
  const SiteClassification cls = classify_AN_sites(A, 2, params, ctx());
  CHECK(cls.bad.empty());
  CHECK(cls.regular.size() == static_cast<std::size_t>(W->num_sites()));

  // an isolated singular site far from the window edge
  const LayoutPtr W2 = Layout::ball(p.rule.model, 6, {1});
  TruncatedOperator B = assemble(p.rule, zero_symbol(), W2, 0.0, 0.0, 0.0);
  const int s0 = W2->find(Site{IntVec{0}, IntVec{0}, 1});
  B.diag(W2->offset(s0)) = 0.5;
  const SiteClassification c2 = classify_AN_sites(B, 2, params, ctx());
  CHECK(c2.bad.empty());
  CHECK(c2.an_regular == std::vector<int>{s0});

  // a wide line of exact zeros cannot be shielded
  TruncatedOperator Z = assemble(p.rule, zero_symbol(), W2, 0.0, 0.0, 0.0);
  for (int l = -6; l <= 6; ++l) Z.diag(W2->offset(W2->find(Site{IntVec{l}, IntVec{0}, 1}))) = 0.0;
  const SiteClassification c3 = classify_AN_sites(Z, 2, params, ctx());
  CHECK(c3.bad.size() == 13);
}

TEST_CASE("semi-reduction and bad reduction at eps = 0") {
  const PDEProblem p = PDEProblem::default_nlw(0.0);
  MultiscaleParams params;
  const LayoutPtr W = Layout::ball(p.rule.model, 4, {1});
  const TruncatedOperator A = assemble(p.rule, zero_symbol(), W, 0.0, 0.0, 0.0);
  const SiteClassification cls = classify_AN_sites(A, 2, params, ctx());
  const SemiReduction sr = semi_reduce(A, cls, ctx());
  CHECK(sr.bad->num_sites() == 0);
  const Eigen::MatrixXcd Dinv = A.dense().inverse();
  CHECK((sr.calG.m - Dinv).cwiseAbs().maxCoeff() <= 1e-15);

  // with zero diagonal entries: good rows are h/D, A' is D on the bad columns
  TruncatedOperator Z = A;
  for (int l = -4; l <= 4; ++l) Z.diag(W->offset(W->find(Site{IntVec{l}, IntVec{1}, 1}))) = 0.0;
  const SiteClassification cz = classify_AN_sites(Z, 2, params, ctx());
  REQUIRE(!cz.bad.empty());
  const SemiReduction sz = semi_reduce(Z, cz, ctx());
  for (int g = 0; g < sz.good->num_sites(); ++g) {
    const Site& k = sz.good->sites()[g];
    const int e = W->find(k);
    CHECK(std::abs(sz.calG.m(sz.good->offset(g), W->offset(e)) - 1.0 / Z.diag(W->offset(e))) <= 1e-14);
  }
  const BadReduction br = reduce_bad(Z, cz, sz);
  for (int b = 0; b < sz.bad->num_sites(); ++b) {
    const int e = W->find(sz.bad->sites()[b]);
    CHECK(std::abs(br.A_prime.m(W->offset(e), sz.bad->offset(b)) - Z.diag(W->offset(e))) <= 1e-14);
  }
}

TEST_CASE("semi-reduction identity on random instances") {
  const PDEProblem p = PDEProblem::default_nlw(0.0);
  const LayoutPtr W = Layout::ball(p.rule.model, 6, {1});
  MultiscaleParams params;
  params.tau = 1.0;
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  int with_bad = 0;
  for (int it = 0; it < 6; ++it) {
    const TruncatedOperator A = noisy_operator(W, 0.93 + 0.02 * it, 0.3, 2e-3, 200 + it);
    const SiteClassification cls = classify_AN_sites(A, 2, params, ctx());
    const SemiReduction sr = semi_reduce(A, cls, ctx());
    with_bad += !cls.bad.empty();
    Eigen::VectorXcd h(W->dim());
    for (int i = 0; i < h.size(); ++i) h(i) = cplx(g(rng), g(rng));
    const Eigen::VectorXcd u = A.dense().partialPivLu().solve(h);
    const auto gi = scalar_indices(*W, *sr.good);
    const auto bi = scalar_indices(*W, *sr.bad);
    Eigen::VectorXcd rhs = sr.calG.m * h;
    if (!bi.empty()) rhs += sr.calB.m * u(bi);
    CHECK((u(gi) - rhs).norm() <= 1e-10 * u.norm());
    if (!cls.bad.empty()) {
      const BadReduction br = reduce_bad(A, cls, sr);
      const Eigen::MatrixXcd inv = A.dense().inverse();
      const Eigen::MatrixXcd id = inv(bi, Eigen::all) * br.A_prime.m;
      CHECK((id - Eigen::MatrixXcd::Identity(bi.size(), bi.size())).norm() <= 1e-10);
    }
  }
  CHECK(with_bad > 0);
}

TEST_CASE("block left inverse") {
  const ModelPtr m = make_model(SpectralModel::torus(1, 1));
  const LayoutPtr E = Layout::ball(m, 5, {1});
  const std::vector<Site> bs{Site{IntVec{0}, IntVec{0}, 1}, Site{IntVec{1}, IntVec{0}, 1}};
  const LayoutPtr B = Layout::from_sites(m, bs);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  BlockMatrix Ap(E, B);
  for (int r = 0; r < E->dim(); ++r)
    for (int c = 0; c < B->dim(); ++c)
      if (dist(E->sites()[r], B->sites()[c]) <= 2) Ap.m(r, c) = cplx(g(rng), g(rng));
  LeftInverseInfo info;
  const BlockMatrix L = block_left_inverse(Ap, {bs}, 2, ctx(), {}, &info);
  CHECK(info.clusters == 1);
  CHECK((L.m * Ap.m - Eigen::MatrixXcd::Identity(2, 2)).norm() <= 1e-10);
}

TEST_CASE("multiscale inverse") {
  const PDEProblem p = PDEProblem::default_nlw(0.0);
  MultiscaleParams params;
  const LayoutPtr W = Layout::ball(p.rule.model, 6, {1});
  const TruncatedOperator A = assemble(p.rule, zero_symbol(), W, 0.0, 0.0, 0.0);
  const MultiscaleResult r = multiscale_inverse(A, 2, 2.0, params, ctx());
  CHECK((r.inverse.m - A.dense().inverse()).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(r.report.bad == 0);

  MultiscaleOptions loose;
  loose.enforce_hypotheses = false;
  for (int it = 0; it < 4; ++it) {
    const TruncatedOperator B = noisy_operator(W, 0.94 + 0.03 * it, -0.2, 1e-3, 300 + it);
    MultiscaleParams tight = params;
    tight.tau = 1.0;
    const MultiscaleResult rb = multiscale_inverse(B, 2, 2.0, tight, ctx(), loose);
    const Eigen::MatrixXcd dense = B.dense().inverse();
    CHECK((rb.inverse.m - dense).norm() <= 1e-8 * dense.norm());
  }
}

TEST_CASE("hypothesis failures are named") {
  const PDEProblem p = PDEProblem::default_nlw(0.0);
  MultiscaleParams params;
  const LayoutPtr W = Layout::ball(p.rule.model, 4, {1});
  TruncatedOperator A = assemble(p.rule, zero_symbol(), W, 0.0, 0.0, 0.0);
  A.diag(W->offset(W->find(Site{IntVec{0}, IntVec{0}, 1}))) = 1e-6;
  try {
    multiscale_inverse(A, 2, 2.0, params, ctx());
    FAIL("no hypothesis error");
  } catch (const HypothesisError& e) {
    CHECK(e.which() == "(H2)");
  }
  const LayoutPtr big = Layout::ball(p.rule.model, 12, {1});
  const TruncatedOperator Big = assemble(p.rule, zero_symbol(), big, 0.0, 0.0, 0.0);
  CHECK_THROWS_AS(multiscale_inverse(Big, 2, 2.0, params, ctx()), std::invalid_argument);
}

TEST_CASE("parameter ledger") {
  const MultiscaleParams params;
  CHECK(params.kappa() == doctest::Approx(16.0 + 2 + 2.0));
  const auto s = params.s_samples();
  REQUIRE(s.size() == 3);
  CHECK(s[1] == doctest::Approx(3.0));
  const auto checks = params.ledger();
  CHECK(!checks.empty());
  MultiscaleParams q = MultiscaleParams::from_json(params.to_json());
  CHECK(q.tau == params.tau);
  CHECK(q.Upsilon == params.Upsilon);
}

TEST_CASE("inverse norm estimate") {
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(5, 5);
  A(2, 2) = 0.01;
  CHECK(inverse_norm_estimate(A) == doctest::Approx(100.0).epsilon(1e-8));
}
