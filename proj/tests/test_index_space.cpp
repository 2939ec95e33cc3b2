#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "smallsep/index_space.hpp"

using namespace smallsep;

namespace {

ModelPtr t11() { return make_model(SpectralModel::torus(1, 1)); }

SeqVec single_mode(const ModelPtr& m, const Site& k, cplx c, int R) {
  SeqVec u(Layout::ball(m, R, {k.a}));
  Eigen::VectorXcd b(1);
  b(0) = c;
  u.set(k, b);
  return u;
}

}  // namespace

TEST_CASE("dist: components, identity, sup distance") {
  const Site a{IntVec{0}, IntVec{0}, 1}, b{IntVec{0}, IntVec{0}, -1};
  CHECK(dist(a, b) == 1);
  CHECK(dist(a, a) == 0);
  const Site c{IntVec{2, 0}, IntVec{3}, 1}, e{IntVec{-1, 0}, IntVec{1}, 1};
  CHECK(dist(c, e) == 3);
  CHECK(dist(c, e) == dist(e, c));
}

TEST_CASE("weights on the torus and the degenerate model") {
  const SpectralModel t = SpectralModel::torus(1, 1);
  CHECK(t.weight(IntVec{3}, IntVec{4}) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(t.weight(IntVec{0}, IntVec{0}) == 1.0);
  const SpectralModel g = SpectralModel::degenerate(1);
  CHECK(g.weight(IntVec{0}, IntVec{2}) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("sobolev norm examples") {
  const ModelPtr m = t11();
  const SeqVec u = single_mode(m, Site{IntVec{3}, IntVec{4}, 1}, cplx(0.0, 2.0), 4);
  CHECK(sobolev_norm(u, 1.0) == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(sobolev_norm(SeqVec(Layout::ball(m, 3, {1})), 2.0) == 0.0);

  SeqVec v(Layout::ball(m, 2, {1}));
  Eigen::VectorXcd one(1);
  one(0) = 1.0;
  v.set(Site{IntVec{0}, IntVec{0}, 1}, one);
  v.set(Site{IntVec{2}, IntVec{0}, 1}, one);
  CHECK(sobolev_norm(v, 2.0) == doctest::Approx(std::sqrt(17.0)).epsilon(1e-14));
}

TEST_CASE("projection keeps the closed ball") {
  const ModelPtr m = t11();
  const SeqVec u7 = single_mode(m, Site{IntVec{7}, IntVec{-2}, 1}, 1.5, 8);
  CHECK((project(u7, 7).data() - u7.data()).norm() == 0.0);
  const SeqVec u8 = single_mode(m, Site{IntVec{1}, IntVec{8}, 1}, 1.5, 8);
  CHECK(project(u8, 7).data().norm() == 0.0);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  SeqVec w(Layout::ball(m, 6, {1}));
  for (int i = 0; i < w.data().size(); ++i) w.data()(i) = cplx(g(rng), g(rng));
  const SeqVec pw = project(w, 3);
  for (int s = 0; s < w.layout()->num_sites(); ++s) {
    const bool inside = site_abs(w.layout()->sites()[s]) <= 3;
    CHECK(pw.block(s)(0) == (inside ? w.block(s)(0) : cplx(0.0)));
  }
}

TEST_CASE("interpolation inequality") {
  const ModelPtr m = t11();
  const SeqVec u = single_mode(m, Site{IntVec{2}, IntVec{-3}, 1}, 0.7, 4);
  const double s1 = 1.0, s2 = 4.0, t = 0.3;
  const double lhs = sobolev_norm(u, t * s1 + (1 - t) * s2);
  const double rhs = std::pow(sobolev_norm(u, s1), t) * std::pow(sobolev_norm(u, s2), 1 - t);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
  CHECK(interpolation_check(u, s1, s2, 0.0));
  CHECK(interpolation_check(u, s1, s2, 1.0));

  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> pick(0, 0);
  for (int trial = 0; trial < 20; ++trial) {
    SeqVec w(Layout::ball(m, 5, {1}));
    std::uniform_int_distribution<int> idx(0, static_cast<int>(w.data().size()) - 1);
    for (int q = 0; q < 50; ++q) w.data()(idx(rng)) = cplx(g(rng), g(rng));
    for (double tt : {0.1, 0.5, 0.9}) CHECK(interpolation_check(w, 0.5, 6.0, tt));
  }
}

TEST_CASE("smoothing ratios") {
  const ModelPtr m = t11();
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  SeqVec w(Layout::ball(m, 8, {1}));
  for (int i = 0; i < w.data().size(); ++i) w.data()(i) = cplx(g(rng), g(rng));
  for (int N : {2, 4, 6}) {
    CHECK(smoothing_ratio_p1(w, N, 2.0, 2.0) <= std::pow(m->C_hi, 2.0) * (1 + 1e-12));
    CHECK(smoothing_ratio_p2(w, N, 2.0, 2.0) <= 1.0 + 1e-12);
  }
}

TEST_CASE("layouts: ball size, window lookup, transfer") {
  const ModelPtr m = t11();
  const LayoutPtr B = Layout::ball(m, 3, {1, -1});
  CHECK(B->num_sites() == 7 * 7 * 2);
  CHECK(B->dim() == B->num_sites());
  CHECK(B->find(Site{IntVec{3}, IntVec{-3}, -1}) >= 0);
  CHECK(B->find(Site{IntVec{4}, IntVec{0}, 1}) < 0);
  const LayoutPtr W = Layout::window(m, IntVec{10}, IntVec{-5}, 2, {1});
  CHECK(W->num_sites() == 25);
  for (const Site& k : W->sites()) CHECK(dist(k, Site{IntVec{10}, IntVec{-5}, 1}) <= 2);

  const SeqVec u = single_mode(m, Site{IntVec{1}, IntVec{1}, 1}, 2.0, 2);
  const SeqVec t = transfer(u, Layout::ball(m, 1, {1}));
  CHECK(sobolev_norm(t, 1.0) == doctest::Approx(sobolev_norm(u, 1.0)));
  CHECK(transfer(u, Layout::ball(m, 0, {1})).data().norm() == 0.0);
}

TEST_CASE("compensated sum") {
  CompensatedSum s;
  s.add(1.0);
  for (int i = 0; i < 1000; ++i) s.add(1e-16);
  s.add(-1.0);
  CHECK(s.value() == doctest::Approx(1e-13).epsilon(1e-6));
}
