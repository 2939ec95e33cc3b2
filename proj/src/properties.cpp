#include "smallsep/properties.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "smallsep/spectral_model.hpp"

namespace smallsep {

void PropertyCheck::le(double lhs, double rhs, double rel) {
  ++cases;
  const double ratio = rhs > 0 ? lhs / rhs : (lhs > 0 ? std::numeric_limits<double>::infinity() : 0.0);
  worst = std::max(worst, ratio);
  if (!(lhs <= rhs * (1.0 + rel) + 1e-300)) ++failures;
}

void PropertyCheck::eq(double a, double b, double rel) {
  ++cases;
  const double scale = std::max(std::abs(a), std::abs(b));
  const double err = scale > 0 ? std::abs(a - b) / scale : 0.0;
  worst = std::max(worst, err);
  if (!(err <= rel)) ++failures;
}

void PropertyCheck::record(double value) {
  ++cases;
  worst = std::max(worst, value);
}

bool SuiteResult::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const PropertyCheck& c) { return c.pass(); });
}

const PropertyCheck* SuiteResult::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

nlohmann::json SuiteResult::to_json() const {
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : checks)
    cs.push_back({{"name", c.name},
                  {"cases", c.cases},
                  {"failures", c.failures},
                  {"worst", c.worst},
                  {"informational", c.informational},
                  {"pass", c.pass()}});
  return {{"suite", suite}, {"model", model}, {"pass", pass()}, {"seconds", seconds}, {"checks", cs}};
}

BlockMatrix random_decay_matrix(const LayoutPtr& rows, const LayoutPtr& cols, std::mt19937_64& rng, double decay,
                                double density) {
  BlockMatrix M(rows, cols);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto& gr = rows->groups();
  const auto& gc = cols->groups();
  for (std::size_t a = 0; a < gr.size(); ++a)
    for (std::size_t b = 0; b < gc.size(); ++b) {
      if (density < 1.0 && u(rng) > density) continue;
      const int dd = index_dist(gr[a].l, gr[a].j, gc[b].l, gc[b].j);
      const double amp = std::pow(std::max(1.0, static_cast<double>(dd)), -decay);
      for (int i = 0; i < gr[a].size; ++i)
        for (int k = 0; k < gc[b].size; ++k) M.m(gr[a].offset + i, gc[b].offset + k) = amp * cplx(g(rng), g(rng));
    }
  return M;
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

DecayContext context_for(const SpectralModel& m, const PropertyOptions& o) {
  return o.K1 ? DecayContext::with_K1(m.d, m.r, o.s0, *o.K1) : DecayContext::make(m.d, m.r, o.s0);
}

int max_radius(const SpectralModel& m) {
  if (m.kind == ModelKind::Degenerate) return 3;
  return m.d + m.r <= 2 ? 4 : 2;
}

std::string label(const SpectralModel& m) {
  return m.name() + " d=" + std::to_string(m.d) + " r=" + std::to_string(m.r);
}

SeqVec random_vector(const LayoutPtr& L, std::mt19937_64& rng, double decay) {
  SeqVec u(L);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int s = 0; s < L->num_sites(); ++s) {
    const double w = L->model().weight(L->sites()[s]);
    for (int q = 0; q < L->block_size(s); ++q) u.block(s)(q) = std::pow(w, -decay) * cplx(g(rng), g(rng));
  }
  return u;
}

std::vector<IntVec> lattice_box(const SpectralModel& m, int R) {
  std::vector<IntVec> out;
  IntVec j(m.r);
  for (int p = 0; p < m.r; ++p) j[p] = -R;
  while (true) {
    if (m.in_index_set(j)) out.push_back(j);
    int p = 0;
    while (p < m.r && j[p] == R) j[p++] = -R;
    if (p == m.r) break;
    ++j[p];
  }
  return out;
}

FourierFunction product(const FourierFunction& a, const FourierFunction& b) {
  FourierFunction out(a.d, a.r);
  for (const auto& [ka, ca] : a.coeffs)
    for (const auto& [kb, cb] : b.coeffs) out.coeffs[ka + kb] += ca * cb;
  return out;
}

}  // namespace

SuiteResult run_decay_suite(const ModelPtr& model, const PropertyOptions& opts) {
  const auto t0 = Clock::now();
  SuiteResult res;
  res.suite = "decay_matrix";
  res.model = label(*model);
  const DecayContext ctx = context_for(*model, opts);
  std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<int> radius(1, max_radius(*model));
  std::uniform_int_distribution<int> Nd(2, 3);
  std::uniform_real_distribution<double> decay(1.0, 4.0);

  PropertyCheck k1{"K1_above_lower_bound"}, maj{"majorant_norm_identity"}, alg{"algebra_at_s0"},
      dom{"product_majorant_domination"}, far{"smoothing_far"}, near{"smoothing_near"}, nearop{"near_part_opnorm"},
      op{"opnorm_below_s0_norm"}, lines{"decay_along_lines"}, mono{"monotone_in_s"}, tame{"tame_apply"},
      interp{"interpolation_constant"};
  interp.informational = true;
  k1.le(ctx.K1_lower_bound(), ctx.K1, 0.0);
  if (ctx.K1 <= ctx.K1_lower_bound()) k1.failures = std::max(k1.failures, 1);

  for (int it = 0; it < opts.matrices; ++it) {
    const LayoutPtr W = Layout::ball(model, radius(rng), {1});
    const BlockMatrix M1 = random_decay_matrix(W, W, rng, decay(rng), 0.7);
    const BlockMatrix M2 = random_decay_matrix(W, W, rng, decay(rng), 0.7);
    const BlockMatrix P = multiply(M1, M2);
    const BlockMatrix T1 = toeplitz_majorant(M1), T2 = toeplitz_majorant(M2);
    const BlockMatrix TP = multiply(T1, T2);
    const DecayProfile p1 = decay_profile(M1), p2 = decay_profile(M2), pp = decay_profile(P);
    const DecayProfile pt1 = decay_profile(T1), ptp = decay_profile(TP);

    const double n1s0 = s_norm(p1, ctx.s0, ctx), n2s0 = s_norm(p2, ctx.s0, ctx);
    alg.le(s_norm(pp, ctx.s0, ctx), n1s0 * n2s0);
    op.le(op_norm(M1), n1s0);
    double prev = 0.0;
    for (double s : opts.s_values) {
      const double a = s_norm(p1, s, ctx);
      maj.eq(a, s_norm(pt1, s, ctx), 1e-12);
      dom.le(s_norm(pp, s, ctx), s_norm(ptp, s, ctx));
      lines.le(a, decay_along_lines_bound(M1, s, ctx));
      mono.le(prev, a);
      prev = a;
      const double n2s = s_norm(p2, s, ctx);
      if (n1s0 * n2s + a * n2s0 > 0)
        interp.record(2.0 * s_norm(pp, s, ctx) / (n1s0 * n2s + a * n2s0));
      const SeqVec h = random_vector(W, rng, 1.0);
      const double C = apply_constant(s, ctx, *model);
      tame.le(sobolev_norm(apply(M1, h), s), C * (n1s0 * sobolev_norm(h, s) + a * sobolev_norm(h, ctx.s0)));
    }
    const int N = Nd(rng);
    const auto [nr, fr] = smoothing_split(M1, N);
    const double s = ctx.s0, sp = ctx.s0 + 3.0;
    far.le(s_norm(fr, s, ctx), std::pow(static_cast<double>(N), -(sp - s)) * s_norm(fr, sp, ctx));
    near.le(s_norm(nr, sp, ctx), std::pow(static_cast<double>(N), sp - s) * s_norm(nr, s, ctx));
    nearop.le(s_norm(nr, s, ctx), near_part_bound(N, s, op_norm(nr), ctx));
  }
  res.checks = {k1, maj, alg, dom, far, near, nearop, op, lines, mono, tame, interp};
  res.seconds = since(t0);
  return res;
}

SuiteResult run_index_suite(const ModelPtr& model, const PropertyOptions& opts) {
  const auto t0 = Clock::now();
  SuiteResult res;
  res.suite = "index_space";
  res.model = label(*model);
  std::mt19937_64 rng(opts.seed ^ 0x243f6a8885a308d3ULL);
  PropertyCheck sym{"dist_symmetric"}, tri{"dist_triangle"}, mono{"sobolev_monotone"}, p1{"smoothing_P1"},
      p2{"smoothing_P2"}, interp{"interpolation"}, prod{"cone_product_structure"}, wts{"weight_comparability"};

  const LayoutPtr W = Layout::ball(model, 2, {-1, 1});
  const auto& S = W->sites();
  for (const Site& a : S)
    for (const Site& b : S) {
      const int dab = dist(a, b);
      sym.eq(dab, dist(b, a), 0.0);
      for (const Site& c : S) tri.le(dist(a, c), dab + dist(b, c), 0.0);
    }

  const LayoutPtr B = Layout::ball(model, 8, {1});
  const double C1 = std::pow(model->C_hi, opts.nu);
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  for (int it = 0; it < 50; ++it) {
    const SeqVec u = random_vector(B, rng, 0.5 + 2.0 * ut(rng));
    double prev = 0.0;
    for (double s = 0.0; s <= 6.0; s += 0.5) {
      const double v = sobolev_norm(u, s);
      mono.le(prev, v);
      prev = v;
    }
    for (int N = 2; N <= 7; ++N) {
      p1.le(smoothing_ratio_p1(u, N, opts.s0, opts.nu), C1);
      p2.le(smoothing_ratio_p2(u, N, opts.s0, opts.nu), 1.0);
    }
    const double t = ut(rng);
    ++interp.cases;
    if (!interpolation_check(u, 1.0, 5.0, t)) ++interp.failures;
  }
  for (const Site& k : B->sites()) {
    const double w = model->weight(k);
    const double a = site_abs(k);
    wts.le(model->c_lo * a, w);
    wts.le(w, model->C_hi * std::max(1.0, a));
  }
  const auto box = lattice_box(*model, 6);
  for (const IntVec& j : box)
    for (const IntVec& jp : box) {
      // every coordinate interleaving of j and jp
      for (int mask = 0; mask < (1 << model->r); ++mask) {
        IntVec jj(model->r);
        for (int p = 0; p < model->r; ++p) jj[p] = (mask >> p) & 1 ? j[p] : jp[p];
        ++prod.cases;
        if (!model->in_index_set(jj)) ++prod.failures;
      }
    }
  res.checks = {sym, tri, mono, p1, p2, interp, prod, wts};
  res.seconds = since(t0);
  return res;
}

SuiteResult run_spectral_suite(const ModelPtr& model, const PropertyOptions& opts) {
  const auto t0 = Clock::now();
  SuiteResult res;
  res.suite = "spectral_model";
  res.model = label(*model);
  std::mt19937_64 rng(opts.seed ^ 0x13198a2e03707344ULL);
  PropertyCheck integ{"eigenvalue_lattice"}, mult{"multiplicity_bound"}, herm{"hermitian_multiplication"},
      prodrule{"multiplication_product_rule"}, c33{"multiplication_decay_constant"};
  c33.informational = true;
  const double z = model->zden;
  for (const IntVec& j : lattice_box(*model, 6)) {
    const double mu = model->eigenvalue(j) * z;
    integ.eq(mu, std::round(mu), 0.0);
    const double n2 = model->lattice_norm2(j) * z;
    integ.eq(n2, std::round(n2), 0.0);
    const double base = std::sqrt(model->lattice_norm2(j + model->rho));
    mult.le(model->multiplicity(j), std::pow(std::max(base, 1.0), model->gd - model->r));
  }
  const DecayContext ctx = context_for(*model, opts);
  if (model->kind == ModelKind::Torus) {
    const LayoutPtr W = Layout::ball(model, 3, {1});
    const LayoutPtr inner = Layout::ball(model, 2, {1});
    for (int it = 0; it < 20; ++it) {
      const FourierFunction b1 = random_trig_poly(model->d, model->r, 2, rng, true, 1.0);
      const FourierFunction b2 = random_trig_poly(model->d, model->r, 1, rng, false, 1.0);
      const BlockMatrix B = multiplication_matrix(*model, b1, W, W);
      herm.le((B.m - B.m.adjoint()).norm(), 1e-14 * B.m.norm(), 0.0);
      const LayoutPtr mid = Layout::ball(model, 2 + 2, {1});
      const BlockMatrix L = multiply(multiplication_matrix(*model, b1, inner, mid),
                                     multiplication_matrix(*model, b2, mid, inner));
      const BlockMatrix R = multiplication_matrix(*model, product(b1, b2), inner, inner);
      prodrule.le((L.m - R.m).norm(), 1e-13 * std::max(1.0, R.m.norm()), 0.0);
      const double bn = b1.sobolev_norm(ctx.s0 + nu0(*model));
      if (bn > 0) c33.record(s_norm(B, ctx.s0, ctx) / bn);
    }
  } else {
    const LayoutPtr W = Layout::ball(model, 3, {1});
    for (int it = 0; it < 20; ++it) {
      const BlockSymbol sym = synthetic_degenerate_symbol(*model, opts.seed + it, 1.0, 3.0, 2);
      const BlockMatrix B = multiplication_matrix_blocks(sym, W, W);
      herm.le((B.m - B.m.adjoint()).norm(), 1e-14 * B.m.norm(), 0.0);
    }
    prodrule.informational = true;  // no convolution structure on the synthetic blocks
  }
  res.checks = {integ, mult, herm, prodrule, c33};
  res.seconds = since(t0);
  return res;
}

std::vector<SuiteResult> run_all_properties(const PropertyOptions& opts) {
  const ModelPtr t11 = make_model(SpectralModel::torus(1, 1));
  const ModelPtr t12 = make_model(SpectralModel::torus(1, 2));
  const ModelPtr deg = make_model(SpectralModel::degenerate(1));
  std::vector<SuiteResult> out;
  for (const ModelPtr& m : {t11, t12, deg}) out.push_back(run_decay_suite(m, opts));
  for (const ModelPtr& m : {t11, deg}) out.push_back(run_index_suite(m, opts));
  for (const ModelPtr& m : {t11, t12, deg}) out.push_back(run_spectral_suite(m, opts));
  return out;
}

}  // namespace smallsep
