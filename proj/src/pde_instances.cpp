#include "smallsep/pde_instances.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace smallsep {

namespace {

cplx ipow(cplx x, int p) {
  cplx out = 1.0;
  for (int i = 0; i < p; ++i) out *= x;
  return out;
}

int layout_radius(const SeqVec& u) {
  int R = 0;
  const Layout& L = *u.layout();
  for (int s = 0; s < L.num_sites(); ++s)
    if (u.block(s).squaredNorm() > 0.0) R = std::max(R, site_abs(L.sites()[s]));
  return R;
}

// Coefficients of one component of u on the combined box.
CoeffBox component_box(const SeqVec& u, int a, int R) {
  const Layout& L = *u.layout();
  CoeffBox box(L.model().d + L.model().r, R);
  for (int s = 0; s < L.num_sites(); ++s) {
    const Site& k = L.sites()[s];
    if (k.a != a || site_abs(k) > R) continue;
    box.set(concat(k.l, k.j), u.block(s)(0));
  }
  return box;
}

void make_conj_symmetric(CoeffBox& box) {
  for (std::size_t i = 0; i < box.size(); ++i) {
    const IntVec k = box.key(i);
    const std::size_t j = box.index(-k);
    if (j < i) continue;
    const cplx avg = 0.5 * (box[i] + std::conj(box[j]));
    box[i] = avg;
    box[j] = std::conj(avg);
  }
}

// conj(g(-k)) for every k: Fourier data of the pointwise conjugate.
CoeffBox conj_reflect(const CoeffBox& box) {
  CoeffBox out(box.dims(), box.radius());
  for (std::size_t i = 0; i < box.size(); ++i) out[i] = std::conj(box[box.index(-box.key(i))]);
  return out;
}

bool coeffs_real(const Nonlinearity& f) {
  for (const auto& t : f.terms)
    if (!t.coeff.is_real(0.0)) return false;
  return true;
}

struct GridValues {
  CollocationGrid grid;
  std::vector<cplx> u, v;
  std::vector<std::vector<cplx>> coeff;  // per term
};

GridValues sample(const PDEProblem& p, const Nonlinearity& f, const SeqVec& u, int G) {
  const int nd = p.d() + p.r();
  const int Ru = std::max(layout_radius(u), 0);
  GridValues gv{CollocationGrid(nd, 2 * G + 1), {}, {}, {}};
  if (p.rule.kind == DispersionKind::NLW) {
    gv.u = gv.grid.synthesize(component_box(u, 1, Ru));
    gv.v.assign(gv.u.size(), cplx(0.0));
  } else {
    gv.u = gv.grid.synthesize(component_box(u, 1, Ru));
    gv.v = gv.grid.synthesize(component_box(u, -1, Ru));
  }
  for (const auto& t : f.terms) gv.coeff.push_back(gv.grid.synthesize(CoeffBox::from_function(t.coeff, t.coeff.radius())));
  return gv;
}

int checked_grid(int Ru, int Rc, int deg, int out, int grid_radius) {
  const int need = collocation_radius(Ru, Rc, deg, out);
  if (grid_radius < 0) return need;
  if (2 * grid_radius + 1 <= deg * Ru + Rc + out || grid_radius < std::max({Ru, Rc, out}))
    throw std::domain_error("collocation grid radius " + std::to_string(grid_radius) +
                            " aliases onto kept modes (needs " + std::to_string(need) + ")");
  return grid_radius;
}

std::vector<cplx> pointwise(const Nonlinearity& f, const GridValues& gv, int du, int dv) {
  std::vector<cplx> out(gv.u.size(), cplx(0.0));
  for (std::size_t t = 0; t < f.terms.size(); ++t) {
    const Monomial& m = f.terms[t];
    if (m.pu < du || m.pv < dv) continue;
    double fac = 1.0;
    for (int q = 0; q < du; ++q) fac *= m.pu - q;
    for (int q = 0; q < dv; ++q) fac *= m.pv - q;
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] += fac * gv.coeff[t][i] * ipow(gv.u[i], m.pu - du) * ipow(gv.v[i], m.pv - dv);
  }
  return out;
}

}  // namespace

int Nonlinearity::degree() const {
  int deg = 0;
  for (const auto& t : terms) deg = std::max(deg, t.pu + t.pv);
  return deg;
}

int Nonlinearity::coeff_radius() const {
  int R = 0;
  for (const auto& t : terms) R = std::max(R, t.coeff.radius());
  return R;
}

bool Nonlinearity::depends_on_u() const {
  for (const auto& t : terms)
    if (t.pu + t.pv > 0) return true;
  return false;
}

cplx Nonlinearity::eval(const std::vector<cplx>& cvals, cplx u, cplx v) const {
  if (cvals.size() != terms.size()) throw std::invalid_argument("Nonlinearity::eval: one coefficient per term");
  cplx out = 0.0;
  for (std::size_t t = 0; t < terms.size(); ++t) out += cvals[t] * ipow(u, terms[t].pu) * ipow(v, terms[t].pv);
  return out;
}

nlohmann::json Nonlinearity::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : terms) arr.push_back({{"pu", t.pu}, {"pv", t.pv}, {"coeff", t.coeff.to_json()}});
  return arr;
}

Nonlinearity Nonlinearity::from_json(const nlohmann::json& j, int d, int r) {
  if (!j.is_array()) throw std::invalid_argument("nonlinearity: expected a list of terms");
  Nonlinearity f;
  for (const auto& e : j) {
    Monomial m;
    m.pu = e.value("pu", 0);
    m.pv = e.value("pv", 0);
    if (m.pu < 0 || m.pv < 0) throw std::invalid_argument("nonlinearity: negative power");
    m.coeff = FourierFunction::from_json(e.at("coeff"), d, r);
    f.terms.push_back(std::move(m));
  }
  return f;
}

NLSPair nls_extension_pair(const Nonlinearity& f) {
  NLSPair out;
  for (const auto& t : f.terms) {
    out.frak_F.terms.push_back(t);
    out.frak_H.terms.push_back(Monomial{t.coeff.conj(), t.pv, t.pu});
  }
  return out;
}

cplx RealVariableExtension::frak_F(cplx u, cplx v) const {
  const double r = u.real(), s = u.imag(), a = v.real(), b = v.imag();
  auto f1 = [&](double x, double y) { return f(cplx(x, y)).real(); };
  auto f2 = [&](double x, double y) { return f(cplx(x, y)).imag(); };
  const cplx I(0.0, 1.0);
  return (1.0 + I) * f1((r + a) / 2, r - a + s) - I * f1((r + a) / 2 - (s + b) / 2, r - a + s) +
         f2(2 * a - r - (s + b), (r - a) / 2 + (s - b) / 2) + (-1.0 + I) * f2(a, (s - b) / 2);
}

cplx RealVariableExtension::frak_H(cplx u, cplx v) const {
  const double r = u.real(), s = u.imag(), a = v.real(), b = v.imag();
  auto f1 = [&](double x, double y) { return f(cplx(x, y)).real(); };
  auto f2 = [&](double x, double y) { return f(cplx(x, y)).imag(); };
  const cplx I(0.0, 1.0);
  return (1.0 + I) * f1((r + a) / 2, (a - r) / 2 + (s - b) / 2) -
         I * f1((r + a) / 2 - (s + b) / 2, (r - a) / 2 + (s - b) / 2) +
         f2((r + a) / 2 + (s + b) / 2, (a - r) / 2 + (s - b) / 2) - (1.0 + I) * f2(a, (s - b) / 2);
}

void PDEProblem::refresh_pair() {
  if (rule.kind == DispersionKind::NLS) pair = nls_extension_pair(f);
}

double golden_frequency() { return 2.0 / (1.0 + std::sqrt(5.0)); }

namespace {

FourierFunction cos_phi_cos_x() {
  FourierFunction c(1, 1);
  for (int a : {-1, 1})
    for (int b : {-1, 1}) c.add(IntVec{a}, IntVec{b}, 0.25);
  return c;
}

}  // namespace

PDEProblem PDEProblem::default_nlw(double epsilon) {
  PDEProblem p;
  p.rule.kind = DispersionKind::NLW;
  p.rule.m = 1.0;
  p.rule.omega_bar = {golden_frequency()};
  p.rule.model = make_model(SpectralModel::torus(1, 1));
  p.f.terms.push_back(Monomial{cos_phi_cos_x(), 0, 0});
  p.f.terms.push_back(Monomial{FourierFunction::constant(1, 1, 1.0), 3, 0});
  p.epsilon = epsilon;
  return p;
}

PDEProblem PDEProblem::default_nls(double epsilon) {
  PDEProblem p;
  p.rule.kind = DispersionKind::NLS;
  p.rule.m = 1.0;
  p.rule.omega_bar = {golden_frequency()};
  p.rule.model = make_model(SpectralModel::torus(1, 1));
  p.f.terms.push_back(Monomial{cos_phi_cos_x(), 0, 0});
  p.f.terms.push_back(Monomial{FourierFunction::constant(1, 1, 1.0), 2, 1});
  p.epsilon = epsilon;
  p.refresh_pair();
  return p;
}

nlohmann::json PDEProblem::to_json() const {
  return {{"kind", to_string(rule.kind)}, {"d", d()},
          {"r", r()},                     {"m", rule.m},
          {"omega_bar", rule.omega_bar},  {"epsilon", epsilon},
          {"terms", f.to_json()}};
}

PDEProblem PDEProblem::from_json(const nlohmann::json& j) {
  PDEProblem p;
  const std::string kind = j.value("kind", std::string("NLW"));
  if (kind == "NLW")
    p.rule.kind = DispersionKind::NLW;
  else if (kind == "NLS")
    p.rule.kind = DispersionKind::NLS;
  else
    throw std::invalid_argument("problem: unknown kind '" + kind + "'");
  const int d = j.value("d", 1);
  const int r = j.value("r", 1);
  p.rule.model = make_model(SpectralModel::torus(d, r));
  p.rule.m = j.value("m", 1.0);
  if (!(p.rule.m > 0.0)) throw std::invalid_argument("problem: mass must be positive");
  if (j.contains("omega_bar"))
    p.rule.omega_bar = j.at("omega_bar").get<std::vector<double>>();
  else
    p.rule.omega_bar.assign(d, golden_frequency() / d);
  if (static_cast<int>(p.rule.omega_bar.size()) != d) throw std::invalid_argument("problem: omega_bar needs d entries");
  double l1 = 0.0;
  for (double w : p.rule.omega_bar) l1 += std::abs(w);
  if (l1 > 1.0 + 1e-15) throw std::invalid_argument("problem: |omega_bar|_1 must be <= 1");
  p.epsilon = j.value("epsilon", 0.0);
  p.f = Nonlinearity::from_json(j.at("terms"), d, r);
  for (const auto& t : p.f.terms)
    if (p.rule.kind == DispersionKind::NLW && t.pv != 0)
      throw std::invalid_argument("problem: NLW terms are polynomials in u only");
  p.refresh_pair();
  return p;
}

int collocation_radius(int u_radius, int coeff_radius, int degree, int out_radius) {
  const int total = degree * u_radius + coeff_radius;
  const int alias_free = (total + out_radius) / 2 + 1;
  return std::max({2 * std::max(u_radius, 1) * std::max(degree, 1), alias_free, coeff_radius, out_radius, u_radius});
}

SeqVec apply_D(const PDEProblem& p, const SeqVec& u, double lambda, double theta) {
  SeqVec out = u;
  const Layout& L = *u.layout();
  for (int s = 0; s < L.num_sites(); ++s) out.block(s) *= p.rule.diag_entry(L.sites()[s], lambda, theta);
  return out;
}

SeqVec eval_f(const PDEProblem& p, const SeqVec& u, int N, int grid_radius) {
  LayoutPtr out_layout = Layout::ball(p.rule.model, N, p.comps());
  SeqVec out(out_layout);
  const int Ru = layout_radius(u);
  const int G = checked_grid(Ru, p.f.coeff_radius(), p.f.degree(), N, grid_radius);
  const bool nls = p.rule.kind == DispersionKind::NLS;
  const Nonlinearity& first = nls ? p.pair.frak_F : p.f;
  if (nls && p.pair.frak_F.terms.size() != p.f.terms.size())
    throw std::logic_error("eval_f: NLS extension pair not built");
  GridValues gv = sample(p, first, u, G);
  std::vector<CoeffBox> parts;
  parts.push_back(gv.grid.analyze(pointwise(first, gv, 0, 0), N));
  if (nls) {
    GridValues gh = gv;
    gh.coeff.clear();
    for (const auto& t : p.pair.frak_H.terms)
      gh.coeff.push_back(gh.grid.synthesize(CoeffBox::from_function(t.coeff, t.coeff.radius())));
    parts.push_back(gh.grid.analyze(pointwise(p.pair.frak_H, gh, 0, 0), N));
  } else if (coeffs_real(p.f) && reality_defect(u, DispersionKind::NLW, 0.0) == 0.0) {
    make_conj_symmetric(parts[0]);
  }
  for (int s = 0; s < out_layout->num_sites(); ++s) {
    const Site& k = out_layout->sites()[s];
    const CoeffBox& box = (nls && k.a == -1) ? parts[1] : parts[0];
    out.block(s)(0) = box.at(concat(k.l, k.j));
  }
  return out;
}

SeqVec eval_F(const PDEProblem& p, const SeqVec& u, double lambda, int N, int grid_radius) {
  LayoutPtr out_layout = Layout::ball(p.rule.model, N, p.comps());
  SeqVec Du = apply_D(p, transfer(u, out_layout), lambda);
  SeqVec f = eval_f(p, u, N, grid_radius);
  return Du - f * cplx(p.epsilon);
}

TorusSymbol linear_symbol(const PDEProblem& p, const SeqVec& u) {
  TorusSymbol sym;
  sym.d = p.d();
  sym.r = p.r();
  sym.comps = p.comps();
  const int nd = sym.d + sym.r;
  const int Ru = layout_radius(u);
  const bool nls = p.rule.kind == DispersionKind::NLS;
  const Nonlinearity& F = nls ? p.pair.frak_F : p.f;
  const int deg = std::max(F.degree() - 1, 0);
  const int Rg = F.coeff_radius() + deg * Ru;
  if (!F.depends_on_u()) {
    for (int a : sym.comps) sym.parts[{a, a}] = CoeffBox(nd, 0);
    return sym;
  }
  const int G = collocation_radius(Ru, F.coeff_radius(), deg, Rg);
  GridValues gv = sample(p, F, u, G);
  auto symbol_of = [&](const Nonlinearity& f, const GridValues& g, int du, int dv) {
    std::vector<cplx> vals = pointwise(f, g, du, dv);
    for (cplx& x : vals) x = -x;
    return g.grid.analyze(vals, Rg);
  };
  if (!nls) {
    CoeffBox g = symbol_of(F, gv, 1, 0);
    if (coeffs_real(F) && reality_defect(u, DispersionKind::NLW, 0.0) == 0.0) make_conj_symmetric(g);
    sym.parts[{1, 1}] = std::move(g);
    return sym;
  }
  GridValues gh = gv;
  gh.coeff.clear();
  for (const auto& t : p.pair.frak_H.terms)
    gh.coeff.push_back(gh.grid.synthesize(CoeffBox::from_function(t.coeff, t.coeff.radius())));
  CoeffBox Ppp = symbol_of(F, gv, 1, 0);
  CoeffBox Ppm = symbol_of(F, gv, 0, 1);
  CoeffBox Pmp = symbol_of(p.pair.frak_H, gh, 1, 0);
  CoeffBox Pmm = symbol_of(p.pair.frak_H, gh, 0, 1);
  // On the reality subspace the blocks satisfy P real, P(-,-) = P(+,+) and
  // Q(-,+) = conj(Q(+,-)); impose them on the rounded transforms.
  const double scale = std::max(1.0, sobolev_norm(u, 0.0));
  if (reality_defect(u, DispersionKind::NLS, 0.0) <= 1e-14 * scale) {
    CoeffBox P = Ppp;
    for (std::size_t i = 0; i < P.size(); ++i) P[i] = 0.5 * (Ppp[i] + Pmm[i]);
    make_conj_symmetric(P);
    CoeffBox Q = Ppm;
    CoeffBox Qc = conj_reflect(Pmp);
    for (std::size_t i = 0; i < Q.size(); ++i) Q[i] = 0.5 * (Ppm[i] + Qc[i]);
    Ppp = P;
    Pmm = P;
    Ppm = Q;
    Pmp = conj_reflect(Q);
  }
  sym.parts[{1, 1}] = std::move(Ppp);
  sym.parts[{1, -1}] = std::move(Ppm);
  sym.parts[{-1, 1}] = std::move(Pmp);
  sym.parts[{-1, -1}] = std::move(Pmm);
  return sym;
}

TruncatedOperator linearize(const PDEProblem& p, const SeqVec& u, double lambda, int N, double theta) {
  LayoutPtr window = Layout::ball(p.rule.model, N, p.comps());
  return assemble(p.rule, linear_symbol(p, u), window, lambda, theta, p.epsilon);
}

SeqVec reality_project(const SeqVec& u, DispersionKind kind) {
  const Layout& L = *u.layout();
  SeqVec out(u.layout());
  auto partner = [&](const Site& k, int a) {
    Site q{-k.l, -k.j, a};
    return L.find(q);
  };
  for (int s = 0; s < L.num_sites(); ++s) {
    const Site& k = L.sites()[s];
    if (kind == DispersionKind::NLW) {
      const int t = partner(k, k.a);
      const cplx other = t >= 0 ? std::conj(u.block(t)(0)) : cplx(0.0);
      out.block(s)(0) = 0.5 * (u.block(s)(0) + other);
    } else if (k.a == 1) {
      const int t = partner(k, -1);
      const cplx other = t >= 0 ? std::conj(u.block(t)(0)) : cplx(0.0);
      out.block(s)(0) = 0.5 * (u.block(s)(0) + other);
    }
  }
  if (kind == DispersionKind::NLS) {
    for (int s = 0; s < L.num_sites(); ++s) {
      const Site& k = L.sites()[s];
      if (k.a != -1) continue;
      const int t = partner(k, 1);
      out.block(s)(0) = t >= 0 ? std::conj(out.block(t)(0)) : cplx(0.0);
    }
  }
  return out;
}

double reality_defect(const SeqVec& u, DispersionKind kind, double s) {
  return sobolev_norm(u - reality_project(u, kind), s);
}

double dispersion_bound_constant(const DispersionRule& rule, double lambda) {
  double w1 = 0.0;
  for (double w : rule.omega_bar) w1 += std::abs(w);
  const double y = std::abs(lambda) * w1;
  // |l|_inf <= w, |mu_j| = |j|_2^2 <= w^2 and w >= 1
  if (rule.kind == DispersionKind::NLW) return std::max(y * y, 1.0) + rule.m;
  return y + 1.0 + rule.m;
}

SeqVec random_state(const PDEProblem& p, int N, double s0, double target_norm, std::mt19937_64& rng) {
  LayoutPtr L = Layout::ball(p.rule.model, N, p.comps());
  SeqVec u(L);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int s = 0; s < L->num_sites(); ++s) {
    const double w = L->model().weight(L->sites()[s]);
    u.block(s)(0) = std::pow(w, -(s0 + 1.0)) * cplx(g(rng), g(rng));
  }
  u = reality_project(u, p.rule.kind);
  const double n = sobolev_norm(u, s0);
  if (n > 0.0) u = u * cplx(target_norm / n);
  return u;
}

}  // namespace smallsep
