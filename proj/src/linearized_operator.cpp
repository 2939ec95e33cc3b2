#include "smallsep/linearized_operator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace smallsep {

std::string to_string(DispersionKind k) { return k == DispersionKind::NLW ? "NLW" : "NLS"; }

std::vector<int> DispersionRule::components() const {
  return kind == DispersionKind::NLW ? std::vector<int>{1} : std::vector<int>{-1, 1};
}

double DispersionRule::shift(const IntVec& l, double lambda) const {
  if (static_cast<int>(omega_bar.size()) != l.n) throw std::invalid_argument("shift: frequency dimension mismatch");
  double s = 0.0;
  for (int p = 0; p < l.n; ++p) s += omega_bar[p] * l.v[p];
  return lambda * s;
}

double DispersionRule::frak_D(const IntVec& j, int a, double y) const {
  const double mu = model->eigenvalue(j);
  if (kind == DispersionKind::NLW) return -y * y + m - mu;
  return -a * y - mu + m;
}

double DispersionRule::diag_entry(const Site& k, double lambda, double theta) const {
  return frak_D(k.j, k.a, shift(k.l, lambda) + theta);
}

double DispersionRule::theta_derivative(const Site& k, double lambda, double theta) const {
  if (kind == DispersionKind::NLW) return -2.0 * (shift(k.l, lambda) + theta);
  return -static_cast<double>(k.a);
}

std::vector<Interval> DispersionRule::sublevel_intervals(const Site& k, double lambda, double c) const {
  std::vector<Interval> out;
  if (c < 0) return out;
  const double s = shift(k.l, lambda);
  const double A = m - model->eigenvalue(k.j);
  if (kind == DispersionKind::NLW) {
    if (A + c < 0) return out;
    const double hi = std::sqrt(A + c);
    if (A - c <= 0) {
      out.push_back({-hi - s, hi - s});
    } else {
      const double lo = std::sqrt(A - c);
      out.push_back({-hi - s, -lo - s});
      out.push_back({lo - s, hi - s});
    }
  } else {
    const double a = static_cast<double>(k.a);
    double y0 = (A - c) / a, y1 = (A + c) / a;
    if (y0 > y1) std::swap(y0, y1);
    out.push_back({y0 - s, y1 - s});
  }
  return out;
}

double DispersionRule::theta_lipschitz(const Site& k, double lambda, double t0, double t1) const {
  if (kind == DispersionKind::NLS) return 1.0;
  const double s = shift(k.l, lambda);
  return 2.0 * std::max(std::abs(s + t0), std::abs(s + t1));
}

cplx TorusSymbol::coeff(int a, int ap, const IntVec& diff) const {
  auto it = parts.find({a, ap});
  if (it == parts.end()) return 0.0;
  return it->second.at(diff);
}

int TorusSymbol::radius() const {
  int R = 0;
  for (const auto& [key, box] : parts) R = std::max(R, box.radius());
  return R;
}

Eigen::MatrixXcd TorusSymbol::block(const IntVec& diff) const {
  const int nc = static_cast<int>(comps.size());
  Eigen::MatrixXcd B(nc, nc);
  for (int x = 0; x < nc; ++x)
    for (int y = 0; y < nc; ++y) B(x, y) = coeff(comps[x], comps[y], diff);
  return B;
}

double TorusSymbol::s_norm(double s, const DecayContext& ctx) const {
  const int R = radius();
  CoeffBox shape(d + r, R);
  CompensatedSum acc;
  for (std::size_t idx = 0; idx < shape.size(); ++idx) {
    const IntVec i = shape.key(idx);
    const double v = block_op_norm(block(i));
    if (v == 0.0) continue;
    acc.add(v * v * std::pow(bracket(i), 2.0 * s));
  }
  return std::sqrt(ctx.K1 * std::max(0.0, acc.value()));
}

double TorusSymbol::schur_bound() const {
  const int R = radius();
  CoeffBox shape(d + r, R);
  CompensatedSum acc;
  for (std::size_t idx = 0; idx < shape.size(); ++idx) acc.add(block_op_norm(block(shape.key(idx))));
  return acc.value();
}

bool TorusSymbol::is_hermitian(double tol) const {
  const int R = radius();
  CoeffBox shape(d + r, R);
  for (std::size_t idx = 0; idx < shape.size(); ++idx) {
    const IntVec i = shape.key(idx);
    if ((block(i) - block(-i).adjoint()).cwiseAbs().maxCoeff() > tol) return false;
  }
  return true;
}

Eigen::MatrixXcd TruncatedOperator::dense() const {
  Eigen::MatrixXcd A = epsilon * T.m;
  A.diagonal() += diag.cast<cplx>();
  return A;
}

double TruncatedOperator::min_abs_diag() const {
  return diag.size() ? diag.cwiseAbs().minCoeff() : std::numeric_limits<double>::infinity();
}

BlockMatrix symbol_matrix(const TorusSymbol& sym, const LayoutPtr& rows, const LayoutPtr& cols) {
  if (rows->model().kind != ModelKind::Torus) throw std::invalid_argument("symbol_matrix: torus windows only");
  BlockMatrix M(rows, cols);
  const auto& rs = rows->sites();
  const auto& cs = cols->sites();
  std::vector<IntVec> rk(rs.size()), ck(cs.size());
  for (std::size_t a = 0; a < rs.size(); ++a) rk[a] = concat(rs[a].l, rs[a].j);
  for (std::size_t c = 0; c < cs.size(); ++c) ck[c] = concat(cs[c].l, cs[c].j);
  for (const auto& [key, box] : sym.parts) {
    for (std::size_t a = 0; a < rs.size(); ++a) {
      if (rs[a].a != key.first) continue;
      for (std::size_t c = 0; c < cs.size(); ++c) {
        if (cs[c].a != key.second) continue;
        const IntVec diff = rk[a] - ck[c];
        if (!box.contains(diff)) continue;
        M.m(rows->offset(static_cast<int>(a)), cols->offset(static_cast<int>(c))) = box[box.index(diff)];
      }
    }
  }
  return M;
}

namespace {

Eigen::VectorXd diag_vector(const DispersionRule& rule, const Layout& W, double lambda, double theta) {
  Eigen::VectorXd dg(W.dim());
  for (int s = 0; s < W.num_sites(); ++s) {
    const double v = rule.diag_entry(W.sites()[s], lambda, theta);
    for (int q = 0; q < W.block_size(s); ++q) dg(W.offset(s) + q) = v;
  }
  return dg;
}

}  // namespace

TruncatedOperator assemble(const DispersionRule& rule, const TorusSymbol& sym, const LayoutPtr& window, double lambda,
                           double theta, double epsilon) {
  TruncatedOperator op;
  op.window = window;
  op.lambda = lambda;
  op.theta = theta;
  op.epsilon = epsilon;
  op.diag = diag_vector(rule, *window, lambda, theta);
  op.T = symbol_matrix(sym, window, window);
  return op;
}

TruncatedOperator assemble_with(const DispersionRule& rule, const BlockMatrix& T, double lambda, double theta,
                                double epsilon) {
  if (!same_layout(T.rows, T.cols)) throw std::invalid_argument("assemble_with: T must be square on one window");
  TruncatedOperator op;
  op.window = T.rows;
  op.lambda = lambda;
  op.theta = theta;
  op.epsilon = epsilon;
  op.diag = diag_vector(rule, *T.rows, lambda, theta);
  op.T = T;
  return op;
}

SiteClasses classify_sites(const TruncatedOperator& op) {
  SiteClasses out;
  const Layout& W = *op.window;
  for (int s = 0; s < W.num_sites(); ++s) {
    if (std::abs(op.diag(W.offset(s))) >= 1.0)
      out.regular.push_back(s);
    else
      out.singular.push_back(s);
  }
  return out;
}

namespace {

struct UnionFind {
  std::vector<int> parent, rank;
  explicit UnionFind(int n) : parent(n), rank(n, 0) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank[a] < rank[b]) std::swap(a, b);
    parent[b] = a;
    if (rank[a] == rank[b]) ++rank[a];
  }
};

std::vector<std::vector<int>> components_by_threshold(const std::vector<Site>& s, int threshold, bool strict) {
  const int n = static_cast<int>(s.size());
  UnionFind uf(n);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const int dd = dist(s[a], s[b]);
      if (strict ? dd < threshold : dd <= threshold) uf.unite(a, b);
    }
  std::map<int, std::vector<int>> groups;
  for (int a = 0; a < n; ++a) groups[uf.find(a)].push_back(a);
  std::vector<std::vector<int>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  std::sort(out.begin(), out.end(), [&](const auto& x, const auto& y) { return s[x[0]] < s[y[0]]; });
  return out;
}

nlohmann::json site_json(const Site& k) { return {{"l", k.l.to_vector()}, {"j", k.j.to_vector()}, {"a", k.a}}; }

}  // namespace

ChainReport enumerate_chains(const std::vector<Site>& sites, int Gamma, int K, double frak_s) {
  ChainReport rep;
  rep.gamma = Gamma;
  rep.K = K;
  rep.frak_s = frak_s;
  rep.length_bound = std::pow(static_cast<double>(Gamma) * K, frak_s);
  std::map<IntVec, int> fiber;
  for (const Site& k : sites) fiber[k.j] += 1;
  std::vector<Site> kept;
  for (const Site& k : sites) {
    if (fiber[k.j] > K)
      ++rep.filtered_out;
    else
      kept.push_back(k);
  }
  std::sort(kept.begin(), kept.end());
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
  const auto comps = components_by_threshold(kept, Gamma, false);
  for (const auto& members : comps) {
    std::vector<Site> c;
    for (int i : members) c.push_back(kept[i]);
    // graph diameter by BFS from every vertex
    const int n = static_cast<int>(c.size());
    int diam = 0;
    for (int src = 0; src < n; ++src) {
      std::vector<int> depth(n, -1);
      std::queue<int> q;
      depth[src] = 0;
      q.push(src);
      while (!q.empty()) {
        const int x = q.front();
        q.pop();
        for (int y = 0; y < n; ++y)
          if (depth[y] < 0 && dist(c[x], c[y]) <= Gamma) {
            depth[y] = depth[x] + 1;
            diam = std::max(diam, depth[y]);
            q.push(y);
          }
      }
    }
    rep.max_size = std::max(rep.max_size, n);
    rep.max_diameter = std::max(rep.max_diameter, diam);
    rep.components.push_back(std::move(c));
    rep.diameters.push_back(diam);
  }
  rep.within_bound = rep.max_size <= rep.length_bound;
  return rep;
}

nlohmann::json ChainReport::to_json() const {
  nlohmann::json comps = nlohmann::json::array();
  for (std::size_t c = 0; c < components.size(); ++c) {
    nlohmann::json sites = nlohmann::json::array();
    for (const Site& k : components[c]) sites.push_back(site_json(k));
    comps.push_back({{"size", components[c].size()}, {"graph_diameter", diameters[c]}, {"sites", sites}});
  }
  return {{"gamma", gamma},         {"K", K},
          {"filtered_out", filtered_out}, {"max_size", max_size},
          {"max_diameter", max_diameter}, {"frak_s", frak_s},
          {"length_bound", length_bound}, {"within_bound", within_bound},
          {"components", comps}};
}

ClusterReport cluster_bad_sites(const std::vector<Site>& bad, int N, double C1) {
  ClusterReport rep;
  rep.N = N;
  rep.C1 = C1;
  std::vector<Site> s = bad;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  const auto comps = components_by_threshold(s, N * N, true);
  const double diam_cap = std::pow(static_cast<double>(N), C1);
  std::vector<int> owner(s.size());
  for (std::size_t c = 0; c < comps.size(); ++c) {
    std::vector<Site> cl;
    int diam = 0;
    for (int i : comps[c]) {
      owner[i] = static_cast<int>(c);
      cl.push_back(s[i]);
    }
    for (std::size_t a = 0; a < cl.size(); ++a)
      for (std::size_t b = a + 1; b < cl.size(); ++b) diam = std::max(diam, dist(cl[a], cl[b]));
    rep.clusters.push_back(std::move(cl));
    rep.diameters.push_back(diam);
    rep.diameter_ok.push_back(diam <= diam_cap);
    if (diam > diam_cap) rep.all_ok = false;
  }
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = a + 1; b < s.size(); ++b)
      if (owner[a] != owner[b]) {
        const int dd = dist(s[a], s[b]);
        if (rep.min_separation < 0 || dd < rep.min_separation) rep.min_separation = dd;
      }
  if (rep.min_separation >= 0 && rep.min_separation < N * N) rep.all_ok = false;
  return rep;
}

nlohmann::json ClusterReport::to_json() const {
  nlohmann::json cl = nlohmann::json::array();
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    nlohmann::json sites = nlohmann::json::array();
    for (const Site& k : clusters[c]) sites.push_back(site_json(k));
    cl.push_back({{"diameter", diameters[c]}, {"diameter_ok", static_cast<bool>(diameter_ok[c])}, {"sites", sites}});
  }
  return {{"N", N}, {"C1", C1}, {"min_separation", min_separation}, {"all_ok", all_ok}, {"clusters", cl}};
}

DiophantineReport diophantine_check(const std::vector<double>& omega_bar, double gamma0, int Lmax, int Pmax) {
  DiophantineReport rep;
  const int d = static_cast<int>(omega_bar.size());
  rep.linear_margin = std::numeric_limits<double>::infinity();
  rep.quadratic_margin = std::numeric_limits<double>::infinity();
  // linear condition over the cube |l| <= Lmax
  IntVec l(d);
  for (int p = 0; p < d; ++p) l.v[p] = -Lmax;
  while (true) {
    const int nl = sup_norm(l);
    if (nl > 0) {
      double w = 0.0;
      for (int p = 0; p < d; ++p) w += omega_bar[p] * l.v[p];
      const double margin = std::abs(w) * std::pow(nl, d) / (2.0 * gamma0);
      if (margin < rep.linear_margin) {
        rep.linear_margin = margin;
        rep.worst_l = l;
      }
    }
    int p = d - 1;
    while (p >= 0) {
      if (++l.v[p] <= Lmax) break;
      l.v[p] = -Lmax;
      --p;
    }
    if (p < 0) break;
  }
  // quadratic condition: p_{ab}, a <= b
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) pairs.push_back({a, b});
  const int np = static_cast<int>(pairs.size());
  std::vector<int> pc(np, -Pmax);
  while (true) {
    int pn = 0;
    double v = 0.0;
    for (int q = 0; q < np; ++q) {
      pn = std::max(pn, std::abs(pc[q]));
      v += omega_bar[pairs[q].first] * omega_bar[pairs[q].second] * pc[q];
    }
    if (pn > 0) {
      const double margin = std::abs(v) * std::pow(pn, d * (d + 1)) / gamma0;
      if (margin < rep.quadratic_margin) {
        rep.quadratic_margin = margin;
        rep.worst_p = pc;
      }
    }
    int q = np - 1;
    while (q >= 0) {
      if (++pc[q] <= Pmax) break;
      pc[q] = -Pmax;
      --q;
    }
    if (q < 0) break;
  }
  rep.linear_ok = rep.linear_margin >= 1.0;
  rep.quadratic_ok = rep.quadratic_margin >= 1.0;
  return rep;
}

std::vector<std::pair<long long, long long>> scan_sublevel_runs(const DispersionRule& rule, const Site& k,
                                                                double lambda, double c, double lo, double h,
                                                                long long count) {
  std::vector<long long> bad;
  auto theta = [&](long long i) { return lo + static_cast<double>(i) * h; };
  auto value = [&](long long i) { return std::abs(rule.diag_entry(k, lambda, theta(i))); };
  // depth-first, left to right, so bad indices come out sorted
  std::vector<std::pair<long long, long long>> stack;
  if (count > 0) stack.push_back({0, count - 1});
  while (!stack.empty()) {
    auto [i0, i1] = stack.back();
    stack.pop_back();
    if (i1 - i0 < 16) {
      for (long long i = i0; i <= i1; ++i)
        if (value(i) <= c) bad.push_back(i);
      continue;
    }
    const long long mid = i0 + (i1 - i0) / 2;
    const double half = static_cast<double>(std::max(mid - i0, i1 - mid)) * h;
    const double L = rule.theta_lipschitz(k, lambda, theta(i0), theta(i1));
    if (value(mid) - L * half > c) continue;
    stack.push_back({mid + 1, i1});
    stack.push_back({i0, mid});
  }
  std::vector<std::pair<long long, long long>> runs;
  for (long long i : bad) {
    if (!runs.empty() && runs.back().second + 1 == i)
      runs.back().second = i;
    else
      runs.push_back({i, i});
  }
  return runs;
}

}  // namespace smallsep
