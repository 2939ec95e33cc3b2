#include "smallsep/multiscale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace smallsep {

namespace {

ConstraintCheck greater(std::string name, double lhs, double rhs) { return {std::move(name), lhs, rhs, lhs > rhs}; }
ConstraintCheck at_least(std::string name, double lhs, double rhs) { return {std::move(name), lhs, rhs, lhs >= rhs}; }

std::vector<int> scalar_rows(const Layout& E, const std::vector<int>& sites) {
  std::vector<int> idx;
  for (int s : sites)
    for (int q = 0; q < E.block_size(s); ++q) idx.push_back(E.offset(s) + q);
  return idx;
}

LayoutPtr sub_layout(const Layout& E, const std::vector<int>& sites) {
  std::vector<Site> ks;
  ks.reserve(sites.size());
  for (int s : sites) ks.push_back(E.sites()[s]);
  return Layout::from_sites(E.model_ptr(), std::move(ks));
}

// Moore-Penrose left inverse of a tall block; returns the rank deficit.
int least_squares_left_inverse(const Eigen::MatrixXcd& blk, Eigen::MatrixXcd& out) {
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(blk, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double tol = sv.size() ? 1e-10 * sv(0) : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  Eigen::VectorXd inv_sv = Eigen::VectorXd::Zero(sv.size());
  for (int i = 0; i < rank; ++i) inv_sv(i) = 1.0 / sv(i);
  out = svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().adjoint();
  return static_cast<int>(blk.cols()) - rank;
}

}  // namespace

nlohmann::json to_json(const std::vector<ConstraintCheck>& checks) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks) arr.push_back({{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"ok", c.ok}});
  return arr;
}

std::vector<double> MultiscaleParams::s_samples() const { return {s0, 0.5 * (s0 + s2), s2}; }

double MultiscaleParams::zeta(double chi) const {
  return 2.0 * tau1 + d + r + 2.0 / chi * (kappa() + C1 * (s0 + d + r));
}

std::vector<ConstraintCheck> MultiscaleParams::ledger() const {
  const double b = d + r;
  const double k = kappa();
  std::vector<ConstraintCheck> out;
  out.push_back(greater("s0 > (d+r)/2", s0, 0.5 * b));
  out.push_back(greater("delta > 0", delta, 0.0));
  out.push_back(greater("1/4 > delta", 0.25, delta));
  out.push_back(greater("s1 > s0 + nu0", s1, s0 + nu0));
  out.push_back(greater("tau > tau0", tau, tau0));
  out.push_back(greater("tau1 > 2 chi0 d", tau1, 2.0 * chi0 * d));
  out.push_back(greater("tau > 2 tau1 + d + r + 1", tau, 2.0 * tau1 + b + 1.0));
  out.push_back(at_least("C1 >= 2", C1, 2.0));
  out.push_back(greater("chi0 (tau - 2 tau1 - d - r) > 3 (kappa + (s0+d+r) C1)", chi0 * (tau - 2.0 * tau1 - b),
                        3.0 * (k + (s0 + b) * C1)));
  out.push_back(greater("chi0 delta > C1", chi0 * delta, C1));
  out.push_back(greater("s2 > 3 kappa + 2 chi0 (tau1 + d + r) + C1 s0", s2, 3.0 * k + 2.0 * chi0 * (tau1 + b) + C1 * s0));
  out.push_back(greater("2 delta s1 > nu0", 2.0 * delta * s1, nu0));
  return out;
}

nlohmann::json MultiscaleParams::to_json() const {
  return {{"s0", s0},     {"s1", s1},       {"s2", s2},       {"S", S},     {"tau", tau},
          {"tau0", tau0}, {"tau1", tau1},   {"delta", delta}, {"chi0", chi0}, {"C1", C1},
          {"Upsilon", Upsilon}, {"nu0", nu0}};
}

MultiscaleParams MultiscaleParams::from_json(const nlohmann::json& j, const MultiscaleParams& base) {
  MultiscaleParams p = base;
  p.s0 = j.value("s0", p.s0);
  p.s1 = j.value("s1", p.s1);
  p.s2 = j.value("s2", p.s2);
  p.S = j.value("S", p.S);
  p.tau = j.value("tau", p.tau);
  p.tau0 = j.value("tau0", p.tau0);
  p.tau1 = j.value("tau1", p.tau1);
  p.delta = j.value("delta", p.delta);
  p.chi0 = j.value("chi0", p.chi0);
  p.C1 = j.value("C1", p.C1);
  p.Upsilon = j.value("Upsilon", p.Upsilon);
  p.nu0 = j.value("nu0", p.nu0);
  return p;
}

nlohmann::json GoodnessCertificate::to_json() const {
  return {{"N", N},
          {"good", good},
          {"reason", reason},
          {"sigma_min", sigma_min},
          {"condition", condition},
          {"s", s_values},
          {"norms", norms},
          {"thresholds", thresholds}};
}

int layout_diameter(const Layout& L) {
  if (L.num_sites() == 0) return 0;
  int diam = 0;
  const IntVec lo = L.box_lo(), hi = L.box_hi();
  for (int p = 0; p < lo.n; ++p) diam = std::max(diam, hi.v[p] - lo.v[p]);
  if (diam == 0 && L.max_components() > 1) diam = 1;
  return diam;
}

GoodnessCertificate certify_N_good(const BlockMatrix& A, int N, const MultiscaleParams& params,
                                   const DecayContext& ctx, Eigen::MatrixXcd* inverse) {
  if (layout_diameter(*A.rows) > 4 * N) throw std::invalid_argument("certify_N_good: window diameter exceeds 4N");
  GoodnessCertificate cert;
  cert.N = N;
  cert.s_values = params.s_samples();
  const auto n = A.m.rows();
  if (n != A.m.cols()) throw std::invalid_argument("certify_N_good: matrix must be square");
  if (n == 0) {
    cert.good = true;
    cert.condition = 1.0;
    cert.sigma_min = std::numeric_limits<double>::infinity();
    for (double s : cert.s_values) {
      cert.norms.push_back(0.0);
      cert.thresholds.push_back(std::pow(static_cast<double>(N), params.tau + params.delta * s));
    }
    if (inverse) inverse->resize(0, 0);
    return cert;
  }
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(A.m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  cert.sigma_min = sv(n - 1);
  cert.condition = cert.sigma_min > 0 ? sv(0) / cert.sigma_min : std::numeric_limits<double>::infinity();
  if (!(cert.sigma_min > 0) || cert.condition > 1e14) {
    cert.good = false;
    cert.reason = "numerically singular";
    return cert;
  }
  Eigen::MatrixXcd inv = svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().adjoint();
  const DecayProfile prof = decay_profile(BlockMatrix(A.cols, A.rows, inv));
  cert.good = true;
  for (double s : cert.s_values) {
    const double v = s_norm(prof, s, ctx);
    const double t = std::pow(static_cast<double>(N), params.tau + params.delta * s);
    cert.norms.push_back(v);
    cert.thresholds.push_back(t);
    if (!(v <= t)) cert.good = false;
  }
  if (!cert.good) cert.reason = "decay bound exceeded";
  if (inverse) *inverse = std::move(inv);
  return cert;
}

SiteClassification classify_AN_sites(const TruncatedOperator& A, int N, const MultiscaleParams& params,
                                     const DecayContext& ctx) {
  const Layout& E = *A.window;
  const Eigen::MatrixXcd M = A.dense();
  const int n = E.num_sites();
  SiteClassification cls;
  cls.neighbourhood.assign(n, {});
  cls.local_inverse.assign(n, Eigen::MatrixXcd());
  for (int s = 0; s < n; ++s) {
    const double Dk = std::abs(A.diag(E.offset(s)));
    if (Dk >= 1.0) {
      cls.regular.push_back(s);
      cls.neighbourhood[s] = {s};
      const auto blk = M.block(E.offset(s), E.offset(s), E.block_size(s), E.block_size(s));
      cls.local_inverse[s] = blk.inverse();
      continue;
    }
    const Site& k = E.sites()[s];
    std::vector<int> F;
    for (int t = 0; t < n; ++t)
      if (index_dist(k.l, k.j, E.sites()[t].l, E.sites()[t].j) <= N) F.push_back(t);
    const LayoutPtr FL = sub_layout(E, F);
    const auto idx = scalar_rows(E, F);
    BlockMatrix AF(FL, FL, M(idx, idx));
    Eigen::MatrixXcd inv;
    GoodnessCertificate cert = certify_N_good(AF, N, params, ctx, &inv);
    if (cert.good) {
      cls.an_regular.push_back(s);
      cls.neighbourhood[s] = std::move(F);
      cls.local_inverse[s] = std::move(inv);
    } else {
      cls.bad.push_back(s);
    }
    cls.certificates.push_back(std::move(cert));
  }
  cls.good = cls.regular;
  cls.good.insert(cls.good.end(), cls.an_regular.begin(), cls.an_regular.end());
  std::sort(cls.good.begin(), cls.good.end());
  return cls;
}

SemiReduction semi_reduce(const TruncatedOperator& A, const SiteClassification& cls, const DecayContext& ctx,
                          const NeumannOptions& opts) {
  const Layout& E = *A.window;
  const Eigen::MatrixXcd M = A.dense();
  SemiReduction sr;
  sr.good = sub_layout(E, cls.good);
  sr.bad = sub_layout(E, cls.bad);
  const int nG = sr.good->dim();
  Eigen::MatrixXcd W = Eigen::MatrixXcd::Zero(nG, E.dim());
  Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(nG, E.dim());
  int row = 0;
  for (int s : cls.good) {
    const auto& F = cls.neighbourhood[s];
    const auto& inv = cls.local_inverse[s];
    if (F.empty() || inv.size() == 0) throw std::logic_error("semi_reduce: good site without neighbourhood");
    const auto fidx = scalar_rows(E, F);
    int pos = 0;
    for (int t : F) {
      if (t == s) break;
      pos += E.block_size(t);
    }
    const int dk = E.block_size(s);
    const Eigen::MatrixXcd rowblk = inv.middleRows(pos, dk);
    W(Eigen::seqN(row, dk), fidx) = rowblk;
    // Q restricted to row k: (A^F_F)^{-1}_k A^{E\F}_F, with the F columns cleared
    Eigen::MatrixXcd q = rowblk * M(fidx, Eigen::all);
    for (int c : fidx) q.col(c).setZero();
    R.middleRows(row, dk) = q;
    row += dk;
  }
  const auto gidx = scalar_indices(E, *sr.good);
  const auto bidx = scalar_indices(E, *sr.bad);
  sr.W = BlockMatrix(sr.good, A.window, std::move(W));
  sr.R = BlockMatrix(sr.good, A.window, R);
  BlockMatrix RG(sr.good, sr.good, R(Eigen::all, gidx));
  const Eigen::MatrixXcd RB = R(Eigen::all, bidx);
  sr.RG_s0 = s_norm(RG, ctx.s0, ctx);
  if (!(sr.RG_s0 < 0.5))
    throw std::domain_error("semi_reduce: |R^G|_{s0} < 1/2 violated (" + std::to_string(sr.RG_s0) + ")");
  NeumannOptions o = opts;
  o.check_precondition = false;
  const BlockMatrix inv = perturbed_left_inverse(BlockMatrix::identity(sr.good), RG, ctx, o, &sr.neumann);
  sr.calG = BlockMatrix(sr.good, A.window, inv.m * sr.W.m);
  sr.calB = BlockMatrix(sr.good, sr.bad, -(inv.m * RB));
  return sr;
}

BadReduction reduce_bad(const TruncatedOperator& A, const SiteClassification& cls, const SemiReduction& sr) {
  const Layout& E = *A.window;
  const Eigen::MatrixXcd M = A.dense();
  const auto gidx = scalar_indices(E, *sr.good);
  const auto bidx = scalar_indices(E, *sr.bad);
  const Eigen::MatrixXcd AEG = M(Eigen::all, gidx);
  BadReduction out;
  out.A_prime = BlockMatrix(A.window, sr.bad, M(Eigen::all, bidx) + AEG * sr.calB.m);
  Eigen::MatrixXcd Z = -(AEG * sr.calG.m);
  Z.diagonal().array() += 1.0;
  out.Z = BlockMatrix(A.window, A.window, std::move(Z));
  for (int s : cls.regular) {
    for (int q = 0; q < E.block_size(s); ++q) {
      const int i = E.offset(s) + q;
      if (out.A_prime.m.cols() > 0)
        out.regular_row_max = std::max(out.regular_row_max, out.A_prime.m.row(i).cwiseAbs().maxCoeff());
      out.regular_row_max = std::max(out.regular_row_max, out.Z.m.row(i).cwiseAbs().maxCoeff());
    }
  }
  return out;
}

std::vector<std::vector<Site>> cluster_neighbourhoods(const Layout& E, const std::vector<std::vector<Site>>& clusters,
                                                      int N) {
  const double reach = 0.25 * N * N;
  std::vector<std::vector<Site>> out;
  for (const auto& c : clusters) {
    std::vector<Site> nb;
    for (const Site& k : E.sites()) {
      for (const Site& q : c)
        if (dist(k, q) <= reach) {
          nb.push_back(k);
          break;
        }
    }
    out.push_back(std::move(nb));
  }
  return out;
}

BlockMatrix restrict_left_inverse(const BlockMatrix& L, const std::vector<std::vector<Site>>& omega,
                                  const std::vector<std::vector<Site>>& omega_prime) {
  if (omega.size() != omega_prime.size()) throw std::invalid_argument("restrict_left_inverse: family size mismatch");
  BlockMatrix out(L.rows, L.cols);
  for (std::size_t a = 0; a < omega.size(); ++a) {
    const LayoutPtr ro = Layout::from_sites(L.rows->model_ptr(), omega[a]);
    const LayoutPtr co = Layout::from_sites(L.cols->model_ptr(), omega_prime[a]);
    const auto ri = scalar_indices(*L.rows, *ro);
    const auto ci = scalar_indices(*L.cols, *co);
    out.m(ri, ci) = L.m(ri, ci);
  }
  return out;
}

BlockMatrix block_left_inverse(const BlockMatrix& A_prime, const std::vector<std::vector<Site>>& clusters, int N,
                               const DecayContext& ctx, const NeumannOptions& opts, LeftInverseInfo* info) {
  const Layout& E = *A_prime.rows;
  const Layout& B = *A_prime.cols;
  std::size_t covered = 0;
  for (const auto& c : clusters) covered += c.size();
  if (static_cast<int>(covered) != B.num_sites())
    throw std::invalid_argument("block_left_inverse: clusters must partition the bad sites");
  const auto omega_p = cluster_neighbourhoods(E, clusters, N);
  Eigen::MatrixXcd LD = Eigen::MatrixXcd::Zero(B.dim(), E.dim());
  Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(E.dim(), B.dim());
  LeftInverseInfo li;
  li.clusters = static_cast<int>(clusters.size());
  for (std::size_t a = 0; a < clusters.size(); ++a) {
    const auto ci = scalar_indices(B, *Layout::from_sites(B.model_ptr(), clusters[a]));
    const auto ri = scalar_indices(E, *Layout::from_sites(E.model_ptr(), omega_p[a]));
    const Eigen::MatrixXcd blk = A_prime.m(ri, ci);
    Eigen::MatrixXcd pinv;
    const int deficit = least_squares_left_inverse(blk, pinv);
    li.max_cluster_rank_deficit = std::max(li.max_cluster_rank_deficit, deficit);
    if (deficit > 0)
      throw std::runtime_error("block_left_inverse: cluster " + std::to_string(a) + " block is rank-deficient by " +
                               std::to_string(deficit));
    LD(ci, ri) = pinv;
    D(ri, ci) = blk;
  }
  const BlockMatrix LDm(A_prime.cols, A_prime.rows, std::move(LD));
  const BlockMatrix Rm(A_prime.rows, A_prime.cols, A_prime.m - D);
  li.D_s0 = s_norm(LDm, ctx.s0, ctx);
  li.R_s0 = s_norm(Rm, ctx.s0, ctx);
  NeumannOptions o = opts;
  o.check_precondition = false;
  BlockMatrix out = perturbed_left_inverse(LDm, Rm, ctx, o, &li.neumann);
  if (info) *info = li;
  return out;
}

double inverse_norm_estimate(const Eigen::MatrixXcd& A, int iterations) {
  const auto n = A.rows();
  if (n == 0) return 0.0;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
  Eigen::VectorXcd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = cplx(1.0 + 0.5 * std::sin(1.0 + i), 0.25 * std::cos(3.0 * i));
  x.normalize();
  double est = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXcd y = lu.solve(x);
    const Eigen::VectorXcd z = lu.adjoint().solve(y);
    const double nz = z.norm();
    if (!(nz > 0) || !std::isfinite(nz)) return std::numeric_limits<double>::infinity();
    const double next = std::sqrt(nz);
    x = z / nz;
    if (it > 2 && std::abs(next - est) <= 1e-12 * next) {
      est = next;
      break;
    }
    est = next;
  }
  return est;
}

nlohmann::json MultiscaleReport::to_json() const {
  return {{"N", N},
          {"chi", chi},
          {"window_rows", window_rows},
          {"regular", regular},
          {"an_regular", an_regular},
          {"bad", bad},
          {"clusters", clusters},
          {"T_s2", T_s2},
          {"inv_op_norm", inv_op_norm},
          {"H1", H1},
          {"H2", H2},
          {"H3", H3},
          {"calG_s0", calG_s0},
          {"calB_s0", calB_s0},
          {"semi_factor", semi_factor},
          {"regular_row_max", regular_row_max},
          {"left_inverse",
           {{"clusters", left.clusters},
            {"D_s0", left.D_s0},
            {"R_s0", left.R_s0},
            {"terms", left.neumann.terms},
            {"max_ratio", left.neumann.max_ratio}}},
          {"cluster_report", cluster_report.to_json()},
          {"s", s_values},
          {"measured", measured},
          {"bound", bound},
          {"zeta", zeta},
          {"ledger", smallsep::to_json(ledger)}};
}

MultiscaleResult multiscale_inverse(const TruncatedOperator& A, int N, double chi, const MultiscaleParams& params,
                                    const DecayContext& ctx, const MultiscaleOptions& opts) {
  const Layout& E = *A.window;
  MultiscaleReport rep;
  rep.N = N;
  rep.chi = chi;
  rep.window_rows = E.dim();
  rep.zeta = params.zeta(chi);
  rep.ledger = params.ledger();
  const double big = std::pow(static_cast<double>(N), chi);
  if (layout_diameter(E) > 4.0 * big + 1e-9)
    throw std::invalid_argument("multiscale_inverse: window diameter exceeds 4 N^chi");

  rep.T_s2 = s_norm(A.T, params.s2, ctx);
  rep.H1 = rep.T_s2 <= params.Upsilon;
  rep.inv_op_norm = inverse_norm_estimate(A.dense(), opts.power_iterations);
  rep.H2 = rep.inv_op_norm <= std::pow(static_cast<double>(N), chi * params.tau1);

  SiteClassification cls = classify_AN_sites(A, N, params, ctx);
  rep.regular = static_cast<int>(cls.regular.size());
  rep.an_regular = static_cast<int>(cls.an_regular.size());
  rep.bad = static_cast<int>(cls.bad.size());
  std::vector<Site> bad_sites;
  for (int s : cls.bad) bad_sites.push_back(E.sites()[s]);
  rep.cluster_report = cluster_bad_sites(bad_sites, N, params.C1);
  rep.clusters = static_cast<int>(rep.cluster_report.clusters.size());
  rep.H3 = rep.cluster_report.all_ok;

  if (opts.enforce_hypotheses) {
    if (!rep.H1)
      throw HypothesisError("(H1)", "|T|_{s2} = " + std::to_string(rep.T_s2) + " > Upsilon = " +
                                        std::to_string(params.Upsilon));
    if (!rep.H2)
      throw HypothesisError("(H2)", "||A^{-1}||_0 ~ " + std::to_string(rep.inv_op_norm) + " > N^{chi tau1}");
    if (!rep.H3) throw HypothesisError("(H3)", "a bad-site cluster is wider than N^{C1}");
  }

  SemiReduction sr = semi_reduce(A, cls, ctx, opts.semi);
  rep.calG_s0 = s_norm(sr.calG, ctx.s0, ctx);
  rep.calB_s0 = sr.calB.m.size() ? s_norm(sr.calB, ctx.s0, ctx) : 0.0;
  rep.semi_factor = sr.neumann.max_ratio;
  BadReduction br = reduce_bad(A, cls, sr);
  rep.regular_row_max = br.regular_row_max;

  const auto gidx = scalar_indices(E, *sr.good);
  const auto bidx = scalar_indices(E, *sr.bad);
  Eigen::MatrixXcd inv = Eigen::MatrixXcd::Zero(E.dim(), E.dim());
  if (bidx.empty()) {
    inv(gidx, Eigen::all) = sr.calG.m;
  } else {
    const BlockMatrix LA = block_left_inverse(br.A_prime, rep.cluster_report.clusters, N, ctx, opts.correction, &rep.left);
    const Eigen::MatrixXcd invB = LA.m * br.Z.m;
    inv(bidx, Eigen::all) = invB;
    inv(gidx, Eigen::all) = sr.calG.m + sr.calB.m * invB;
  }
  MultiscaleResult res;
  res.inverse = BlockMatrix(A.window, A.window, std::move(inv));
  const DecayProfile prof = decay_profile(res.inverse);
  const DecayProfile tprof = decay_profile(A.T);
  rep.s_values = params.s_samples();
  rep.s_values.push_back(params.S);
  for (double s : rep.s_values) {
    rep.measured.push_back(s_norm(prof, s, ctx));
    rep.bound.push_back(0.25 * std::pow(big, params.tau) *
                        (std::pow(big, params.delta * s) + std::abs(A.epsilon) * s_norm(tprof, s, ctx)));
  }
  res.report = std::move(rep);
  return res;
}

}  // namespace smallsep
