#include "smallsep/cantor_measure.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <limits>
#include <thread>

#include <Eigen/Eigenvalues>

namespace smallsep {

namespace {

using Range = std::pair<long long, long long>;

std::vector<Range> merge_ranges(std::vector<Range> rs) {
  std::sort(rs.begin(), rs.end());
  std::vector<Range> out;
  for (const auto& r : rs) {
    if (r.first > r.second) continue;
    if (!out.empty() && r.first <= out.back().second + 1)
      out.back().second = std::max(out.back().second, r.second);
    else
      out.push_back(r);
  }
  return out;
}

Range to_indices(const Interval& iv, double lo, double h, long long count) {
  long long a = static_cast<long long>(std::ceil((iv.first - lo) / h));
  long long b = static_cast<long long>(std::floor((iv.second - lo) / h));
  a = std::max(a, 0LL);
  b = std::min(b, count - 1);
  return {a, b};
}

bool in_ranges(const std::vector<Range>& rs, long long i) {
  auto it = std::upper_bound(rs.begin(), rs.end(), Range{i, std::numeric_limits<long long>::max()});
  if (it == rs.begin()) return false;
  --it;
  return i >= it->first && i <= it->second;
}

// Sliding minimum of width 2w+1 over a line; out[i] = min v[i-w .. i+w] clipped.
std::vector<double> sliding_min(const std::vector<double>& v, int w) {
  const int n = static_cast<int>(v.size());
  std::vector<double> out(n);
  std::deque<int> dq;
  int right = 0;
  for (int i = 0; i < n; ++i) {
    while (right < n && right <= i + w) {
      while (!dq.empty() && v[dq.back()] >= v[right]) dq.pop_back();
      dq.push_back(right++);
    }
    while (dq.front() < i - w) dq.pop_front();
    out[i] = v[dq.front()];
  }
  return out;
}

void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

std::vector<IntVec> box_points(int n, int R) {
  std::vector<IntVec> out;
  IntVec x(n);
  for (int p = 0; p < n; ++p) x[p] = -R;
  if (n == 0) return {x};
  while (true) {
    out.push_back(x);
    int p = 0;
    while (p < n && x[p] == R) x[p++] = -R;
    if (p == n) break;
    ++x[p];
  }
  return out;
}

}  // namespace

nlohmann::json CantorParams::to_json() const {
  return {{"tau0", tau0},
          {"tau1", tau1},
          {"frak_e", frak_e},
          {"N0", N0},
          {"gamma_tilde", gamma()},
          {"p_max", p_max},
          {"grid_factor", grid_factor},
          {"max_exact_checks", max_exact_checks},
          {"C1", C1},
          {"max_exact_windows", max_exact_windows},
          {"exact_window_rows", exact_window_rows},
          {"multiscale", ms.to_json()}};
}

CantorParams CantorParams::from_json(const nlohmann::json& j) {
  CantorParams c;
  c.tau0 = j.value("tau0", c.tau0);
  c.tau1 = j.value("tau1", c.tau1);
  c.frak_e = j.value("frak_e", c.frak_e);
  c.N0 = j.value("N0", c.N0);
  c.gamma_tilde = j.value("gamma_tilde", c.gamma_tilde);
  c.p_max = j.value("p_max", c.p_max);
  c.grid_factor = j.value("grid_factor", c.grid_factor);
  c.max_exact_checks = j.value("max_exact_checks", c.max_exact_checks);
  c.C1 = j.value("C1", c.C1);
  c.max_exact_windows = j.value("max_exact_windows", c.max_exact_windows);
  c.exact_window_rows = j.value("exact_window_rows", c.exact_window_rows);
  if (j.contains("multiscale")) c.ms = MultiscaleParams::from_json(j.at("multiscale"));
  if (!(c.grid_factor > 0)) throw std::invalid_argument("grid_factor must be positive");
  return c;
}

std::pair<double, double> lattice_norm_constants(const SpectralModel& model) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.gram);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  return {std::sqrt(lo), std::sqrt(model.r * hi)};
}

double theta_range_factor(const SpectralModel& model) {
  const auto [c, C] = lattice_norm_constants(model);
  return (2.0 * c + 8.0) * C / c;
}

FracGTest frak_G_test(const PDEProblem& p, const SeqVec& u, double lambda, int N, const CantorParams& params) {
  FracGTest t;
  t.threshold = 2.0 * std::pow(static_cast<double>(N), -params.tau1);
  const TorusSymbol sym = linear_symbol(p, u);
  const LayoutPtr window = Layout::ball(p.rule.model, N, p.comps());
  double mD = std::numeric_limits<double>::infinity();
  for (const Site& k : window->sites()) mD = std::min(mD, std::abs(p.rule.diag_entry(k, lambda, 0.0)));
  const double e = std::abs(p.epsilon) * sym.schur_bound();
  t.sigma_min_lo = std::max(0.0, mD - e);
  t.sigma_min_hi = mD + e;
  if (t.sigma_min_lo >= t.threshold || t.sigma_min_hi < t.threshold) {
    t.certified = true;
    t.pass = t.sigma_min_lo >= t.threshold;
    return t;
  }
  const TruncatedOperator op = assemble(p.rule, sym, window, lambda, 0.0, p.epsilon);
  const double s = smallest_singular_value(op.dense());
  t.sigma_min_lo = t.sigma_min_hi = s;
  t.pass = s >= t.threshold;
  return t;
}

nlohmann::json ThetaCover::to_json() const {
  nlohmann::json iv = nlohmann::json::array();
  for (const auto& i : intervals) iv.push_back({i.lo, i.hi});
  return {{"N", N},          {"l_center", l_center.to_vector()}, {"j0", j0.to_vector()},
          {"lo", lo},        {"hi", hi},                         {"step", step},
          {"intervals", iv}, {"pieces", pieces},                 {"max_length", max_length},
          {"total_length", total_length}, {"exact_checks", exact_checks}, {"exact_budget_hit", exact_budget_hit},
          {"pass", pass}};
}

ThetaCover theta_cover(const PDEProblem& p, const TorusSymbol& sym, double lambda, int N, const IntVec& l_center,
                       const IntVec& j0, double lo, double hi, const CantorParams& params) {
  ThetaCover cov;
  cov.N = N;
  cov.l_center = l_center;
  cov.j0 = j0;
  cov.lo = lo;
  cov.hi = hi;
  const double unit = std::pow(static_cast<double>(N), -params.tau1);
  const double h = params.grid_factor * unit;
  cov.step = h;
  const long long count = static_cast<long long>(std::floor((hi - lo) / h)) + 1;
  const double c = 2.0 * unit;
  const double e = std::abs(p.epsilon) * sym.schur_bound();
  const LayoutPtr window = Layout::window(p.rule.model, l_center, j0, N, p.comps());

  std::vector<Range> sure, cand;
  for (const Site& k : window->sites()) {
    for (const auto& iv : p.rule.sublevel_intervals(k, lambda, c + e)) cand.push_back(to_indices(iv, lo, h, count));
    if (c - e > 0)
      for (const auto& iv : p.rule.sublevel_intervals(k, lambda, c - e)) sure.push_back(to_indices(iv, lo, h, count));
  }
  sure = merge_ranges(sure);
  cand = merge_ranges(cand);

  std::vector<Range> bad = sure;
  if (e > 0) {
    Eigen::MatrixXcd base;
    bool built = false;
    for (const auto& r : cand) {
      for (long long i = r.first; i <= r.second; ++i) {
        if (in_ranges(sure, i)) continue;
        if (cov.exact_checks >= params.max_exact_checks) {
          // out of budget: count the point as bad
          cov.exact_budget_hit = true;
          bad.push_back({i, i});
          continue;
        }
        if (!built) {
          base = (assemble(p.rule, sym, window, lambda, 0.0, p.epsilon).T.m * cplx(p.epsilon));
          built = true;
        }
        const double theta = lo + static_cast<double>(i) * h;
        Eigen::MatrixXcd M = base;
        for (int s = 0; s < window->num_sites(); ++s)
          for (int q = 0; q < window->block_size(s); ++q)
            M(window->offset(s) + q, window->offset(s) + q) += p.rule.diag_entry(window->sites()[s], lambda, theta);
        ++cov.exact_checks;
        if (smallest_singular_value(M) < c) bad.push_back({i, i});
      }
    }
    bad = merge_ranges(bad);
  }
  for (const auto& r : bad) {
    ThetaInterval iv{lo + static_cast<double>(r.first - 1) * h, lo + static_cast<double>(r.second + 1) * h};
    cov.max_length = std::max(cov.max_length, iv.length());
    cov.total_length += iv.length();
    cov.pieces += static_cast<long long>(std::ceil(iv.length() / unit - 1e-12));
    cov.intervals.push_back(iv);
  }
  cov.pass = static_cast<double>(cov.pieces) <= std::pow(static_cast<double>(N), params.frak_e);
  return cov;
}

nlohmann::json CoverSummary::to_json() const {
  return {{"N", N},
          {"pass", pass},
          {"fibers", fibers},
          {"fibers_failed", fibers_failed},
          {"max_pieces", max_pieces},
          {"max_length", max_length},
          {"bound", bound},
          {"large_fiber_min", large_fiber_min},
          {"large_fiber_ok", large_fiber_ok}};
}

CoverSummary frak_G0_test(const PDEProblem& p, const SeqVec& u, double lambda, int N, const CantorParams& params) {
  CoverSummary sum;
  sum.N = N;
  sum.bound = std::pow(static_cast<double>(N), params.frak_e);
  const SpectralModel& model = *p.rule.model;
  const TorusSymbol sym = linear_symbol(p, u);
  const auto [cc, CC] = lattice_norm_constants(model);
  const double g = (2.0 * cc + 8.0) * CC / cc;
  const double Jstar = (cc + 5.0) / cc * N;
  const int J = static_cast<int>(std::ceil(Jstar));
  const double c = 2.0 * std::pow(static_cast<double>(N), -params.tau1);
  const double e = std::abs(p.epsilon) * sym.schur_bound();
  const IntVec l0(model.d);

  bool all = true;
  for (const IntVec& j0 : box_points(model.r, J)) {
    if (!model.in_index_set(j0)) continue;
    if (static_cast<double>(sup_norm(j0)) >= Jstar) continue;
    double lo = -g * N, hi = g * N;
    if (p.rule.kind == DispersionKind::NLS) {
      // linear symbol: the hull of the candidate sets bounds the scan
      lo = std::numeric_limits<double>::infinity();
      hi = -lo;
      const LayoutPtr w = Layout::window(p.rule.model, l0, j0, N, p.comps());
      for (const Site& k : w->sites())
        for (const auto& iv : p.rule.sublevel_intervals(k, lambda, c + e)) {
          lo = std::min(lo, iv.first);
          hi = std::max(hi, iv.second);
        }
      if (!(lo < hi)) {
        ++sum.fibers;
        continue;
      }
    }
    const ThetaCover cov = theta_cover(p, sym, lambda, N, l0, j0, lo, hi, params);
    ++sum.fibers;
    sum.max_pieces = std::max(sum.max_pieces, cov.pieces);
    sum.max_length = std::max(sum.max_length, cov.max_length);
    if (!cov.pass) {
      ++sum.fibers_failed;
      all = false;
    }
  }

  // Remaining fibres: the diagonal stays away from zero for |theta| <= 2N.
  double wsum = 0.0;
  for (double w : p.rule.omega_bar) wsum += std::abs(w);
  const double Y = std::abs(lambda) * wsum * N + 2.0 * N;
  double minD = std::numeric_limits<double>::infinity();
  for (const IntVec& j0 : box_points(model.r, J)) {
    if (sup_norm(j0) != J || !model.in_index_set(j0)) continue;
    for (const IntVec& dj : box_points(model.r, N)) {
      const IntVec j = j0 + dj;
      if (!model.in_index_set(j)) continue;
      const double A = p.rule.m - model.eigenvalue(j);
      const double v = p.rule.kind == DispersionKind::NLW ? A - Y * Y : A - Y;
      minD = std::min(minD, v);
    }
  }
  sum.large_fiber_min = minD;
  sum.large_fiber_ok = minD - e > c;
  sum.pass = all && sum.large_fiber_ok;
  return sum;
}

bool bar_I_test(const DispersionRule& rule, double lambda, int N0, double tau0, double* margin) {
  const LayoutPtr ball = Layout::ball(rule.model, N0, rule.components());
  double mD = std::numeric_limits<double>::infinity();
  for (const Site& k : ball->sites()) mD = std::min(mD, std::abs(rule.diag_entry(k, lambda, 0.0)));
  const double thr = std::pow(static_cast<double>(N0), -tau0);
  if (margin) *margin = mD / thr;
  return mD >= thr;
}

bool tilde_I_test(const std::vector<double>& omega_bar, double lambda, double gamma, int p_max, double* margin) {
  const int d = static_cast<int>(omega_bar.size());
  if (d < 1 || d > 2) throw std::invalid_argument("tilde_I_test: implemented for d = 1, 2");
  std::vector<double> mono;  // w_a w_b, a <= b
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) mono.push_back(lambda * omega_bar[a] * lambda * omega_bar[b]);
  const int nc = 1 + static_cast<int>(mono.size());
  const int width = 2 * p_max + 1;
  long long total = 1;
  for (int i = 0; i < nc; ++i) total *= width;
  double worst = std::numeric_limits<double>::infinity();
  std::vector<int> pc(nc);
  for (long long idx = 0; idx < total; ++idx) {
    long long t = idx;
    int sup = 0;
    for (int i = 0; i < nc; ++i) {
      pc[i] = static_cast<int>(t % width) - p_max;
      t /= width;
      sup = std::max(sup, std::abs(pc[i]));
    }
    if (sup == 0) continue;
    double v = pc[0];
    for (std::size_t m = 0; m < mono.size(); ++m) v += pc[m + 1] * mono[m];
    const double need = gamma / (1.0 + std::pow(static_cast<double>(sup), d * (d + 1)));
    worst = std::min(worst, std::abs(v) / need);
  }
  if (margin) *margin = worst;
  return worst >= 1.0;
}

CantorPoint cantor_point(const PDEProblem& p, const LambdaRun& run, const CantorParams& params) {
  CantorPoint pt;
  pt.epsilon = p.epsilon;
  pt.lambda = run.lambda;
  for (const auto& st : run.stages)
    if (st.error.empty() && std::find(pt.scales.begin(), pt.scales.end(), st.N) == pt.scales.end())
      pt.scales.push_back(st.N);
  if (pt.scales.empty()) pt.scales.push_back(params.N0);
  SeqVec u = run.u.layout() ? run.u : SeqVec(Layout::ball(p.rule.model, params.N0, p.comps()));
  pt.fracG = true;
  pt.cover = true;
  nlohmann::json per = nlohmann::json::array();
  for (int N : pt.scales) {
    const FracGTest g = frak_G_test(p, u, run.lambda, N, params);
    const CoverSummary cs = frak_G0_test(p, u, run.lambda, N, params);
    pt.fracG = pt.fracG && g.pass;
    pt.cover = pt.cover && cs.pass;
    per.push_back({{"N", N},
                   {"fracG", g.pass},
                   {"sigma_min_lo", g.sigma_min_lo},
                   {"sigma_min_hi", g.sigma_min_hi},
                   {"certified", g.certified},
                   {"cover", cs.to_json()}});
  }
  double mI = 0.0, mT = 0.0;
  pt.barI = bar_I_test(p.rule, run.lambda, params.N0, params.tau0, &mI);
  pt.tildeI = tilde_I_test(p.rule.omega_bar, run.lambda, params.gamma(), params.p_max, &mT);
  pt.nm_ok = run.error.empty() && !run.stages.empty();
  pt.nm_members = pt.nm_ok;
  for (const auto& st : run.stages) pt.nm_members = pt.nm_members && st.member && st.error.empty();
  pt.in_cantor = pt.fracG && pt.cover && pt.barI && pt.tildeI && pt.nm_ok;
  pt.detail = {{"epsilon", pt.epsilon}, {"lambda", pt.lambda}, {"scales", per},
               {"barI_margin", mI},     {"tildeI_margin", mT}, {"nm_ok", pt.nm_ok},
               {"nm_members", pt.nm_members}, {"in_cantor", pt.in_cantor}};
  return pt;
}

MeasureScan measure_from_runs(const PDEProblem& base, const std::vector<NashMoserReport>& reports,
                              const CantorParams& params, int jobs) {
  MeasureScan scan;
  for (const auto& rep : reports) {
    PDEProblem p = base;
    p.epsilon = rep.epsilon;
    p.refresh_pair();
    const int count = static_cast<int>(rep.runs.size());
    std::vector<CantorPoint> pts(count);
    parallel_for(count, jobs, [&](int i) { pts[i] = cantor_point(p, rep.runs[i], params); });
    MeasureRow row;
    row.epsilon = rep.epsilon;
    row.count = count;
    for (const auto& pt : pts) {
      if (!pt.in_cantor) ++row.excluded;
      if (pt.in_cantor && !pt.nm_members) scan.consistent = false;
      scan.points.push_back(pt);
    }
    row.complement = count ? static_cast<double>(row.excluded) / count : 0.0;
    scan.rows.push_back(row);
  }
  std::vector<MeasureRow> sorted = scan.rows;
  std::sort(sorted.begin(), sorted.end(), [](const MeasureRow& a, const MeasureRow& b) { return a.epsilon > b.epsilon; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].complement > sorted[i - 1].complement) scan.monotone = false;
  return scan;
}

MeasureScan measure_scan(const PDEProblem& base, const std::vector<double>& lambdas,
                         const std::vector<double>& epsilons, const NashMoserConfig& cfg,
                         const CantorParams& params) {
  std::vector<NashMoserReport> reports;
  for (double eps : epsilons) {
    PDEProblem p = base;
    p.epsilon = eps;
    p.refresh_pair();
    reports.push_back(run_nash_moser(p, lambdas, cfg));
  }
  return measure_from_runs(base, reports, params, cfg.jobs);
}

bool diagonal_goodness_certificate(double min_abs_diag, const std::vector<double>& P_norms, double P_s0, int N,
                                   const MultiscaleParams& ms, const DecayContext& ctx) {
  if (!(min_abs_diag > 0)) return false;
  const double delta_inv = 1.0 / min_abs_diag;
  const double q0 = delta_inv * P_s0;
  const auto s_values = ms.s_samples();
  if (P_norms.size() != s_values.size()) throw std::invalid_argument("certificate: one norm per sampled s");
  for (std::size_t i = 0; i < s_values.size(); ++i) {
    const double s = s_values[i];
    const double kappa = std::max(1.0, 0.5 * ctx.interp_constant(s));
    if (kappa * q0 >= 1.0) return false;
    const double val = delta_inv * (std::sqrt(ctx.K1) + delta_inv * P_norms[i] / ((1.0 - kappa * q0) * (1.0 - kappa * q0)));
    if (!(val <= std::pow(static_cast<double>(N), ms.tau + ms.delta * s))) return false;
  }
  return true;
}

nlohmann::json Census::to_json() const {
  nlohmann::json fs = nlohmann::json::array();
  for (const auto& f : fibers)
    if (f.weakly_singular || f.weakly_bad) fs.push_back({{"j0", f.j0}, {"ws", f.weakly_singular}, {"wb", f.weakly_bad}});
  return {{"N", N},
          {"chi", chi},
          {"theta", theta},
          {"components", components},
          {"fibers_scanned", fibers.size()},
          {"nonzero_fibers", fs},
          {"max_weakly_singular", max_weakly_singular},
          {"max_weakly_bad", max_weakly_bad},
          {"bound_singular", bound_singular},
          {"bound_bad", bound_bad},
          {"certificate_threshold", certificate_threshold},
          {"exact_windows", exact_windows},
          {"uncertified_windows", uncertified_windows},
          {"singular_ok", singular_ok},
          {"bad_ok", bad_ok},
          {"clusters", clusters.to_json()}};
}

Census weakly_bad_census(const PDEProblem& p, const SeqVec& u, double lambda, int N, double chi, int fiber_radius,
                         const CantorParams& params, double theta) {
  const SpectralModel& model = *p.rule.model;
  if (model.kind != ModelKind::Torus || model.d != 1 || model.r != 1)
    throw std::invalid_argument("weakly_bad_census: implemented for the d = r = 1 torus");
  Census cen;
  cen.N = N;
  cen.chi = chi;
  cen.theta = theta;
  const std::vector<int> comps = p.comps();
  cen.components = static_cast<int>(comps.size());
  const double ne = params.frak_e;
  cen.bound_singular = cen.components * std::pow(static_cast<double>(N), ne);
  cen.bound_bad = std::pow(static_cast<double>(N), ne + model.d + model.r + 1);

  const TorusSymbol sym = linear_symbol(p, u);
  const DecayContext ctx = DecayContext::make(model.d, model.r, params.ms.s0);
  std::vector<double> Pn;
  for (double s : params.ms.s_samples()) Pn.push_back(std::abs(p.epsilon) * sym.s_norm(s, ctx));
  const double P0 = std::abs(p.epsilon) * sym.s_norm(params.ms.s0, ctx);
  auto cert = [&](double m) { return diagonal_goodness_certificate(m, Pn, P0, N, params.ms, ctx); };
  double lo = 1e-300, hi = 1e6;
  if (!cert(hi)) {
    cen.certificate_threshold = std::numeric_limits<double>::infinity();
  } else if (cert(lo)) {
    cen.certificate_threshold = 0.0;
  } else {
    for (int it = 0; it < 200; ++it) {
      const double mid = std::sqrt(lo * hi);
      (cert(mid) ? hi : lo) = mid;
    }
    cen.certificate_threshold = hi;
  }

  const int Lws = static_cast<int>(std::ceil(2.0 * std::pow(static_cast<double>(N), chi)));
  const int Lwb = static_cast<int>(std::floor(std::pow(static_cast<double>(N), chi)));
  const int J = fiber_radius;
  // |D| on l in [-Lws-N, Lws+N], j in [-J-2N, J+2N], minimum over components
  const int l0 = -Lws - N, nl = 2 * (Lws + N) + 1;
  const int j0min = -J - 2 * N, nj = 2 * (J + 2 * N) + 1;
  std::vector<std::vector<double>> absD(nl, std::vector<double>(nj));
  std::vector<std::vector<std::vector<double>>> compD(comps.size(), std::vector<std::vector<double>>(nl, std::vector<double>(nj)));
  for (int a = 0; a < nl; ++a)
    for (int b = 0; b < nj; ++b) {
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < comps.size(); ++c) {
        const Site k{IntVec{l0 + a}, IntVec{j0min + b}, comps[c]};
        const double v = std::abs(p.rule.diag_entry(k, lambda, theta));
        compD[c][a][b] = v;
        m = std::min(m, v);
      }
      absD[a][b] = m;
    }
  // window minimum, first along j then along l
  std::vector<std::vector<double>> wj(nl);
  for (int a = 0; a < nl; ++a) wj[a] = sliding_min(absD[a], N);
  std::vector<std::vector<double>> wmin(nl, std::vector<double>(nj));
  for (int b = 0; b < nj; ++b) {
    std::vector<double> col(nl);
    for (int a = 0; a < nl; ++a) col[a] = wj[a][b];
    const auto m = sliding_min(col, N);
    for (int a = 0; a < nl; ++a) wmin[a][b] = m[a];
  }

  // weakly-singular flags on l in [-Lws, Lws], j in [-J-N, J+N]
  const int wl0 = -Lws, wnl = 2 * Lws + 1;
  const int wj0 = -J - N, wnj = 2 * (J + N) + 1;
  std::vector<std::vector<char>> ws(wnl, std::vector<char>(wnj, 0));
  const int window_rows = static_cast<int>(comps.size()) * (2 * N + 1) * (2 * N + 1);
  for (int a = 0; a < wnl; ++a)
    for (int b = 0; b < wnj; ++b) {
      const int l = wl0 + a, j = wj0 + b;
      const double m = wmin[l - l0][j - j0min];
      if (m >= cen.certificate_threshold) continue;
      if (window_rows <= params.exact_window_rows && cen.exact_windows < params.max_exact_windows) {
        ++cen.exact_windows;
        const LayoutPtr w = Layout::window(p.rule.model, IntVec{l}, IntVec{j}, N, comps);
        const TruncatedOperator op = assemble(p.rule, sym, w, lambda, theta, p.epsilon);
        const GoodnessCertificate gc = certify_N_good(op.as_block(), N, params.ms, ctx);
        ws[a][b] = gc.good ? 0 : 1;
      } else {
        ++cen.uncertified_windows;
        ws[a][b] = 1;
      }
    }
  // any weakly-singular site within distance N: 2D prefix sums
  std::vector<std::vector<int>> pre(wnl + 1, std::vector<int>(wnj + 1, 0));
  for (int a = 0; a < wnl; ++a)
    for (int b = 0; b < wnj; ++b) pre[a + 1][b + 1] = pre[a][b + 1] + pre[a + 1][b] - pre[a][b] + ws[a][b];
  auto box_count = [&](int a0, int a1, int b0, int b1) {
    a0 = std::max(a0, 0);
    b0 = std::max(b0, 0);
    a1 = std::min(a1, wnl - 1);
    b1 = std::min(b1, wnj - 1);
    if (a0 > a1 || b0 > b1) return 0;
    return pre[a1 + 1][b1 + 1] - pre[a0][b1 + 1] - pre[a1 + 1][b0] + pre[a0][b0];
  };

  std::vector<Site> bad_sites;
  for (int j0 = -J; j0 <= J; ++j0) {
    FiberCensus fc;
    fc.j0 = j0;
    const int b = j0 - wj0;
    for (int a = 0; a < wnl; ++a)
      if (ws[a][b]) fc.weakly_singular += cen.components;
    for (int l = -Lwb; l <= Lwb; ++l) {
      const int a = l - wl0;
      if (box_count(a - N, a + N, b - N, b + N) == 0) continue;
      for (std::size_t c = 0; c < comps.size(); ++c) {
        if (compD[c][l - l0][j0 - j0min] >= 1.0) continue;  // regular
        ++fc.weakly_bad;
        bad_sites.push_back(Site{IntVec{l}, IntVec{j0}, comps[c]});
      }
    }
    cen.max_weakly_singular = std::max(cen.max_weakly_singular, fc.weakly_singular);
    cen.max_weakly_bad = std::max(cen.max_weakly_bad, fc.weakly_bad);
    cen.fibers.push_back(fc);
  }
  cen.singular_ok = cen.max_weakly_singular <= cen.bound_singular;
  cen.bad_ok = cen.max_weakly_bad <= cen.bound_bad;
  cen.clusters = cluster_bad_sites(bad_sites, N, params.C1);
  return cen;
}

}  // namespace smallsep
