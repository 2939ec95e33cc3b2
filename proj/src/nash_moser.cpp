#include "smallsep/nash_moser.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>

namespace smallsep {

namespace {

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

Eigen::VectorXd sobolev_weights(const Layout& L, double s) {
  Eigen::VectorXd w(L.dim());
  for (int k = 0; k < L.num_sites(); ++k) {
    const double wk = std::pow(L.model().weight(L.sites()[k]), s);
    w.segment(L.offset(k), L.block_size(k)).setConstant(wk);
  }
  return w;
}

// ||M||_0 by power iteration on M^* M.
double power_norm(const Eigen::MatrixXcd& M, int iterations = 60) {
  if (M.size() == 0) return 0.0;
  Eigen::VectorXcd x = Eigen::VectorXcd::Ones(M.cols()).normalized();
  double est = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXcd z = M.adjoint() * (M * x);
    const double nz = z.norm();
    if (nz == 0.0) return 0.0;
    const double next = std::sqrt(nz);
    x = z / nz;
    if (it > 2 && std::abs(next - est) <= 1e-10 * next) return next;
    est = next;
  }
  return est;
}

double json_or_null(const std::optional<double>& v) { return v ? *v : std::numeric_limits<double>::quiet_NaN(); }

MembershipTest membership_from_lu(const Eigen::PartialPivLU<Eigen::MatrixXcd>& lu, const Eigen::MatrixXcd& M,
                                  const Layout& layout, const SeqVec& u, const NashMoserConfig& cfg) {
  MembershipTest t;
  int Nn = 1;
  for (const Site& k : layout.sites()) Nn = std::max(Nn, site_abs(k));
  const double inv0 = weighted_inverse_norm(lu, layout, 0.0);
  const double op = power_norm(M);
  t.condition = inv0 * op;
  t.invertible = std::isfinite(t.condition) && t.condition <= 1e14;
  if (!t.invertible) return t;
  const double Nmu = cfg.membership_C * std::pow(static_cast<double>(Nn), cfg.mu());
  t.norm_s1 = weighted_inverse_norm(lu, layout, cfg.s1);
  t.norm_S = weighted_inverse_norm(lu, layout, cfg.S);
  t.bound_s1 = Nmu * (1.0 + sobolev_norm(u, cfg.s1));
  t.bound_S = Nmu * (1.0 + std::pow(static_cast<double>(Nn), cfg.delta * (cfg.S - cfg.s1)) * sobolev_norm(u, cfg.S));
  // power iteration underestimates; keep a 1% margin
  t.member = 1.01 * t.norm_s1 <= t.bound_s1 && 1.01 * t.norm_S <= t.bound_S;
  return t;
}

int ipow_clip(int base, int e, int cap) {
  long long v = 1;
  for (int i = 0; i < e; ++i) {
    v *= base;
    if (v >= cap) return cap;
  }
  return static_cast<int>(std::min<long long>(v, cap));
}

}  // namespace

std::string to_string(InverseStrategy s) { return s == InverseStrategy::Dense ? "dense" : "multiscale"; }

InverseStrategy inverse_strategy_from_string(const std::string& s) {
  if (s == "dense") return InverseStrategy::Dense;
  if (s == "multiscale") return InverseStrategy::Multiscale;
  throw std::invalid_argument("unknown inverse strategy '" + s + "'");
}

int NashMoserConfig::scale(int n) const {
  if (n < 0) throw std::invalid_argument("scale: negative stage");
  // N0^(2^n), computed without overflow
  const int e = n >= 30 ? (1 << 30) : (1 << n);
  return ipow_clip(N0, e, std::max(N_cap, N0));
}

std::vector<ConstraintCheck> NashMoserConfig::ledger(double epsilon) const {
  const double m = mu();
  std::vector<ConstraintCheck> out;
  out.push_back({"sigma >= 2(tau+delta s1)+3nu+2", sigma, 2 * m + 3 * nu + 2, sigma >= 2 * m + 3 * nu + 2});
  out.push_back({"sigma >= 4(tau+delta s1+nu)", sigma, 4 * (m + nu), sigma >= 4 * (m + nu)});
  const double lo = 2 * (2 * m + nu + 3 + sigma);
  out.push_back({"S - s1 >= 2(2(tau+delta s1)+nu+3+sigma)", S - s1, lo, S - s1 >= lo});
  out.push_back({"S - s1 <= 4(sigma+1)", S - s1, 4 * (sigma + 1), S - s1 <= 4 * (sigma + 1)});
  out.push_back({"delta in (0,1/4)", delta, 0.25, delta > 0 && delta < 0.25});
  const double small = epsilon * std::pow(static_cast<double>(N0), S);
  out.push_back({"eps N0^S <= c", small, smallness_c, small <= smallness_c});
  return out;
}

nlohmann::json NashMoserConfig::to_json() const {
  return {{"N0", N0},
          {"N_cap", N_cap},
          {"sigma", sigma},
          {"tau", tau},
          {"delta", delta},
          {"s1", s1},
          {"S", S},
          {"nu", nu},
          {"smallness_c", smallness_c},
          {"membership_C", membership_C},
          {"max_stages", max_stages},
          {"residual_target", residual_target},
          {"contraction_tol", contraction_tol},
          {"max_contraction_iters", max_contraction_iters},
          {"strategy", to_string(strategy)},
          {"invariant_guard", invariant_guard},
          {"guard_tol", guard_tol},
          {"chi", chi},
          {"multiscale", multiscale.to_json()}};
}

NashMoserConfig NashMoserConfig::from_json(const nlohmann::json& j) {
  NashMoserConfig c;
  c.N0 = j.value("N0", c.N0);
  c.N_cap = j.value("N_cap", c.N_cap);
  c.sigma = j.value("sigma", c.sigma);
  c.tau = j.value("tau", c.tau);
  c.delta = j.value("delta", c.delta);
  c.s1 = j.value("s1", c.s1);
  c.S = j.value("S", c.S);
  c.nu = j.value("nu", c.nu);
  c.smallness_c = j.value("smallness_c", c.smallness_c);
  c.membership_C = j.value("membership_C", c.membership_C);
  c.max_stages = j.value("max_stages", c.max_stages);
  c.residual_target = j.value("residual_target", c.residual_target);
  c.contraction_tol = j.value("contraction_tol", c.contraction_tol);
  c.max_contraction_iters = j.value("max_contraction_iters", c.max_contraction_iters);
  if (j.contains("strategy")) c.strategy = inverse_strategy_from_string(j.at("strategy").get<std::string>());
  c.invariant_guard = j.value("invariant_guard", c.invariant_guard);
  c.guard_tol = j.value("guard_tol", c.guard_tol);
  c.chi = j.value("chi", c.chi);
  if (j.contains("multiscale")) c.multiscale = MultiscaleParams::from_json(j.at("multiscale"));
  if (c.N0 < 2) throw std::invalid_argument("N0 must be >= 2");
  if (c.max_stages < 1) throw std::invalid_argument("max_stages must be >= 1");
  if (!(c.delta > 0 && c.delta < 0.25)) throw std::invalid_argument("delta must lie in (0, 1/4)");
  return c;
}

double cutoff_value(double dist, double width) {
  if (dist <= width) return 1.0;
  const double t = (dist - width) / (1.5 * width);
  if (t >= 1.0) return 0.0;
  return 1.0 - t * t * (3.0 - 2.0 * t);
}

double cutoff_derivative(double dist, double width) {
  if (dist <= width) return 0.0;
  const double t = (dist - width) / (1.5 * width);
  if (t >= 1.0) return 0.0;
  return -6.0 * t * (1.0 - t) / (1.5 * width);
}

std::vector<double> lambda_cutoff_extend(const std::vector<double>& lambdas, const std::vector<bool>& in_A, int N,
                                         double sigma) {
  if (lambdas.size() != in_A.size()) throw std::invalid_argument("lambda_cutoff_extend: size mismatch");
  const double w = std::pow(static_cast<double>(N), -0.5 * sigma);
  std::vector<double> psi(lambdas.size(), 0.0);
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < lambdas.size(); ++k)
      if (in_A[k]) dist = std::min(dist, std::abs(lambdas[i] - lambdas[k]));
    psi[i] = std::isfinite(dist) ? cutoff_value(dist, w) : 0.0;
  }
  return psi;
}

double weighted_inverse_norm(const Eigen::PartialPivLU<Eigen::MatrixXcd>& lu, const Layout& layout, double s,
                             int iterations) {
  const auto n = layout.dim();
  if (n == 0) return 0.0;
  const Eigen::VectorXd w = sobolev_weights(layout, s);
  Eigen::VectorXcd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = cplx(1.0 + 0.3 * std::cos(0.7 * i), 0.2 * std::sin(1.3 * i));
  x.normalize();
  double est = 0.0;
  for (int it = 0; it < iterations; ++it) {
    // y = W L^{-1} W^{-1} x, z = W^{-1} L^{-*} W y
    Eigen::VectorXcd y = lu.solve((x.array() / w.array()).matrix());
    y.array() *= w.array();
    Eigen::VectorXcd z = lu.adjoint().solve((y.array() * w.array()).matrix());
    z.array() /= w.array();
    const double nz = z.norm();
    if (!std::isfinite(nz)) return std::numeric_limits<double>::infinity();
    if (nz == 0.0) return 0.0;
    const double next = std::sqrt(nz);
    x = z / nz;
    if (it > 2 && std::abs(next - est) <= 1e-10 * next) return next;
    est = next;
  }
  return est;
}

MembershipTest membership_test(const TruncatedOperator& L, const SeqVec& u, const NashMoserConfig& cfg) {
  const Eigen::MatrixXcd M = L.dense();
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
  return membership_from_lu(lu, M, *L.window, u, cfg);
}

bool invariant_subspace_guard(const SeqVec& u, DispersionKind kind, double s, double tol, double* defect) {
  const double dfc = reality_defect(u, kind, s);
  if (defect) *defect = dfc;
  return dfc <= tol;
}

nlohmann::json StageRecord::to_json() const {
  return {{"n", n},
          {"N", N},
          {"lambda", lambda},
          {"psi", psi},
          {"member", member},
          {"in_A", in_A},
          {"condition", membership.condition},
          {"inv_norm_s1", membership.norm_s1},
          {"inv_bound_s1", membership.bound_s1},
          {"inv_norm_S", membership.norm_S},
          {"inv_bound_S", membership.bound_S},
          {"initial_residual_s1", initial_residual_s1},
          {"discarded_s1", discarded_s1},
          {"residual_s1", residual_s1},
          {"residual_S", residual_S},
          {"next_residual_s1", next_residual_s1},
          {"step_s1", step_s1},
          {"u_s1", u_s1},
          {"B", B},
          {"B_prime", json_or_null(B_prime)},
          {"contraction_iters", contraction_iters},
          {"contraction_factor", contraction_factor},
          {"fixed_point_residual", fixed_point_residual},
          {"ball_radius", ball_radius},
          {"ball_ok", ball_ok},
          {"S1", S1},
          {"S2", S2},
          {"S4", S4},
          {"guard_defect", guard_defect},
          {"guard_ok", guard_ok},
          {"error", error}};
}

double LambdaRun::final_residual() const {
  return stages.empty() ? initial_residual_s1 : stages.back().next_residual_s1;
}

nlohmann::json LambdaRun::to_json() const {
  nlohmann::json st = nlohmann::json::array();
  for (const auto& s : stages) st.push_back(s.to_json());
  return {{"lambda", lambda},
          {"initial_residual_s1", initial_residual_s1},
          {"converged", converged},
          {"first_membership_failure", first_membership_failure},
          {"first_guard_failure", first_guard_failure},
          {"error", error},
          {"stages", st}};
}

nlohmann::json NashMoserReport::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : runs) rs.push_back(r.to_json());
  return {{"epsilon", epsilon}, {"ledger", smallsep::to_json(ledger)}, {"runs", rs}};
}

StageResult newton_stage(const PDEProblem& p, const SeqVec& u_prev, double lambda, int n,
                         const NashMoserConfig& cfg) {
  const int N = cfg.scale(n);
  const LayoutPtr ball = Layout::ball(p.rule.model, N, p.comps());
  const SeqVec u0 = u_prev.layout() ? transfer(u_prev, ball) : SeqVec(ball);
  StageResult res;
  StageRecord& rec = res.record;
  rec.n = n;
  rec.N = N;
  rec.lambda = lambda;

  const TruncatedOperator L = linearize(p, u0, lambda, N);
  const Eigen::MatrixXcd M = L.dense();
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
  rec.membership = membership_from_lu(lu, M, *ball, u0, cfg);
  rec.member = rec.membership.member;

  std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)> solve;
  Eigen::MatrixXcd ms_inverse;
  if (cfg.strategy == InverseStrategy::Dense) {
    if (!rec.membership.invertible) throw std::runtime_error("linearised operator is numerically singular");
    solve = [&lu](const Eigen::VectorXcd& v) { return Eigen::VectorXcd(lu.solve(v)); };
  } else {
    const int diam = layout_diameter(*ball);
    int Ns = 2;
    while (4.0 * std::pow(static_cast<double>(Ns), cfg.chi) < diam) ++Ns;
    const DecayContext ctx = DecayContext::make(p.d(), p.r(), cfg.multiscale.s0);
    MultiscaleOptions opts;
    opts.enforce_hypotheses = false;
    MultiscaleResult mr = multiscale_inverse(L, Ns, cfg.chi, cfg.multiscale, ctx, opts);
    ms_inverse = std::move(mr.inverse.m);
    solve = [&ms_inverse](const Eigen::VectorXcd& v) { return Eigen::VectorXcd(ms_inverse * v); };
  }

  const SeqVec r = eval_F(p, u0, lambda, N);
  rec.initial_residual_s1 = sobolev_norm(r, cfg.s1);
  if (n > 0) rec.discarded_s1 = sobolev_norm(project(r, cfg.scale(n - 1)), cfg.s1);

  SeqVec h(ball);
  SeqVec Fh = r;
  double prev = std::numeric_limits<double>::infinity();
  const double floor_tol = 1e-9;
  bool done = false;
  for (int it = 0; it < cfg.max_contraction_iters; ++it) {
    SeqVec dh(ball, -solve(Fh.data()));
    const double delta = sobolev_norm(dh, cfg.s1);
    if (std::isfinite(prev) && prev > 1e3 * cfg.contraction_tol)
      rec.contraction_factor = std::max(rec.contraction_factor, delta / prev);
    if (!std::isfinite(delta)) throw std::runtime_error("contraction produced a non-finite step");
    if (delta >= prev && delta > floor_tol * std::max(1.0, sobolev_norm(h, cfg.s1)))
      throw std::runtime_error("contraction diverges (step ratio " + std::to_string(delta / prev) + ")");
    const bool stalled = delta >= prev;
    if (!stalled) h = h + dh;
    rec.contraction_iters = it + 1;
    if (delta < cfg.contraction_tol || stalled) {
      done = true;
      break;
    }
    prev = delta;
    Fh = eval_F(p, u0 + h, lambda, N);
  }
  Fh = eval_F(p, u0 + h, lambda, N);
  rec.fixed_point_residual = sobolev_norm(SeqVec(ball, solve(Fh.data())), cfg.s1);
  if (!done && rec.fixed_point_residual > floor_tol)
    throw std::runtime_error("contraction did not reach tolerance in " + std::to_string(cfg.max_contraction_iters) +
                             " iterations");
  const double h_s1 = sobolev_norm(h, cfg.s1);
  rec.ball_radius = n == 0 ? std::pow(static_cast<double>(N), cfg.mu()) * std::abs(p.epsilon)
                           : std::pow(static_cast<double>(N), -cfg.sigma - 1.0);
  rec.ball_ok = h_s1 <= rec.ball_radius;
  res.h = std::move(h);
  return res;
}

NashMoserReport run_nash_moser(const PDEProblem& p, const std::vector<double>& lambdas, const NashMoserConfig& cfg) {
  NashMoserReport rep;
  rep.epsilon = p.epsilon;
  rep.ledger = cfg.ledger(p.epsilon);
  const int count = static_cast<int>(lambdas.size());
  rep.runs.resize(count);
  std::vector<bool> alive(count, true), in_A(count, true);
  const LayoutPtr ball0 = Layout::ball(p.rule.model, cfg.scale(0), p.comps());
  for (int i = 0; i < count; ++i) {
    rep.runs[i].lambda = lambdas[i];
    rep.runs[i].u = SeqVec(ball0);
    rep.runs[i].initial_residual_s1 = sobolev_norm(eval_F(p, rep.runs[i].u, lambdas[i], cfg.scale(0)), cfg.s1);
  }

  for (int n = 0; n < cfg.max_stages; ++n) {
    const int N = cfg.scale(n);
    const int Nnext = cfg.scale(n + 1);
    std::vector<std::optional<StageResult>> results(count);
    std::vector<std::string> errors(count);
    parallel_for(count, cfg.jobs, [&](int i) {
      if (!alive[i]) return;
      try {
        results[i] = newton_stage(p, rep.runs[i].u, lambdas[i], n, cfg);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
    std::vector<bool> member_A(count, false);
    for (int i = 0; i < count; ++i)
      member_A[i] = alive[i] && results[i] && in_A[i] && results[i]->record.member;
    const std::vector<double> psi = lambda_cutoff_extend(lambdas, member_A, N, cfg.sigma);

    parallel_for(count, cfg.jobs, [&](int i) {
      if (!alive[i]) return;
      LambdaRun& run = rep.runs[i];
      if (!results[i]) {
        run.error = "stage " + std::to_string(n) + ": " + errors[i];
        StageRecord rec;
        rec.n = n;
        rec.N = N;
        rec.lambda = lambdas[i];
        rec.error = errors[i];
        rec.psi = 0.0;
        run.stages.push_back(rec);
        if (run.first_membership_failure < 0) run.first_membership_failure = n;
        return;
      }
      StageRecord rec = results[i]->record;
      rec.in_A = member_A[i];
      rec.psi = psi[i];
      const LayoutPtr ball = Layout::ball(p.rule.model, N, p.comps());
      const SeqVec prev = transfer(run.u, ball);
      const SeqVec u = prev + results[i]->h * cplx(psi[i]);
      const SeqVec F = eval_F(p, u, lambdas[i], N);
      rec.residual_s1 = sobolev_norm(F, cfg.s1);
      rec.residual_S = sobolev_norm(F, cfg.S);
      rec.next_residual_s1 = Nnext == N ? rec.residual_s1 : sobolev_norm(eval_F(p, u, lambdas[i], Nnext), cfg.s1);
      rec.step_s1 = sobolev_norm(u - prev, cfg.s1);
      rec.u_s1 = sobolev_norm(u, cfg.s1);
      rec.B = 1.0 + sobolev_norm(u, cfg.S);
      rec.S1 = rec.u_s1 <= 1.0;
      rec.S2 = n == 0 || rec.step_s1 <= std::pow(static_cast<double>(N), -cfg.sigma - 1.0);
      rec.S4 = rec.B <= 2.0 * std::pow(static_cast<double>(Nnext), cfg.p_exponent());
      if (cfg.invariant_guard) {
        rec.guard_ok = invariant_subspace_guard(u, p.rule.kind, cfg.s1, cfg.guard_tol, &rec.guard_defect);
        if (!rec.guard_ok && run.first_guard_failure < 0) run.first_guard_failure = n;
      }
      if (!rec.member && run.first_membership_failure < 0) run.first_membership_failure = n;
      run.stages.push_back(rec);
      run.iterates.push_back(u);
      run.u = u;
    });

    // finite-difference lambda derivative of the new iterates
    for (int i = 0; i < count; ++i) {
      if (!alive[i] || !results[i]) continue;
      auto has = [&](int k) {
        return k >= 0 && k < count && alive[k] && results[k] && rep.runs[k].stages.back().n == n;
      };
      const int lo = has(i - 1) ? i - 1 : i;
      const int hi = has(i + 1) ? i + 1 : i;
      if (lo == hi) continue;
      const double dl = lambdas[hi] - lambdas[lo];
      if (dl == 0.0) continue;
      const SeqVec du = rep.runs[hi].u - rep.runs[lo].u;
      rep.runs[i].stages.back().B_prime = sobolev_norm(du, cfg.S) / std::abs(dl);
    }

    bool any = false;
    for (int i = 0; i < count; ++i) {
      if (!alive[i]) continue;
      if (!results[i]) {
        alive[i] = false;
        in_A[i] = false;
        continue;
      }
      in_A[i] = member_A[i];
      const StageRecord& rec = rep.runs[i].stages.back();
      if (rec.next_residual_s1 <= cfg.residual_target) {
        rep.runs[i].converged = true;
        alive[i] = false;
      } else if (psi[i] == 0.0) {
        alive[i] = false;  // outside the cutoff region nothing moves any more
      }
      any = any || alive[i];
    }
    if (!any) break;
  }
  // epsilon = 0 or an exact start: converged before any correction
  for (auto& run : rep.runs)
    if (!run.converged && run.error.empty() && !run.stages.empty() && run.final_residual() <= cfg.residual_target)
      run.converged = true;
  return rep;
}

}  // namespace smallsep
