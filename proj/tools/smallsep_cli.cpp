// smallsep: properties | solve | cantor | chains
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>
#include <spdlog/sinks/stdout_color_sinks.h>

#include "smallsep/cantor_measure.hpp"
#include "smallsep/config.hpp"
#include "smallsep/properties.hpp"

namespace fs = std::filesystem;
using namespace smallsep;

namespace {

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;
constexpr const char* kHeader = "# smallsep-v1";

struct Flags {
  std::string config;
  std::string out;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  bool strict = false;
};

RunConfig load_config(const Flags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig::from_json(nlohmann::json::object()) : RunConfig::load(f.config);
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (f.seed) cfg.seed = *f.seed;
  cfg.nm.jobs = std::max(1, f.jobs);
  return cfg;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

std::ofstream open_csv(const fs::path& path, const std::string& columns) {
  std::ofstream out(path);
  out << kHeader << "\n" << columns << "\n";
  return out;
}

PDEProblem with_epsilon(const RunConfig& cfg, double eps) {
  PDEProblem p = cfg.problem;
  p.epsilon = eps;
  p.refresh_pair();
  return p;
}

int cmd_properties(const RunConfig& cfg) {
  PropertyOptions opts;
  opts.seed = cfg.seed;
  opts.matrices = cfg.property_matrices;
  opts.s0 = cfg.ledger.s0;
  opts.K1 = cfg.K1;
  const auto results = run_all_properties(opts);
  nlohmann::json j = nlohmann::json::array();
  bool all = true;
  for (const auto& r : results) {
    j.push_back(r.to_json());
    all = all && r.pass();
    for (const auto& c : r.checks)
      if (!c.pass()) spdlog::warn("{} / {}: {} failed on {} of {} cases (worst {:.6g})", r.suite, r.model, c.name,
                                  c.failures, c.cases, c.worst);
    spdlog::info("{:<15} {:<22} {}  {:.2f}s", r.suite, r.model, r.pass() ? "pass" : "FAIL", r.seconds);
  }
  write_json(fs::path(cfg.output_dir) / "properties.json", {{"seed", cfg.seed}, {"pass", all}, {"suites", j}});
  return all ? kOk : kFail;
}

int cmd_solve(const RunConfig& cfg, bool strict) {
  const auto lambdas = cfg.grid.points();
  const fs::path dir(cfg.output_dir);
  auto csv = open_csv(dir / "residuals.csv",
                      "epsilon,stage,lambda,N,residual_s1,residual_S,step_norm,An_member,flagged");
  auto sol = open_csv(dir / "solutions.csv", "epsilon,lambda,l,j,a,q,re,im");
  nlohmann::json reports = nlohmann::json::array();
  int flagged = 0, total = 0;
  for (double eps : cfg.epsilons) {
    const PDEProblem p = with_epsilon(cfg, eps);
    const NashMoserReport rep = run_nash_moser(p, lambdas, cfg.nm);
    nlohmann::json rj = rep.to_json();
    for (std::size_t i = 0; i < rep.runs.size(); ++i) {
      const LambdaRun& run = rep.runs[i];
      const bool flag = !run.converged || !run.error.empty() || run.first_membership_failure >= 0;
      ++total;
      if (flag) {
        ++flagged;
        spdlog::warn("eps={} lambda={}: {}", eps, run.lambda,
                     run.error.empty() ? (run.converged ? "membership failure" : "not converged") : run.error);
      }
      for (const auto& st : run.stages)
        csv << fmt17(eps) << ',' << st.n << ',' << fmt17(run.lambda) << ',' << st.N << ',' << fmt17(st.residual_s1)
            << ',' << fmt17(st.residual_S) << ',' << fmt17(st.step_s1) << ',' << (st.in_A ? 1 : 0) << ','
            << (flag ? 1 : 0) << '\n';
      if (run.u.layout()) {
        const Layout& L = *run.u.layout();
        for (int s = 0; s < L.num_sites(); ++s) {
          const Site& k = L.sites()[s];
          for (int q = 0; q < L.block_size(s); ++q) {
            const cplx c = run.u.block(s)(q);
            if (c == cplx(0.0)) continue;
            sol << fmt17(eps) << ',' << fmt17(run.lambda) << ',' << to_string(k.l) << ',' << to_string(k.j) << ','
                << k.a << ',' << q << ',' << fmt17(c.real()) << ',' << fmt17(c.imag()) << '\n';
          }
        }
      }
      rj["runs"][i]["u"] = state_to_json(run.u);
    }
    reports.push_back(rj);
    spdlog::info("eps={}: {} lambda values", eps, rep.runs.size());
  }
  write_json(dir / "solve_report.json", {{"config", cfg.to_json()}, {"reports", reports}});
  spdlog::info("{} of {} runs flagged", flagged, total);
  return strict && flagged > 0 ? kFail : kOk;
}

int cmd_cantor(const RunConfig& cfg, int jobs, bool strict) {
  const fs::path dir(cfg.output_dir);
  const fs::path report = dir / "solve_report.json";
  if (!fs::exists(report)) {
    spdlog::error("missing solve output {}; run `smallsep solve` first", report.string());
    return kUsage;
  }
  nlohmann::json j;
  try {
    std::ifstream in(report);
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    spdlog::error("{}: {}", report.string(), e.what());
    return kUsage;
  }
  std::vector<NashMoserReport> reports;
  for (const auto& rj : j.at("reports")) {
    NashMoserReport rep;
    rep.epsilon = rj.at("epsilon").get<double>();
    const PDEProblem p = with_epsilon(cfg, rep.epsilon);
    for (const auto& run : rj.at("runs")) rep.runs.push_back(lambda_run_from_json(run, p));
    if (rep.runs.empty()) {
      spdlog::error("solve output has an empty lambda grid");
      return kUsage;
    }
    reports.push_back(std::move(rep));
  }
  if (reports.empty()) {
    spdlog::error("solve output holds no epsilon values");
    return kUsage;
  }
  const MeasureScan scan = measure_from_runs(cfg.problem, reports, cfg.cantor, jobs);
  auto table = open_csv(dir / "cantor_measure.csv", "epsilon,count,excluded,complement");
  for (const auto& r : scan.rows)
    table << fmt17(r.epsilon) << ',' << r.count << ',' << r.excluded << ',' << fmt17(r.complement) << '\n';
  auto pts = open_csv(dir / "cantor_points.csv", "epsilon,lambda,fracG,cover,barI,tildeI,nm_members,in_cantor");
  nlohmann::json detail = nlohmann::json::array();
  for (const auto& p : scan.points) {
    pts << fmt17(p.epsilon) << ',' << fmt17(p.lambda) << ',' << p.fracG << ',' << p.cover << ',' << p.barI << ','
        << p.tildeI << ',' << p.nm_members << ',' << p.in_cantor << '\n';
    detail.push_back(p.detail);
  }
  write_json(dir / "cantor_detail.json",
             {{"monotone", scan.monotone}, {"consistent", scan.consistent}, {"points", detail}});
  spdlog::info("complement non-increasing: {}, cantor => members: {}", scan.monotone, scan.consistent);
  return strict && !(scan.monotone && scan.consistent) ? kFail : kOk;
}

int cmd_chains(const RunConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  const double eps = cfg.epsilons.front();
  const PDEProblem p = with_epsilon(cfg, eps);
  const NashMoserReport rep = run_nash_moser(p, {cfg.chain_lambda}, cfg.nm);
  const SeqVec& u = rep.runs.front().u;
  auto csv = open_csv(dir / "census.csv", "N,j0,weakly_singular,weakly_bad");
  nlohmann::json out = nlohmann::json::array();
  bool ok = true;
  for (int N : cfg.chain_N) {
    const int R = cfg.chain_fiber_radius < 0 ? 6 * N : cfg.chain_fiber_radius;
    const Census cen = weakly_bad_census(p, u, cfg.chain_lambda, N, cfg.chain_chi, R, cfg.cantor);
    for (const auto& f : cen.fibers) csv << N << ',' << f.j0 << ',' << f.weakly_singular << ',' << f.weakly_bad << '\n';
    // Gamma-chains of singular sites in the Galerkin window of radius N
    const TruncatedOperator op = linearize(p, u, cfg.chain_lambda, N);
    std::vector<Site> singular;
    for (int s : classify_sites(op).singular) singular.push_back(op.window->sites()[s]);
    const ChainReport chains = enumerate_chains(singular, cfg.chain_Gamma, cfg.chain_K, cfg.frak_s);
    out.push_back({{"N", N}, {"census", cen.to_json()}, {"chains", chains.to_json()}});
    spdlog::info("N={}: max weakly-singular {} (bound {:.4g}), weakly-bad {} (bound {:.4g}), {} clusters", N,
                 cen.max_weakly_singular, cen.bound_singular, cen.max_weakly_bad, cen.bound_bad,
                 cen.clusters.clusters.size());
    ok = ok && cen.singular_ok && cen.bad_ok;
  }
  write_json(dir / "chains.json", {{"epsilon", eps}, {"lambda", cfg.chain_lambda}, {"scales", out}});
  return ok ? kOk : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_st("smallsep"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"smallsep experiment runner"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  std::uint64_t seed = 0;
  app.add_option("--config", f.config, "run configuration (JSON)");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_flag("--strict", f.strict, "non-zero exit on flagged runs");
  auto* props = app.add_subcommand("properties", "norm and index property suites");
  auto* solve = app.add_subcommand("solve", "Nash-Moser runs over the lambda grid");
  auto* cantor = app.add_subcommand("cantor", "Cantor diagnostics from the solve outputs");
  auto* chains = app.add_subcommand("chains", "weakly-bad census and chain clusters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  if (*seed_opt) f.seed = seed;

  RunConfig cfg;
  try {
    cfg = load_config(f);
    fs::create_directories(cfg.output_dir);
  } catch (const std::exception& e) {
    spdlog::error("config: {}", e.what());
    return kUsage;
  }
  try {
    if (*props) return cmd_properties(cfg);
    if (*solve) return cmd_solve(cfg, f.strict);
    if (*cantor) return cmd_cantor(cfg, f.jobs, f.strict);
    if (*chains) return cmd_chains(cfg);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFail;
  }
  return kUsage;
}
