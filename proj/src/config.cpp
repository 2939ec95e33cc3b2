#include "smallsep/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace smallsep {

std::vector<double> GridSpec::points() const {
  std::vector<double> out;
  if (count <= 0) return out;
  if (count == 1) return {min};
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(min + (max - min) * i / (count - 1));
  return out;
}

void RunConfig::sync() {
  nm.tau = ledger.tau;
  nm.delta = ledger.delta;
  nm.s1 = ledger.s1;
  nm.S = ledger.S;
  nm.sigma = sigma;
  nm.strategy = strategy;
  nm.multiscale = ledger;
  cantor.tau0 = ledger.tau0;
  cantor.tau1 = ledger.tau1;
  cantor.frak_e = frak_e;
  cantor.C1 = ledger.C1;
  cantor.N0 = nm.N0;
  cantor.ms = ledger;
}

void RunConfig::validate() const {
  if (!(ledger.delta > 0.0 && ledger.delta < 0.25)) throw ConfigError("delta must lie in (0, 1/4)");
  const int d = problem.d(), r = problem.r();
  if (!(ledger.s0 > 0.5 * (d + r))) throw ConfigError("s0 must exceed (d+r)/2");
  if (!(ledger.s0 <= ledger.s2 && ledger.s2 <= ledger.s1 && ledger.s1 <= ledger.S))
    throw ConfigError("need s0 <= s2 <= s1 <= S");
  if (grid.count < 1) throw ConfigError("lambda grid is empty");
  if (!(grid.max >= grid.min)) throw ConfigError("lambda grid: max < min");
  if (epsilons.empty()) throw ConfigError("epsilon list is empty");
  if (K1 && !(*K1 > 0.0)) throw ConfigError("K1 must be positive");
  for (int N : chain_N)
    if (N < 2) throw ConfigError("chain scales must be >= 2");
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json lj = ledger.to_json();
  lj["sigma"] = sigma;
  lj["frak_e"] = frak_e;
  lj["frak_s"] = frak_s;
  if (K1) lj["K1"] = *K1;
  return {{"problem", problem_path.empty() ? nlohmann::json(builtin) : nlohmann::json(problem_path)},
          {"problem_data", problem.to_json()},
          {"ledger", lj},
          {"lambda_grid", {{"min", grid.min}, {"max", grid.max}, {"count", grid.count}}},
          {"epsilons", epsilons},
          {"strategy", to_string(strategy)},
          {"output_dir", output_dir},
          {"seed", seed},
          {"nash_moser", nm.to_json()},
          {"cantor", cantor.to_json()},
          {"chains",
           {{"N", chain_N},
            {"lambda", chain_lambda},
            {"chi", chain_chi},
            {"fiber_radius", chain_fiber_radius},
            {"Gamma", chain_Gamma},
            {"K", chain_K}}},
          {"properties", {{"matrices", property_matrices}}}};
}

namespace {

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::string& base_dir) {
  RunConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (j.contains("problem")) {
      const auto& pj = j.at("problem");
      if (pj.is_object()) {
        c.problem = PDEProblem::from_json(pj);
        c.builtin.clear();
      } else {
        const std::string s = pj.get<std::string>();
        if (s == "nlw" || s == "nls") {
          c.builtin = s;
        } else {
          std::filesystem::path path(s);
          if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
          c.problem_path = path.string();
          c.problem = PDEProblem::from_json(read_json_file(c.problem_path));
          c.builtin.clear();
        }
      }
    }
    if (!c.builtin.empty())
      c.problem = c.builtin == "nls" ? PDEProblem::default_nls(0.0) : PDEProblem::default_nlw(0.0);

    if (j.contains("ledger")) {
      const auto& lj = j.at("ledger");
      c.ledger = MultiscaleParams::from_json(lj, c.ledger);
      c.sigma = lj.value("sigma", c.sigma);
      c.frak_e = lj.value("frak_e", c.frak_e);
      c.frak_s = lj.value("frak_s", c.frak_s);
      if (lj.contains("K1")) c.K1 = lj.at("K1").get<double>();
    }
    c.ledger.d = c.problem.d();
    c.ledger.r = c.problem.r();
    if (j.contains("lambda_grid")) {
      const auto& g = j.at("lambda_grid");
      c.grid.min = g.value("min", c.grid.min);
      c.grid.max = g.value("max", c.grid.max);
      c.grid.count = g.value("count", c.grid.count);
    }
    if (j.contains("epsilons")) c.epsilons = j.at("epsilons").get<std::vector<double>>();
    if (j.contains("strategy")) c.strategy = inverse_strategy_from_string(j.at("strategy").get<std::string>());
    c.output_dir = j.value("output_dir", c.output_dir);
    c.seed = j.value("seed", c.seed);
    if (j.contains("nash_moser")) c.nm = NashMoserConfig::from_json(j.at("nash_moser"));
    if (j.contains("cantor")) c.cantor = CantorParams::from_json(j.at("cantor"));
    if (j.contains("chains")) {
      const auto& cj = j.at("chains");
      if (cj.contains("N")) c.chain_N = cj.at("N").get<std::vector<int>>();
      c.chain_lambda = cj.value("lambda", c.chain_lambda);
      c.chain_chi = cj.value("chi", c.chain_chi);
      c.chain_fiber_radius = cj.value("fiber_radius", c.chain_fiber_radius);
      c.chain_Gamma = cj.value("Gamma", c.chain_Gamma);
      c.chain_K = cj.value("K", c.chain_K);
    }
    if (j.contains("properties")) c.property_matrices = j.at("properties").value("matrices", c.property_matrices);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const bool explicit_nm = j.contains("nash_moser");
  const int N0 = c.nm.N0, cap = c.nm.N_cap;
  const double chi = c.nm.chi;
  c.sync();
  if (explicit_nm) {
    c.nm.N0 = N0;
    c.nm.N_cap = cap;
    c.nm.chi = chi;
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  const nlohmann::json j = read_json_file(path);
  return from_json(j, std::filesystem::path(path).parent_path().string());
}

nlohmann::json state_to_json(const SeqVec& u) {
  nlohmann::json out = nlohmann::json::array();
  if (!u.layout()) return out;
  const Layout& L = *u.layout();
  for (int s = 0; s < L.num_sites(); ++s) {
    const Site& k = L.sites()[s];
    nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
    for (int q = 0; q < L.block_size(s); ++q) {
      re.push_back(u.block(s)(q).real());
      im.push_back(u.block(s)(q).imag());
    }
    out.push_back({{"l", k.l.to_vector()}, {"j", k.j.to_vector()}, {"a", k.a}, {"re", re}, {"im", im}});
  }
  return out;
}

SeqVec state_from_json(const nlohmann::json& j, const ModelPtr& model, const std::vector<int>& comps) {
  int R = 0;
  for (const auto& e : j) {
    const Site k{IntVec::from(e.at("l").get<std::vector<int>>()), IntVec::from(e.at("j").get<std::vector<int>>()),
                 e.at("a").get<int>()};
    R = std::max(R, site_abs(k));
  }
  SeqVec u(Layout::ball(model, R, comps));
  for (const auto& e : j) {
    const Site k{IntVec::from(e.at("l").get<std::vector<int>>()), IntVec::from(e.at("j").get<std::vector<int>>()),
                 e.at("a").get<int>()};
    const auto re = e.at("re").get<std::vector<double>>();
    const auto im = e.at("im").get<std::vector<double>>();
    Eigen::VectorXcd b(re.size());
    for (std::size_t q = 0; q < re.size(); ++q) b(q) = cplx(re[q], im[q]);
    u.set(k, b);
  }
  return u;
}

LambdaRun lambda_run_from_json(const nlohmann::json& j, const PDEProblem& p) {
  LambdaRun run;
  run.lambda = j.at("lambda").get<double>();
  run.error = j.value("error", std::string());
  run.converged = j.value("converged", false);
  run.initial_residual_s1 = j.value("initial_residual_s1", 0.0);
  run.first_membership_failure = j.value("first_membership_failure", -1);
  run.first_guard_failure = j.value("first_guard_failure", -1);
  for (const auto& s : j.at("stages")) {
    StageRecord r;
    r.n = s.value("n", 0);
    r.N = s.value("N", 0);
    r.lambda = run.lambda;
    r.member = s.value("member", false);
    r.in_A = s.value("in_A", false);
    r.residual_s1 = s.value("residual_s1", 0.0);
    r.residual_S = s.value("residual_S", 0.0);
    r.next_residual_s1 = s.value("next_residual_s1", 0.0);
    r.step_s1 = s.value("step_s1", 0.0);
    r.error = s.value("error", std::string());
    run.stages.push_back(r);
  }
  if (j.contains("u")) run.u = state_from_json(j.at("u"), p.rule.model, p.comps());
  return run;
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace smallsep
