// lobq: command-line front end for the queue simulator and its limit engines.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include <lobqueue/lobqueue.hpp>

namespace fs = std::filesystem;
using namespace lobqueue;
using nlohmann::json;

namespace {

struct RunContext {
  json config;
  std::uint64_t seed = 1;
  fs::path out = "lobq_out";
  unsigned workers = 1;
  std::string suite = "all";
};

Vec6 vec6_of(const std::vector<double>& v, const std::string& what) {
  if (v.size() != 6) throw ConfigError(what + ": expected 6 values");
  Vec6 out;
  for (int j = 0; j < 6; ++j) out[j] = v[j];
  return out;
}

std::array<double, 6> arr6_of(const std::vector<double>& v, const std::string& what) {
  if (v.size() != 6) throw ConfigError(what + ": expected 6 values");
  std::array<double, 6> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

ArrivalSpec arrival_from(const json& cfg) {
  Section s(cfg, "point_processes");
  const std::string kind = s.text("kind", "poisson");
  ArrivalSpec spec;
  if (kind == "poisson")
    spec = Poisson{s.number("lambda", 1.0)};
  else if (kind == "hawkes")
    spec = HawkesExp{s.number("nu", 1.0), s.number("a", 0.0), s.number("b", 1.0)};
  else if (kind == "cox")
    spec = CoxShotNoise{s.number("nu", 1.0), s.number("rho", 0.0), s.number("kappa", 0.0), s.number("delta", 1.0)};
  else if (kind == "linear")
    spec = LinearStateDependent{s.number("lambda", 1.0), s.number("alpha", 0.0), s.number("beta", 0.0)};
  else
    throw ConfigError("point_processes.kind: unknown arrival kind '" + kind + "'");
  validate(spec);
  return spec;
}

MarkModel marks_from(const json& cfg) {
  Section s(cfg, "order_flow");
  if (s.has("vbar")) {
    if (s.has("p") || s.has("laws") || s.has("size"))
      throw ConfigError("order_flow: give either vbar or p/laws/size, not both");
    return marks_for_mean(vec6_of(s.numbers("vbar"), "order_flow.vbar"));
  }
  MarkModel m;
  m.p = arr6_of(s.numbers("p", std::vector<double>(6, 1.0 / 6)), "order_flow.p");
  const auto laws = s.has("laws") ? s.texts("laws") : std::vector<std::string>(6, "constant");
  const auto size = s.numbers("size", std::vector<double>(6, 1.0));
  const auto sigma = s.numbers("sigma", std::vector<double>(6, 1.0));
  if (laws.size() != 6 || size.size() != 6 || sigma.size() != 6)
    throw ConfigError("order_flow: laws, size and sigma need 6 entries");
  for (int j = 0; j < 6; ++j) {
    if (laws[j] == "constant")
      m.laws[j] = ConstantSize{size[j]};
    else if (laws[j] == "exponential")
      m.laws[j] = ExponentialSize{size[j]};
    else if (laws[j] == "geometric")
      m.laws[j] = GeometricSize{size[j]};
    else if (laws[j] == "lognormal")
      m.laws[j] = LogNormalSize{size[j], sigma[j]};
    else
      throw ConfigError("order_flow.laws: unknown size law '" + laws[j] + "'");
  }
  validate(m);
  return m;
}

PsiConvention convention_from(const json& cfg) {
  return psi_convention_from_string(Section(cfg, "order_flow").text("convention", "exact"));
}

FluidParams fluid_from(const json& cfg) {
  Section s(cfg, "fluid_engine");
  FluidParams p = baseline_params();
  p.lambda = s.number("lambda", p.lambda);
  if (s.has("vbar")) p.vbar = vec6_of(s.numbers("vbar"), "fluid_engine.vbar");
  p.qb = s.number("qb", p.qb);
  p.qa = s.number("qa", p.qa);
  p.z = s.number("z", p.z);
  validate(p);
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  std::cout << "wrote " << path.string() << "\n";
}

int cmd_simulate(const RunContext& ctx) {
  Section s(ctx.config, "lob_simulator");
  SimConfig sc;
  sc.arrival = arrival_from(ctx.config);
  sc.marks = marks_from(ctx.config);
  sc.n = s.number("n", 100.0);
  sc.qb0 = s.number("qb", 1.0);
  sc.qa0 = s.number("qa", 1.0);
  sc.z0 = s.number("z", 1.0);
  sc.horizon = s.number("horizon", 1.0);
  sc.continue_after_stop = s.flag("continue_after_stop", true);
  sc.seed = ctx.seed;
  const int paths = int(s.number("paths", 1));
  const bool flows = s.flag("flows", false);
  const double lambda =
      std::holds_alternative<LinearStateDependent>(sc.arrival) ? 0.0 : stationary_rate(sc.arrival);
  json summary = json::array();
  for (int p = 0; p < paths; ++p) {
    sc.path_index = std::uint64_t(p);
    const auto path = simulate_path(sc);
    std::ostringstream csv;
    write_path_csv(csv, path);
    write_text(ctx.out / ("path_" + std::to_string(p) + ".csv"), csv.str());
    if (flows && lambda > 0.0) {
      std::ostringstream fcsv;
      write_flows_csv(fcsv, extract_flows(path, lambda, mean_vector(sc.marks)));
      write_text(ctx.out / ("flows_" + std::to_string(p) + ".csv"), fcsv.str());
    }
    summary.push_back({{"path", p}, {"events", path.events.size()}, {"tau_b", path.tau_b}, {"tau_a", path.tau_a},
                       {"tau_z", path.tau_z}, {"tau", path.tau}, {"qb", path.qb}, {"qa", path.qa}, {"z", path.z}});
  }
  write_text(ctx.out / "simulate.json", json17({{"seed", ctx.seed}, {"paths", summary}}));
  return 0;
}

int cmd_fluid(const RunContext& ctx) {
  Section s(ctx.config, "fluid_engine");
  const auto p = fluid_from(ctx.config);
  const auto h = fluid_hitting_times(p);
  const auto k = fluid_constants(p);
  const int points = int(s.number("points", 201));
  const double t_end = s.number("t_end", std::isfinite(h.tau) ? h.tau : 1.0);
  std::ostringstream csv;
  csv << "t,qb,qa,z\n";
  for (int i = 0; i < points; ++i) {
    const double t = points > 1 ? t_end * i / (points - 1) : 0.0;
    const auto [qb, qa] = fluid_queues(p, t);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", t, qb, qa, fluid_position(p, t));
    csv << buf;
  }
  write_text(ctx.out / "fluid.csv", csv.str());
  json j = {{"tau_a", h.tau_a}, {"tau_b", h.tau_b}, {"tau_z", h.tau_z}, {"tau", h.tau},
            {"a", k.a},         {"vb", k.vb},       {"va", k.va}};
  j["b"] = k.cancellations ? json(k.b) : json(nullptr);
  j["c"] = k.cancellations ? json(k.c) : json(nullptr);
  write_text(ctx.out / "fluid.json", json17(j));
  std::printf("tau_a=%.17g tau_b=%.17g tau_z=%.17g\n", h.tau_a, h.tau_b, h.tau_z);
  return 0;
}

DiffusionParams diffusion_from(const json& cfg) {
  Section s(cfg, "diffusion_engine");
  if (s.flag("derive", false)) {
    const auto m = flow_moments(marks_from(cfg), arrival_from(cfg), convention_from(cfg));
    return derive_diffusion_params(m, s.number("qb"), s.number("qa"));
  }
  const auto mu = s.numbers("mu", {0.0, 0.0});
  if (mu.size() != 2) throw ConfigError("diffusion_engine.mu: expected 2 values");
  return make_diffusion_params(Vec2(mu[0], mu[1]), s.number("sigma1", 1.0), s.number("sigma2", 1.0),
                               s.number("rho", 0.0), s.number("qb", 1.0), s.number("qa", 1.0));
}

int cmd_diffusion(const RunContext& ctx) {
  Section s(ctx.config, "diffusion_engine");
  const auto d = diffusion_from(ctx.config);
  json j;
  j["mu"] = {d.mu[0], d.mu[1]};
  j["sigma_cov"] = {{d.cov(0, 0), d.cov(0, 1)}, {d.cov(1, 0), d.cov(1, 1)}};
  j["rho"] = d.rho;
  j["sigma1"] = d.sigma1;
  j["sigma2"] = d.sigma2;
  j["alpha"] = d.alpha;
  j["r0"] = d.r0;
  j["theta0"] = d.theta0;
  const auto pd = price_decrease_probability(d);
  j["p_decrease"] = pd.value;
  j["p_decrease_error"] = pd.error;
  j["sub_probability"] = pd.sub_probability;
  j["survival"] = json::array();
  for (double t : s.numbers("survival_times", {0.1, 0.5, 1.0}))
    j["survival"].push_back({t, survival_probability(d, t).value});
  j["sigmaY2"] = json::array();
  if (s.has("sigma_y_times")) {
    const auto f = fluid_from(ctx.config);
    const auto m = flow_moments(marks_for_mean(f.vbar), f.lambda, 1.0, convention_from(ctx.config));
    const std::string mode = s.text("variance_mode", "quadrature");
    if (mode != "quadrature" && mode != "closed_form")
      throw ConfigError("diffusion_engine.variance_mode: expected quadrature or closed_form");
    const auto vm = mode == "quadrature" ? VarianceMode::quadrature : VarianceMode::closed_form;
    for (double t : s.numbers("sigma_y_times")) j["sigmaY2"].push_back({t, fluctuation_variance(f, m, t, vm)});
  }
  write_text(ctx.out / "diffusion.json", json17(j));
  std::printf("p_decrease=%.17g\n", pd.value);
  return 0;
}

int verdict(const std::vector<ExperimentReport>& reports, const RunContext& ctx, const std::string& stem) {
  json all = json::array();
  bool ok = true;
  std::string text;
  for (const auto& r : reports) {
    all.push_back(r.to_json());
    text += r.to_text();
    ok = ok && r.passed();
  }
  std::cout << text;
  write_text(ctx.out / (stem + ".json"), json17({{"seed", ctx.seed}, {"passed", ok}, {"reports", all}}));
  write_text(ctx.out / (stem + ".txt"), text);
  return ok ? 0 : 1;
}

int cmd_hitting(const RunContext& ctx) {
  Section s(ctx.config, "diffusion_engine");
  HittingExperimentConfig c;
  c.params = diffusion_from(ctx.config);
  c.paths = int(s.number("paths", 100000));
  c.t_max = s.number("t_max", c.t_max);
  c.survival_times = s.numbers("survival_times", c.survival_times);
  c.check_survival = c.params.mu.isZero() || s.has("survival_times");
  c.seed = ctx.seed;
  c.workers = ctx.workers;
  return verdict({hitting_probability_experiment(c)}, ctx, "hitting");
}

int cmd_ldp(const RunContext& ctx) {
  Section s(ctx.config, "ldp_engine");
  const auto marks = marks_from(ctx.config);
  const double lambda = s.number("lambda", 1.0);
  const std::string mode = s.text("mode", "point");
  json j;
  if (mode == "point") {
    const auto x = vec6_of(s.numbers("x"), "ldp_engine.x");
    const auto r = poisson_iid_rate_density(marks, lambda, x);
    j = {{"x", to_json(x)}, {"lambda_value", r.value}, {"status", to_string(r.status)}};
  } else if (mode == "counts") {
    PoissonLogMgf g(lambda);
    j["points"] = json::array();
    for (double x : s.numbers("x")) {
      const auto r = legendre_point(g, VecX::Constant(1, x));
      j["points"].push_back({{"x", x}, {"lambda_value", r.value}, {"status", to_string(r.status)}});
    }
  } else if (mode == "path") {
    PiecewiseLinearPath path{s.numbers("times"), s.numbers("fb"), s.numbers("fa")};
    const auto r = queue_path_rate(path, marks, lambda, ctx.workers);
    j["path"] = {{"times", path.times}, {"fb", path.fb}, {"fa", path.fa}};
    j["rate"] = r.value;
    j["max_gap"] = r.max_gap;
  } else if (mode == "tail") {
    const auto r = tail_exponent(marks, lambda, s.number("qb"), s.number("qa"), s.number("t"));
    j = {{"t", r.t}, {"exponent", r.exponent}, {"endpoint", {r.endpoint[0], r.endpoint[1]}}};
  } else {
    throw ConfigError("ldp_engine.mode: expected point, counts, path or tail");
  }
  write_text(ctx.out / "ldp.json", json17(j));
  return 0;
}

int cmd_verify(const RunContext& ctx) {
  Section s(ctx.config, "verify_harness");
  const std::string suite = s.text("suite", ctx.suite);
  const std::string scale = s.text("scale", "quick");
  if (scale != "quick" && scale != "full") throw ConfigError("verify_harness.scale: expected quick or full");
  return verdict(run_suite(suite, scale == "full", ctx.seed, ctx.workers), ctx, "verify_" + suite);
}

int cmd_example1(const RunContext& ctx) {
  Section s(ctx.config, "example1");
  Example1Config c;
  c.n = long(s.number("n", 1e4));
  c.paths = int(s.number("paths", 100000));
  c.seed = ctx.seed;
  c.workers = ctx.workers;
  return verdict({example1_demo(c)}, ctx, "example1");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lobq: order book queue simulation and limit theorems"};
  app.require_subcommand(0, 1);
  std::string config_path, out_dir, suite;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  app.add_option("--config", config_path, "config file (sections named after the engines, or JSON)");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--workers", workers, "worker threads");
  app.add_option("--suite", suite, "verification suite: all, fluid, covariance, hitting, tau, sigma_y, lemma, example1");
  const std::vector<std::string> names = {"simulate", "fluid", "diffusion", "hitting", "ldp", "verify", "example1"};
  for (const auto& n : names) app.add_subcommand(n, n + " engine")->fallthrough();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    RunContext ctx;
    if (config_path.empty()) {
      std::cerr << "error: --config is required\n" << app.help();
      return 2;
    }
    ctx.config = load_config(config_path);
    if (ctx.config.empty()) {
      std::cerr << "error: config " << config_path << " is empty\n" << app.help();
      return 2;
    }
    Section run(ctx.config, "run");
    std::string command = app.get_subcommands().empty() ? run.text("command", "") : app.get_subcommands()[0]->get_name();
    if (command.empty()) {
      std::cerr << "error: no subcommand given on the command line or as run.command\n" << app.help();
      return 2;
    }
    ctx.seed = seed ? *seed : std::uint64_t(run.number("seed", 1));
    ctx.workers = workers ? *workers : unsigned(run.number("workers", 1));
    ctx.out = out_dir.empty() ? fs::path(run.text("out", "lobq_out")) : fs::path(out_dir);
    ctx.suite = suite.empty() ? run.text("suite", "all") : suite;
    if (ctx.workers == 0) ctx.workers = default_workers();
    fs::create_directories(ctx.out);
    if (command == "simulate") return cmd_simulate(ctx);
    if (command == "fluid") return cmd_fluid(ctx);
    if (command == "diffusion") return cmd_diffusion(ctx);
    if (command == "hitting") return cmd_hitting(ctx);
    if (command == "ldp") return cmd_ldp(ctx);
    if (command == "verify") return cmd_verify(ctx);
    if (command == "example1") return cmd_example1(ctx);
    std::cerr << "error: unknown command '" << command << "'\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
