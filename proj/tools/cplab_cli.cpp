// cplab: command line front end for the experiment harness.

#include <cstdlib>
#include <functional>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cplab/harness.hpp"

namespace {

const char* const kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  2  config parse error, schema violation or invalid parameter\n"
    "  3  numerical failure (quadrature, convergence, insufficient hits)\n"
    "  4  assumption audit reported a VIOLATION\n"
    "Environment: CPL_SEED overrides the seed, CPL_WORKERS the worker count.\n"
    "Precedence: defaults < --config file < environment < command line flags.";

// Flags are parsed into a scratch config; only flags actually given on the
// command line are copied over the file/env-derived config afterwards.
struct Overrides {
  cplab::ExperimentConfig scratch;
  std::vector<std::pair<CLI::Option*, std::function<void(cplab::ExperimentConfig&)>>> appliers;

  template <class T>
  void add(CLI::App& app, const std::string& name, T cplab::ExperimentConfig::*field,
           const std::string& help) {
    auto* opt = app.add_option(name, scratch.*field, help);
    appliers.emplace_back(opt, [this, field](cplab::ExperimentConfig& c) { c.*field = scratch.*field; });
  }

  template <class S, class T>
  void add(CLI::App& app, const std::string& name, S cplab::ExperimentConfig::*group, T S::*field,
           const std::string& help) {
    auto* opt = app.add_option(name, scratch.*group.*field, help);
    appliers.emplace_back(opt, [this, group, field](cplab::ExperimentConfig& c) {
      c.*group.*field = scratch.*group.*field;
    });
  }

  void apply(cplab::ExperimentConfig& cfg) const {
    for (const auto& [opt, fn] : appliers)
      if (opt->count() > 0) fn(cfg);
  }
};

std::uint64_t env_u64(const char* name, std::uint64_t fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  try {
    std::size_t used = 0;
    const auto parsed = std::stoull(v, &used);
    if (used != std::string(v).size()) throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    throw cplab::ConfigError(std::string("environment variable ") + name + " is not an integer");
  }
}

}  // namespace

int main(int argc, char** argv) {
  using cplab::ExperimentConfig;
  using cplab::MarkSpec;
  using cplab::ModelSpec;
  using cplab::PriorSpec;

  CLI::App app{"cplab: compound Poisson limits of Markov triangular arrays", "cplab"};
  app.footer(kExitCodes);
  app.require_subcommand(1);

  std::string config_file;
  unsigned workers_flag = 0;
  std::vector<std::string> theoretical;
  Overrides ov;

  app.add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);
  auto* workers_opt = app.add_option("--workers", workers_flag, "worker threads (default: hardware)");
  ov.add(app, "--seed", &ExperimentConfig::seed, "master seed");
  ov.add(app, "--out", &ExperimentConfig::out, "output prefix; files are <out>_<kind>.csv/.json");
  ov.add(app, "--family", &ExperimentConfig::model, &ModelSpec::family, "gaussian|laplace|logistic");
  ov.add(app, "--sigma", &ExperimentConfig::model, &ModelSpec::sigma, "innovation scale");
  ov.add(app, "--drift", &ExperimentConfig::model, &ModelSpec::drift, "zero|linear|clipped|tar");
  ov.add(app, "--rho", &ExperimentConfig::model, &ModelSpec::rho, "AR coefficient");
  ov.add(app, "--clip", &ExperimentConfig::model, &ModelSpec::clip, "clip level of the clipped drift");
  ov.add(app, "--rho-plus", &ExperimentConfig::model, &ModelSpec::rho_plus, "TAR slope above the threshold");
  ov.add(app, "--rho-minus", &ExperimentConfig::model, &ModelSpec::rho_minus, "TAR slope below the threshold");
  ov.add(app, "--theta0", &ExperimentConfig::model, &ModelSpec::theta0, "true threshold");
  ov.add(app, "--theta-lo", &ExperimentConfig::model, &ModelSpec::theta_lo, "parameter space lower end");
  ov.add(app, "--theta-hi", &ExperimentConfig::model, &ModelSpec::theta_hi, "parameter space upper end");
  ov.add(app, "--mark", &ExperimentConfig::mark, &MarkSpec::kind, "constant|affine|log_ratio");
  ov.add(app, "--mark-value", &ExperimentConfig::mark, &MarkSpec::value, "constant mark value");
  ov.add(app, "--mark-slope", &ExperimentConfig::mark, &MarkSpec::slope, "affine mark slope");
  ov.add(app, "--mark-intercept", &ExperimentConfig::mark, &MarkSpec::intercept, "affine mark intercept");
  ov.add(app, "--mark-shift", &ExperimentConfig::mark, &MarkSpec::shift, "log-ratio mark shift");
  ov.add(app, "--prior", &ExperimentConfig::prior, &PriorSpec::kind, "uniform|truncated_gaussian");
  ov.add(app, "--prior-mean", &ExperimentConfig::prior, &PriorSpec::mean, "truncated Gaussian prior mean");
  ov.add(app, "--prior-sd", &ExperimentConfig::prior, &PriorSpec::sd, "truncated Gaussian prior sd");
  ov.add(app, "-n,--n", &ExperimentConfig::n, "row length / sample size");
  ov.add(app, "--n-grid", &ExperimentConfig::n_grid, "row lengths for rate");
  ov.add(app, "-M,--M", &ExperimentConfig::M, "Monte Carlo replications");
  ov.add(app, "--burn-in", &ExperimentConfig::burn_in, "burn-in steps (0: default)");
  ov.add(app, "--grid-points", &ExperimentConfig::grid_points, "invariant density grid size");
  ov.add(app, "--x-max", &ExperimentConfig::x_max, "invariant density half width (0: automatic)");
  ov.add(app, "--tol", &ExperimentConfig::tol, "invariant density sup-norm tolerance");
  ov.add(app, "--max-iter", &ExperimentConfig::max_iter, "invariant density iteration cap");
  ov.add(app, "--levy-tol", &ExperimentConfig::levy_tol, "Levy distance bisection tolerance");
  ov.add(app, "--bootstrap", &ExperimentConfig::bootstrap, "bootstrap resamples for the Levy error bar");
  ov.add(app, "--zol-points", &ExperimentConfig::zol_points, "t grid size of the smoothing bound");
  ov.add(app, "--zol-coefficient", &ExperimentConfig::zol_coefficient, "rate bound coefficient, 2 or 8");
  ov.add(app, "--ell", &ExperimentConfig::ell, "dependence range for the audit");
  ov.add(app, "--u-max", &ExperimentConfig::u_max, "likelihood-ratio window (0: automatic)");

  struct Sub {
    const char* name;
    const char* help;
  };
  const std::vector<Sub> subs = {
      {"simulate", "simulate one stationary path"},
      {"invariant", "solve for the invariant density and report p(0)"},
      {"convergence", "Levy distance to the limit at one n"},
      {"rate", "Levy distance, envelope and smoothing bound over n_grid"},
      {"audit", "Monte Carlo audit of the moment conditions"},
      {"zol", "smoothing bound, empirical or --theoretical"},
      {"threshold", "Bayes threshold estimator against its limit law"},
  };
  CLI::App* zol = nullptr;
  for (const auto& s : subs) {
    auto* sc = app.add_subcommand(s.name, s.help);
    sc->fallthrough();
    if (std::string(s.name) == "zol") zol = sc;
  }
  zol->add_option("--theoretical", theoretical,
                  "evaluate the closed-form rate bound from KEY=VALUE constants "
                  "(C1 C2 C3 mu r b n ell)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cplab::exit_code::ok : cplab::exit_code::config;
  }

  try {
    ExperimentConfig cfg;
    if (!config_file.empty()) cfg = cplab::load_config(config_file);
    cfg.seed = env_u64("CPL_SEED", cfg.seed);
    unsigned workers = static_cast<unsigned>(env_u64("CPL_WORKERS", std::thread::hardware_concurrency()));
    ov.apply(cfg);
    if (workers_opt->count() > 0) workers = workers_flag;
    if (workers == 0) workers = 1;
    cfg.subcommand = app.get_subcommands().front()->get_name();
    for (const auto& kv : theoretical) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw cplab::ConfigError("--theoretical expects KEY=VALUE, got " + kv);
      try {
        cfg.theoretical[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
      } catch (const std::exception&) {
        throw cplab::ConfigError("--theoretical value is not a number: " + kv);
      }
    }
    if (cfg.zol_coefficient != 2 && cfg.zol_coefficient != 8)
      throw cplab::ConfigError("zol_coefficient must be 2 or 8");
    return cplab::run(cfg, workers, std::cout);
  } catch (const cplab::InvalidParameter& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cplab::exit_code::config;
  } catch (const cplab::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return cplab::exit_code::numerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cplab::exit_code::numerical;
  }
}
