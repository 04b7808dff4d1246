#ifndef CPLAB_HARNESS_HPP
#define CPLAB_HARNESS_HPP

// Experiment configuration, subcommand dispatch and result persistence for
// the cplab command line tool. Every output file carries the hash of the
// configuration that produced it; worker count is a runtime setting and is
// never part of the configuration.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>  // nlohmann 3.11, vendored

#include "cplab/distributions.hpp"
#include "cplab/errors.hpp"
#include "cplab/markov.hpp"
#include "cplab/metrics.hpp"
#include "cplab/threshold.hpp"
#include "cplab/triangular_array.hpp"

namespace cplab {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int numerical = 3;
inline constexpr int violation = 4;
}  // namespace exit_code

struct ModelSpec {
  std::string family = "gaussian";
  double sigma = 1.0;
  std::string drift = "linear";  ///< zero | linear | clipped | tar
  double rho = 0.5;
  double clip = 1.0;
  double rho_plus = 0.5;
  double rho_minus = -0.5;
  double theta0 = 0.5;
  double theta_lo = -1.0;
  double theta_hi = 1.0;
};

struct MarkSpec {
  std::string kind = "constant";  ///< constant | affine | log_ratio
  double value = 1.0;
  double slope = 1.0;
  double intercept = 0.0;
  double shift = 1.0;
};

struct PriorSpec {
  std::string kind = "uniform";  ///< uniform | truncated_gaussian
  double mean = 0.0;
  double sd = 1.0;
};

struct ExperimentConfig {
  std::string subcommand;
  ModelSpec model;
  MarkSpec mark;
  PriorSpec prior;
  std::size_t n = 1000;
  std::vector<std::size_t> n_grid{100, 300, 1000, 3000};
  std::size_t M = 10000;
  std::uint64_t seed = 1;
  std::size_t burn_in = 0;  ///< 0 selects the default burn-in
  std::size_t grid_points = 4001;
  double x_max = 0.0;
  double tol = 1e-12;
  std::size_t max_iter = 10000;
  double levy_tol = 1e-6;
  std::size_t bootstrap = 100;
  std::size_t zol_points = 2001;
  int zol_coefficient = 8;
  std::size_t ell = 2;
  double u_max = 0.0;
  std::map<std::string, double> theoretical;  ///< zol --theoretical constants
  std::string out = "cplab";
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelSpec, family, sigma, drift, rho, clip, rho_plus,
                                                rho_minus, theta0, theta_lo, theta_hi)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MarkSpec, kind, value, slope, intercept, shift)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PriorSpec, kind, mean, sd)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExperimentConfig, subcommand, model, mark, prior, n,
                                                n_grid, M, seed, burn_in, grid_points, x_max, tol,
                                                max_iter, levy_tol, bootstrap, zol_points,
                                                zol_coefficient, ell, u_max, theoretical, out)

/// Reads a JSON config; unknown keys are rejected.
inline ExperimentConfig load_config(const std::filesystem::path& file, ExperimentConfig base = {}) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  const nlohmann::json known = base;
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    if (value.is_object() && known[key].is_object() && key != "theoretical")
      for (const auto& [sub, v] : value.items())
        if (!known[key].contains(sub))
          throw ConfigError("unknown config key '" + key + "." + sub + "'");
  }
  nlohmann::json merged = known;
  merged.merge_patch(doc);
  try {
    return merged.get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config schema violation: " + std::string(e.what()));
  }
}

/// FNV-1a of the canonical JSON dump, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = nlohmann::json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

inline InnovationDensity make_innovation(const ModelSpec& m) {
  return InnovationDensity(parse_family(m.family), m.sigma);
}

inline MarkTransform make_mark(const MarkSpec& s) {
  if (s.kind == "constant") return MarkTransform::constant(s.value);
  if (s.kind == "affine") return MarkTransform::affine(s.slope, s.intercept);
  if (s.kind == "log_ratio") return MarkTransform::log_ratio(s.shift);
  throw ConfigError("unknown mark kind '" + s.kind + "'");
}

inline ArModel make_ar_model(const ExperimentConfig& cfg) {
  const auto& m = cfg.model;
  Drift drift = Drift::zero();
  if (m.drift == "zero") drift = Drift::zero();
  else if (m.drift == "linear") drift = Drift::linear(m.rho);
  else if (m.drift == "clipped") drift = Drift::clipped_linear(m.rho, m.clip);
  else throw ConfigError("subcommand '" + cfg.subcommand + "' needs drift zero|linear|clipped");
  return ArModel(drift, make_innovation(m), make_mark(cfg.mark));
}

inline TarModel make_tar_model(const ExperimentConfig& cfg) {
  const auto& m = cfg.model;
  return TarModel(m.rho_plus, m.rho_minus, m.theta0, Interval{m.theta_lo, m.theta_hi},
                  make_innovation(m));
}

inline Prior make_prior(const ExperimentConfig& cfg) {
  const Interval support{cfg.model.theta_lo, cfg.model.theta_hi};
  if (cfg.prior.kind == "uniform") return Prior::uniform(support);
  if (cfg.prior.kind == "truncated_gaussian")
    return Prior::truncated_gaussian(cfg.prior.mean, cfg.prior.sd, support);
  throw ConfigError("unknown prior kind '" + cfg.prior.kind + "'");
}

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

class OutputSet {
 public:
  OutputSet(const ExperimentConfig& cfg, std::ostream& log)
      : cfg_(cfg), hash_(config_hash(cfg)), log_(log) {
    const auto parent = std::filesystem::path(cfg.out).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
  }

  const std::string& hash() const { return hash_; }

  /// `<out>_<suffix>.csv` with a leading hash comment line.
  void csv(const std::string& suffix, const std::string& header,
           const std::vector<std::string>& lines) const {
    const std::string file = cfg_.out + "_" + suffix + ".csv";
    std::ofstream f(file);
    if (!f) throw ConfigError("cannot write " + file);
    f << "# cplab " << cfg_.subcommand << " config_hash=" << hash_ << "\n" << header << "\n";
    for (const auto& l : lines) f << l << "\n";
    log_ << "wrote " << file << "\n";
  }

  /// `<out>_<suffix>.json` holding the config echo, its hash and the results.
  void json(const std::string& suffix, nlohmann::json results) const {
    const std::string file = cfg_.out + "_" + suffix + ".json";
    nlohmann::json doc;
    doc["config_hash"] = hash_;
    doc["config"] = cfg_;
    doc["results"] = std::move(results);
    std::ofstream f(file);
    if (!f) throw ConfigError("cannot write " + file);
    f << doc.dump(2) << "\n";
    log_ << "wrote " << file << "\n";
  }

 private:
  const ExperimentConfig& cfg_;
  std::string hash_;
  std::ostream& log_;
};

inline std::string rate_header() { return "n,M,levy_hat,levy_err,envelope_ratio,zol_bound,seconds"; }

inline std::string rate_line(const RateStudyRow& r) {
  return std::to_string(r.n) + "," + std::to_string(r.M) + "," + num(r.levy_hat) + "," +
         num(r.levy_err) + "," + num(r.envelope_ratio) + "," + num(r.zol_bound) + "," +
         num(r.seconds);
}

inline nlohmann::json rate_json(const RateStudyReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"n", r.n},
                    {"M", r.M},
                    {"levy_hat", r.levy_hat},
                    {"levy_err", r.levy_err},
                    {"envelope_ratio", r.envelope_ratio},
                    {"zol_bound", r.zol_bound},
                    {"seconds", r.seconds}});
  return {{"intensity", rep.intensity}, {"exact_limit_cdf", rep.exact_limit_cdf}, {"rows", rows}};
}

inline RateStudyOptions rate_options(const ExperimentConfig& cfg, unsigned workers) {
  RateStudyOptions o;
  o.bootstrap = cfg.bootstrap;
  o.zol_points = cfg.zol_points;
  o.levy_tol = cfg.levy_tol;
  o.workers = workers;
  return o;
}

inline GridSpec grid_spec(const ExperimentConfig& cfg) { return {cfg.x_max, cfg.grid_points}; }

inline double theoretical_value(const ExperimentConfig& cfg) {
  RateBoundParams p;
  p.coefficient = cfg.zol_coefficient;
  for (const auto& [key, value] : cfg.theoretical) {
    if (key == "C1") p.C1 = value;
    else if (key == "C2") p.C2 = value;
    else if (key == "C3") p.C3 = value;
    else if (key == "mu") p.mu = value;
    else if (key == "r") p.r = value;
    else if (key == "b") p.b = value;
    else if (key == "n") p.n = value;
    else if (key == "ell") p.ell = value;
    else throw ConfigError("unknown theoretical constant '" + key + "'");
  }
  return theoretical_rate_bound(p);
}

}  // namespace detail

/// Executes one subcommand. Returns an exit code; errors propagate as exceptions.
inline int run(const ExperimentConfig& cfg, unsigned workers, std::ostream& log) {
  using nlohmann::json;
  using detail::num;
  const detail::OutputSet out(cfg, log);
  const std::string& sub = cfg.subcommand;

  if (sub == "simulate") {
    Rng rng = make_stream(cfg.seed, {stream_tag::paths, cfg.n, 0});
    Path path;
    if (cfg.model.drift == "tar") {
      const auto model = make_tar_model(cfg);
      path = simulate_chain(model, cfg.n,
                            cfg.burn_in ? cfg.burn_in : default_burn_in(model.contraction()), rng);
    } else {
      const auto model = make_ar_model(cfg);
      path = simulate_chain(model, cfg.n,
                            cfg.burn_in ? cfg.burn_in : default_burn_in(model.contraction()), rng);
    }
    std::vector<std::string> lines;
    lines.push_back("0," + num(path.x[0]) + ",");
    for (std::size_t j = 1; j <= path.n(); ++j)
      lines.push_back(std::to_string(j) + "," + num(path.x[j]) + "," + num(path.eps[j - 1]));
    out.csv("path", "j,x,eps", lines);
    out.json("path", {{"n", path.n()}});
    return exit_code::ok;
  }

  if (sub == "invariant") {
    InvariantDensity density;
    double origin = 0.0;
    double q_sup = 0.0;
    if (cfg.model.drift == "tar") {
      const auto model = make_tar_model(cfg);
      density = solve_invariant_density(model, detail::grid_spec(cfg), cfg.tol, cfg.max_iter);
      origin = model.theta();
      q_sup = model.innovation().sup_norm();
    } else {
      const auto model = make_ar_model(cfg);
      density = solve_invariant_density(model, detail::grid_spec(cfg), cfg.tol, cfg.max_iter);
      q_sup = model.innovation().sup_norm();
    }
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < density.grid().size(); ++i)
      lines.push_back(num(density.grid()[i]) + "," + num(density.values()[i]));
    out.csv("density", "x,p", lines);
    out.json("density", {{"evaluated_at", origin},
                         {"p", density.at(origin)},
                         {"iterations", density.iterations()},
                         {"residual", density.residual()},
                         {"sup", density.sup()},
                         {"q_sup", q_sup},
                         {"mass", density.total_mass()}});
    log << "p(" << num(origin) << ") = " << num(density.at(origin)) << "\n";
    return exit_code::ok;
  }

  if (sub == "convergence" || sub == "rate") {
    const auto model = make_ar_model(cfg);
    const std::vector<std::size_t> grid =
        sub == "rate" ? cfg.n_grid : std::vector<std::size_t>{cfg.n};
    const auto report = rate_study(model, grid, cfg.M, cfg.seed, detail::rate_options(cfg, workers));
    std::vector<std::string> lines;
    for (const auto& r : report.rows) lines.push_back(detail::rate_line(r));
    out.csv(sub, detail::rate_header(), lines);
    out.json(sub, detail::rate_json(report));
    for (const auto& r : report.rows)
      log << "n=" << r.n << " levy=" << num(r.levy_hat) << " +- " << num(r.levy_err)
          << " zol=" << num(r.zol_bound) << "\n";
    return exit_code::ok;
  }

  if (sub == "audit") {
    const auto model = make_ar_model(cfg);
    const std::size_t M = std::max(cfg.M, audit_min_replications(model, cfg.n));
    std::vector<double> t_grid(41);
    for (std::size_t k = 0; k < t_grid.size(); ++k) t_grid[k] = -10.0 + 0.5 * static_cast<double>(k);
    const auto audit = audit_assumptions(model, cfg.n, M, t_grid, cfg.seed, cfg.ell, workers);
    std::vector<std::string> lines;
    json entries = json::array();
    for (const auto& e : audit.entries) {
      lines.push_back("\"" + e.name + "\"," + num(e.estimate) + "," + num(e.std_error) + "," +
                      std::to_string(e.hits) + "," + num(e.bound) + "," + num(e.model_bound) +
                      "," + (e.violation ? "VIOLATION" : "ok"));
      entries.push_back({{"name", e.name},
                         {"estimate", e.estimate},
                         {"std_error", e.std_error},
                         {"hits", e.hits},
                         {"bound", e.bound},
                         {"model_bound", e.model_bound},
                         {"violation", e.violation}});
    }
    out.csv("audit", "term,estimate,std_error,hits,bound,model_bound,status", lines);
    out.json("audit", {{"n", audit.n},
                       {"replications", audit.replications},
                       {"ell", audit.ell},
                       {"intensity", audit.intensity},
                       {"C1", audit.C1},
                       {"C2", audit.C2},
                       {"c_prime", audit.c_prime},
                       {"violation", audit.any_violation()},
                       {"entries", entries}});
    for (const auto& e : audit.entries)
      log << e.name << " = " << num(e.estimate) << " +- " << num(e.std_error) << " (bound "
          << num(e.bound) << ")" << (e.violation ? "  VIOLATION" : "") << "\n";
    return audit.any_violation() ? exit_code::violation : exit_code::ok;
  }

  if (sub == "zol") {
    if (!cfg.theoretical.empty()) {
      const double value = detail::theoretical_value(cfg);
      log << num(value) << "\n";
      out.json("zol", {{"mode", "theoretical"}, {"bound", value}});
      return exit_code::ok;
    }
    const auto model = make_ar_model(cfg);
    const auto report =
        rate_study(model, std::vector<std::size_t>{cfg.n}, cfg.M, cfg.seed,
                   detail::rate_options(cfg, workers));
    const CompoundPoissonLaw limit(report.intensity, model.jump_law());
    const double root = std::sqrt(static_cast<double>(cfg.n));
    // Diagnostic only: the smoothing bound over a coarse T grid around sqrt(n).
    json scan = json::array();
    double best_T = root, best = report.rows[0].zol_bound;
    for (double factor : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      const double T = factor * root;
      if (!(T > 1.3)) continue;
      const double b = sample_zolotarev_bound(report.samples[0], limit, T, cfg.zol_points);
      scan.push_back({{"T", T}, {"bound", b}});
      if (b < best) best = b, best_T = T;
    }
    log << "levy=" << num(report.rows[0].levy_hat) << " zol(T=sqrt n)=" << num(report.rows[0].zol_bound)
        << " best T=" << num(best_T) << " -> " << num(best) << "\n";
    out.csv("zol", detail::rate_header(), {detail::rate_line(report.rows[0])});
    out.json("zol", {{"mode", "empirical"},
                     {"n", cfg.n},
                     {"levy_hat", report.rows[0].levy_hat},
                     {"zol_bound", report.rows[0].zol_bound},
                     {"T_scan", scan},
                     {"intensity", report.intensity}});
    return exit_code::ok;
  }

  if (sub == "threshold") {
    const auto model = make_tar_model(cfg);
    const auto prior = make_prior(cfg);
    AsymptoticsOptions options;
    options.workers = workers;
    options.u_max = cfg.u_max;
    options.levy_tol = cfg.levy_tol;
    const auto report = estimator_asymptotics_study(model, cfg.n, cfg.M, prior, cfg.seed, options);
    std::vector<std::string> lines;
    const double M = static_cast<double>(report.M);
    for (std::size_t k = 0; k < report.scaled_errors.size(); ++k)
      lines.push_back("scaled_estimate," + num(report.scaled_errors[k]) + "," +
                      num(static_cast<double>(k + 1) / M));
    for (std::size_t k = 0; k < report.limit_draws.size(); ++k)
      lines.push_back("limit," + num(report.limit_draws[k]) + "," +
                      num(static_cast<double>(k + 1) / M));
    out.csv("threshold_cdf", "series,value,cdf", lines);
    out.json("threshold", {{"levy_distance", report.levy_distance},
                           {"n", report.n},
                           {"M", report.M},
                           {"U_max", report.u_max},
                           {"intensity", report.intensity},
                           {"kl_plus", report.kl_plus},
                           {"kl_minus", report.kl_minus},
                           {"seed", report.seed}});
    log << "levy(n(theta~ - theta0), limit) = " << num(report.levy_distance) << "\n";
    return exit_code::ok;
  }

  throw ConfigError("unknown subcommand '" + sub + "'");
}

}  // namespace cplab

#endif  // CPLAB_HARNESS_HPP
