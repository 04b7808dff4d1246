#ifndef CPLAB_METRICS_HPP
#define CPLAB_METRICS_HPP

// Levy distance between step CDFs, empirical characteristic functions, the
// Zolotarev smoothing bound, the closed-form rate bound and the n-sweep rate
// study.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "cplab/distributions.hpp"
#include "cplab/errors.hpp"
#include "cplab/markov.hpp"
#include "cplab/parallel.hpp"
#include "cplab/random.hpp"
#include "cplab/triangular_array.hpp"

namespace cplab {

/// A right-continuous step CDF: value, left limit and jump locations.
template <class F>
concept StepCdf = requires(const F& f, double x) {
  { f.cdf(x) } -> std::convertible_to<double>;
  { f.cdf_left(x) } -> std::convertible_to<double>;
  { f.breakpoints() } -> std::convertible_to<std::span<const double>>;
};

/// Sorted sample with its step CDF F(x) = #{v_i <= x} / M.
class EmpiricalLaw {
 public:
  EmpiricalLaw() = default;
  explicit EmpiricalLaw(std::vector<double> sample) : values_(std::move(sample)) {
    detail::require(!values_.empty(), "EmpiricalLaw needs a nonempty sample");
    detail::require(std::all_of(values_.begin(), values_.end(),
                                [](double v) { return std::isfinite(v); }),
                    "EmpiricalLaw sample must be finite");
    std::sort(values_.begin(), values_.end());
    unique_.reserve(values_.size());
    counts_.reserve(values_.size());
    for (double v : values_) {
      if (unique_.empty() || unique_.back() != v) {
        unique_.push_back(v);
        counts_.push_back(0);
      }
      ++counts_.back();
    }
  }

  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> breakpoints() const noexcept { return unique_; }
  std::span<const std::size_t> counts() const noexcept { return counts_; }

  double cdf(double x) const noexcept {
    const auto k = std::upper_bound(values_.begin(), values_.end(), x) - values_.begin();
    return static_cast<double>(k) / static_cast<double>(values_.size());
  }
  double cdf_left(double x) const noexcept {
    const auto k = std::lower_bound(values_.begin(), values_.end(), x) - values_.begin();
    return static_cast<double>(k) / static_cast<double>(values_.size());
  }

  double mean() const noexcept {
    double s = 0.0;
    for (double v : values_) s += v;
    return s / static_cast<double>(values_.size());
  }

 private:
  std::vector<double> values_;
  std::vector<double> unique_;
  std::vector<std::size_t> counts_;
};

/// Exact Poisson(mu) CDF; jumps tabulated until the tail mass drops below 1e-16.
class PoissonCdf {
 public:
  explicit PoissonCdf(double mu) : mu_(mu) {
    detail::require(std::isfinite(mu) && mu > 0.0, "PoissonCdf: mu must be positive");
    double term = std::exp(-mu);
    double sum = term;
    cumulative_.push_back(sum);
    jumps_.push_back(0.0);
    for (double k = 1.0; 1.0 - sum > 1e-16 && k < 10.0 * mu + 1000.0; k += 1.0) {
      term *= mu / k;
      sum += term;
      cumulative_.push_back(std::min(sum, 1.0));
      jumps_.push_back(k);
    }
  }

  double mu() const noexcept { return mu_; }
  std::span<const double> breakpoints() const noexcept { return jumps_; }

  double cdf(double x) const noexcept {
    if (x < 0.0) return 0.0;
    const auto k = static_cast<std::size_t>(std::floor(x));
    return k < cumulative_.size() ? cumulative_[k] : 1.0;
  }
  double cdf_left(double x) const noexcept {
    const double k = std::ceil(x) - 1.0;
    return cdf(k);
  }

 private:
  double mu_;
  std::vector<double> cumulative_;
  std::vector<double> jumps_;
};

/// Unit point mass at `at`.
class PointMass {
 public:
  explicit PointMass(double at) : at_{at} {}
  std::span<const double> breakpoints() const noexcept { return at_; }
  double cdf(double x) const noexcept { return x >= at_[0] ? 1.0 : 0.0; }
  double cdf_left(double x) const noexcept { return x > at_[0] ? 1.0 : 0.0; }

 private:
  double at_[1];
};

namespace detail {

/// Does h satisfy G(x-h) - h <= F(x) <= G(x+h) + h for every x? Both sides are
/// right-continuous step functions of x, so checking at every jump location of
/// F(x), G(x-h), G(x+h), from both sides, is exhaustive. Where the check point
/// was produced by shifting a G jump, G is read at the unshifted jump.
template <StepCdf F, StepCdf G>
bool levy_feasible(const F& f, const G& g, double h) {
  auto ok = [h](double Fv, double lowerG, double upperG) {
    return Fv >= lowerG - h && Fv <= upperG + h;
  };
  for (double x : f.breakpoints()) {
    if (!ok(f.cdf(x), g.cdf(x - h), g.cdf(x + h))) return false;
    if (!ok(f.cdf_left(x), g.cdf_left(x - h), g.cdf_left(x + h))) return false;
  }
  for (double b : g.breakpoints()) {
    const double right = b + h;  // G(x - h) jumps here
    if (!ok(f.cdf(right), g.cdf(b), g.cdf(right + h))) return false;
    if (!ok(f.cdf_left(right), g.cdf_left(b), g.cdf_left(right + h))) return false;
    const double left = b - h;  // G(x + h) jumps here
    if (!ok(f.cdf(left), g.cdf(left - h), g.cdf(b))) return false;
    if (!ok(f.cdf_left(left), g.cdf_left(left - h), g.cdf_left(b))) return false;
  }
  return true;
}

}  // namespace detail

/// L(F, G) = inf{h > 0 : G(x-h) - h <= F(x) <= G(x+h) + h for all x}, by
/// bisection on [0, 1]. The returned h is feasible and within tol of the infimum.
template <StepCdf F, StepCdf G>
double levy_distance(const F& f, const G& g, double tol = 1e-6) {
  detail::require(tol > 0.0, "levy_distance: tol must be positive");
  if (detail::levy_feasible(f, g, 0.0)) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (detail::levy_feasible(f, g, mid) ? hi : lo) = mid;
  }
  return hi;
}

/// sup_x |F(x) - G(x)|, including left limits at every jump.
template <StepCdf F, StepCdf G>
double kolmogorov_distance(const F& f, const G& g) {
  double d = 0.0;
  auto at = [&](double x) {
    d = std::max({d, std::abs(f.cdf(x) - g.cdf(x)), std::abs(f.cdf_left(x) - g.cdf_left(x))});
  };
  for (double x : f.breakpoints()) at(x);
  for (double x : g.breakpoints()) at(x);
  return d;
}

struct EmpiricalCf {
  std::vector<Complex> values;
  double std_error = 0.0;  ///< 1 / sqrt(M), per point
};

/// psi-hat(t) = M^{-1} sum_k exp(i t v_k); tied sample values are grouped.
inline EmpiricalCf empirical_cf(const EmpiricalLaw& law, std::span<const double> t_grid) {
  detail::require(law.size() >= 100, "empirical_cf needs at least 100 samples");
  const auto support = law.breakpoints();
  const auto counts = law.counts();
  const double m = static_cast<double>(law.size());
  EmpiricalCf out;
  out.values.reserve(t_grid.size());
  out.std_error = 1.0 / std::sqrt(m);
  for (double t : t_grid) {
    if (t == 0.0) {
      out.values.emplace_back(1.0, 0.0);
      continue;
    }
    double re = 0.0, im = 0.0;
    for (std::size_t k = 0; k < support.size(); ++k) {
      const double c = static_cast<double>(counts[k]);
      re += c * std::cos(t * support[k]);
      im += c * std::sin(t * support[k]);
    }
    out.values.emplace_back(re / m, im / m);
  }
  return out;
}

inline constexpr double zolotarev_t_min = 1e-3;

/// Grid t_min = 1e-3 < ... < T, uniform with `points` nodes.
inline std::vector<double> zolotarev_grid(double T, std::size_t points = 2001) {
  detail::require(T > zolotarev_t_min && points >= 2, "zolotarev_grid: need T > 1e-3, 2 points");
  std::vector<double> t(points);
  for (std::size_t k = 0; k < points; ++k)
    t[k] = zolotarev_t_min + (T - zolotarev_t_min) * static_cast<double>(k) /
                                 static_cast<double>(points - 1);
  t.back() = T;
  return t;
}

/**
 * (1/pi) int_0^T |psi_n(t) - psi(t)| / t dt + 2e log T / T.
 *
 * `t_grid` is increasing in (0, T] with t_grid.back() == T; `cf_diff` holds
 * |psi_n - psi| at those nodes. The integrand is held at its value at the first
 * node on (0, t_grid[0]] and integrated by the trapezoid rule beyond.
 */
inline double zolotarev_bound(std::span<const double> t_grid, std::span<const double> cf_diff,
                              double T) {
  if (!(T > 1.3)) throw InvalidParameter("zolotarev_bound requires T > 1.3");
  detail::require(t_grid.size() == cf_diff.size() && !t_grid.empty(),
                  "zolotarev_bound: grid and values must have equal nonzero length");
  detail::require(t_grid.front() > 0.0, "zolotarev_bound: grid must start above 0");
  detail::require(std::abs(t_grid.back() - T) <= 1e-12 * T, "zolotarev_bound: grid must end at T");
  // (0, t_0]: constant extension of the integrand.
  double integral = cf_diff.front();
  for (std::size_t k = 1; k < t_grid.size(); ++k) {
    detail::require(t_grid[k] > t_grid[k - 1], "zolotarev_bound: grid must increase");
    integral += 0.5 * (t_grid[k] - t_grid[k - 1]) *
                (cf_diff[k] / t_grid[k] + cf_diff[k - 1] / t_grid[k - 1]);
  }
  return integral / std::numbers::pi + 2.0 * std::numbers::e * std::log(T) / T;
}

struct RateBoundParams {
  double C1 = 1.0;
  double C2 = 1.0;
  double C3 = 1.0;
  double mu = 1.0;
  double r = 0.5;
  double b = 2.0;
  double n = 1e4;
  double coefficient = 8.0;  ///< multiplier of C1^2 b log(n) / n; 8 or 2
  double ell = 1.0;          ///< declared lag of the conditional-mean mixing condition
};

/**
 * (e^{2 mu}/pi) (C2/n + 3 C1 C3 r^{b log n} + k C1^2 b log(n)/n) sqrt(n)
 *   + 2e log(sqrt n)/sqrt(n), with k = `coefficient`, i.e. the smoothing
 * inequality evaluated at T = sqrt(n) and alpha(m) = C3 r^m.
 */
inline double theoretical_rate_bound(const RateBoundParams& p) {
  if (!(p.r > 0.0 && p.r < 1.0)) throw InvalidParameter("rate bound needs r in (0, 1)");
  if (!(p.n >= 3.0)) throw InvalidParameter("rate bound needs n >= 3");
  if (!(p.b >= 1.0 / std::log(1.0 / p.r)))
    throw InvalidParameter("rate bound needs b >= 1 / log(1 / r)");
  if (!(p.coefficient == 8.0 || p.coefficient == 2.0))
    throw InvalidParameter("rate bound coefficient must be 2 or 8");
  if (!(p.C1 > 0.0 && p.C2 >= 0.0 && p.C3 > 0.0 && p.mu > 0.0))
    throw InvalidParameter("rate bound constants must be positive");
  const double log_n = std::log(p.n);
  if (!(p.b * log_n >= p.ell)) throw InvalidParameter("rate bound needs b log n >= ell");
  const double T = std::sqrt(p.n);
  const double alpha = p.C3 * std::pow(p.r, p.b * log_n);
  const double remainder =
      p.C2 / p.n + 3.0 * p.C1 * alpha + p.coefficient * p.C1 * p.C1 * p.b * log_n / p.n;
  return std::exp(2.0 * p.mu) / std::numbers::pi * remainder * T +
         2.0 * std::numbers::e * std::log(T) / T;
}

struct RateStudyRow {
  std::size_t n = 0;
  std::size_t M = 0;
  double levy_hat = 0.0;
  double levy_err = 0.0;
  double envelope_ratio = 0.0;  ///< levy_hat * sqrt(n) / log(n)
  double zol_bound = 0.0;
  double seconds = 0.0;
};

struct RateStudyReport {
  double intensity = 0.0;
  bool exact_limit_cdf = false;
  std::vector<RateStudyRow> rows;
  std::vector<EmpiricalLaw> samples;  ///< S_n samples, one per row
};

struct RateStudyOptions {
  std::size_t bootstrap = 100;
  std::size_t reference_size = 1000000;
  std::size_t zol_points = 2001;
  double levy_tol = 1e-6;
  unsigned workers = 1;
  std::optional<double> intensity;  ///< defaults to p(0) from the invariant density solver
};

namespace detail {

template <class Limit>
double bootstrap_levy_sd(const EmpiricalLaw& sample, const Limit& limit, std::size_t B,
                         std::uint64_t seed, std::size_t n, double tol, unsigned workers) {
  if (B < 2) return 0.0;
  const auto values = sample.values();
  std::vector<double> dists(B);
  parallel_for(B, workers, [&](std::size_t b) {
    auto rng = make_stream(seed, {stream_tag::bootstrap, n, b});
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    std::vector<double> resample(values.size());
    for (auto& v : resample) v = values[pick(rng)];
    dists[b] = levy_distance(EmpiricalLaw(std::move(resample)), limit, tol);
  });
  double mean = 0.0;
  for (double d : dists) mean += d;
  mean /= static_cast<double>(B);
  double var = 0.0;
  for (double d : dists) var += (d - mean) * (d - mean);
  return std::sqrt(var / static_cast<double>(B - 1));
}

}  // namespace detail

/// Zolotarev bound of an S_n sample against the compound Poisson limit at T = sqrt(n).
inline double sample_zolotarev_bound(const EmpiricalLaw& sample, const CompoundPoissonLaw& limit,
                                     double T, std::size_t points = 2001) {
  const auto grid = zolotarev_grid(T, points);
  const auto emp = empirical_cf(sample, grid);
  std::vector<double> diff(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k)
    diff[k] = std::abs(emp.values[k] - limit.char_fn(grid[k]));
  return zolotarev_bound(grid, diff, T);
}

/**
 * For each n: M stationary replications of S_n with window [0, 1/n], the Levy
 * distance to the compound Poisson limit (exact Poisson CDF for unit jumps,
 * otherwise a reference sample of the limit), a bootstrap error bar, the
 * envelope ratio and the Zolotarev bound at T = sqrt(n).
 */
inline RateStudyReport rate_study(const ArModel& model, std::span<const std::size_t> n_grid,
                                  std::size_t M, std::uint64_t seed,
                                  const RateStudyOptions& options = {}) {
  detail::require(std::is_sorted(n_grid.begin(), n_grid.end()) &&
                      std::adjacent_find(n_grid.begin(), n_grid.end()) == n_grid.end(),
                  "rate_study: n grid must be strictly increasing");
  detail::require(M >= 1000, "rate_study needs M >= 1000");
  RateStudyReport report;
  if (n_grid.empty()) return report;
  detail::require(n_grid.front() >= 3, "rate_study needs n >= 3");

  const JumpLaw f = model.jump_law();
  report.intensity = options.intensity ? *options.intensity
                                       : solve_invariant_density(model).at(0.0);
  const CompoundPoissonLaw limit(report.intensity, f);
  report.exact_limit_cdf = f.is_unit();

  std::optional<EmpiricalLaw> reference;
  if (!report.exact_limit_cdf) {
    std::vector<double> draws(options.reference_size);
    const std::size_t chunk = 10000;
    const std::size_t chunks = (draws.size() + chunk - 1) / chunk;
    parallel_for(chunks, options.workers, [&](std::size_t c) {
      auto rng = make_stream(seed, {stream_tag::reference, c});
      for (std::size_t i = c * chunk; i < std::min(draws.size(), (c + 1) * chunk); ++i)
        draws[i] = limit.sample(rng);
    });
    reference.emplace(std::move(draws));
  }
  const PoissonCdf poisson(report.intensity);
  const std::size_t burn = default_burn_in(model.contraction());

  for (std::size_t n : n_grid) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<double> sums(M);
    parallel_for(M, options.workers, [&](std::size_t r) {
      auto rng = make_stream(seed, {stream_tag::rows, n, r});
      sums[r] = simulate_row_sum(model, f, n, burn, Window::unit(n), rng);
    });
    EmpiricalLaw sample(std::move(sums));

    RateStudyRow row;
    row.n = n;
    row.M = M;
    if (report.exact_limit_cdf) {
      row.levy_hat = levy_distance(sample, poisson, options.levy_tol);
      row.levy_err = detail::bootstrap_levy_sd(sample, poisson, options.bootstrap, seed, n,
                                               options.levy_tol, options.workers);
    } else {
      row.levy_hat = levy_distance(sample, *reference, options.levy_tol);
      row.levy_err = detail::bootstrap_levy_sd(sample, *reference, options.bootstrap, seed, n,
                                               options.levy_tol, options.workers);
    }
    const double dn = static_cast<double>(n);
    row.envelope_ratio = row.levy_hat * std::sqrt(dn) / std::log(dn);
    row.zol_bound = sample_zolotarev_bound(sample, limit, std::sqrt(dn), options.zol_points);
    row.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.rows.push_back(row);
    report.samples.push_back(std::move(sample));
  }
  return report;
}

}  // namespace cplab

#endif  // CPLAB_METRICS_HPP
