#ifndef CPLAB_MARKOV_HPP
#define CPLAB_MARKOV_HPP

// Additive-noise Markov chains X_j = h(X_{j-1}) + eps_j and their threshold
// (two-regime) variant, stationary path simulation, the invariant density as
// the fixed point of the transfer operator, and a mixing diagnostic.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cplab/distributions.hpp"
#include "cplab/errors.hpp"
#include "cplab/parallel.hpp"
#include "cplab/random.hpp"

namespace cplab {

/// Certificate for |h(x)| <= r |x| whenever |x| >= C, with r in (0, 1).
struct ContractionCertificate {
  double r = 0.5;
  double C = 0.0;
};

/// Drift function h. Supported shapes: zero, linear rho*x and clipped-linear
/// rho*clamp(x, -c, c).
class Drift {
 public:
  enum class Kind { zero, linear, clipped_linear };

  static Drift zero() { return Drift(Kind::zero, 0.0, 0.0); }
  static Drift linear(double rho) {
    detail::require(std::abs(rho) < 1.0, "linear drift needs |rho| < 1");
    return Drift(rho == 0.0 ? Kind::zero : Kind::linear, rho, 0.0);
  }
  static Drift clipped_linear(double rho, double clip) {
    detail::require(std::isfinite(rho), "clipped drift slope must be finite");
    detail::require(clip > 0.0, "clipped drift needs a positive clip level");
    return Drift(Kind::clipped_linear, rho, clip);
  }

  double operator()(double x) const noexcept {
    switch (kind_) {
      case Kind::zero: return 0.0;
      case Kind::linear: return slope_ * x;
      case Kind::clipped_linear: return slope_ * std::clamp(x, -clip_, clip_);
    }
    return 0.0;
  }

  Kind kind() const noexcept { return kind_; }
  double slope() const noexcept { return slope_; }
  double clip() const noexcept { return clip_; }

  ContractionCertificate certificate() const noexcept {
    switch (kind_) {
      case Kind::zero: return {0.5, 0.0};
      case Kind::linear: return {std::abs(slope_), 0.0};
      case Kind::clipped_linear: return {0.5, 2.0 * std::abs(slope_) * clip_};
    }
    return {};
  }

 private:
  Drift(Kind kind, double slope, double clip) : kind_(kind), slope_(slope), clip_(clip) {}

  Kind kind_;
  double slope_;
  double clip_;
};

/// X_j = h(X_{j-1}) + eps_j, carrying the mark transform f used to build rows.
class ArModel {
 public:
  ArModel(Drift drift, InnovationDensity innovation,
          MarkTransform mark = MarkTransform::constant(1.0))
      : drift_(drift), innovation_(innovation), mark_(mark) {}

  double drift_at(double x) const noexcept { return drift_(x); }
  const Drift& drift() const noexcept { return drift_; }
  const InnovationDensity& innovation() const noexcept { return innovation_; }
  const MarkTransform& mark() const noexcept { return mark_; }
  JumpLaw jump_law() const { return JumpLaw(mark_, innovation_); }
  double contraction() const noexcept { return drift_.certificate().r; }

 private:
  Drift drift_;
  InnovationDensity innovation_;
  MarkTransform mark_;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains_open(double x) const noexcept { return x > lo && x < hi; }
  double width() const noexcept { return hi - lo; }
};

enum class Identifiability { require, allow_degenerate };

/**
 * Threshold autoregression with linear regimes:
 * X_j = rho_+ X_{j-1} 1{X_{j-1} >= theta} + rho_- X_{j-1} 1{X_{j-1} < theta} + eps_j.
 */
class TarModel {
 public:
  TarModel(double rho_plus, double rho_minus, double theta, Interval theta_range,
           InnovationDensity innovation, Identifiability check = Identifiability::require)
      : upper_(Drift::linear(rho_plus)),
        lower_(Drift::linear(rho_minus)),
        theta_(theta),
        range_(theta_range),
        innovation_(innovation) {
    detail::require(range_.lo < range_.hi, "threshold range must be a nonempty interval");
    if (!range_.contains_open(theta))
      throw OutOfParameterSpace("threshold " + std::to_string(theta) + " outside (" +
                                std::to_string(range_.lo) + ", " + std::to_string(range_.hi) +
                                ")");
    if (check == Identifiability::require && delta(theta) == 0.0)
      throw UnidentifiableModel("delta(theta) = g+(theta) - g-(theta) is zero; the threshold is "
                                "not identifiable");
  }

  double upper(double x) const noexcept { return upper_(x); }
  double lower(double x) const noexcept { return lower_(x); }
  double delta(double x) const noexcept { return upper_(x) - lower_(x); }
  double rho_plus() const noexcept { return upper_.slope(); }
  double rho_minus() const noexcept { return lower_.slope(); }

  /// Drift under threshold `theta` (the upper regime includes X == theta).
  double drift_at(double x, double theta) const noexcept {
    return x >= theta ? upper_(x) : lower_(x);
  }
  double drift_at(double x) const noexcept { return drift_at(x, theta_); }

  double theta() const noexcept { return theta_; }
  const Interval& theta_range() const noexcept { return range_; }
  const InnovationDensity& innovation() const noexcept { return innovation_; }
  bool identifiable() const noexcept { return delta(theta_) != 0.0; }
  double contraction() const noexcept {
    return std::max({upper_.certificate().r, lower_.certificate().r});
  }

  TarModel with_threshold(double theta) const {
    return TarModel(rho_plus(), rho_minus(), theta, range_, innovation_,
                    Identifiability::allow_degenerate);
  }

 private:
  Drift upper_;
  Drift lower_;
  double theta_;
  Interval range_;
  InnovationDensity innovation_;
};

template <class M>
concept MarkovModel = requires(const M& m, double x) {
  { m.drift_at(x) } -> std::convertible_to<double>;
  { m.innovation() } -> std::convertible_to<const InnovationDensity&>;
  { m.contraction() } -> std::convertible_to<double>;
};

/// Default burn-in 10 * ceil(1 / (1 - r)) + 100.
inline std::size_t default_burn_in(double contraction) {
  return 10 * static_cast<std::size_t>(std::ceil(1.0 / (1.0 - contraction))) + 100;
}

/// States X_0..X_n and the innovations eps_1..eps_n (eps[j-1] drives x[j]).
struct Path {
  std::vector<double> x;
  std::vector<double> eps;

  std::size_t n() const noexcept { return eps.size(); }
};

template <MarkovModel M, class G>
Path simulate_chain(const M& model, std::size_t n, std::size_t burn_in, G& rng,
                    double start = 0.0) {
  detail::require(n >= 1, "simulate_chain: n must be at least 1");
  const auto& q = model.innovation();
  double x = start;
  for (std::size_t k = 0; k < burn_in; ++k) x = model.drift_at(x) + q.sample(rng);
  Path path;
  path.x.resize(n + 1);
  path.eps.resize(n);
  path.x[0] = x;
  for (std::size_t j = 1; j <= n; ++j) {
    const double e = q.sample(rng);
    path.eps[j - 1] = e;
    path.x[j] = model.drift_at(path.x[j - 1]) + e;
  }
  return path;
}

template <MarkovModel M, class G>
Path simulate_chain(const M& model, std::size_t n, G& rng) {
  return simulate_chain(model, n, default_burn_in(model.contraction()), rng);
}

struct GridSpec {
  double x_max = 0.0;  ///< 0 selects 10 sigma / (1 - r)
  std::size_t points = 4001;
};

/// Invariant density on a uniform grid with trapezoid weights.
class InvariantDensity {
 public:
  InvariantDensity() = default;
  InvariantDensity(std::vector<double> grid, std::vector<double> values,
                   std::vector<double> weights, std::size_t iterations, double residual,
                   double max_mass_defect)
      : grid_(std::move(grid)),
        values_(std::move(values)),
        weights_(std::move(weights)),
        iterations_(iterations),
        residual_(residual),
        max_mass_defect_(max_mass_defect) {}

  std::span<const double> grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }
  /// Largest |mass - 1| of an operator application before renormalization.
  double max_mass_defect() const noexcept { return max_mass_defect_; }

  double step() const noexcept { return grid_[1] - grid_[0]; }

  /// Piecewise-linear interpolation; zero outside the grid.
  double at(double x) const noexcept {
    if (x < grid_.front() || x > grid_.back()) return 0.0;
    const double pos = (x - grid_.front()) / step();
    const auto i = std::min(static_cast<std::size_t>(pos), grid_.size() - 2);
    const double w = pos - static_cast<double>(i);
    return (1.0 - w) * values_[i] + w * values_[i + 1];
  }

  double total_mass() const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) m += weights_[i] * values_[i];
    return m;
  }

  double sup() const noexcept { return *std::max_element(values_.begin(), values_.end()); }

 private:
  std::vector<double> grid_;
  std::vector<double> values_;
  std::vector<double> weights_;
  std::size_t iterations_ = 0;
  double residual_ = 0.0;
  double max_mass_defect_ = 0.0;
};

/**
 * Fixed-point iteration of the transfer operator p -> int q(x - h(y)) p(y) dy,
 * discretized with the trapezoid rule and started from p = q. Each sweep
 * renormalizes to unit mass and checks positivity. Stops once the sup-norm
 * change between successive normalized iterates is at most `tol`.
 */
template <MarkovModel M>
InvariantDensity solve_invariant_density(const M& model, GridSpec spec = {}, double tol = 1e-12,
                                         std::size_t max_iter = 10000) {
  const auto& q = model.innovation();
  const double r = model.contraction();
  const double x_max = spec.x_max > 0.0 ? spec.x_max : 10.0 * q.scale() / (1.0 - r);
  detail::require(spec.points >= 3, "invariant density grid needs at least 3 points");
  detail::require(tol > 0.0, "solver tolerance must be positive");
  const std::size_t G = spec.points;
  const double h = 2.0 * x_max / static_cast<double>(G - 1);

  std::vector<double> x(G), w(G, h);
  for (std::size_t i = 0; i < G; ++i) x[i] = -x_max + static_cast<double>(i) * h;
  w.front() = w.back() = 0.5 * h;

  // kernel(i, j) = w_j q(x_i - h(x_j))
  std::vector<double> drift(G);
  for (std::size_t j = 0; j < G; ++j) drift[j] = model.drift_at(x[j]);
  std::vector<double> kernel(G * G);
  for (std::size_t i = 0; i < G; ++i) {
    double* row = kernel.data() + i * G;
    for (std::size_t j = 0; j < G; ++j) row[j] = w[j] * q.pdf(x[i] - drift[j]);
  }

  auto normalize = [&](std::vector<double>& p) {
    double mass = 0.0;
    for (std::size_t i = 0; i < G; ++i) mass += w[i] * p[i];
    for (auto& v : p) v /= mass;
    return mass;
  };

  std::vector<double> p(G), next(G);
  for (std::size_t i = 0; i < G; ++i) p[i] = q.pdf(x[i]);
  normalize(p);

  double residual = std::numeric_limits<double>::infinity();
  double max_defect = 0.0;
  std::size_t it = 0;
  while (it < max_iter) {
    ++it;
    for (std::size_t i = 0; i < G; ++i) {
      const double* row = kernel.data() + i * G;
      double acc = 0.0;
      for (std::size_t j = 0; j < G; ++j) acc += row[j] * p[j];
      next[i] = acc;
    }
    const double mass = normalize(next);
    max_defect = std::max(max_defect, std::abs(mass - 1.0));
    // Far tails may underflow to zero; negative or non-finite values may not.
    if (!std::all_of(next.begin(), next.end(), [](double v) { return v >= 0.0 && std::isfinite(v); }))
      throw NumericalError("transfer operator iteration lost positivity");
    residual = 0.0;
    for (std::size_t i = 0; i < G; ++i) residual = std::max(residual, std::abs(next[i] - p[i]));
    p.swap(next);
    if (residual <= tol) break;
  }
  if (residual > tol)
    throw NoConvergence("invariant density did not converge in " + std::to_string(max_iter) +
                            " iterations (residual " + std::to_string(residual) + ")",
                        residual);
  return InvariantDensity(std::move(x), std::move(p), std::move(w), it, residual, max_defect);
}

/// One row of the mixing table.
struct MixingRow {
  std::size_t lag = 0;
  double alpha_hat = 0.0;
  double std_error = 0.0;  ///< largest binomial standard error among the compared pairs
};

/// Heuristic mixing diagnostic: a table of alpha-hat(k) and a least-squares
/// fit log alpha-hat(k) = log R + k log rho. Not an estimator of the true
/// mixing coefficient.
struct MixingDiagnostic {
  std::vector<MixingRow> rows;
  double R_hat = std::numeric_limits<double>::quiet_NaN();
  double rho_hat = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline double quantile_sorted(std::span<const double> sorted, double p) {
  const auto k = static_cast<std::size_t>(p * static_cast<double>(sorted.size() - 1));
  return sorted[k];
}

/// Least squares y = c0 + c1 x; returns {c0, c1}.
inline std::pair<double, double> fit_line(std::span<const double> xs, std::span<const double> ys) {
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) return {sy / n, 0.0};
  const double slope = (n * sxy - sx * sy) / denom;
  return {(sy - slope * sx) / n, slope};
}

}  // namespace detail

/**
 * For each lag k: sup over test functions g and conditioning cells A of
 * |E[g(X_{i+k}) | X_i in A] - E g(X)|, estimated from M independent
 * stationary replications. The cells are the four quartile bins of the pooled
 * X_i sample; the test functions are indicators of the dyadic (halves,
 * quarters, eighths) quantile bins of the pooled X_{i+k} sample.
 */
template <MarkovModel M>
MixingDiagnostic mixing_diagnostic(const M& model, std::span<const std::size_t> lags,
                                   std::size_t replications, std::uint64_t seed,
                                   unsigned workers = 1) {
  detail::require(replications >= 1000, "mixing_diagnostic needs at least 1000 replications");
  detail::require(!lags.empty(), "mixing_diagnostic needs at least one lag");
  const std::size_t max_lag = *std::max_element(lags.begin(), lags.end());
  detail::require(max_lag >= 1, "lags must be positive");
  const std::size_t burn = default_burn_in(model.contraction());

  std::vector<std::vector<double>> states(replications);
  parallel_for(replications, workers, [&](std::size_t r) {
    auto rng = make_stream(seed, {stream_tag::mixing, r});
    states[r] = simulate_chain(model, max_lag, burn, rng).x;
  });

  std::vector<double> origin(replications);
  for (std::size_t r = 0; r < replications; ++r) origin[r] = states[r][0];
  std::vector<double> sorted_origin = origin;
  std::sort(sorted_origin.begin(), sorted_origin.end());
  const double cell_cuts[3] = {detail::quantile_sorted(sorted_origin, 0.25),
                               detail::quantile_sorted(sorted_origin, 0.5),
                               detail::quantile_sorted(sorted_origin, 0.75)};
  auto cell_of = [&](double v) {
    return static_cast<std::size_t>(std::upper_bound(std::begin(cell_cuts), std::end(cell_cuts), v) -
                                    std::begin(cell_cuts));
  };
  std::size_t occupancy[4] = {0, 0, 0, 0};
  for (double v : origin) ++occupancy[cell_of(v)];
  for (auto c : occupancy)
    if (c < 50)
      throw InsufficientOccupancy("mixing diagnostic cell received only " + std::to_string(c) +
                                  " hits (need 50)");

  MixingDiagnostic out;
  for (std::size_t lag : lags) {
    std::vector<double> ahead(replications);
    for (std::size_t r = 0; r < replications; ++r) ahead[r] = states[r][lag];
    std::vector<double> sorted_ahead = ahead;
    std::sort(sorted_ahead.begin(), sorted_ahead.end());

    MixingRow row{lag, 0.0, 0.0};
    for (int level = 1; level <= 3; ++level) {
      const int bins = 1 << level;
      for (int b = 0; b < bins; ++b) {
        const double lo = b == 0 ? -std::numeric_limits<double>::infinity()
                                 : detail::quantile_sorted(sorted_ahead, double(b) / bins);
        const double hi = b + 1 == bins ? std::numeric_limits<double>::infinity()
                                        : detail::quantile_sorted(sorted_ahead, double(b + 1) / bins);
        auto g = [&](double v) { return v > lo && v <= hi ? 1.0 : 0.0; };
        double overall = 0.0;
        double in_cell[4] = {0, 0, 0, 0};
        for (std::size_t r = 0; r < replications; ++r) {
          const double gv = g(ahead[r]);
          overall += gv;
          in_cell[cell_of(origin[r])] += gv;
        }
        overall /= static_cast<double>(replications);
        for (int c = 0; c < 4; ++c) {
          const double cond = in_cell[c] / static_cast<double>(occupancy[c]);
          row.alpha_hat = std::max(row.alpha_hat, std::abs(cond - overall));
          row.std_error = std::max(
              row.std_error, std::sqrt(overall * (1.0 - overall) / static_cast<double>(occupancy[c])));
        }
      }
    }
    out.rows.push_back(row);
  }

  std::vector<double> ks, logs;
  for (const auto& row : out.rows) {
    if (row.alpha_hat > 0.0) {
      ks.push_back(static_cast<double>(row.lag));
      logs.push_back(std::log(row.alpha_hat));
    }
  }
  if (ks.size() >= 2) {
    const auto [c0, c1] = detail::fit_line(ks, logs);
    out.R_hat = std::exp(c0);
    out.rho_hat = std::exp(c1);
  }
  return out;
}

}  // namespace cplab

#endif  // CPLAB_MARKOV_HPP
