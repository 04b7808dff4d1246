#ifndef CPLAB_THRESHOLD_HPP
#define CPLAB_THRESHOLD_HPP

// Threshold estimation for linear TAR models: the exact log likelihood, the
// rescaled log likelihood ratio log Z_n(u), the Bayes estimator with exact
// piecewise-constant integration, the compound Poisson limit process
// log Z(u) and the ratio int u Z / int Z it induces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cplab/distributions.hpp"
#include "cplab/errors.hpp"
#include "cplab/markov.hpp"
#include "cplab/metrics.hpp"
#include "cplab/parallel.hpp"
#include "cplab/random.hpp"

namespace cplab {

/// sum_j log q(X_j - g(X_{j-1}; theta)) over a sample X_0..X_n.
inline double log_likelihood(std::span<const double> x, const TarModel& model, double theta) {
  detail::require(x.size() >= 2, "log_likelihood needs at least two observations");
  const auto& q = model.innovation();
  double total = 0.0;
  for (std::size_t j = 1; j < x.size(); ++j)
    total += q.log_pdf(x[j] - model.drift_at(x[j - 1], theta));
  return total;
}

/**
 * log Z_n(u) = log L_n(theta0 + u/n) - log L_n(theta0), evaluated as the
 * windowed sum over observations that switch regime:
 *   u >= 0: X_{j-1} in [theta0, theta0 + u/n), term log q(eps_j + delta(X_{j-1})) / q(eps_j)
 *   u <  0: X_{j-1} in [theta0 + u/n, theta0), term log q(eps_j - delta(X_{j-1})) / q(eps_j)
 * where eps_j are the innovations under theta0.
 */
inline double log_Zn(const Path& path, const TarModel& model, double theta0, double u) {
  const auto n = static_cast<double>(path.n());
  detail::require(path.n() >= 1, "log_Zn needs a nonempty path");
  const double shifted = theta0 + u / n;
  if (!model.theta_range().contains_open(shifted))
    throw OutOfParameterSpace("theta0 + u/n = " + std::to_string(shifted) +
                              " leaves the parameter interval");
  if (u == 0.0) return 0.0;
  const auto& q = model.innovation();
  const double lo = u > 0.0 ? theta0 : shifted;
  const double hi = u > 0.0 ? shifted : theta0;
  const double sign = u > 0.0 ? 1.0 : -1.0;
  double total = 0.0;
  for (std::size_t j = 1; j <= path.n(); ++j) {
    const double prev = path.x[j - 1];
    if (prev < lo || prev >= hi) continue;
    const double e = path.eps[j - 1];
    total += q.log_pdf(e + sign * model.delta(prev)) - q.log_pdf(e);
  }
  return total;
}

/// Prior density on the parameter interval: uniform or truncated gaussian.
class Prior {
 public:
  enum class Kind { uniform, truncated_gaussian };

  static Prior uniform(Interval support) { return Prior(Kind::uniform, support, 0.0, 1.0); }
  static Prior truncated_gaussian(double mean, double sd, Interval support) {
    detail::require(sd > 0.0, "truncated gaussian prior needs sd > 0");
    return Prior(Kind::truncated_gaussian, support, mean, sd);
  }

  Kind kind() const noexcept { return kind_; }
  const Interval& support() const noexcept { return support_; }

  double density(double theta) const noexcept {
    if (!support_.contains_open(theta)) return 0.0;
    if (kind_ == Kind::uniform) return 1.0 / support_.width();
    const double z = (theta - mean_) / sd_;
    return std::exp(-0.5 * z * z) / (sd_ * std::sqrt(2.0 * std::numbers::pi) * norm_);
  }

  /// int_lo^hi pi(theta) d theta for lo, hi inside the support.
  double mass(double lo, double hi) const noexcept {
    if (kind_ == Kind::uniform) return (hi - lo) / support_.width();
    return gauss_mass(lo, hi) / norm_;
  }

  /// int_lo^hi theta pi(theta) d theta.
  double first_moment(double lo, double hi) const noexcept {
    if (kind_ == Kind::uniform) return 0.5 * (hi - lo) * (hi + lo) / support_.width();
    const double a = (lo - mean_) / sd_, b = (hi - mean_) / sd_;
    const double phi_a = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
    const double phi_b = std::exp(-0.5 * b * b) / std::sqrt(2.0 * std::numbers::pi);
    return (mean_ * gauss_mass(lo, hi) + sd_ * (phi_a - phi_b)) / norm_;
  }

  double mean() const noexcept { return first_moment(support_.lo, support_.hi); }

 private:
  Prior(Kind kind, Interval support, double mean, double sd)
      : kind_(kind), support_(support), mean_(mean), sd_(sd) {
    detail::require(support.lo < support.hi, "prior support must be a nonempty interval");
    norm_ = kind == Kind::uniform ? 1.0 : gauss_mass(support.lo, support.hi);
    detail::require(norm_ > 0.0, "truncated gaussian prior has no mass on its support");
  }

  /// Phi((hi - m)/s) - Phi((lo - m)/s), computed on the tail that keeps precision.
  double gauss_mass(double lo, double hi) const noexcept {
    const double a = (lo - mean_) / sd_ / std::numbers::sqrt2;
    const double b = (hi - mean_) / sd_ / std::numbers::sqrt2;
    if (a >= 0.0) return 0.5 * (std::erfc(a) - std::erfc(b));
    if (b <= 0.0) return 0.5 * (std::erfc(-b) - std::erfc(-a));
    return 0.5 * (std::erf(b) - std::erf(a));
  }

  Kind kind_;
  Interval support_;
  double mean_;
  double sd_;
  double norm_ = 1.0;
};

struct BayesEstimate {
  enum class Method { exact_piecewise, grid };

  double theta = 0.0;
  double log_evidence = 0.0;  ///< log int L_n pi
  Method method = Method::exact_piecewise;
  std::size_t breakpoints = 0;  ///< likelihood breakpoints inside the parameter interval
};

/**
 * Posterior mean int theta L pi / int L pi. theta -> L_n(theta) is a step
 * function whose jumps sit at the in-range sample values X_0..X_{n-1}; both
 * integrals are summed exactly over the constant pieces, in the log domain.
 * `log_offset` is added to every log-likelihood value.
 */
inline BayesEstimate bayes_estimate(std::span<const double> x, const TarModel& model,
                                    const Prior& prior, double log_offset = 0.0) {
  detail::require(x.size() >= 2, "bayes_estimate needs at least two observations");
  const Interval range = model.theta_range();
  detail::require(prior.support().lo == range.lo && prior.support().hi == range.hi,
                  "prior support must equal the parameter interval");
  const auto& q = model.innovation();

  // Indices j with X_{j-1} strictly inside the range, sorted by X_{j-1}.
  std::vector<std::size_t> inside;
  for (std::size_t j = 1; j < x.size(); ++j)
    if (range.contains_open(x[j - 1])) inside.push_back(j);
  std::sort(inside.begin(), inside.end(), [&](auto a, auto b) { return x[a - 1] < x[b - 1]; });

  std::vector<double> edges{range.lo};
  for (auto j : inside)
    if (x[j - 1] > edges.back()) edges.push_back(x[j - 1]);
  edges.push_back(range.hi);

  // log L on each piece: start from a direct evaluation on the first piece,
  // then move every observation at an edge from the upper to the lower regime.
  const std::size_t pieces = edges.size() - 1;
  std::vector<double> log_l(pieces);
  log_l[0] = log_likelihood(x, model, 0.5 * (edges[0] + edges[1])) + log_offset;
  std::size_t next = 0;
  for (std::size_t k = 1; k < pieces; ++k) {
    double level = log_l[k - 1];
    while (next < inside.size() && x[inside[next] - 1] <= edges[k]) {
      const std::size_t j = inside[next++];
      level += q.log_pdf(x[j] - model.lower(x[j - 1])) - q.log_pdf(x[j] - model.upper(x[j - 1]));
    }
    log_l[k] = level;
  }

  const double top = *std::max_element(log_l.begin(), log_l.end());
  double denom = 0.0, numer = 0.0;
  for (std::size_t k = 0; k < pieces; ++k) {
    const double w = std::exp(log_l[k] - top);
    denom += w * prior.mass(edges[k], edges[k + 1]);
    numer += w * prior.first_moment(edges[k], edges[k + 1]);
  }
  if (!(denom > 0.0) || !std::isfinite(denom) || !std::isfinite(numer))
    throw DegeneratePosterior("posterior normalization vanished or is not finite");

  BayesEstimate est;
  est.theta = std::clamp(numer / denom, range.lo, range.hi);
  est.log_evidence = top + std::log(denom);
  est.method = BayesEstimate::Method::exact_piecewise;
  est.breakpoints = inside.size();
  return est;
}

/// Midpoint-rule posterior mean on `nodes` equal cells of the parameter
/// interval, each node evaluated by a full likelihood pass. Reference only.
inline BayesEstimate bayes_estimate_grid(std::span<const double> x, const TarModel& model,
                                         const Prior& prior, std::size_t nodes = 100000) {
  detail::require(nodes >= 1, "grid quadrature needs at least one node");
  const Interval range = model.theta_range();
  const double h = range.width() / static_cast<double>(nodes);
  std::vector<double> theta(nodes), log_w(nodes);
  for (std::size_t k = 0; k < nodes; ++k) {
    theta[k] = range.lo + (static_cast<double>(k) + 0.5) * h;
    log_w[k] = log_likelihood(x, model, theta[k]) + std::log(prior.density(theta[k]));
  }
  const double top = *std::max_element(log_w.begin(), log_w.end());
  double denom = 0.0, numer = 0.0;
  for (std::size_t k = 0; k < nodes; ++k) {
    const double w = std::exp(log_w[k] - top);
    denom += w;
    numer += w * theta[k];
  }
  if (!(denom > 0.0)) throw DegeneratePosterior("grid posterior normalization vanished");
  BayesEstimate est;
  est.theta = numer / denom;
  est.log_evidence = top + std::log(denom * h);
  est.method = BayesEstimate::Method::grid;
  return est;
}

/// Piecewise-constant log Z on [edges.front(), edges.back()]; value log_values[k]
/// on (edges[k], edges[k+1]).
struct LikelihoodRatioProcess {
  enum class Kind { finite_n, limit };

  Kind kind = Kind::limit;
  std::vector<double> edges;
  std::vector<double> log_values;
  std::size_t jumps = 0;  ///< number of interior jump locations

  double value(double u) const {
    const auto it = std::upper_bound(edges.begin(), edges.end(), u);
    if (it == edges.begin()) return log_values.front();
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - edges.begin()) - 1,
                                         log_values.size() - 1);
    return log_values[k];
  }
  double u_max() const { return edges.back(); }
};

namespace detail {

struct Jump {
  double at;
  double mark;
};

/// Assembles the two-sided path from jump lists ordered away from the origin.
inline LikelihoodRatioProcess assemble_process(LikelihoodRatioProcess::Kind kind,
                                               const std::vector<Jump>& positive,
                                               const std::vector<Jump>& negative, double lo,
                                               double hi) {
  LikelihoodRatioProcess p;
  p.kind = kind;
  p.jumps = positive.size() + negative.size();
  // Negative side, from -U up to 0: the value at u includes all marks at
  // locations >= u, so start from the full sum and shed marks moving right.
  double level = 0.0;
  for (const auto& j : negative) level += j.mark;
  p.edges.push_back(lo);
  for (auto it = negative.rbegin(); it != negative.rend(); ++it) {
    p.log_values.push_back(level);
    p.edges.push_back(it->at);
    level -= it->mark;
  }
  level = 0.0;
  p.log_values.push_back(level);
  p.edges.push_back(0.0);
  p.log_values.push_back(level);
  for (const auto& j : positive) {
    p.edges.push_back(j.at);
    level += j.mark;
    p.log_values.push_back(level);
  }
  p.edges.push_back(hi);
  return p;
}

}  // namespace detail

/**
 * log Z_n(u) as a process on [-U, U] (clipped to the parameter interval):
 * jumps at u = n (X_{j-1} - theta0) with the regime-switch log ratios as marks.
 */
inline LikelihoodRatioProcess finite_ratio_process(const Path& path, const TarModel& model,
                                                   double theta0, double u_max) {
  detail::require(u_max > 0.0, "u_max must be positive");
  const double n = static_cast<double>(path.n());
  const Interval range = model.theta_range();
  const double hi = std::min(u_max, n * (range.hi - theta0));
  const double lo = std::max(-u_max, n * (range.lo - theta0));
  const auto& q = model.innovation();
  std::vector<detail::Jump> positive, negative;
  for (std::size_t j = 1; j <= path.n(); ++j) {
    const double prev = path.x[j - 1];
    const double at = n * (prev - theta0);
    const double e = path.eps[j - 1];
    if (at >= 0.0 && at < hi)
      positive.push_back({at, q.log_pdf(e + model.delta(prev)) - q.log_pdf(e)});
    else if (at < 0.0 && at > lo)
      negative.push_back({at, q.log_pdf(e - model.delta(prev)) - q.log_pdf(e)});
  }
  std::sort(positive.begin(), positive.end(), [](auto a, auto b) { return a.at < b.at; });
  std::sort(negative.begin(), negative.end(), [](auto a, auto b) { return a.at > b.at; });
  return detail::assemble_process(LikelihoodRatioProcess::Kind::finite_n, positive, negative, lo,
                                  hi);
}

/**
 * Draws log Z(u) on [-U, U]: two independent Poisson processes of rate
 * `intensity` (cumulative exponential gaps) with marks
 * log q(eps + delta)/q(eps) for u > 0 and log q(eps - delta)/q(eps) for u < 0.
 * Each side has its own stream, so enlarging U only appends arrivals.
 */
template <class G>
LikelihoodRatioProcess sample_limit_process(double delta, const InnovationDensity& q,
                                            double intensity, double u_max, G& rng_plus,
                                            G& rng_minus) {
  detail::require(intensity > 0.0, "limit process intensity must be positive");
  detail::require(u_max > 0.0, "limit process U_max must be positive");
  std::exponential_distribution<double> gap(intensity);
  auto arrivals = [&](G& rng, double sign) {
    std::vector<detail::Jump> out;
    for (double t = gap(rng); t <= u_max; t += gap(rng)) {
      const double e = q.sample(rng);
      out.push_back({sign * t, q.log_pdf(e + sign * delta) - q.log_pdf(e)});
    }
    return out;
  };
  const auto positive = arrivals(rng_plus, 1.0);
  const auto negative = arrivals(rng_minus, -1.0);
  return detail::assemble_process(LikelihoodRatioProcess::Kind::limit, positive, negative, -u_max,
                                  u_max);
}

/// int u Z(u) du / int Z(u) du over the piecewise-constant path.
inline double limit_estimator_draw(const LikelihoodRatioProcess& p) {
  const double top = *std::max_element(p.log_values.begin(), p.log_values.end());
  double numer = 0.0, denom = 0.0;
  for (std::size_t k = 0; k < p.log_values.size(); ++k) {
    const double a = p.edges[k], b = p.edges[k + 1];
    const double z = std::exp(p.log_values[k] - top);
    denom += z * (b - a);
    numer += z * 0.5 * (b - a) * (b + a);
  }
  return numer / denom;
}

/// E log q(eps + shift) / q(eps), by quadrature.
inline double mean_log_ratio(const InnovationDensity& q, double shift) {
  return JumpLaw(MarkTransform::log_ratio(shift), q).mean();
}

/// Default truncation 30 / (p(theta0) * min(KL+, KL-)).
inline double default_u_max(double intensity, double kl_plus, double kl_minus) {
  return 30.0 / (intensity * std::min(kl_plus, kl_minus));
}

struct AsymptoticsReport {
  std::size_t n = 0;
  std::size_t M = 0;
  std::uint64_t seed = 0;
  double intensity = 0.0;  ///< p(theta0; theta0)
  double kl_plus = 0.0;
  double kl_minus = 0.0;
  double u_max = 0.0;
  double levy_distance = 0.0;
  std::vector<double> scaled_errors;  ///< n (theta-tilde - theta0), sorted
  std::vector<double> limit_draws;    ///< sorted
};

struct AsymptoticsOptions {
  unsigned workers = 1;
  double u_max = 0.0;  ///< 0 selects default_u_max
  double levy_tol = 1e-6;
};

/**
 * M stationary TAR paths at the model's threshold theta0 give n(theta-tilde - theta0);
 * M independent draws of the limit ratio use intensity p(theta0; theta0) from the
 * transfer-operator solver run with the two-regime drift.
 */
inline AsymptoticsReport estimator_asymptotics_study(const TarModel& model, std::size_t n,
                                                     std::size_t M, const Prior& prior,
                                                     std::uint64_t seed,
                                                     const AsymptoticsOptions& options = {}) {
  if (!model.identifiable())
    throw UnidentifiableModel("estimator study needs delta(theta0) != 0");
  detail::require(n >= 2 && M >= 1, "estimator study needs n >= 2 and M >= 1");
  const double theta0 = model.theta();
  const auto& q = model.innovation();
  const double delta = model.delta(theta0);

  AsymptoticsReport report;
  report.n = n;
  report.M = M;
  report.seed = seed;
  report.intensity = solve_invariant_density(model).at(theta0);
  report.kl_plus = -mean_log_ratio(q, delta);
  report.kl_minus = -mean_log_ratio(q, -delta);
  report.u_max = options.u_max > 0.0
                     ? options.u_max
                     : default_u_max(report.intensity, report.kl_plus, report.kl_minus);

  const std::size_t burn = default_burn_in(model.contraction());
  report.scaled_errors.resize(M);
  report.limit_draws.resize(M);
  parallel_for(M, options.workers, [&](std::size_t r) {
    auto rng = make_stream(seed, {stream_tag::paths, n, r});
    const Path path = simulate_chain(model, n, burn, rng);
    const auto est = bayes_estimate(path.x, model, prior);
    report.scaled_errors[r] = static_cast<double>(n) * (est.theta - theta0);

    auto plus = make_stream(seed, {stream_tag::limit_plus, r});
    auto minus = make_stream(seed, {stream_tag::limit_minus, r});
    const auto process = sample_limit_process(delta, q, report.intensity, report.u_max, plus, minus);
    report.limit_draws[r] = limit_estimator_draw(process);
  });
  std::sort(report.scaled_errors.begin(), report.scaled_errors.end());
  std::sort(report.limit_draws.begin(), report.limit_draws.end());
  report.levy_distance = levy_distance(EmpiricalLaw(report.scaled_errors),
                                       EmpiricalLaw(report.limit_draws), options.levy_tol);
  return report;
}

/// M limit draws at a given truncation; streams depend only on (seed, r).
inline std::vector<double> limit_estimator_sample(double delta, const InnovationDensity& q,
                                                  double intensity, double u_max, std::size_t M,
                                                  std::uint64_t seed, unsigned workers = 1) {
  std::vector<double> draws(M);
  parallel_for(M, workers, [&](std::size_t r) {
    auto plus = make_stream(seed, {stream_tag::limit_plus, r});
    auto minus = make_stream(seed, {stream_tag::limit_minus, r});
    draws[r] = limit_estimator_draw(sample_limit_process(delta, q, intensity, u_max, plus, minus));
  });
  return draws;
}

}  // namespace cplab

#endif  // CPLAB_THRESHOLD_HPP
