#ifndef CPLAB_TRIANGULAR_ARRAY_HPP
#define CPLAB_TRIANGULAR_ARRAY_HPP

// Rows Y_{n,j} = f(eps_j) 1{X_{j-1} in B} built from simulated chains, and a
// Monte Carlo audit of the moment and characteristic-function conditions
// that drive the compound Poisson limit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "cplab/distributions.hpp"
#include "cplab/markov.hpp"
#include "cplab/parallel.hpp"
#include "cplab/random.hpp"

namespace cplab {

/// Window B; closed [lo, hi] or half-open [lo, hi).
struct Window {
  double lo = 0.0;
  double hi = 0.0;
  bool closed = true;

  static Window closed_interval(double lo, double hi) { return {lo, hi, true}; }
  static Window half_open(double lo, double hi) { return {lo, hi, false}; }
  /// B_n = [0, 1/n].
  static Window unit(std::size_t n) { return {0.0, 1.0 / static_cast<double>(n), true}; }

  bool contains(double x) const noexcept { return x >= lo && (closed ? x <= hi : x < hi); }
};

struct TriangularArrayRow {
  std::size_t n = 0;
  std::vector<double> values;  ///< Y_{n,1..n}
  std::size_t nonzero = 0;     ///< #{j : Y_{n,j} != 0}
  std::size_t window_hits = 0; ///< #{j : X_{j-1} in B}
  double sum = 0.0;
  Window window;
};

inline TriangularArrayRow build_row(const Path& path, const JumpLaw& f, Window window) {
  detail::require(path.x.size() == path.eps.size() + 1, "build_row: path must carry n+1 states");
  TriangularArrayRow row;
  row.n = path.n();
  row.window = window;
  row.values.assign(row.n, 0.0);
  for (std::size_t j = 1; j <= row.n; ++j) {
    if (!window.contains(path.x[j - 1])) continue;
    ++row.window_hits;
    const double y = f(path.eps[j - 1]);
    row.values[j - 1] = y;
    if (y != 0.0) ++row.nonzero;
  }
  for (double y : row.values) row.sum += y;
  return row;
}

/// S_n for a freshly simulated stationary row; no row storage.
template <MarkovModel M, class G>
double simulate_row_sum(const M& model, const JumpLaw& f, std::size_t n, std::size_t burn_in,
                        Window window, G& rng) {
  const auto& q = model.innovation();
  double x = 0.0;
  for (std::size_t k = 0; k < burn_in; ++k) x = model.drift_at(x) + q.sample(rng);
  double sum = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    const double e = q.sample(rng);
    if (window.contains(x)) sum += f(e);
    x = model.drift_at(x) + e;
  }
  return sum;
}

struct AuditEntry {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t hits = 0;
  double bound = 0.0;           ///< assumption-level bound (C1, C1^2 or C2)
  double model_bound = 0.0; ///< tighter bound from the AR-model inequality chain
  bool violation = false;
};

struct AssumptionAudit {
  std::size_t n = 0;
  std::size_t replications = 0;  ///< simulated positions j (rows * n)
  std::size_t ell = 2;
  double intensity = 0.0;        ///< mu = p(0)
  double q_sup = 0.0;
  double abs_mean_f = 0.0;
  double c_prime = 0.0;
  double C1 = 0.0;
  double C2 = 0.0;
  std::vector<AuditEntry> entries;

  bool any_violation() const noexcept {
    return std::any_of(entries.begin(), entries.end(), [](const auto& e) { return e.violation; });
  }
  const AuditEntry& entry(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return e;
    throw InvalidParameter("no audit entry named " + name);
  }
};

/// sup over z, x in [0, 1/n] of |f(z - h(x))| on a 101 x 101 grid.
inline double mark_window_sup(const ArModel& model, std::size_t n) {
  const auto f = model.jump_law();
  const double top = 1.0 / static_cast<double>(n);
  double sup = 0.0;
  for (int a = 0; a <= 100; ++a)
    for (int b = 0; b <= 100; ++b) {
      const double z = top * a / 100.0;
      const double x = top * b / 100.0;
      sup = std::max(sup, std::abs(f(z - model.drift_at(x))));
    }
  return sup;
}

/// Smallest replication count giving >= 100 expected window hits.
inline std::size_t audit_min_replications(const ArModel& model, std::size_t n) {
  return static_cast<std::size_t>(
      std::ceil(100.0 * static_cast<double>(n) / model.innovation().sup_norm()));
}

/**
 * Monte Carlo audit of the moment and CF-derivative conditions for
 * Y_{n,j} = f(eps_j) 1{X_{j-1} in [0, 1/n]}.
 * `replications` positions are simulated as stationary rows of length n; standard
 * errors treat rows as independent replicates. A term is flagged when its
 * estimate exceeds the bound by more than three standard errors.
 *
 * The CF-derivative defect uses phi_{n,j}'(t) = P(X in B_n) phi'(t), which holds
 * exactly for this construction.
 */
inline AssumptionAudit audit_assumptions(const ArModel& model, std::size_t n,
                                         std::size_t replications, std::span<const double> t_grid,
                                         std::uint64_t seed, std::size_t ell = 2,
                                         unsigned workers = 1) {
  detail::require(n >= 2, "audit needs n >= 2");
  detail::require(ell >= 1, "audit needs ell >= 1");
  detail::require(!t_grid.empty(), "audit needs a nonempty t grid");
  const std::size_t needed = audit_min_replications(model, n);
  if (replications < needed)
    throw InvalidParameter("audit needs at least " + std::to_string(needed) +
                           " replications for 100 expected window hits");

  const auto f = model.jump_law();
  const auto& q = model.innovation();
  const auto density = solve_invariant_density(model);

  AssumptionAudit audit;
  audit.n = n;
  audit.ell = ell;
  audit.intensity = density.at(0.0);
  audit.q_sup = q.sup_norm();
  audit.abs_mean_f = f.abs_mean();
  audit.c_prime = mark_window_sup(model, n);
  audit.C1 = std::max(audit.q_sup * audit.q_sup, 1.0) *
             std::max({audit.abs_mean_f, audit.c_prime, 1.0});
  audit.C2 = q.lipschitz();

  const std::size_t rows = (replications + n - 1) / n;
  audit.replications = rows * n;
  const std::size_t max_lag = std::max<std::size_t>(ell, 2);
  const Window window = Window::unit(n);
  const std::size_t burn = default_burn_in(model.contraction());

  // Per-row sums: [0] window hits, [1] #Y != 0, [2] sum |Y|, then for each lag
  // k: sum |Y_{j-k}| 1{Y_j != 0} and sum 1{Y_{j-k} != 0} |Y_j|, then pair hits.
  const std::size_t width = 3 + 3 * max_lag;
  std::vector<double> per_row(rows * width, 0.0);
  parallel_for(rows, workers, [&](std::size_t r) {
    auto rng = make_stream(seed, {stream_tag::audit, n, r});
    const Path path = simulate_chain(model, n, burn, rng);
    const auto row = build_row(path, f, window);
    double* acc = per_row.data() + r * width;
    acc[0] = static_cast<double>(row.window_hits);
    for (std::size_t j = 0; j < n; ++j) {
      const double y = row.values[j];
      if (y != 0.0) acc[1] += 1.0;
      acc[2] += std::abs(y);
      for (std::size_t k = 1; k <= max_lag && k <= j; ++k) {
        const double prev = row.values[j - k];
        if (y != 0.0) acc[3 + 3 * (k - 1)] += std::abs(prev);
        if (prev != 0.0) acc[4 + 3 * (k - 1)] += std::abs(y);
        if (prev != 0.0 && y != 0.0) acc[5 + 3 * (k - 1)] += 1.0;
      }
    }
  });

  // Column mean per position and its standard error across rows.
  auto column = [&](std::size_t c, double positions_per_row) {
    double mean = 0.0;
    for (std::size_t r = 0; r < rows; ++r) mean += per_row[r * width + c] / positions_per_row;
    mean /= static_cast<double>(rows);
    double var = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = per_row[r * width + c] / positions_per_row - mean;
      var += d * d;
    }
    const double se =
        rows > 1 ? std::sqrt(var / static_cast<double>(rows - 1) / static_cast<double>(rows)) : 0.0;
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) total += per_row[r * width + c];
    return std::tuple{mean, se, static_cast<std::size_t>(total)};
  };

  const double dn = static_cast<double>(n);
  const auto [hit_rate, hit_se, hits] = column(0, dn);
  if (hits == 0)
    throw InsufficientHits("the window [0, 1/n] was never visited; increase replications");

  auto add = [&](std::string name, double scale, std::size_t col, double positions,
                 double bound, double model_bound) {
    const auto [mean, se, count] = column(col, positions);
    AuditEntry e{std::move(name), scale * mean, scale * se, count, bound, model_bound, false};
    e.violation = e.estimate > e.bound + 3.0 * e.std_error;
    audit.entries.push_back(std::move(e));
  };
  const double qs = audit.q_sup;
  const double C1 = audit.C1;
  add("n*P(Y!=0)", dn, 1, dn, C1, qs);
  add("n*E|Y|", dn, 2, dn, C1, audit.abs_mean_f * qs);
  for (std::size_t k = 1; k <= max_lag; ++k) {
    const double positions = dn - static_cast<double>(k);
    const std::string lag = std::to_string(k);
    // i = j - 1: the adjacent pair uses C' in the first ordering.
    const double first = k == 1 ? qs * qs * audit.c_prime : audit.abs_mean_f * qs * qs;
    add("n^2*E|Y_{j-" + lag + "}|1{Y_j!=0}", dn * dn, 3 + 3 * (k - 1), positions, C1 * C1, first);
    add("n^2*E1{Y_{j-" + lag + "}!=0}|Y_j|", dn * dn, 4 + 3 * (k - 1), positions, C1 * C1,
        audit.abs_mean_f * qs * qs);
  }

  double dphi_sup = 0.0;
  for (double t : t_grid) dphi_sup = std::max(dphi_sup, std::abs(f.char_fn_derivative(t)));
  AuditEntry cf{"n^2*sup_t|dphi_nj-mu/n*dphi|",
                dn * dn * std::abs(hit_rate - audit.intensity / dn) * dphi_sup,
                dn * dn * hit_se * dphi_sup,
                hits,
                audit.C2,
                audit.C2,
                false};
  cf.violation = cf.estimate > cf.bound + 3.0 * cf.std_error;
  audit.entries.push_back(std::move(cf));
  return audit;
}

}  // namespace cplab

#endif  // CPLAB_TRIANGULAR_ARRAY_HPP
