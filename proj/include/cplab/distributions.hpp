#ifndef CPLAB_DISTRIBUTIONS_HPP
#define CPLAB_DISTRIBUTIONS_HPP

// Innovation densities, jump laws built from marks of innovations, and the
// compound Poisson law with its exact sampler and characteristic function.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cplab/errors.hpp"
#include "cplab/random.hpp"

namespace cplab {

using Complex = std::complex<double>;

enum class Family { gaussian, laplace, logistic };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::laplace: return "laplace";
    case Family::logistic: return "logistic";
  }
  return "?";
}

inline Family parse_family(std::string_view s) {
  if (s == "gaussian") return Family::gaussian;
  if (s == "laplace") return Family::laplace;
  if (s == "logistic") return Family::logistic;
  throw InvalidParameter("unknown innovation family '" + std::string(s) + "'");
}

/**
 * Symmetric, positive, bounded, Lipschitz innovation density q with scale
 * parameter sigma. For the gaussian family sigma is the standard deviation;
 * for laplace and logistic it is the usual scale parameter.
 */
class InnovationDensity {
 public:
  InnovationDensity(Family family, double scale) : family_(family), scale_(scale) {
    detail::require(std::isfinite(scale) && scale > 0.0, "innovation scale must be positive");
  }

  static InnovationDensity gaussian(double sigma = 1.0) { return {Family::gaussian, sigma}; }
  static InnovationDensity laplace(double scale = 1.0) { return {Family::laplace, scale}; }
  static InnovationDensity logistic(double scale = 1.0) { return {Family::logistic, scale}; }

  Family family() const noexcept { return family_; }
  double scale() const noexcept { return scale_; }

  double log_pdf(double x) const noexcept {
    const double z = std::abs(x) / scale_;
    switch (family_) {
      case Family::gaussian:
        return -0.5 * z * z - std::log(scale_) - 0.5 * std::log(2.0 * std::numbers::pi);
      case Family::laplace:
        return -z - std::log(2.0 * scale_);
      case Family::logistic:
        return -z - 2.0 * std::log1p(std::exp(-z)) - std::log(scale_);
    }
    return 0.0;
  }

  double pdf(double x) const noexcept { return std::exp(log_pdf(x)); }

  double cdf(double x) const noexcept {
    const double z = x / scale_;
    switch (family_) {
      case Family::gaussian: return 0.5 * std::erfc(-z / std::numbers::sqrt2);
      case Family::laplace: return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
      case Family::logistic: return 1.0 / (1.0 + std::exp(-z));
    }
    return 0.0;
  }

  template <class G>
  double sample(G& rng) const {
    switch (family_) {
      case Family::gaussian: {
        std::normal_distribution<double> normal(0.0, scale_);
        return normal(rng);
      }
      case Family::laplace: {
        const double v = open_unit(rng) - 0.5;
        const double magnitude = -scale_ * std::log1p(-2.0 * std::abs(v));
        return v < 0.0 ? -magnitude : magnitude;
      }
      case Family::logistic: {
        const double u = open_unit(rng);
        return scale_ * std::log(u / (1.0 - u));
      }
    }
    return 0.0;
  }

  /// sup_x q(x).
  double sup_norm() const noexcept {
    switch (family_) {
      case Family::gaussian: return 1.0 / (scale_ * std::sqrt(2.0 * std::numbers::pi));
      case Family::laplace: return 0.5 / scale_;
      case Family::logistic: return 0.25 / scale_;
    }
    return 0.0;
  }

  /// Smallest L with |q(x) - q(y)| <= L |x - y|.
  double lipschitz() const noexcept {
    const double s2 = scale_ * scale_;
    switch (family_) {
      case Family::gaussian: return 1.0 / (s2 * std::sqrt(2.0 * std::numbers::pi * std::numbers::e));
      case Family::laplace: return 0.5 / s2;
      // max |q'| is attained where tanh^2(x / 2s) = 1/3.
      case Family::logistic: return 1.0 / (6.0 * std::sqrt(3.0) * s2);
    }
    return 0.0;
  }

  /// E|eps|.
  double abs_moment() const noexcept {
    switch (family_) {
      case Family::gaussian: return scale_ * std::sqrt(2.0 / std::numbers::pi);
      case Family::laplace: return scale_;
      case Family::logistic: return 2.0 * scale_ * std::numbers::ln2;
    }
    return 0.0;
  }

  double variance() const noexcept {
    const double s2 = scale_ * scale_;
    switch (family_) {
      case Family::gaussian: return s2;
      case Family::laplace: return 2.0 * s2;
      case Family::logistic: return s2 * std::numbers::pi * std::numbers::pi / 3.0;
    }
    return 0.0;
  }

  /// E exp(i t eps); real because every family is symmetric.
  double char_fn(double t) const noexcept {
    const double st = scale_ * t;
    switch (family_) {
      case Family::gaussian: return std::exp(-0.5 * st * st);
      case Family::laplace: return 1.0 / (1.0 + st * st);
      case Family::logistic: {
        const double z = std::numbers::pi * std::abs(st);
        if (z < 1e-8) return 1.0;
        if (z > 700.0) return 0.0;
        return z / std::sinh(z);
      }
    }
    return 0.0;
  }

  /// Half-width of the integration range used for expectations under q.
  /// Covers mass up to ~1e-17 for all three families.
  double truncation() const noexcept { return 40.0 * scale_; }

  friend bool operator==(const InnovationDensity&, const InnovationDensity&) = default;

 private:
  Family family_;
  double scale_;
};

namespace detail {

/// Integral of g over [lo, hi] split at `cuts` and at unit-scale panels,
/// each panel integrated by adaptive Gauss-Kronrod. Throws when the summed
/// error estimate exceeds `abs_tol`.
template <class F>
double panel_integral(F&& g, double lo, double hi, double panel_width,
                      std::vector<double> cuts, double abs_tol = 1e-10) {
  using boost::math::quadrature::gauss_kronrod;
  const auto panels = static_cast<int>(std::ceil((hi - lo) / panel_width));
  for (int k = 0; k <= panels; ++k) cuts.push_back(std::min(hi, lo + k * panel_width));
  cuts.push_back(lo);
  cuts.push_back(hi);
  std::erase_if(cuts, [&](double c) { return !(c >= lo && c <= hi); });
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  double total = 0.0;
  double error = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    double panel_error = 0.0;
    total += gauss_kronrod<double, 31>::integrate(g, cuts[k], cuts[k + 1], 12, 1e-13,
                                                  &panel_error);
    error += panel_error;
  }
  if (!(error <= abs_tol) || !std::isfinite(total)) {
    throw QuadratureError("adaptive quadrature did not reach tolerance (error estimate " +
                          std::to_string(error) + ")");
  }
  return total;
}

}  // namespace detail

/// The mark transform f applied to an innovation draw.
struct MarkTransform {
  enum class Kind { constant, affine, log_ratio };

  Kind kind = Kind::constant;
  double a = 0.0;      // affine slope, or the constant value
  double b = 0.0;      // affine intercept
  double shift = 0.0;  // log-ratio shift delta

  static MarkTransform constant(double value = 1.0) { return {Kind::constant, value, 0.0, 0.0}; }
  static MarkTransform affine(double slope, double intercept) {
    return {Kind::affine, slope, intercept, 0.0};
  }
  /// eps -> log q(eps + delta) / q(eps).
  static MarkTransform log_ratio(double delta) { return {Kind::log_ratio, 0.0, 0.0, delta}; }

  double operator()(double eps, const InnovationDensity& q) const noexcept {
    switch (kind) {
      case Kind::constant: return a;
      case Kind::affine: return a * eps + b;
      case Kind::log_ratio: return q.log_pdf(eps + shift) - q.log_pdf(eps);
    }
    return 0.0;
  }

  bool is_unit() const noexcept { return kind == Kind::constant && a == 1.0; }

  friend bool operator==(const MarkTransform&, const MarkTransform&) = default;
};

/// Law of f(eps) for eps ~ q.
class JumpLaw {
 public:
  JumpLaw(MarkTransform mark, InnovationDensity innovation)
      : mark_(mark), innovation_(innovation) {}

  const MarkTransform& mark() const noexcept { return mark_; }
  const InnovationDensity& innovation() const noexcept { return innovation_; }
  bool is_unit() const noexcept { return mark_.is_unit(); }

  double operator()(double eps) const noexcept { return mark_(eps, innovation_); }

  template <class G>
  double sample(G& rng) const {
    if (mark_.kind == MarkTransform::Kind::constant) return mark_.a;
    return (*this)(innovation_.sample(rng));
  }

  /// E g(eps) by panel quadrature over [-40 sigma, 40 sigma].
  template <class F>
  double expectation(F&& g) const {
    const double w = innovation_.truncation();
    auto integrand = [&](double x) { return g(x) * innovation_.pdf(x); };
    return detail::panel_integral(integrand, -w, w, innovation_.scale(), kink_points());
  }

  double mean() const {
    switch (mark_.kind) {
      case MarkTransform::Kind::constant: return mark_.a;
      case MarkTransform::Kind::affine: return mark_.b;
      case MarkTransform::Kind::log_ratio: return expectation([&](double x) { return (*this)(x); });
    }
    return 0.0;
  }

  /// E|f(eps)|.
  double abs_mean() const {
    if (mark_.kind == MarkTransform::Kind::constant) return std::abs(mark_.a);
    if (mark_.kind == MarkTransform::Kind::affine && mark_.b == 0.0)
      return std::abs(mark_.a) * innovation_.abs_moment();
    return expectation([&](double x) { return std::abs((*this)(x)); });
  }

  /// phi(t) = E exp(i t f(eps)); closed form for constant and affine marks.
  Complex char_fn(double t) const {
    if (t == 0.0) return {1.0, 0.0};
    switch (mark_.kind) {
      case MarkTransform::Kind::constant: return std::polar(1.0, t * mark_.a);
      case MarkTransform::Kind::affine:
        return std::polar(1.0, t * mark_.b) * innovation_.char_fn(mark_.a * t);
      case MarkTransform::Kind::log_ratio: break;
    }
    const double re = expectation([&](double x) { return std::cos(t * (*this)(x)); });
    const double im = expectation([&](double x) { return std::sin(t * (*this)(x)); });
    return {re, im};
  }

  /// d/dt phi(t) = E[i f(eps) exp(i t f(eps))].
  Complex char_fn_derivative(double t) const {
    if (mark_.kind == MarkTransform::Kind::constant)
      return Complex{0.0, mark_.a} * std::polar(1.0, t * mark_.a);
    const double re = expectation([&](double x) {
      const double f = (*this)(x);
      return -f * std::sin(t * f);
    });
    const double im = expectation([&](double x) {
      const double f = (*this)(x);
      return f * std::cos(t * f);
    });
    return {re, im};
  }

 private:
  std::vector<double> kink_points() const {
    std::vector<double> cuts{0.0};
    if (mark_.kind == MarkTransform::Kind::log_ratio) cuts.push_back(-mark_.shift);
    return cuts;
  }

  MarkTransform mark_;
  InnovationDensity innovation_;
};

/// A single compound Poisson draw with its jump count.
struct CompoundDraw {
  std::uint64_t jumps = 0;
  double value = 0.0;
};

/// Law of S = sum_{k <= N} f(eps_k), N ~ Poisson(mu).
class CompoundPoissonLaw {
 public:
  CompoundPoissonLaw(double intensity, JumpLaw jump) : mu_(intensity), jump_(std::move(jump)) {
    detail::require(std::isfinite(intensity) && intensity > 0.0,
                    "compound Poisson intensity must be positive");
  }

  double intensity() const noexcept { return mu_; }
  const JumpLaw& jump() const noexcept { return jump_; }

  template <class G>
  CompoundDraw draw(G& rng) const {
    std::poisson_distribution<std::uint64_t> count(mu_);
    CompoundDraw d;
    d.jumps = count(rng);
    for (std::uint64_t k = 0; k < d.jumps; ++k) d.value += jump_.sample(rng);
    return d;
  }

  template <class G>
  double sample(G& rng) const {
    return draw(rng).value;
  }

  /// psi(t) = exp(mu (phi(t) - 1)).
  Complex char_fn(double t) const {
    if (t == 0.0) return {1.0, 0.0};
    return std::exp(mu_ * (jump_.char_fn(t) - 1.0));
  }

 private:
  double mu_;
  JumpLaw jump_;
};

/// P(N <= x) for N ~ Poisson(mu), by multiplicative term recursion.
inline double poisson_cdf(double mu, double x) {
  detail::require(std::isfinite(mu) && mu > 0.0, "poisson_cdf: mu must be positive");
  if (x < 0.0) return 0.0;
  double term = std::exp(-mu);
  double sum = term;
  const double last = std::floor(x);
  for (double k = 0.0; k < last; k += 1.0) {
    term *= mu / (k + 1.0);
    sum += term;
    if (k > mu && term < 1e-18 * sum) break;
  }
  return std::min(sum, 1.0);
}

}  // namespace cplab

#endif  // CPLAB_DISTRIBUTIONS_HPP
