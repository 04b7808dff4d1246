#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cplab/threshold.hpp"

using namespace cplab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const auto kGauss = InnovationDensity::gaussian(1.0);
const Interval kSpace{-1.0, 1.0};

TarModel tar(double theta0 = 0.5) { return TarModel(0.5, -0.5, theta0, kSpace, kGauss); }

Path tar_path(const TarModel& model, std::size_t n, std::uint64_t seed, std::uint64_t r) {
  auto rng = make_stream(seed, {stream_tag::paths, n, r});
  return simulate_chain(model, n, rng);
}

double pure_regime_loglik(const Path& p, double rho) {
  double s = 0.0;
  for (std::size_t j = 1; j <= p.n(); ++j) s += kGauss.log_pdf(p.x[j] - rho * p.x[j - 1]);
  return s;
}

}  // namespace

TEST_CASE("log likelihood", "[threshold]") {
  const auto model = tar();
  const auto p = tar_path(model, 300, 1, 0);
  SECTION("threshold above every state uses the lower regime throughout") {
    double top = 0.0;
    for (double v : p.x) top = std::max(top, v);
    const auto wide = TarModel(0.5, -0.5, 0.5, Interval{-1.0, top + 2.0}, kGauss);
    CHECK_THAT(log_likelihood(p.x, wide, top + 1.0), WithinRel(pure_regime_loglik(p, -0.5), 1e-13));
  }
  SECTION("equal regimes make the likelihood flat in theta") {
    const TarModel flat(0.3, 0.3, 0.0, kSpace, kGauss, Identifiability::allow_degenerate);
    const double ref = log_likelihood(p.x, flat, 0.0);
    auto rng = make_stream(2, {1});
    std::uniform_real_distribution<double> u(-0.99, 0.99);
    for (int k = 0; k < 10; ++k) CHECK(log_likelihood(p.x, flat, u(rng)) == ref);
  }
  SECTION("true threshold gives a finite value") {
    const double v = log_likelihood(p.x, model, 0.5);
    CHECK(std::isfinite(v));
    CHECK(std::exp(v / 300.0) > 0.0);
  }
}

TEST_CASE("log Z_n", "[threshold]") {
  const auto model = tar();
  const auto p = tar_path(model, 500, 3, 0);
  CHECK(log_Zn(p, model, 0.5, 0.0) == 0.0);
  CHECK_THROWS_AS(log_Zn(p, model, 0.5, 300.0), OutOfParameterSpace);
  // A window with no states in it.
  std::vector<double> xs(p.x.begin(), p.x.end());
  std::sort(xs.begin(), xs.end() - 1);
  double gap_lo = 0.5, best = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i)
    if (xs[i] > 0.3 && xs[i + 1] < 0.9 && xs[i + 1] - xs[i] > best)
      best = xs[i + 1] - xs[i], gap_lo = xs[i];
  const double theta_gap = gap_lo + 0.25 * best;
  CHECK(log_Zn(p, model.with_threshold(theta_gap), theta_gap, 0.4 * best * 500.0) == 0.0);
}

TEST_CASE("log Z_n equals the likelihood difference", "[threshold][property]") {
  for (std::uint64_t r = 0; r < 30; ++r) {
    const double theta0 = -0.6 + 0.04 * static_cast<double>(r);
    if (std::abs(theta0) < 1e-9) continue;
    const auto model = tar(theta0);
    const auto p = tar_path(model, 500, 5, r);
    const double base = log_likelihood(p.x, model, theta0);
    for (double u : {-150.0, -40.0, -7.5, -0.3, 0.2, 3.0, 33.0, 180.0}) {
      const double shifted = theta0 + u / 500.0;
      if (!kSpace.contains_open(shifted)) continue;
      CHECK_THAT(log_Zn(p, model, theta0, u), WithinAbs(log_likelihood(p.x, model, shifted) - base, 1e-9));
    }
  }
}

TEST_CASE("priors", "[threshold]") {
  const auto tg = Prior::truncated_gaussian(0.3, 0.4, kSpace);
  const double total =
      detail::panel_integral([&](double t) { return tg.density(t); }, -1.0, 1.0, 0.1, {});
  CHECK_THAT(total, WithinAbs(1.0, 1e-12));
  CHECK_THAT(tg.mass(-1.0, 1.0), WithinAbs(1.0, 1e-14));
  CHECK_THAT(tg.mass(-0.2, 0.7),
             WithinAbs(detail::panel_integral([&](double t) { return tg.density(t); }, -0.2, 0.7, 0.1, {}),
                       1e-12));
  CHECK_THAT(tg.first_moment(-0.2, 0.7),
             WithinAbs(detail::panel_integral([&](double t) { return t * tg.density(t); }, -0.2, 0.7,
                                              0.1, {}),
                       1e-12));
  const auto far = Prior::truncated_gaussian(9.0, 0.5, kSpace);  // deep tail stays accurate
  CHECK(far.mean() > 0.8);
  CHECK(far.mean() < 1.0);
  CHECK(Prior::uniform(kSpace).mean() == 0.0);
}

TEST_CASE("Bayes estimator trivial cases", "[threshold]") {
  SECTION("flat likelihood returns the prior mean") {
    const TarModel flat(0.3, 0.3, 0.2, Interval{-1.0, 2.0}, kGauss, Identifiability::allow_degenerate);
    auto rng = make_stream(7, {1});
    const auto p = simulate_chain(flat, 200, rng);
    CHECK_THAT(bayes_estimate(p.x, flat, Prior::uniform(Interval{-1.0, 2.0})).theta,
               WithinAbs(0.5, 1e-12));
  }
  SECTION("no state inside the interval returns the prior mean") {
    const Interval high{50.0, 51.0};
    const TarModel model(0.5, -0.5, 50.5, high, kGauss);
    const auto p = tar_path(tar(), 200, 8, 0);
    const auto prior = Prior::truncated_gaussian(50.2, 0.3, high);
    const auto est = bayes_estimate(p.x, model, prior);
    CHECK(est.breakpoints == 0);
    CHECK_THAT(est.theta, WithinAbs(prior.mean(), 1e-12));
  }
  SECTION("prior support must be the parameter interval") {
    const auto p = tar_path(tar(), 100, 8, 1);
    CHECK_THROWS_AS(bayes_estimate(p.x, tar(), Prior::uniform(Interval{-2.0, 1.0})), InvalidParameter);
  }
  SECTION("log offsets leave the estimate unchanged") {
    const auto p = tar_path(tar(), 300, 8, 2);
    const auto a = bayes_estimate(p.x, tar(), Prior::uniform(kSpace));
    const auto b = bayes_estimate(p.x, tar(), Prior::uniform(kSpace), -1e5);
    CHECK_THAT(a.theta, WithinAbs(b.theta, 1e-9));  // log L ~ -1e5 carries ~1e-11 ulp
    CHECK_THAT(b.log_evidence - a.log_evidence, WithinAbs(-1e5, 1e-6));
  }
}

TEST_CASE("exact piecewise Bayes agrees with grid quadrature", "[threshold]") {
  // The midpoint rule is exact for theta * const, so the grid error comes only
  // from cells holding a likelihood jump and is O(h) with h = 2 / nodes.
  const auto model = tar();
  for (std::uint64_t r = 0; r < 3; ++r) {
    const auto p = tar_path(model, 500, 11, r);
    for (const auto& prior : {Prior::uniform(kSpace), Prior::truncated_gaussian(0.2, 0.5, kSpace)}) {
      const auto exact = bayes_estimate(p.x, model, prior);
      const auto grid = bayes_estimate_grid(p.x, model, prior, 100000);
      CHECK_THAT(exact.theta, WithinAbs(grid.theta, 2e-5));
      CHECK_THAT(exact.log_evidence, WithinAbs(grid.log_evidence, 1e-3));
    }
  }
  SECTION("short path with a fine grid") {
    const auto p = tar_path(model, 20, 11, 7);
    const auto exact = bayes_estimate(p.x, model, Prior::uniform(kSpace));
    const auto grid = bayes_estimate_grid(p.x, model, Prior::uniform(kSpace), 2000000);
    CHECK_THAT(exact.theta, WithinAbs(grid.theta, 1e-6));
  }
}

TEST_CASE("likelihood ratio processes", "[threshold]") {
  SECTION("finite-n process matches log Z_n") {
    const auto model = tar();
    const auto p = tar_path(model, 500, 13, 0);
    const auto proc = finite_ratio_process(p, model, 0.5, 100.0);
    for (double u = -99.5; u < 100.0; u += 0.37)
      CHECK_THAT(proc.value(u), WithinAbs(log_Zn(p, model, 0.5, u), 1e-9));
  }
  SECTION("no arrivals gives Z = 1 and a zero draw") {
    const auto proc = detail::assemble_process(LikelihoodRatioProcess::Kind::limit, {}, {}, -5.0, 5.0);
    CHECK(proc.value(-3.0) == 0.0);
    CHECK(proc.value(4.0) == 0.0);
    CHECK(limit_estimator_draw(proc) == 0.0);
  }
  SECTION("a vanishing negative side moves the draw to U/2") {
    const double U = 8.0;
    const std::vector<detail::Jump> neg{{-1e-12, std::log(1e-14)}};
    const auto proc = detail::assemble_process(LikelihoodRatioProcess::Kind::limit, {}, neg, -U, U);
    CHECK(proc.value(-1.0) == std::log(1e-14));
    CHECK_THAT(limit_estimator_draw(proc), WithinAbs(U / 2.0, 1e-9));
  }
  SECTION("limit arrivals and marks") {
    const double intensity = 0.4, U = 25.0, delta = 1.0;
    const std::size_t M = 10000;
    double jumps = 0.0, jumps_sq = 0.0, marks = 0.0, marks_sq = 0.0, count = 0.0;
    for (std::size_t r = 0; r < M; ++r) {
      auto plus = make_stream(17, {stream_tag::limit_plus, r});
      auto minus = make_stream(17, {stream_tag::limit_minus, r});
      const auto proc = sample_limit_process(delta, kGauss, intensity, U, plus, minus);
      double positive = 0.0;
      for (std::size_t k = 0; k + 1 < proc.edges.size(); ++k)
        if (proc.edges[k] > 0.0) {
          positive += 1.0;
          const double mark = proc.log_values[k] - proc.log_values[k - 1];
          marks += mark;
          marks_sq += mark * mark;
          count += 1.0;
        }
      jumps += positive;
      jumps_sq += positive * positive;
    }
    const double mean_jumps = jumps / M;
    const double sd_jumps = std::sqrt(jumps_sq / M - mean_jumps * mean_jumps);
    CHECK(std::abs(mean_jumps - intensity * U) <= 3.0 * sd_jumps / std::sqrt(double(M)));
    const double mean_mark = marks / count;
    const double sd_mark = std::sqrt(marks_sq / count - mean_mark * mean_mark);
    CHECK(mean_mark + 3.0 * sd_mark / std::sqrt(count) < 0.0);
    CHECK(std::abs(mean_mark + 0.5) <= 3.0 * sd_mark / std::sqrt(count));
  }
  SECTION("doubling U_max barely moves the limit law") {
    const double intensity = 0.35, delta = 0.5;
    const double kl = -mean_log_ratio(kGauss, delta);
    CHECK_THAT(kl, WithinAbs(0.125, 1e-10));
    const double U = default_u_max(intensity, kl, kl);
    const auto a = limit_estimator_sample(delta, kGauss, intensity, U, 10000, 19);
    const auto b = limit_estimator_sample(delta, kGauss, intensity, 2.0 * U, 10000, 19);
    CHECK(levy_distance(EmpiricalLaw(a), EmpiricalLaw(b)) < 1e-3);
  }
}

TEST_CASE("estimator asymptotics study interface", "[threshold]") {
  const TarModel flat(0.5, 0.5, 0.0, kSpace, kGauss, Identifiability::allow_degenerate);
  CHECK_THROWS_AS(estimator_asymptotics_study(flat, 100, 10, Prior::uniform(kSpace), 1),
                  UnidentifiableModel);
  const auto rep = estimator_asymptotics_study(tar(), 200, 1, Prior::uniform(kSpace), 1);
  CHECK(rep.scaled_errors.size() == 1);
  CHECK(rep.limit_draws.size() == 1);
  CHECK(rep.levy_distance >= 0.0);
  CHECK(rep.levy_distance <= 1.0);
  AsymptoticsOptions o;
  o.workers = 3;
  const auto a = estimator_asymptotics_study(tar(), 200, 40, Prior::uniform(kSpace), 2);
  const auto b = estimator_asymptotics_study(tar(), 200, 40, Prior::uniform(kSpace), 2, o);
  CHECK(a.scaled_errors == b.scaled_errors);
  CHECK(a.limit_draws == b.limit_draws);
}
