// Poisson limit of window counts for a Gaussian AR(1) chain.
//
// Counts visits of X_{j-1} to [0, 1/n] over a row of length n and compares the
// law of the count with Poisson(p(0)) as n grows.

#include <cstdio>
#include <vector>

#include "cplab/cplab.hpp"

int main() {
  using namespace cplab;
  const ArModel model(Drift::linear(0.5), InnovationDensity(Family::gaussian, 1.0));
  const auto density = solve_invariant_density(model);
  std::printf("p(0) = %.6f  (closed form %.6f)\n", density.at(0.0), 0.345494);

  const std::vector<std::size_t> grid{100, 1000};
  RateStudyOptions options;
  options.bootstrap = 20;
  const auto report = rate_study(model, grid, 2000, 7, options);
  for (const auto& row : report.rows)
    std::printf("n=%5zu  levy=%.4f +- %.4f  smoothing bound=%.4f\n", row.n, row.levy_hat,
                row.levy_err, row.zol_bound);

  const TarModel tar(0.5, -0.5, 0.5, Interval{-1.0, 1.0}, InnovationDensity(Family::gaussian, 1.0));
  auto rng = make_stream(7, {stream_tag::paths, 1000, 0});
  const auto path = simulate_chain(tar, 1000, rng);
  const auto est = bayes_estimate(path.x, tar, Prior::uniform(tar.theta_range()));
  std::printf("TAR threshold 0.5, Bayes estimate from n=1000: %.5f\n", est.theta);
  return 0;
}
