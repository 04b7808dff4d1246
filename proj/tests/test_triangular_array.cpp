#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cplab/triangular_array.hpp"

using namespace cplab;
using Catch::Matchers::WithinAbs;

namespace {
const auto kGauss = InnovationDensity::gaussian(1.0);
const std::vector<double> kTGrid = {-5.0, -2.0, -0.5, 0.5, 1.0, 3.0, 7.0};
}  // namespace

TEST_CASE("windows", "[triangular_array]") {
  const auto closed = Window::unit(10);
  CHECK(closed.contains(0.0));
  CHECK(closed.contains(0.1));
  CHECK_FALSE(closed.contains(0.1000001));
  const auto open = Window::half_open(0.0, 0.1);
  CHECK_FALSE(open.contains(0.1));
  CHECK(open.contains(0.0));
}

TEST_CASE("rows from paths", "[triangular_array]") {
  const JumpLaw one(MarkTransform::constant(), kGauss);
  Path path;
  path.x = {5.0, 6.0, 7.0, 8.0};
  path.eps = {0.1, 0.2, 0.3};
  SECTION("never entering the window gives an empty row") {
    const auto row = build_row(path, one, Window::unit(3));
    CHECK(row.sum == 0.0);
    CHECK(row.nonzero == 0);
    CHECK(row.window_hits == 0);
  }
  SECTION("unit marks count window visits of the previous state") {
    const auto row = build_row(path, one, Window::closed_interval(5.5, 7.0));
    CHECK(row.window_hits == 2);
    CHECK(row.sum == 2.0);
    CHECK(row.values == std::vector<double>{0.0, 1.0, 1.0});
  }
  SECTION("affine marks use the innovation of the same step") {
    const JumpLaw affine(MarkTransform::affine(2.0, 1.0), kGauss);
    const auto row = build_row(path, affine, Window::closed_interval(4.0, 5.0));
    CHECK(row.values[0] == 2.0 * 0.1 + 1.0);
    CHECK(row.sum == row.values[0]);
  }
  SECTION("f = 1 gives S_n equal to the visit count on a random path") {
    const ArModel model(Drift::linear(0.5), kGauss);
    auto rng = make_stream(3, {1});
    const auto p = simulate_chain(model, 5000, rng);
    const auto row = build_row(p, one, Window::closed_interval(-0.1, 0.2));
    CHECK(row.sum == static_cast<double>(row.window_hits));
    CHECK(row.nonzero == row.window_hits);
  }
}

TEST_CASE("streaming row sums match stored rows", "[triangular_array]") {
  const ArModel model(Drift::linear(0.5), kGauss, MarkTransform::affine(1.0, 0.5));
  const auto f = model.jump_law();
  const auto window = Window::closed_interval(-0.2, 0.3);
  auto a = make_stream(8, {1});
  auto b = make_stream(8, {1});
  const double streamed = simulate_row_sum(model, f, 400, 120, window, a);
  const auto row = build_row(simulate_chain(model, 400, 120, b), f, window);
  CHECK_THAT(streamed, WithinAbs(row.sum, 1e-12));
}

TEST_CASE("mean window count for independent innovations", "[triangular_array]") {
  const ArModel model(Drift::zero(), kGauss);
  const auto f = model.jump_law();
  const std::size_t n = 10000, M = 10000;
  double s = 0.0, ss = 0.0;
  for (std::size_t r = 0; r < M; ++r) {
    auto rng = make_stream(12, {stream_tag::rows, n, r});
    const double v = simulate_row_sum(model, f, n, 1, Window::unit(n), rng);  // X_0 = 0 would sit in the window
    s += v;
    ss += v * v;
  }
  const double mean = s / M;
  const double sd = std::sqrt(ss / M - mean * mean);
  const double exact = n * (kGauss.cdf(1.0 / n) - kGauss.cdf(0.0));
  CHECK(std::abs(mean - exact) <= 3.0 * sd / std::sqrt(double(M)));
  CHECK_THAT(exact, WithinAbs(0.39894, 1e-4));
}

TEST_CASE("audit of the independent chain", "[triangular_array]") {
  const ArModel model(Drift::zero(), kGauss);
  const std::size_t n = 100;
  const auto M = audit_min_replications(model, n);
  const auto audit = audit_assumptions(model, n, M, kTGrid, 4);
  CHECK_FALSE(audit.any_violation());
  const auto& p = audit.entry("n*P(Y!=0)");
  const double exact = n * (kGauss.cdf(1.0 / n) - kGauss.cdf(0.0));
  CHECK(std::abs(p.estimate - exact) <= 3.0 * p.std_error);
  CHECK(p.estimate <= kGauss.sup_norm() + 3.0 * p.std_error);
  CHECK(audit.C1 == 1.0);
  CHECK(audit.C2 == kGauss.lipschitz());
}

TEST_CASE("null mark audits to zero", "[triangular_array]") {
  const ArModel model(Drift::linear(0.5), kGauss, MarkTransform::constant(0.0));
  const auto audit = audit_assumptions(model, 100, audit_min_replications(model, 100), kTGrid, 4);
  CHECK_FALSE(audit.any_violation());
  for (const auto& e : audit.entries) {
    INFO(e.name);
    CHECK(e.estimate == 0.0);
  }
}

TEST_CASE("adjacent pair term obeys the AR-model bound", "[triangular_array]") {
  const ArModel model(Drift::linear(0.5), kGauss);
  for (std::size_t n : {100, 1000}) {
    const auto audit = audit_assumptions(model, n, audit_min_replications(model, n), kTGrid, 6);
    CHECK(audit.c_prime == 1.0);
    const auto& e = audit.entry("n^2*E|Y_{j-1}|1{Y_j!=0}");
    const double q = kGauss.sup_norm();
    CHECK(e.estimate <= q * q * audit.c_prime + 3.0 * e.std_error);
    CHECK_FALSE(audit.any_violation());
  }
}

TEST_CASE("audit preconditions and determinism", "[triangular_array]") {
  const ArModel model(Drift::linear(0.5), kGauss);
  const auto M = audit_min_replications(model, 100);
  CHECK_THROWS_AS(audit_assumptions(model, 100, M - 1, kTGrid, 1), InvalidParameter);
  const auto a = audit_assumptions(model, 100, M, kTGrid, 1, 2, 1);
  const auto b = audit_assumptions(model, 100, M, kTGrid, 1, 2, 3);
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].estimate == b.entries[i].estimate);
    CHECK(a.entries[i].std_error == b.entries[i].std_error);
  }
  CHECK(a.entries.size() == 2 + 2 * 2 + 1);
}
