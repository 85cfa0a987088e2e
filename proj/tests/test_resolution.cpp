#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "biaslens/error.hpp"
#include "biaslens/resolution.hpp"
#include "biaslens/rng.hpp"

using namespace biaslens;

namespace {

double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

std::vector<double> bimodal(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<double> s(n);
  for (auto& v : s) v = rng.uniform() < 0.6 ? 300.0 + 40.0 * rng.normal() : 900.0 + 120.0 * rng.normal();
  for (auto& v : s) v = std::max(v, 1.0);
  return s;
}

}  // namespace

TEST_CASE("resolution proxy is the midpoint") {
  CHECK(resolution_proxy(640, 480) == 560.0);
  CHECK(resolution_proxy(224, 224) == 224.0);
  CHECK(resolution_proxy(1, 3) == 2.0);
  CHECK(resolution_proxy(1, 2) == 1.5);
  CHECK(resolution_proxy(3, 1000) == resolution_proxy(1000, 3));
  CHECK_THROWS_AS(resolution_proxy(0, 10), DataError);
  CHECK_THROWS_AS(resolution_proxy(10, -1), DataError);
}

TEST_CASE("kde_fit: explicit bandwidth, fallback and errors") {
  CHECK(kde_fit({100.0}, 10.0).bandwidth == 10.0);
  CHECK(kde_fit({50.0, 50.0, 50.0}).bandwidth == kFallbackBandwidth);
  CHECK(kde_fit({50.0}).bandwidth == kFallbackBandwidth);
  CHECK_THROWS_AS(kde_fit({}), DataError);
  CHECK_THROWS_AS(kde_fit({1.0, -2.0}), DataError);
  CHECK_THROWS_AS(kde_fit({1.0}, 0.0), DataError);
}

TEST_CASE("Silverman bandwidth on a standard normal draw") {
  Rng rng(2024);
  std::vector<double> s(1000);
  for (auto& v : s) v = rng.normal();
  // hand evaluation of the rule on this draw
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= 1000.0;
  double ss = 0.0;
  for (double v : s) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / 999.0);
  auto sorted = s;
  std::sort(sorted.begin(), sorted.end());
  auto q = [&](double p) {
    const double pos = p * 999.0;
    const auto lo = static_cast<std::size_t>(pos);
    return sorted[lo] + (pos - lo) * (sorted[lo + 1] - sorted[lo]);
  };
  const double iqr = q(0.75) - q(0.25);
  const double expected = 0.9 * std::min(sd, iqr / 1.34) * std::pow(1000.0, -0.2);
  CHECK(silverman_bandwidth(s) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(silverman_bandwidth(s) == doctest::Approx(0.9 * std::pow(1000.0, -0.2)).epsilon(0.08));
}

TEST_CASE("Silverman falls back to sd when the IQR vanishes") {
  std::vector<double> s(20, 10.0);
  s.back() = 30.0;
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= 20.0;
  double ss = 0.0;
  for (double v : s) ss += (v - mean) * (v - mean);
  CHECK(silverman_bandwidth(s) == doctest::Approx(0.9 * std::sqrt(ss / 19.0) * std::pow(20.0, -0.2)));
}

TEST_CASE("kde_eval: single sample analytic value") {
  const auto p = kde_fit({100.0}, 10.0);
  const std::vector<double> at{100.0};
  CHECK(std::abs(kde_eval(p, at)[0] - 1.0 / (10.0 * std::sqrt(2.0 * std::numbers::pi))) <= 1e-9);
  CHECK(kde_eval(p, at)[0] == doctest::Approx(0.039894).epsilon(1e-5));
}

TEST_CASE("kde_eval matches a direct sum oracle") {
  const auto s = bimodal(3, 200);
  const auto p = kde_fit(s, 25.0);
  const auto grid = linear_grid(0.0, 1500.0, 301);
  const auto d = kde_eval(p, grid);
  for (std::size_t g = 0; g < grid.size(); g += 7) {
    double acc = 0.0;
    for (double v : s) acc += phi((grid[g] - v) / 25.0);
    CHECK(d[g] == doctest::Approx(acc / (200.0 * 25.0)).epsilon(1e-12));
  }
}

TEST_CASE("kde_eval: unit mass and non-negativity") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = kde_fit(bimodal(seed, 500));
    const std::vector<ResolutionProfile> one{p};
    const auto grid = covering_grid(one, 4096);
    const auto d = kde_eval(p, grid);
    CHECK(*std::min_element(d.begin(), d.end()) >= 0.0);
    CHECK(std::abs(trapezoid(grid, d) - 1.0) <= 1e-3);
  }
}

TEST_CASE("kde_eval: symmetric samples give a symmetric density") {
  const double c = 500.0;
  const auto p = kde_fit({c - 37.0, c + 37.0}, 15.0);
  const auto grid = linear_grid(c - 200.0, c + 200.0, 401);
  const auto d = kde_eval(p, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(d[i] == doctest::Approx(d[grid.size() - 1 - i]).epsilon(1e-12));
}

TEST_CASE("kde_eval: translation equivariance") {
  const auto s = bimodal(9, 150);
  const auto p = kde_fit(s);
  auto shifted = s;
  for (auto& v : shifted) v += 123.25;
  const auto q = kde_fit(shifted);
  CHECK(q.bandwidth == doctest::Approx(p.bandwidth).epsilon(1e-12));
  const auto grid = linear_grid(1.0, 1400.0, 200);
  auto grid2 = grid;
  for (auto& g : grid2) g += 123.25;
  const auto a = kde_eval(p, grid);
  const auto b = kde_eval(q, grid2);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-9));
}

TEST_CASE("overlap: identical, disjoint, and the two-Gaussian value") {
  const auto p = kde_fit(bimodal(1, 300));
  const std::vector<ResolutionProfile> pp{p, p};
  const auto grid = covering_grid(pp, 4096);
  CHECK(std::abs(overlap_coefficient(p, p, grid).coefficient - 1.0) <= 1e-3);

  const auto a = kde_fit({100.0}, 1.0);
  const auto b = kde_fit({112.0}, 1.0);
  const std::vector<ResolutionProfile> ab{a, b};
  const auto g2 = covering_grid(ab, 4096);
  CHECK(overlap_coefficient(a, b, g2).coefficient <= 1e-6);

  const auto u = kde_fit({100.0}, 1.0);
  const auto v = kde_fit({102.0}, 1.0);
  const std::vector<ResolutionProfile> uv{u, v};
  const auto g3 = covering_grid(uv, 4096);
  const double expected = std::erfc(1.0 / std::sqrt(2.0));  // 2 Phi(-1)
  CHECK(std::abs(overlap_coefficient(u, v, g3).coefficient - expected) <= 5e-3);
  CHECK(std::abs(expected - 0.3173) < 1e-4);
}

TEST_CASE("overlap: symmetric and decreasing with separation") {
  const auto p = kde_fit(bimodal(5, 200));
  double previous = 1.1;
  for (double shift : {0.0, 150.0, 400.0, 900.0}) {
    auto s = p.samples;
    for (auto& v : s) v += shift;
    const auto q = kde_fit(s);
    const std::vector<ResolutionProfile> pq{p, q};
    const auto grid = covering_grid(pq, 4096);
    const double pq_val = overlap_coefficient(p, q, grid).coefficient;
    CHECK(pq_val == doctest::Approx(overlap_coefficient(q, p, grid).coefficient).epsilon(1e-12));
    CHECK(pq_val < previous);
    previous = pq_val;
  }
}

TEST_CASE("overlap flags a grid that is too narrow") {
  const auto a = kde_fit({100.0}, 5.0);
  const auto b = kde_fit({120.0}, 5.0);
  CHECK(overlap_coefficient(a, b, linear_grid(90.0, 130.0, 100)).grid_too_narrow);
  const std::vector<ResolutionProfile> ab{a, b};
  CHECK_FALSE(overlap_coefficient(a, b, covering_grid(ab, 100)).grid_too_narrow);
}

TEST_CASE("convergence: full size is exact, size 1 matches a one-sample KDE") {
  const auto s = bimodal(11, 400);
  const std::vector<std::size_t> sizes{400, 1};
  const auto rows = kde_convergence_report(s, sizes, 5);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].size == 400);
  CHECK(rows[0].l1 < 1e-12);

  // Oracle: the reported distance must be the L1 between the full KDE and a
  // one-sample KDE (fallback bandwidth) at one of the samples.
  const auto full = kde_fit(s);
  const std::vector<ResolutionProfile> one{full};
  const auto grid = covering_grid(one, 1024);
  const auto fd = kde_eval(full, grid);
  bool found = false;
  for (double v : s) {
    const auto d = kde_eval(kde_fit({v}, kFallbackBandwidth), grid);
    std::vector<double> diff(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) diff[i] = std::abs(d[i] - fd[i]);
    if (std::abs(trapezoid(grid, diff) - rows[1].l1) < 1e-12) found = true;
  }
  CHECK(found);
  const std::vector<std::size_t> zero{0};
  CHECK_THROWS_AS(kde_convergence_report(s, zero, 1), UsageError);
}

TEST_CASE("convergence: larger subsets are closer to the full KDE") {
  const auto s = bimodal(77, 10000);
  const std::vector<std::size_t> sizes{20, 2000};
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto rows = kde_convergence_report(s, sizes, seed);
    wins += rows[1].l1 < rows[0].l1;
  }
  CHECK(wins >= 90);
}
