#include "biaslens/resolution.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "biaslens/corpus.hpp"
#include "biaslens/error.hpp"

namespace biaslens {

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

void check_profile(const ResolutionProfile& p) {
  if (p.samples.empty()) throw DataError("profile has no samples");
  if (!(p.bandwidth > 0.0) || !std::isfinite(p.bandwidth)) throw DataError("profile bandwidth must be positive");
}

}  // namespace

double resolution_proxy(std::int64_t width, std::int64_t height) {
  if (width < 1 || height < 1) throw DataError("non-positive dimension");
  // Integer sum then a single halving: exact for any realistic image size.
  return static_cast<double>(width + height) / 2.0;
}

double silverman_bandwidth(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) return kFallbackBandwidth;
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);

  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  if (!(spread > 0.0)) return kFallbackBandwidth;
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

ResolutionProfile kde_fit(std::vector<double> samples, std::optional<double> bandwidth, std::string dataset) {
  if (samples.empty()) throw DataError("kde_fit: empty sample list");
  for (double s : samples)
    if (!std::isfinite(s) || s <= 0.0) throw DataError("kde_fit: samples must be finite and positive");
  ResolutionProfile p;
  p.bandwidth = bandwidth ? *bandwidth : silverman_bandwidth(samples);
  if (!(p.bandwidth > 0.0) || !std::isfinite(p.bandwidth)) throw DataError("kde_fit: bandwidth must be positive");
  p.samples = std::move(samples);
  p.dataset = std::move(dataset);
  return p;
}

std::vector<double> kde_eval(const ResolutionProfile& profile, std::span<const double> grid) {
  if (profile.samples.empty()) throw DataError("profile has no samples");
  if (!(profile.bandwidth > 0.0)) throw DataError("profile bandwidth must be positive");
  const double h = profile.bandwidth;
  const double norm = 1.0 / (static_cast<double>(profile.samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double x = grid[g];
    if (!std::isfinite(x)) throw DataError("kde_eval: non-finite grid value");
    double acc = 0.0;
    for (double s : profile.samples) {
      const double z = (x - s) / h;
      acc += std::exp(-0.5 * z * z);
    }
    out[g] = acc * norm;
  }
  return out;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t points) {
  if (points < 2 || !(hi > lo)) throw UsageError("linear_grid needs >= 2 points and hi > lo");
  std::vector<double> g(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) g[i] = lo + step * static_cast<double>(i);
  g.back() = hi;
  return g;
}

std::vector<double> covering_grid(std::span<const ResolutionProfile> profiles, std::size_t points,
                                  double pad_bandwidths) {
  if (profiles.empty()) throw UsageError("covering_grid needs at least one profile");
  double lo = INFINITY;
  double hi = -INFINITY;
  for (const auto& p : profiles) {
    check_profile(p);
    const auto [mn, mx] = std::minmax_element(p.samples.begin(), p.samples.end());
    lo = std::min(lo, *mn - pad_bandwidths * p.bandwidth);
    hi = std::max(hi, *mx + pad_bandwidths * p.bandwidth);
  }
  return linear_grid(lo, hi, points);
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw UsageError("trapezoid: size mismatch");
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

Overlap overlap_coefficient(const ResolutionProfile& p, const ResolutionProfile& q, std::span<const double> grid) {
  check_profile(p);
  check_profile(q);
  if (grid.size() < 2) throw UsageError("overlap grid needs >= 2 points");
  Overlap out;
  for (const auto* prof : {&p, &q}) {
    const auto [mn, mx] = std::minmax_element(prof->samples.begin(), prof->samples.end());
    // Small slack so a grid built by covering_grid is not flagged by rounding.
    const double need = 6.0 * prof->bandwidth * (1.0 - 1e-9);
    if (grid.front() > *mn - need || grid.back() < *mx + need) out.grid_too_narrow = true;
  }
  const auto dp = kde_eval(p, grid);
  const auto dq = kde_eval(q, grid);
  std::vector<double> m(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) m[i] = std::min(dp[i], dq[i]);
  out.coefficient = std::clamp(trapezoid(grid, m), 0.0, 1.0);
  return out;
}

std::vector<ConvergenceRow> kde_convergence_report(std::span<const double> samples,
                                                   std::span<const std::size_t> subset_sizes, std::uint64_t seed,
                                                   std::size_t grid_points) {
  const auto full = kde_fit({samples.begin(), samples.end()});
  const std::vector<ResolutionProfile> one{full};
  const auto grid = covering_grid(one, grid_points);
  const auto full_density = kde_eval(full, grid);

  std::vector<ConvergenceRow> rows;
  for (std::size_t k = 0; k < subset_sizes.size(); ++k) {
    const std::size_t size = subset_sizes[k];
    if (size == 0) throw UsageError("subset size must be >= 1");
    if (size > samples.size()) throw UsageError("subset size exceeds sample count");
    const auto idx = sample_indices(samples.size(), size, seed ^ (0x9e37ULL * (k + 1)));
    std::vector<double> sub;
    sub.reserve(size);
    for (auto i : idx) sub.push_back(samples[i]);
    const auto sub_density = kde_eval(kde_fit(std::move(sub)), grid);
    std::vector<double> diff(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) diff[i] = std::abs(sub_density[i] - full_density[i]);
    rows.push_back({size, trapezoid(grid, diff)});
  }
  return rows;
}

}  // namespace biaslens
