#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace biaslens {

/// Average of an image's width and height, in pixels.
double resolution_proxy(std::int64_t width, std::int64_t height);

/// Gaussian KDE over resolution proxies of one dataset.
struct ResolutionProfile {
  std::vector<double> samples;
  double bandwidth = 1.0;
  std::string dataset;
};

/// Silverman's rule 0.9 * min(sd, IQR/1.34) * n^(-1/5). When the robust spread
/// is zero the standard deviation is used; when both are zero the fallback of
/// 1.0 px is returned.
double silverman_bandwidth(std::span<const double> samples);

constexpr double kFallbackBandwidth = 1.0;

ResolutionProfile kde_fit(std::vector<double> samples, std::optional<double> bandwidth = std::nullopt,
                          std::string dataset = {});

/// density(x) = 1/(n h) * sum_i phi((x - s_i) / h).
std::vector<double> kde_eval(const ResolutionProfile& profile, std::span<const double> grid);

/// `points` evenly spaced values covering [lo, hi] inclusive.
std::vector<double> linear_grid(double lo, double hi, std::size_t points);

/// Grid spanning every profile's samples padded by `pad_bandwidths` of its bandwidth.
std::vector<double> covering_grid(std::span<const ResolutionProfile> profiles, std::size_t points,
                                  double pad_bandwidths = 6.0);

/// Trapezoid rule over a (not necessarily uniform) grid.
double trapezoid(std::span<const double> x, std::span<const double> y);

struct Overlap {
  double coefficient = 0.0;  // in [0, 1]
  bool grid_too_narrow = false;
};

/// Integral of min(p, q) over the grid. Flags grids that do not cover both
/// supports by at least 6 bandwidths.
Overlap overlap_coefficient(const ResolutionProfile& p, const ResolutionProfile& q, std::span<const double> grid);

struct ConvergenceRow {
  std::size_t size = 0;
  double l1 = 0.0;
};

/// For each subset size draws a seeded uniform subset (without replacement),
/// fits a KDE with Silverman bandwidth and reports its L1 distance to the
/// full-sample KDE on a fixed grid.
std::vector<ConvergenceRow> kde_convergence_report(std::span<const double> samples,
                                                   std::span<const std::size_t> subset_sizes, std::uint64_t seed,
                                                   std::size_t grid_points = 1024);

}  // namespace biaslens
