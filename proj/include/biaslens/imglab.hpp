#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

namespace biaslens {

/// Row-major interleaved image with values in [0, 255].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  std::vector<float> pixels;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f);

  float& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int x, int y, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }

  /// Throws DataError on shape mismatch or out-of-range values.
  void validate() const;

  friend bool operator==(const Image&, const Image&) = default;
};

/// Signed difference image: reconstruction minus original, values in [-255, 255].
struct ResidualImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> pixels;

  [[nodiscard]] double mean_abs() const;
  [[nodiscard]] double max_abs() const;
};

enum class Prefilter { none, box3 };

/// Bilinear resampling with align-corners-false sample positions
/// (src = (dst + 0.5) * in/out - 0.5), edge clamped. No antialiasing unless
/// `prefilter` is box3, which applies a 3x3 box blur before downsampling.
Image resize_bilinear(const Image& img, int out_w, int out_h, Prefilter prefilter = Prefilter::none);

/// Resize to mid x mid, then to final x final.
Image two_step_resize(const Image& img, int mid, int final_side, Prefilter prefilter = Prefilter::none);

/// resize(resize(img, s, s), w, h) - img.
ResidualImage residual_image(const Image& img, int pipeline_size, Prefilter prefilter = Prefilter::none);

enum class TextureKind : std::uint8_t { value_noise, blob_field, stripe_warp };

std::string_view to_string(TextureKind kind);
TextureKind parse_texture_kind(std::string_view name);

struct FakeSpec {
  int width = 100;
  int height = 100;
  TextureKind kind = TextureKind::value_noise;
  std::uint64_t seed = 0;
  int channels = 3;
};

/// Procedural non-semantic texture. Bit-identical output for equal specs.
///
/// Texture features are sized in native pixels and anchored to the image
/// frame. A low-amplitude fixed-pattern layer keyed on pixel position (the
/// same map for every image) is added on top, so the same process rendered at
/// two resolutions and resized to a common size leaves resolution-dependent
/// traces.
Image gen_fake(const FakeSpec& spec);

/// Resize to side x side, flatten, scale to [0, 1].
std::vector<double> pixel_features(const Image& img, int side);

/// 8-bit PNG I/O (grayscale or RGB; other color types are converted on read).
Image read_png(const std::filesystem::path& path);
void write_png(const Image& img, const std::filesystem::path& path);

/// 16-byte header ("RES1", u32le w, h, c) followed by f32le samples.
void write_residual(const ResidualImage& res, const std::filesystem::path& path);
ResidualImage read_residual(const std::filesystem::path& path);

/// 8-bit preview of a residual using (x + 255) / 2.
Image residual_preview(const ResidualImage& res);

}  // namespace biaslens
