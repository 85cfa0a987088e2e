#include "biaslens/imglab.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include <png.h>

#include "biaslens/error.hpp"
#include "biaslens/rng.hpp"

namespace biaslens {

Image::Image(int w, int h, int c, float fill)
    : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, fill) {}

void Image::validate() const {
  if (width < 1 || height < 1) throw DataError("image dimensions must be positive");
  if (channels != 1 && channels != 3) throw DataError("image must have 1 or 3 channels");
  if (pixels.size() != static_cast<std::size_t>(width) * height * channels)
    throw DataError("pixel buffer size does not match dimensions");
  for (float v : pixels)
    if (!std::isfinite(v) || v < 0.0f || v > 255.0f) throw DataError("pixel value outside [0, 255]");
}

double ResidualImage::mean_abs() const {
  if (pixels.empty()) return 0.0;
  double s = 0.0;
  for (float v : pixels) s += std::abs(v);
  return s / static_cast<double>(pixels.size());
}

double ResidualImage::max_abs() const {
  double m = 0.0;
  for (float v : pixels) m = std::max(m, static_cast<double>(std::abs(v)));
  return m;
}

namespace {

struct Taps {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> w;
};

Taps make_taps(int in, int out) {
  Taps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.w.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int o = 0; o < out; ++o) {
    double s = (o + 0.5) * scale - 0.5;
    if (s < 0.0) s = 0.0;
    int i0 = static_cast<int>(std::floor(s));
    if (i0 >= in - 1) {
      t.lo[o] = t.hi[o] = in - 1;
      t.w[o] = 0.0;
    } else {
      t.lo[o] = i0;
      t.hi[o] = i0 + 1;
      t.w[o] = s - i0;
    }
  }
  return t;
}

Image box3(const Image& img) {
  Image out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double s = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            s += img.at(std::clamp(x + dx, 0, img.width - 1), std::clamp(y + dy, 0, img.height - 1), c);
        out.at(x, y, c) = static_cast<float>(s / 9.0);
      }
  return out;
}

}  // namespace

Image resize_bilinear(const Image& img, int out_w, int out_h, Prefilter prefilter) {
  if (out_w < 1 || out_h < 1) throw UsageError("zero target dimension");
  if (img.width < 1 || img.height < 1 || img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * img.channels)
    throw DataError("invalid source image");
  if (out_w == img.width && out_h == img.height) return img;

  if (prefilter == Prefilter::box3 && (out_w < img.width || out_h < img.height))
    return resize_bilinear(box3(img), out_w, out_h, Prefilter::none);

  const Taps tx = make_taps(img.width, out_w);
  const Taps ty = make_taps(img.height, out_h);
  const int ch = img.channels;
  Image out(out_w, out_h, ch);
  for (int y = 0; y < out_h; ++y) {
    const float* r0 = img.pixels.data() + static_cast<std::size_t>(ty.lo[y]) * img.width * ch;
    const float* r1 = img.pixels.data() + static_cast<std::size_t>(ty.hi[y]) * img.width * ch;
    const double wy = ty.w[y];
    float* dst = out.pixels.data() + static_cast<std::size_t>(y) * out_w * ch;
    for (int x = 0; x < out_w; ++x) {
      const int a = tx.lo[x] * ch;
      const int b = tx.hi[x] * ch;
      const double wx = tx.w[x];
      for (int c = 0; c < ch; ++c) {
        // Lerp form keeps constants exact.
        const double top = r0[a + c] + wx * (static_cast<double>(r0[b + c]) - r0[a + c]);
        const double bot = r1[a + c] + wx * (static_cast<double>(r1[b + c]) - r1[a + c]);
        const double v = top + wy * (bot - top);
        dst[x * ch + c] = static_cast<float>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  return out;
}

Image two_step_resize(const Image& img, int mid, int final_side, Prefilter prefilter) {
  if (mid < 1 || final_side < 1) throw UsageError("zero target dimension");
  return resize_bilinear(resize_bilinear(img, mid, mid, prefilter), final_side, final_side, prefilter);
}

ResidualImage residual_image(const Image& img, int pipeline_size, Prefilter prefilter) {
  const Image back =
      resize_bilinear(resize_bilinear(img, pipeline_size, pipeline_size, prefilter), img.width, img.height, prefilter);
  ResidualImage r{img.width, img.height, img.channels, std::vector<float>(img.pixels.size())};
  for (std::size_t i = 0; i < img.pixels.size(); ++i) r.pixels[i] = back.pixels[i] - img.pixels[i];
  return r;
}

std::string_view to_string(TextureKind kind) {
  switch (kind) {
    case TextureKind::value_noise:
      return "value-noise";
    case TextureKind::blob_field:
      return "blob-field";
    case TextureKind::stripe_warp:
      return "stripe-warp";
  }
  return "unknown";
}

TextureKind parse_texture_kind(std::string_view name) {
  if (name == "value-noise") return TextureKind::value_noise;
  if (name == "blob-field") return TextureKind::blob_field;
  if (name == "stripe-warp") return TextureKind::stripe_warp;
  throw UsageError("unsupported texture kind '" + std::string(name) + "'");
}

namespace {

constexpr std::uint64_t kPatternKey = 0x5e4507f1c3d2b0a9ULL;
constexpr double kPatternMin = 8.0;
constexpr double kPatternMax = 24.0;

/// Random values on an integer lattice anchored at the image origin,
/// smoothstep-interpolated between nodes.
class LatticeNoise {
 public:
  LatticeNoise(std::uint64_t key, double cell, int width, int height)
      : inv_cell_(1.0 / cell),
        nx_(static_cast<int>(width / cell) + 2),
        ny_(static_cast<int>(height / cell) + 2),
        values_(static_cast<std::size_t>(nx_) * ny_) {
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i)
        values_[static_cast<std::size_t>(j) * nx_ + i] =
            to_unit(derive_key(key, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)}));
  }

  double operator()(double x, double y) const {
    const double u = x * inv_cell_;
    const double v = y * inv_cell_;
    const int i = std::min(static_cast<int>(u), nx_ - 2);
    const int j = std::min(static_cast<int>(v), ny_ - 2);
    const double fu = smooth(u - i);
    const double fv = smooth(v - j);
    const double* r0 = values_.data() + static_cast<std::size_t>(j) * nx_ + i;
    const double* r1 = r0 + nx_;
    const double top = r0[0] + fu * (r0[1] - r0[0]);
    const double bot = r1[0] + fu * (r1[1] - r1[0]);
    return top + fv * (bot - top);
  }

 private:
  static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

  double inv_cell_;
  int nx_;
  int ny_;
  std::vector<double> values_;
};

/// Scalar field in [0, 1] per pixel, row-major.
using Field = std::vector<double>;

Field value_noise_field(const FakeSpec& s, Rng& rng) {
  const double base_cell = rng.uniform(8.0, 24.0);
  const double grain = rng.uniform(0.05, 0.2);
  constexpr int kOctaves = 3;
  std::vector<LatticeNoise> octaves;
  std::vector<double> amps;
  double cell = base_cell;
  double amp = 1.0;
  double amp_sum = 0.0;
  for (int o = 0; o < kOctaves; ++o) {
    octaves.emplace_back(derive_key(s.seed, {1, static_cast<std::uint64_t>(o)}), std::max(cell, 2.0), s.width,
                         s.height);
    amps.push_back(amp);
    amp_sum += amp;
    cell *= 0.5;
    amp *= 0.5;
  }
  const std::uint64_t grain_key = derive_key(s.seed, {2});
  Field f(static_cast<std::size_t>(s.width) * s.height);
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x) {
      double v = 0.0;
      for (int o = 0; o < kOctaves; ++o) v += amps[o] * octaves[o](x, y);
      v /= amp_sum;
      const std::size_t i = static_cast<std::size_t>(y) * s.width + x;
      v += grain * (to_unit(mix64(grain_key + i)) - 0.5);
      f[i] = std::clamp(v, 0.0, 1.0);
    }
  return f;
}

Field blob_field(const FakeSpec& s, Rng& rng) {
  const double spacing = rng.uniform(10.0, 20.0);
  const double radius = rng.uniform(3.0, 8.0);
  const auto count = static_cast<std::size_t>(std::lround(s.width * s.height / (spacing * spacing)));
  Field f(static_cast<std::size_t>(s.width) * s.height, 0.0);
  for (std::size_t b = 0; b < std::max<std::size_t>(count, 1); ++b) {
    const double cx = rng.uniform(0.0, s.width);
    const double cy = rng.uniform(0.0, s.height);
    const double r = radius * rng.uniform(0.5, 1.5);
    const double a = rng.uniform(0.5, 1.0);
    const double inv = 1.0 / (2.0 * r * r);
    const int x0 = std::max(0, static_cast<int>(cx - 3 * r));
    const int x1 = std::min(s.width - 1, static_cast<int>(cx + 3 * r));
    const int y0 = std::max(0, static_cast<int>(cy - 3 * r));
    const int y1 = std::min(s.height - 1, static_cast<int>(cy + 3 * r));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx;
        const double dy = y - cy;
        f[static_cast<std::size_t>(y) * s.width + x] += a * std::exp(-(dx * dx + dy * dy) * inv);
      }
  }
  for (double& v : f) v = std::min(v, 1.0);
  return f;
}

Field stripe_warp_field(const FakeSpec& s, Rng& rng) {
  const double period = rng.uniform(6.0, 18.0);
  const double theta = rng.uniform(0.0, std::numbers::pi);
  const double warp_amp = rng.uniform(1.0, 4.0);
  const LatticeNoise warp(derive_key(s.seed, {3}), 24.0, s.width, s.height);
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  Field f(static_cast<std::size_t>(s.width) * s.height);
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x) {
      const double t = x * cs + y * sn + warp_amp * (2.0 * warp(x, y) - 1.0);
      f[static_cast<std::size_t>(y) * s.width + x] = 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * t / period);
    }
  return f;
}

}  // namespace

Image gen_fake(const FakeSpec& spec) {
  if (spec.width < 8 || spec.height < 8) throw UsageError("fake image dimensions must be >= 8");
  if (spec.channels != 1 && spec.channels != 3) throw UsageError("fake image must have 1 or 3 channels");

  Rng rng(derive_key(spec.seed, {0}));
  // Dark ground and bright features; every channel differs by >= 48 levels
  // so no channel is constant.
  double base[3];
  double accent[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.0, 96.0);
    accent[c] = std::min(255.0, base[c] + rng.uniform(48.0, 160.0));
  }

  Field f;
  switch (spec.kind) {
    case TextureKind::value_noise:
      f = value_noise_field(spec, rng);
      break;
    case TextureKind::blob_field:
      f = blob_field(spec, rng);
      break;
    case TextureKind::stripe_warp:
      f = stripe_warp_field(spec, rng);
      break;
    default:
      throw UsageError("unsupported texture kind");
  }

  // Sensor-style fixed-pattern noise: keyed on pixel position only, so it is
  // the same map for every image, whatever its seed or size.
  const double pattern_amp = rng.uniform(kPatternMin, kPatternMax);
  Image img(spec.width, spec.height, spec.channels);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * spec.width + x;
      for (int c = 0; c < spec.channels; ++c) {
        const double g = to_unit(derive_key(kPatternKey, {static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(y),
                                                          static_cast<std::uint64_t>(c)})) -
                         0.5;
        const double v = base[c] + (accent[c] - base[c]) * f[i] + pattern_amp * g;
        img.pixels[i * spec.channels + c] = static_cast<float>(std::clamp(v, 0.0, 255.0));
      }
    }
  return img;
}

std::vector<double> pixel_features(const Image& img, int side) {
  if (side < 2) throw UsageError("feature side must be >= 2");
  const Image small = resize_bilinear(img, side, side);
  std::vector<double> out(small.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(small.pixels[i] / 255.0, 0.0, 1.0);
  return out;
}

Image read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw IoError("cannot read PNG '" + path.string() + "': " + image.message);
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DataError("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  Image img(static_cast<int>(image.width), static_cast<int>(image.height), gray ? 1 : 3);
  for (std::size_t i = 0; i < buf.size(); ++i) img.pixels[i] = buf[i];
  return img;
}

void write_png(const Image& img, const std::filesystem::path& path) {
  img.validate();
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<png_byte> buf(img.pixels.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<png_byte>(std::lround(img.pixels[i]));
  if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr))
    throw IoError("cannot write PNG '" + path.string() + "': " + image.message);
}

void write_residual(const ResidualImage& res, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(16 + res.pixels.size() * 4);
  auto put = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  bytes.insert(bytes.end(), {'R', 'E', 'S', '1'});
  put(static_cast<std::uint32_t>(res.width));
  put(static_cast<std::uint32_t>(res.height));
  put(static_cast<std::uint32_t>(res.channels));
  for (float f : res.pixels) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &f, 4);
    put(bits);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ResidualImage read_residual(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open residual '" + path.string() + "'");
  std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (b.size() < 16 || std::memcmp(b.data(), "RES1", 4) != 0) throw DataError("bad residual magic");
  auto get = [&](std::size_t off) {
    return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
           (static_cast<std::uint32_t>(b[off + 2]) << 16) | (static_cast<std::uint32_t>(b[off + 3]) << 24);
  };
  ResidualImage r{static_cast<int>(get(4)), static_cast<int>(get(8)), static_cast<int>(get(12)), {}};
  const std::size_t count = static_cast<std::size_t>(r.width) * r.height * r.channels;
  if (b.size() != 16 + count * 4) throw DataError("residual payload length mismatch");
  r.pixels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = get(16 + i * 4);
    std::memcpy(&r.pixels[i], &bits, 4);
  }
  return r;
}

Image residual_preview(const ResidualImage& res) {
  Image img(res.width, res.height, res.channels);
  for (std::size_t i = 0; i < res.pixels.size(); ++i)
    img.pixels[i] = static_cast<float>(std::clamp((res.pixels[i] + 255.0) / 2.0, 0.0, 255.0));
  return img;
}

}  // namespace biaslens
