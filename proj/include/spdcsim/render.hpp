#ifndef SPDCSIM_RENDER_HPP
#define SPDCSIM_RENDER_HPP

// Synthetic far-field intensity images: Gaussian-profile rings and clipped
// Gaussian pump spots, accumulated additively on a pixel grid.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <png.h>

#include "spdcsim/error.hpp"
#include "spdcsim/geometry.hpp"

namespace spdcsim {

// Pixel (col, row) is centred at origin + (col * pitch, -row * pitch):
// columns run along +x, rows run along -y so the image is upright.
struct ImageGrid {
  std::size_t width = 0;
  std::size_t height = 0;
  double pitch_mm = 0.0;
  Vec2 origin_mm;

  static ImageGrid centered(std::size_t width, std::size_t height, double pitch_mm, Vec2 center = {}) {
    const Vec2 origin{center.x - 0.5 * static_cast<double>(width - 1) * pitch_mm,
                      center.y + 0.5 * static_cast<double>(height - 1) * pitch_mm};
    return {width, height, pitch_mm, origin};
  }

  [[nodiscard]] Vec2 position(std::size_t col, std::size_t row) const {
    return {origin_mm.x + static_cast<double>(col) * pitch_mm, origin_mm.y - static_cast<double>(row) * pitch_mm};
  }

  void validate() const {
    if (width == 0 || height == 0) throw PhysicsError("image dimensions must be positive");
    if (!(pitch_mm > 0.0)) throw PhysicsError("pixel pitch must be positive");
  }
};

class IntensityImage {
public:
  explicit IntensityImage(const ImageGrid& grid) : grid_(grid) {
    grid_.validate();
    values_.assign(grid_.width * grid_.height, 0.0);
  }

  [[nodiscard]] const ImageGrid& grid() const noexcept { return grid_; }
  [[nodiscard]] std::size_t width() const noexcept { return grid_.width; }
  [[nodiscard]] std::size_t height() const noexcept { return grid_.height; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::span<double> values() noexcept { return values_; }

  [[nodiscard]] double& at(std::size_t col, std::size_t row) { return values_[row * grid_.width + col]; }
  [[nodiscard]] double at(std::size_t col, std::size_t row) const { return values_[row * grid_.width + col]; }

  [[nodiscard]] double max() const {
    return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
  }

  // Bilinear interpolation at a physical position; 0 outside the grid.
  [[nodiscard]] double sample(Vec2 p) const {
    const double fx = (p.x - grid_.origin_mm.x) / grid_.pitch_mm;
    const double fy = (grid_.origin_mm.y - p.y) / grid_.pitch_mm;
    if (fx < 0.0 || fy < 0.0 || fx > static_cast<double>(grid_.width - 1) ||
        fy > static_cast<double>(grid_.height - 1)) {
      return 0.0;
    }
    const auto c0 = static_cast<std::size_t>(fx);
    const auto r0 = static_cast<std::size_t>(fy);
    const std::size_t c1 = std::min(c0 + 1, grid_.width - 1);
    const std::size_t r1 = std::min(r0 + 1, grid_.height - 1);
    const double tx = fx - static_cast<double>(c0);
    const double ty = fy - static_cast<double>(r0);
    return (1 - tx) * (1 - ty) * at(c0, r0) + tx * (1 - ty) * at(c1, r0) + (1 - tx) * ty * at(c0, r1) +
           tx * ty * at(c1, r1);
  }

  IntensityImage& operator+=(const IntensityImage& other) {
    if (other.width() != width() || other.height() != height()) throw DimensionError("image sizes differ");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
  }

private:
  ImageGrid grid_;
  std::vector<double> values_;
};

namespace detail {

// Runs fn(row) over all rows, split into contiguous blocks. Each pixel is
// written by exactly one thread, so the result is independent of `threads`.
template <typename Fn>
void for_each_row(std::size_t rows, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, rows));
  if (threads <= 1) {
    for (std::size_t r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t block = (rows + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = t * block;
    const std::size_t end = std::min(rows, begin + block);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] {
      for (std::size_t r = begin; r < end; ++r) fn(r);
    });
  }
}

} // namespace detail

// Intensity of one ring at p: scale * exp(-(|p-c|-r)^2 / (2 sigma^2)).
inline double ring_profile(const EmissionRing& ring, double sigma, double scale, Vec2 p) {
  const double off = distance(p, ring.center) - ring.radius;
  return scale * std::exp(-off * off / (2.0 * sigma * sigma));
}

// Sum of ring profiles, in ring order. `per_process_scale` is indexed by
// source aperture; missing entries default to 1.
inline double ring_field(const RingSet& set, double sigma, std::span<const double> per_process_scale, Vec2 p) {
  double v = 0.0;
  for (const auto& ring : set.rings) {
    const double scale = ring.source_aperture < per_process_scale.size() ? per_process_scale[ring.source_aperture] : 1.0;
    v += ring_profile(ring, sigma, scale, p);
  }
  return v;
}

inline IntensityImage render_rings(const RingSet& set, double profile_width_mm, std::span<const double> per_process_scale,
                                   const ImageGrid& grid, unsigned threads = 1) {
  if (!(profile_width_mm > 0.0)) throw PhysicsError("ring profile width must be positive");
  for (double s : per_process_scale) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw PhysicsError("intensity scales must be finite and nonnegative");
  }
  IntensityImage img(grid);
  detail::for_each_row(grid.height, threads, [&](std::size_t row) {
    for (std::size_t col = 0; col < grid.width; ++col) {
      img.at(col, row) = ring_field(set, profile_width_mm, per_process_scale, grid.position(col, row));
    }
  });
  return img;
}

// One exp(-2 r^2 / waist^2) spot per aperture, zero outside the aperture radius.
inline IntensityImage render_pump(const MaskConfig& mask, double waist_mm, const ImageGrid& grid, unsigned threads = 1) {
  if (!(waist_mm > 0.0)) throw PhysicsError("pump waist must be positive");
  const double clip = mask.aperture_diameter_mm / 2.0;
  IntensityImage img(grid);
  detail::for_each_row(grid.height, threads, [&](std::size_t row) {
    for (std::size_t col = 0; col < grid.width; ++col) {
      const Vec2 p = grid.position(col, row);
      double v = 0.0;
      for (const Vec2& c : mask.apertures) {
        const double r = distance(p, c);
        if (r <= clip) v += std::exp(-2.0 * r * r / (waist_mm * waist_mm));
      }
      img.at(col, row) = v;
    }
  });
  return img;
}

// Adds uniform noise in [0, amplitude * max) from a seeded mt19937_64, one
// draw per pixel in row-major order.
inline void add_uniform_noise(IntensityImage& img, double amplitude, std::uint64_t seed) {
  if (!(amplitude >= 0.0)) throw PhysicsError("noise amplitude must be nonnegative");
  const double peak = img.max();
  std::mt19937_64 rng(seed);
  for (double& v : img.values()) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v += amplitude * peak * u;
  }
}

enum class Corner { top_left, top_right, bottom_left, bottom_right };

// Pastes `inset` (rescaled to the base image's peak) into a corner of `base`.
inline void composite_inset(IntensityImage& base, const IntensityImage& inset, Corner corner) {
  if (inset.width() > base.width() || inset.height() > base.height()) throw DimensionError("inset larger than image");
  const double base_peak = base.max();
  const double inset_peak = inset.max();
  const double gain = inset_peak > 0.0 ? (base_peak > 0.0 ? base_peak : 1.0) / inset_peak : 0.0;
  const bool right = corner == Corner::top_right || corner == Corner::bottom_right;
  const bool bottom = corner == Corner::bottom_left || corner == Corner::bottom_right;
  const std::size_t c0 = right ? base.width() - inset.width() : 0;
  const std::size_t r0 = bottom ? base.height() - inset.height() : 0;
  for (std::size_t r = 0; r < inset.height(); ++r) {
    for (std::size_t c = 0; c < inset.width(); ++c) base.at(c0 + c, r0 + r) = gain * inset.at(c, r);
  }
}

// ---------------------------------------------------------------------------
// Output

enum class ImageFormat { pgm, png };

// Linear map of [0, max] onto [0, 2^depth - 1], rounded to nearest.
inline std::vector<std::uint16_t> quantize(const IntensityImage& img, int depth) {
  if (depth != 8 && depth != 16) throw InputError("bit depth must be 8 or 16");
  for (double v : img.values()) {
    if (!std::isfinite(v)) throw InputError("image contains non-finite pixels");
    if (v < 0.0) throw InputError("image contains negative pixels");
  }
  const double maxval = depth == 8 ? 255.0 : 65535.0;
  const double peak = img.max();
  std::vector<std::uint16_t> out(img.values().size(), 0);
  if (peak <= 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint16_t>(std::lround(img.values()[i] / peak * maxval));
  }
  return out;
}

// Binary P5; 16-bit samples are big-endian.
inline std::vector<std::uint8_t> encode_pgm(const IntensityImage& img, int depth) {
  const auto q = quantize(img, depth);
  const std::string header = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n" +
                             (depth == 8 ? "255" : "65535") + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + q.size() * (depth == 8 ? 1 : 2));
  for (std::uint16_t v : q) {
    if (depth == 16) out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  return out;
}

namespace detail {

inline void write_png_file(const IntensityImage& img, int depth, const std::filesystem::path& path) {
  const auto q = quantize(img, depth);
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng initialisation failed for " + path.string());
  }
  std::vector<std::uint8_t> row(img.width() * (depth == 8 ? 1 : 2));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), depth,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < img.height(); ++r) {
    for (std::size_t c = 0; c < img.width(); ++c) {
      const std::uint16_t v = q[r * img.width() + c];
      if (depth == 8) {
        row[c] = static_cast<std::uint8_t>(v);
      } else {
        row[2 * c] = static_cast<std::uint8_t>(v >> 8);
        row[2 * c + 1] = static_cast<std::uint8_t>(v & 0xFF);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) throw IoError("failed closing " + path.string());
}

} // namespace detail

inline std::filesystem::path sidecar_path(const std::filesystem::path& image_path) {
  return std::filesystem::path(image_path.string() + ".meta");
}

// Writes the image plus a key=value sidecar (pitch_mm, origin_x_mm, origin_y_mm, seed).
inline void write_image(const IntensityImage& img, const std::filesystem::path& path, ImageFormat format, int depth,
                        std::optional<std::uint64_t> seed = std::nullopt) {
  if (format == ImageFormat::pgm) {
    const auto bytes = encode_pgm(img, depth);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("failed writing " + path.string());
  } else {
    detail::write_png_file(img, depth, path);
  }
  const auto meta = sidecar_path(path);
  std::ofstream ms(meta);
  if (!ms) throw IoError("cannot open " + meta.string() + " for writing");
  ms << "width=" << img.width() << '\n'
     << "height=" << img.height() << '\n'
     << "pitch_mm=" << format_number(img.grid().pitch_mm, 9) << '\n'
     << "origin_x_mm=" << format_number(img.grid().origin_mm.x, 9) << '\n'
     << "origin_y_mm=" << format_number(img.grid().origin_mm.y, 9) << '\n'
     << "seed=" << (seed ? std::to_string(*seed) : std::string("none")) << '\n';
  if (!ms) throw IoError("failed writing " + meta.string());
}

} // namespace spdcsim

#endif // SPDCSIM_RENDER_HPP
