#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stego/tensor.hpp"

namespace stego {

/// 8-bit image, row-major with interleaved channels. Channels is 1 or 3.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(std::size_t height, std::size_t width, std::size_t channels, std::uint8_t fill = 0);
  ImageBuffer(std::size_t height, std::size_t width, std::size_t channels, std::vector<std::uint8_t> pixels);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  bool empty() const { return pixels_.empty(); }

  std::span<std::uint8_t> pixels() { return pixels_; }
  std::span<const std::uint8_t> pixels() const { return pixels_; }

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return pixels_[(y * width_ + x) * channels_ + c]; }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels_[(y * width_ + x) * channels_ + c];
  }

  bool same_shape(const ImageBuffer& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  std::string shape_string() const;

  bool operator==(const ImageBuffer&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Binary P6, maxval 255. Reading always yields 3 channels; writing a
// 1-channel buffer replicates the gray value into R, G and B.
ImageBuffer read_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_ppm(const ImageBuffer& image);
ImageBuffer load_ppm(const std::string& path);
void save_ppm(const std::string& path, const ImageBuffer& image);
// Every *.ppm file in `dir`, sorted by file name.
std::vector<ImageBuffer> load_ppm_directory(const std::string& dir);

// Source index per axis is floor((i + 0.5) * src / dst).
ImageBuffer resize_nearest(const ImageBuffer& image, std::size_t new_height, std::size_t new_width);

ImageBuffer to_grayscale(const ImageBuffer& image);

// [H, W, C] floats in [0, 1] (v / 255) and back (round(clamp(v) * 255)).
Tensor to_tensor(const ImageBuffer& image);
ImageBuffer from_tensor(const Tensor& tensor);

struct Histogram {
  std::vector<std::array<std::uint64_t, 256>> bins;  // one row per channel

  bool operator==(const Histogram&) const = default;
};

Histogram histogram(const ImageBuffer& image);

// Histogram of |a - b| over all subpixels, 256 bins.
std::array<std::uint64_t, 256> error_histogram(const ImageBuffer& a, const ImageBuffer& b);

// Mean squared byte difference over all H*W*C subpixels (0..255^2 scale).
double mse_per_pixel(const ImageBuffer& a, const ImageBuffer& b);

struct AdjacentCorrelation {
  double horizontal = 0.0;
  double vertical = 0.0;
};

// Pearson correlation with the right / bottom neighbour, per channel. Zero
// when either side of the pairing has zero variance.
std::vector<AdjacentCorrelation> adjacent_correlation(const ImageBuffer& image);

// Mean over channels of (|horizontal| + |vertical|) / 2.
double mean_abs_adjacent_correlation(const ImageBuffer& image);

// |cover - container| averaged over channels, then stretched so min -> 0
// and max -> 255. A constant difference maps to all zeros.
ImageBuffer residual_enhance(const ImageBuffer& cover, const ImageBuffer& container);

// Pearson correlation over all subpixels; 0 under zero variance.
double image_similarity(const ImageBuffer& a, const ImageBuffer& b);

// Pearson correlation of two equal-length sequences; 0 under zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

enum class SynthKind { gradients, shapes, texture, mixed };

SynthKind parse_synth_kind(std::string_view name);
std::string_view synth_kind_name(SynthKind kind);

// Image `index` of the deterministic synthetic set identified by `seed`.
ImageBuffer synth_image(std::uint64_t seed, std::size_t index, std::size_t size, SynthKind kind,
                        std::size_t channels = 3);

std::vector<ImageBuffer> synth_dataset(std::uint64_t seed, std::size_t count, std::size_t size, SynthKind kind,
                                       std::size_t channels = 3);

}  // namespace stego
