#include "stego/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>

#include "stego/error.hpp"
#include "stego/rng.hpp"

namespace stego {

ImageBuffer::ImageBuffer(std::size_t height, std::size_t width, std::size_t channels, std::uint8_t fill)
    : ImageBuffer(height, width, channels, std::vector<std::uint8_t>(height * width * channels, fill)) {}

ImageBuffer::ImageBuffer(std::size_t height, std::size_t width, std::size_t channels, std::vector<std::uint8_t> pixels)
    : height_(height), width_(width), channels_(channels), pixels_(std::move(pixels)) {
  if (height == 0 || width == 0) fail(ErrorKind::invalid_argument, "image dimensions must be positive");
  if (channels != 1 && channels != 3) {
    fail(ErrorKind::invalid_argument, "image must have 1 or 3 channels, got " + std::to_string(channels));
  }
  if (pixels_.size() != height * width * channels) {
    fail(ErrorKind::invalid_argument, "pixel buffer holds " + std::to_string(pixels_.size()) + " bytes, expected " +
                                          std::to_string(height * width * channels));
  }
}

std::string ImageBuffer::shape_string() const {
  return std::to_string(height_) + "x" + std::to_string(width_) + "x" + std::to_string(channels_);
}

// ---------------------------------------------------------------------------
// PPM

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorKind::data, "PPM: " + what + " at byte " + std::to_string(pos_));
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) error(std::string("expected ") + what);
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1u << 24)) error(std::string(what) + " out of range");
      ++pos_;
    }
    return value;
  }

  std::size_t& pos() { return pos_; }
  std::span<const std::uint8_t> bytes() const { return bytes_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

ImageBuffer read_ppm(std::span<const std::uint8_t> bytes) {
  HeaderReader r(bytes);
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') r.error("missing P6 magic");
  r.pos() = 2;
  if (r.pos() >= bytes.size() || !(std::isspace(bytes[r.pos()]) || bytes[r.pos()] == '#')) {
    r.error("expected whitespace after magic");
  }
  const std::size_t width = r.number("width");
  const std::size_t height = r.number("height");
  const std::size_t maxval = r.number("maxval");
  if (width == 0 || height == 0) r.error("zero image dimension");
  if (maxval != 255) r.error("unsupported maxval " + std::to_string(maxval) + " (only 255)");
  if (r.pos() >= bytes.size() || !std::isspace(bytes[r.pos()])) r.error("expected single whitespace before raster");
  ++r.pos();
  const std::size_t need = width * height * 3;
  const std::size_t have = bytes.size() - r.pos();
  if (have < need) {
    r.error("truncated raster: " + std::to_string(have) + " of " + std::to_string(need) + " bytes");
  }
  if (have > need) {
    r.pos() += need;
    r.error("trailing data after raster");
  }
  std::vector<std::uint8_t> pixels(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos()), bytes.end());
  return ImageBuffer(height, width, 3, std::move(pixels));
}

std::vector<std::uint8_t> write_ppm(const ImageBuffer& image) {
  const std::string header =
      "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + image.height() * image.width() * 3);
  if (image.channels() == 3) {
    out.insert(out.end(), image.pixels().begin(), image.pixels().end());
  } else {
    for (std::uint8_t v : image.pixels()) out.insert(out.end(), {v, v, v});
  }
  return out;
}

ImageBuffer load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::invalid_argument, "cannot open image '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return read_ppm(bytes);
  } catch (const Error& e) {
    fail(e.kind(), path + ": " + e.what());
  }
}

void save_ppm(const std::string& path, const ImageBuffer& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::invalid_argument, "cannot open '" + path + "' for writing");
  const auto bytes = write_ppm(image);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::invalid_argument, "failed writing '" + path + "'");
}

std::vector<ImageBuffer> load_ppm_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) fail(ErrorKind::invalid_argument, "not a directory: '" + dir + "'");
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<ImageBuffer> images;
  for (const auto& p : paths) images.push_back(load_ppm(p.string()));
  return images;
}

// ---------------------------------------------------------------------------

ImageBuffer resize_nearest(const ImageBuffer& image, std::size_t new_height, std::size_t new_width) {
  if (new_height == 0 || new_width == 0) fail(ErrorKind::invalid_argument, "resize target must be at least 1x1");
  const std::size_t c = image.channels();
  auto source = [](std::size_t i, std::size_t src, std::size_t dst) {
    return std::min(src - 1, static_cast<std::size_t>(std::floor((static_cast<double>(i) + 0.5) * src / dst)));
  };
  ImageBuffer out(new_height, new_width, c);
  for (std::size_t y = 0; y < new_height; ++y) {
    const std::size_t sy = source(y, image.height(), new_height);
    for (std::size_t x = 0; x < new_width; ++x) {
      const std::size_t sx = source(x, image.width(), new_width);
      for (std::size_t k = 0; k < c; ++k) out.at(y, x, k) = image.at(sy, sx, k);
    }
  }
  return out;
}

ImageBuffer to_grayscale(const ImageBuffer& image) {
  if (image.channels() == 1) return image;
  ImageBuffer out(image.height(), image.width(), 1);
  for (std::size_t y = 0; y < image.height(); ++y) {
    for (std::size_t x = 0; x < image.width(); ++x) {
      const unsigned sum = image.at(y, x, 0) + image.at(y, x, 1) + image.at(y, x, 2);
      out.at(y, x, 0) = static_cast<std::uint8_t>((sum + 1) / 3);
    }
  }
  return out;
}

Tensor to_tensor(const ImageBuffer& image) {
  Tensor t({image.height(), image.width(), image.channels()});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(image.pixels()[i]) / 255.0f;
  return t;
}

ImageBuffer from_tensor(const Tensor& tensor) {
  if (tensor.rank() != 3) fail(ErrorKind::invalid_argument, "image tensor must be [H,W,C], got " + shape_string(tensor.shape()));
  ImageBuffer out(tensor.dim(0), tensor.dim(1), tensor.dim(2));
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    const float v = std::clamp(tensor[i], 0.0f, 1.0f);
    out.pixels()[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

Histogram histogram(const ImageBuffer& image) {
  Histogram h;
  h.bins.assign(image.channels(), {});
  const auto px = image.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) ++h.bins[i % image.channels()][px[i]];
  return h;
}

namespace {

void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const char* op) {
  if (!a.same_shape(b)) fail(ErrorKind::data, std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

}  // namespace

std::array<std::uint64_t, 256> error_histogram(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_shape(a, b, "error_histogram");
  std::array<std::uint64_t, 256> bins{};
  for (std::size_t i = 0; i < a.pixels().size(); ++i) {
    ++bins[static_cast<std::size_t>(std::abs(int(a.pixels()[i]) - int(b.pixels()[i])))];
  }
  return bins;
}

double mse_per_pixel(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_shape(a, b, "mse_per_pixel");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i) {
    const double d = double(a.pixels()[i]) - double(b.pixels()[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.pixels().size());
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::invalid_argument, "pearson: length mismatch");
  if (a.empty()) return 0.0;
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<AdjacentCorrelation> adjacent_correlation(const ImageBuffer& image) {
  if (image.height() < 2 || image.width() < 2) fail(ErrorKind::invalid_argument, "adjacent_correlation needs at least 2x2");
  std::vector<AdjacentCorrelation> out(image.channels());
  std::vector<double> first, second;
  for (std::size_t c = 0; c < image.channels(); ++c) {
    first.clear();
    second.clear();
    for (std::size_t y = 0; y < image.height(); ++y) {
      for (std::size_t x = 0; x + 1 < image.width(); ++x) {
        first.push_back(image.at(y, x, c));
        second.push_back(image.at(y, x + 1, c));
      }
    }
    out[c].horizontal = pearson(first, second);
    first.clear();
    second.clear();
    for (std::size_t y = 0; y + 1 < image.height(); ++y) {
      for (std::size_t x = 0; x < image.width(); ++x) {
        first.push_back(image.at(y, x, c));
        second.push_back(image.at(y + 1, x, c));
      }
    }
    out[c].vertical = pearson(first, second);
  }
  return out;
}

double mean_abs_adjacent_correlation(const ImageBuffer& image) {
  const auto corr = adjacent_correlation(image);
  double sum = 0.0;
  for (const auto& c : corr) sum += 0.5 * (std::abs(c.horizontal) + std::abs(c.vertical));
  return sum / static_cast<double>(corr.size());
}

ImageBuffer residual_enhance(const ImageBuffer& cover, const ImageBuffer& container) {
  require_same_shape(cover, container, "residual_enhance");
  const std::size_t n = cover.height() * cover.width();
  const std::size_t ch = cover.channels();
  std::vector<double> diff(n, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t c = 0; c < ch; ++c) {
      diff[p] += std::abs(double(cover.pixels()[p * ch + c]) - double(container.pixels()[p * ch + c]));
    }
    diff[p] /= static_cast<double>(ch);
  }
  const auto [lo, hi] = std::minmax_element(diff.begin(), diff.end());
  ImageBuffer out(cover.height(), cover.width(), 1);
  if (*hi > *lo) {
    const double scale = 255.0 / (*hi - *lo);
    const double base = *lo;
    for (std::size_t p = 0; p < n; ++p) out.pixels()[p] = static_cast<std::uint8_t>(std::lround((diff[p] - base) * scale));
  }
  return out;
}

double image_similarity(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_shape(a, b, "image_similarity");
  std::vector<double> va(a.pixels().begin(), a.pixels().end());
  std::vector<double> vb(b.pixels().begin(), b.pixels().end());
  return pearson(va, vb);
}

// ---------------------------------------------------------------------------
// Synthetic images

SynthKind parse_synth_kind(std::string_view name) {
  if (name == "gradients") return SynthKind::gradients;
  if (name == "shapes") return SynthKind::shapes;
  if (name == "texture") return SynthKind::texture;
  if (name == "mixed") return SynthKind::mixed;
  fail(ErrorKind::invalid_argument, "unknown dataset kind '" + std::string(name) + "' (gradients|shapes|texture|mixed)");
}

std::string_view synth_kind_name(SynthKind kind) {
  switch (kind) {
    case SynthKind::gradients: return "gradients";
    case SynthKind::shapes: return "shapes";
    case SynthKind::texture: return "texture";
    case SynthKind::mixed: return "mixed";
  }
  return "mixed";
}

namespace {

using Color = std::array<double, 3>;

Color random_color(SplitMix64& rng) { return {rng.uniform(0, 255), rng.uniform(0, 255), rng.uniform(0, 255)}; }

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); }

// Linear two-colour ramp at a random angle. Every channel spans at least 64
// levels so no channel is flat.
void paint_gradient(ImageBuffer& img, SplitMix64& rng, double min_span) {
  Color from{}, to{};
  for (std::size_t c = 0; c < 3; ++c) {
    const double span = rng.uniform(min_span, 255.0);
    const double lo = rng.uniform(0.0, 255.0 - span);
    from[c] = lo;
    to[c] = lo + span;
    if (rng.next() & 1) std::swap(from[c], to[c]);
  }
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ux = std::cos(angle), uy = std::sin(angle);
  const double w = static_cast<double>(img.width() - 1), h = static_cast<double>(img.height() - 1);
  const double corners[4] = {0.0, ux * w, uy * h, ux * w + uy * h};
  const double lo = *std::min_element(corners, corners + 4);
  const double hi = *std::max_element(corners, corners + 4);
  const double range = hi > lo ? hi - lo : 1.0;
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      const double t = (ux * double(x) + uy * double(y) - lo) / range;
      for (std::size_t c = 0; c < img.channels(); ++c) img.at(y, x, c) = to_byte(from[c] + t * (to[c] - from[c]));
    }
  }
}

void paint_shapes(ImageBuffer& img, SplitMix64& rng) {
  paint_gradient(img, rng, 32.0);
  const double size = static_cast<double>(img.width());
  const std::size_t count = 1 + rng.below(4);
  for (std::size_t s = 0; s < count; ++s) {
    const Color color = random_color(rng);
    const double cx = rng.uniform(0, size), cy = rng.uniform(0, size);
    const double rx = rng.uniform(0.1, 0.35) * size, ry = rng.uniform(0.1, 0.35) * size;
    const bool disc = rng.next() & 1;
    for (std::size_t y = 0; y < img.height(); ++y) {
      for (std::size_t x = 0; x < img.width(); ++x) {
        const double dx = (double(x) + 0.5 - cx) / rx, dy = (double(y) + 0.5 - cy) / ry;
        const bool inside = disc ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (!inside) continue;
        for (std::size_t c = 0; c < img.channels(); ++c) img.at(y, x, c) = to_byte(color[c]);
      }
    }
  }
}

// Two octaves of smoothstep-interpolated value noise per channel.
void paint_texture(ImageBuffer& img, SplitMix64& rng) {
  const std::size_t size = std::max(img.width(), img.height());
  std::vector<double> accum(img.width() * img.height() * img.channels(), 0.0);
  double weight_total = 0.0;
  const std::size_t base_cell = std::max<std::size_t>(2, size / (2 + rng.below(3)));
  for (int octave = 0; octave < 2; ++octave) {
    const std::size_t cell = std::max<std::size_t>(2, base_cell >> octave);
    const double weight = octave == 0 ? 1.0 : 0.5;
    const std::size_t gx = img.width() / cell + 2, gy = img.height() / cell + 2;
    for (std::size_t c = 0; c < img.channels(); ++c) {
      std::vector<double> lattice(gx * gy);
      for (double& v : lattice) v = rng.uniform(0.0, 255.0);
      for (std::size_t y = 0; y < img.height(); ++y) {
        const double fy = double(y) / double(cell);
        const auto iy = static_cast<std::size_t>(fy);
        double ty = fy - double(iy);
        ty = ty * ty * (3 - 2 * ty);
        for (std::size_t x = 0; x < img.width(); ++x) {
          const double fx = double(x) / double(cell);
          const auto ix = static_cast<std::size_t>(fx);
          double tx = fx - double(ix);
          tx = tx * tx * (3 - 2 * tx);
          const double a = lattice[iy * gx + ix], b = lattice[iy * gx + ix + 1];
          const double d = lattice[(iy + 1) * gx + ix], e = lattice[(iy + 1) * gx + ix + 1];
          const double top = a + tx * (b - a), bottom = d + tx * (e - d);
          accum[(y * img.width() + x) * img.channels() + c] += weight * (top + ty * (bottom - top));
        }
      }
    }
    weight_total += weight;
  }
  for (std::size_t i = 0; i < accum.size(); ++i) img.pixels()[i] = to_byte(accum[i] / weight_total);
}

}  // namespace

ImageBuffer synth_image(std::uint64_t seed, std::size_t index, std::size_t size, SynthKind kind, std::size_t channels) {
  if (size < 2) fail(ErrorKind::invalid_argument, "synthetic images must be at least 2x2");
  SplitMix64 rng(SplitMix64(seed ^ (0xD1B54A32D192ED03ULL * (static_cast<std::uint64_t>(index) + 1))).next());
  ImageBuffer img(size, size, channels);
  if (kind == SynthKind::mixed) kind = static_cast<SynthKind>(index % 3);
  switch (kind) {
    case SynthKind::gradients: paint_gradient(img, rng, 64.0); break;
    case SynthKind::shapes: paint_shapes(img, rng); break;
    case SynthKind::texture: paint_texture(img, rng); break;
    case SynthKind::mixed: break;
  }
  return img;
}

std::vector<ImageBuffer> synth_dataset(std::uint64_t seed, std::size_t count, std::size_t size, SynthKind kind,
                                       std::size_t channels) {
  std::vector<ImageBuffer> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(synth_image(seed, i, size, kind, channels));
  return out;
}

}  // namespace stego
