#include "stego/cipher.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "stego/error.hpp"
#include "stego/rng.hpp"

namespace stego {

PermutationKey derive_key(std::uint64_t seed, std::size_t grid_side) {
  if (grid_side == 0) fail(ErrorKind::invalid_argument, "grid_side must be >= 1");
  if (grid_side > 0xFFFF) fail(ErrorKind::invalid_argument, "grid_side too large");
  PermutationKey key;
  key.seed = seed;
  key.grid_side = grid_side;
  key.perm.resize(grid_side * grid_side);
  std::iota(key.perm.begin(), key.perm.end(), 0u);
  SplitMix64 rng(seed);
  for (std::size_t i = key.perm.size() - 1; i > 0; --i) {
    const std::size_t j = rng.below(i + 1);
    std::swap(key.perm[i], key.perm[j]);
  }
  return key;
}

bool is_bijection(const std::vector<std::uint32_t>& perm) {
  std::vector<bool> seen(perm.size(), false);
  for (std::uint32_t v : perm) {
    if (v >= perm.size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

PermutationKey key_from_permutation(std::size_t grid_side, std::vector<std::uint32_t> perm) {
  if (grid_side == 0 || perm.size() != grid_side * grid_side || !is_bijection(perm)) {
    fail(ErrorKind::invalid_argument, "permutation is not a bijection on grid_side^2 blocks");
  }
  return PermutationKey{0, grid_side, std::move(perm)};
}

void check_divisible(std::size_t height, std::size_t width, std::size_t grid_side) {
  if (grid_side == 0) fail(ErrorKind::invalid_argument, "grid_side must be >= 1");
  if (height % grid_side == 0 && width % grid_side == 0 && height >= grid_side && width >= grid_side) return;
  auto suggest = [grid_side](std::size_t v) {
    const std::size_t down = (v / grid_side) * grid_side;
    const std::size_t up = down + grid_side;
    std::string s;
    if (down > 0) s += std::to_string(down) + " or ";
    return s + std::to_string(up);
  };
  fail(ErrorKind::data, "image " + std::to_string(height) + "x" + std::to_string(width) +
                            " does not tile into a " + std::to_string(grid_side) + "x" + std::to_string(grid_side) +
                            " block grid; resize or pad to height " + suggest(height) + " and width " +
                            suggest(width));
}

namespace {

// Copies source block perm[i] to destination block i, or the reverse.
ImageBuffer scramble(const ImageBuffer& image, const PermutationKey& key, bool inverse) {
  check_divisible(image.height(), image.width(), key.grid_side);
  if (key.perm.size() != key.blocks()) fail(ErrorKind::invalid_argument, "key permutation has the wrong length");
  const std::size_t bh = image.height() / key.grid_side;
  const std::size_t bw = image.width() / key.grid_side;
  const std::size_t row_bytes = bw * image.channels();
  ImageBuffer out(image.height(), image.width(), image.channels());
  for (std::size_t dst = 0; dst < key.blocks(); ++dst) {
    const std::size_t src = key.perm[dst];
    const std::size_t from = inverse ? dst : src;
    const std::size_t to = inverse ? src : dst;
    const std::size_t fy = (from / key.grid_side) * bh, fx = (from % key.grid_side) * bw;
    const std::size_t ty = (to / key.grid_side) * bh, tx = (to % key.grid_side) * bw;
    for (std::size_t r = 0; r < bh; ++r) {
      const std::uint8_t* s = &image.pixels()[((fy + r) * image.width() + fx) * image.channels()];
      std::uint8_t* d = &out.pixels()[((ty + r) * image.width() + tx) * image.channels()];
      std::copy_n(s, row_bytes, d);
    }
  }
  return out;
}

}  // namespace

ImageBuffer encrypt(const ImageBuffer& image, const PermutationKey& key) { return scramble(image, key, false); }

ImageBuffer decrypt(const ImageBuffer& image, const PermutationKey& key) { return scramble(image, key, true); }

Keyspace keyspace(std::uint64_t n_blocks) {
  if (n_blocks == 0) fail(ErrorKind::invalid_argument, "keyspace needs at least one block");
  double ln = 0.0;
  for (std::uint64_t k = 2; k <= n_blocks; ++k) ln += std::log(static_cast<double>(k));
  return {ln / std::log(10.0), ln / std::log(2.0)};
}

double brute_force_years(std::uint64_t n_blocks, double ops_per_second) {
  if (!(ops_per_second > 0.0)) fail(ErrorKind::invalid_argument, "ops_per_second must be > 0");
  return keyspace(n_blocks).log10_permutations - std::log10(ops_per_second) - std::log10(kSecondsPerYear);
}

std::string format_key_file(const PermutationKey& key) {
  return "SGKEY1 " + std::to_string(key.seed) + " " + std::to_string(key.grid_side) + "\n";
}

PermutationKey parse_key_file(const std::string& text) {
  std::istringstream in(text);
  std::string magic, seed_text, grid_text, extra;
  in >> magic >> seed_text >> grid_text;
  if (magic != "SGKEY1" || seed_text.empty() || grid_text.empty() || (in >> extra)) {
    fail(ErrorKind::data, "malformed key file (expected \"SGKEY1 <seed> <grid_side>\")");
  }
  std::uint64_t seed = 0;
  std::size_t grid = 0;
  auto parse = [](const std::string& s, auto& value, const char* what) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) fail(ErrorKind::data, std::string("bad ") + what + " in key file");
  };
  parse(seed_text, seed, "seed");
  parse(grid_text, grid, "grid_side");
  if (grid == 0) fail(ErrorKind::data, "key file grid_side must be >= 1");
  return derive_key(seed, grid);
}

void save_key(const std::string& path, const PermutationKey& key) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::invalid_argument, "cannot open '" + path + "' for writing");
  out << format_key_file(key);
  if (!out) fail(ErrorKind::invalid_argument, "failed writing '" + path + "'");
}

PermutationKey load_key(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::invalid_argument, "cannot open key file '" + path + "'");
  return parse_key_file(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
}

}  // namespace stego
