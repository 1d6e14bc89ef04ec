#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stego/imaging.hpp"

namespace stego {

/// Block-scrambling key. The image is cut into grid_side x grid_side equal
/// blocks; `perm[i]` names the source block placed at destination i
/// (both row-major). The permutation is always re-derived from the seed.
struct PermutationKey {
  std::uint64_t seed = 0;
  std::size_t grid_side = 1;
  std::vector<std::uint32_t> perm;

  std::size_t blocks() const { return grid_side * grid_side; }
  bool operator==(const PermutationKey&) const = default;
};

// Fisher-Yates over 0..n-1 driven by SplitMix64(seed): for i = n-1 down to 1,
// j = high64(next() * (i + 1)), swap(perm[i], perm[j]).
PermutationKey derive_key(std::uint64_t seed, std::size_t grid_side);

// Key built from an explicit permutation (testing and analysis). Throws
// unless `perm` is a bijection on 0..grid_side^2-1.
PermutationKey key_from_permutation(std::size_t grid_side, std::vector<std::uint32_t> perm);

bool is_bijection(const std::vector<std::uint32_t>& perm);

ImageBuffer encrypt(const ImageBuffer& image, const PermutationKey& key);
ImageBuffer decrypt(const ImageBuffer& image, const PermutationKey& key);

// Throws ErrorKind::data naming the nearest valid sizes when the image does
// not tile evenly into the key's grid.
void check_divisible(std::size_t height, std::size_t width, std::size_t grid_side);

struct Keyspace {
  double log10_permutations = 0.0;
  double log2_permutations = 0.0;
};

// log(n!) by exact summation of log(k), k = 2..n.
Keyspace keyspace(std::uint64_t n_blocks);

inline constexpr double kSecondsPerYear = 31'557'600.0;

// log10 of the years needed to try all n! arrangements.
double brute_force_years(std::uint64_t n_blocks, double ops_per_second);

// "SGKEY1 <seed> <grid_side>\n"
std::string format_key_file(const PermutationKey& key);
PermutationKey parse_key_file(const std::string& text);
void save_key(const std::string& path, const PermutationKey& key);
PermutationKey load_key(const std::string& path);

}  // namespace stego
