#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "stego/cipher.hpp"
#include "stego/error.hpp"
#include "support/oracles.hpp"

using namespace stego;

namespace {

ImageBuffer random_image(std::size_t h, std::size_t w, std::size_t c, SplitMix64& rng) {
  ImageBuffer img(h, w, c);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

}  // namespace

TEST(SplitMix64, KnownFirstOutput) {
  SplitMix64 rng(0);
  EXPECT_EQ(rng.next(), 0xe220a8397b1dcdafULL);
}

TEST(DeriveKey, GoldenPermutations) {
  EXPECT_EQ(derive_key(42, 2).perm, oracle::kPerm42Grid2);
  ASSERT_EQ(oracle::kPerm42Grid14.size(), 196u);
  EXPECT_EQ(derive_key(42, 14).perm, oracle::kPerm42Grid14);
}

TEST(DeriveKey, IdentityAndBijection) {
  EXPECT_EQ(derive_key(123, 1).perm, std::vector<std::uint32_t>{0});
  for (std::uint64_t seed : {0ull, 1ull, 99ull, 0xFFFFFFFFFFFFFFFFull}) {
    for (std::size_t g : {2, 3, 7, 14, 20}) EXPECT_TRUE(is_bijection(derive_key(seed, g).perm));
  }
  EXPECT_EQ(derive_key(5, 8), derive_key(5, 8));
  EXPECT_NE(derive_key(5, 8).perm, derive_key(6, 8).perm);
  EXPECT_THROW(derive_key(1, 0), Error);
  EXPECT_FALSE(is_bijection({0, 0, 1}));
  EXPECT_FALSE(is_bijection({0, 3}));
}

TEST(Encrypt, HandTracedReversal) {
  ImageBuffer img(2, 2, 1, std::vector<std::uint8_t>{10, 20, 30, 40});
  const PermutationKey key = key_from_permutation(2, {3, 2, 1, 0});
  const ImageBuffer enc = encrypt(img, key);
  EXPECT_EQ(enc, ImageBuffer(2, 2, 1, std::vector<std::uint8_t>{40, 30, 20, 10}));
  EXPECT_EQ(decrypt(enc, key), img);
}

TEST(Encrypt, BlocksMoveWithAllChannels) {
  // 4x2 RGB, grid 2: blocks are 2x1. perm [1,0,3,2] swaps left/right halves.
  SplitMix64 rng(1);
  const ImageBuffer img = random_image(4, 2, 3, rng);
  const ImageBuffer enc = encrypt(img, key_from_permutation(2, {1, 0, 3, 2}));
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_EQ(enc.at(y, 0, c), img.at(y, 1, c));
      EXPECT_EQ(enc.at(y, 1, c), img.at(y, 0, c));
    }
  }
}

TEST(Encrypt, NonSquareBlocksAndIdentity) {
  SplitMix64 rng(2);
  const ImageBuffer img = random_image(6, 9, 3, rng);
  const PermutationKey key = derive_key(3, 3);
  const ImageBuffer enc = encrypt(img, key);
  // Destination block i holds source block perm[i].
  for (std::size_t i = 0; i < 9; ++i) {
    const std::size_t s = key.perm[i];
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t col = 0; col < 3; ++col) {
        for (std::size_t c = 0; c < 3; ++c) {
          EXPECT_EQ(enc.at((i / 3) * 2 + r, (i % 3) * 3 + col, c), img.at((s / 3) * 2 + r, (s % 3) * 3 + col, c));
        }
      }
    }
  }
  EXPECT_EQ(encrypt(img, derive_key(77, 1)), img);
  EXPECT_EQ(decrypt(img, key_from_permutation(3, {0, 1, 2, 3, 4, 5, 6, 7, 8})), img);
}

TEST(Encrypt, RoundTripAndHistogramOnRandomInputs) {
  SplitMix64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const std::size_t g = std::vector<std::size_t>{1, 2, 4, 7, 14}[i % 5];
    const std::size_t h = g * (1 + rng.below(4)), w = g * (1 + rng.below(4));
    const ImageBuffer img = random_image(h, w, i % 2 ? 3 : 1, rng);
    const PermutationKey key = derive_key(rng.next(), g);
    const ImageBuffer enc = encrypt(img, key);
    EXPECT_EQ(decrypt(enc, key), img);
    EXPECT_EQ(histogram(enc), histogram(img));
  }
}

TEST(Encrypt, IndivisibleDimensionsSuggestSizes) {
  try {
    encrypt(ImageBuffer(256, 256, 3), derive_key(1, 14));
    FAIL() << "expected a data error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find("252 or 266"), std::string::npos) << e.what();
  }
  EXPECT_THROW(decrypt(ImageBuffer(10, 12, 1), derive_key(1, 4)), Error);
}

TEST(Keyspace, Values) {
  EXPECT_EQ(keyspace(1).log10_permutations, 0.0);
  EXPECT_NEAR(keyspace(4).log10_permutations, std::log10(24.0), 1e-12);
  EXPECT_NEAR(keyspace(4).log2_permutations, std::log2(24.0), 1e-12);
  EXPECT_NEAR(keyspace(4).log10_permutations, 1.3802, 1e-4);
  const double l196 = keyspace(196).log10_permutations;
  EXPECT_GE(l196, 365.5);
  EXPECT_LE(l196, 366.0);
  // 196! ~ 5.08e365
  EXPECT_NEAR(std::pow(10.0, l196 - 365.0), 5.08, 0.01);
  EXPECT_THROW(keyspace(0), Error);
}

TEST(BruteForceYears, Values) {
  EXPECT_LT(brute_force_years(1, 1.0), 0.0);
  EXPECT_NEAR(brute_force_years(4, 1.0), std::log10(24.0 / 31'557'600.0), 1e-12);
  EXPECT_NEAR(brute_force_years(4, 1.0), -6.12, 0.005);
  const double y = brute_force_years(196, 1e16);
  EXPECT_GE(y, 341.5);
  EXPECT_LE(y, 342.5);
  EXPECT_THROW(brute_force_years(4, 0.0), Error);
}

TEST(KeyFile, FormatParseAndFiles) {
  const PermutationKey key = derive_key(42, 14);
  EXPECT_EQ(format_key_file(key), "SGKEY1 42 14\n");
  EXPECT_EQ(parse_key_file("SGKEY1 42 14\n"), key);
  EXPECT_EQ(parse_key_file("SGKEY1 18446744073709551615 3"), derive_key(18446744073709551615ull, 3));
  for (const char* bad : {"", "SGKEY2 1 2\n", "SGKEY1 1\n", "SGKEY1 -1 2\n", "SGKEY1 1 0\n", "SGKEY1 1 2 3\n",
                          "SGKEY1 1x 2\n"}) {
    EXPECT_THROW(parse_key_file(bad), Error) << bad;
  }
  const auto path = std::filesystem::temp_directory_path() / "stego_test_key.sgkey";
  save_key(path.string(), key);
  EXPECT_EQ(load_key(path.string()), key);
  std::FILE* f = std::fopen(path.string().c_str(), "rb");
  char buf[32] = {};
  const std::size_t n = std::fread(buf, 1, sizeof buf, f);
  std::fclose(f);
  EXPECT_EQ(std::string(buf, n), "SGKEY1 42 14\n");
  std::filesystem::remove(path);
  EXPECT_THROW(load_key("/nonexistent/k"), Error);
}

TEST(CorrelationTrend, DecreasesWithOrderOnGradients) {
  // 20 synthetic gradient images at 112x112 tile evenly for grids 2, 4, 8, 14.
  double prev = 2.0;
  const auto images = synth_dataset(1, 20, 112, SynthKind::gradients);
  const double plain = [&] {
    double s = 0.0;
    for (const auto& img : images) s += mean_abs_adjacent_correlation(img);
    return s / 20.0;
  }();
  for (std::size_t g : {2, 4, 8, 14}) {
    double s = 0.0;
    for (std::size_t i = 0; i < images.size(); ++i) {
      s += mean_abs_adjacent_correlation(encrypt(images[i], derive_key(100 + i, g)));
    }
    const double mean = s / 20.0;
    EXPECT_LE(mean, prev) << "grid " << g;
    EXPECT_LT(mean, plain);
    prev = mean;
  }
}
