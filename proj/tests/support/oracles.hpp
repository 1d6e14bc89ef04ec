#pragma once

// Independent reference implementations used to check the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "stego/rng.hpp"
#include "stego/tensor.hpp"

namespace oracle {

// Direct six-loop same-padded cross-correlation on [H,W,C] / [kH,kW,Cin,Cout].
template <class T>
stego::BasicTensor<T> direct_conv(const stego::BasicTensor<T>& in, const stego::BasicTensor<T>& w,
                                  const stego::BasicTensor<T>& b) {
  const long H = static_cast<long>(in.dim(0)), W = static_cast<long>(in.dim(1)), C = static_cast<long>(in.dim(2));
  const long KH = static_cast<long>(w.dim(0)), KW = static_cast<long>(w.dim(1)), CO = static_cast<long>(w.dim(3));
  const long top = (KH - 1) / 2, left = (KW - 1) / 2;
  stego::BasicTensor<T> out({in.dim(0), in.dim(1), w.dim(3)});
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      for (long co = 0; co < CO; ++co) {
        double acc = b[static_cast<std::size_t>(co)];
        for (long ky = 0; ky < KH; ++ky) {
          for (long kx = 0; kx < KW; ++kx) {
            const long sy = y + ky - top, sx = x + kx - left;
            if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
            for (long ci = 0; ci < C; ++ci) {
              acc += double(in[static_cast<std::size_t>((sy * W + sx) * C + ci)]) *
                     double(w[static_cast<std::size_t>(((ky * KW + kx) * C + ci) * CO + co)]);
            }
          }
        }
        out[static_cast<std::size_t>((y * W + x) * CO + co)] = static_cast<T>(acc);
      }
    }
  }
  return out;
}

template <class T>
stego::BasicTensor<T> random_tensor(stego::Shape shape, stego::SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  stego::BasicTensor<T> t(std::move(shape));
  for (T& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Central difference of f with respect to x[index]; x is restored afterwards.
inline double central_difference(const std::function<double()>& f, double& x, double step) {
  const double saved = x;
  x = saved + step;
  const double up = f();
  x = saved - step;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * step);
}

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale == 0.0 ? 0.0 : std::abs(analytic - numeric) / scale;
}

// Scalar loop Adam with the standard moment recursions and eps inside the root.
struct ReferenceAdam {
  double lr, b1, b2, eps;
  std::vector<double> m, v;
  int t = 0;

  ReferenceAdam(std::size_t n, double lr_, double b1_ = 0.9, double b2_ = 0.999, double eps_ = 1e-8)
      : lr(lr_), b1(b1_), b2(b2_), eps(eps_), m(n, 0.0), v(n, 0.0) {}

  void step(std::vector<double>& theta, const std::vector<double>& g) {
    ++t;
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      theta[i] -= lr * (m[i] / c1) / std::sqrt(v[i] / c2 + eps);
    }
  }
};

// Seed 42 permutations produced by a standalone SplitMix64 + Fisher-Yates script.
inline const std::vector<std::uint32_t> kPerm42Grid2 = {1, 3, 0, 2};
inline const std::vector<std::uint32_t> kPerm42Grid14 = {
    134, 13,  176, 100, 30,  187, 154, 112, 136, 99,  152, 33,  150, 78,  6,   25,  189, 161, 155, 29,
    122, 193, 8,   59,  195, 57,  64,  190, 9,   89,  183, 43,  139, 105, 149, 140, 87,  86,  49,  164,
    44,  180, 46,  19,  146, 56,  55,  32,  172, 124, 0,   111, 40,  92,  173, 60,  144, 159, 109, 160,
    135, 116, 85,  147, 125, 50,  34,  90,  93,  72,  191, 156, 141, 26,  62,  65,  163, 185, 69,  123,
    194, 177, 108, 23,  51,  119, 71,  110, 169, 179, 2,   192, 75,  73,  15,  68,  137, 188, 148, 67,
    175, 70,  52,  17,  170, 80,  76,  184, 79,  178, 143, 162, 129, 28,  83,  1,   58,  37,  96,  11,
    98,  97,  102, 20,  84,  113, 117, 114, 39,  128, 133, 153, 5,   81,  130, 35,  4,   157, 77,  182,
    166, 3,   45,  22,  27,  53,  142, 74,  21,  171, 48,  101, 118, 167, 24,  82,  14,  120, 42,  10,
    61,  103, 127, 106, 138, 131, 186, 158, 132, 126, 47,  174, 107, 104, 12,  168, 181, 16,  88,  18,
    36,  121, 95,  94,  91,  38,  115, 63,  151, 41,  165, 7,   66,  54,  31,  145};

}  // namespace oracle
