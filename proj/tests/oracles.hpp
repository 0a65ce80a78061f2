#pragma once

#include <algorithm>
#include <cmath>

#include "rainsr/image.hpp"

// Brute-force metric references, written independently of src/evaluation.cpp.
namespace rainsr::testing {

inline double oracle_psnr(const Image& a, const Image& b) {
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a.data[i]) - b.data[i];
    se += d * d;
  }
  const double mse = se / a.size();
  return mse == 0.0 ? 100.0 : std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

// Windowed statistics computed per position with two-pass moments.
inline double oracle_ssim(const Image& a, const Image& b) {
  double g[11][11];
  double gs = 0.0;
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2.0 * 1.5 * 1.5));
      gs += g[i][j];
    }
  }
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  int count = 0;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y + 11 <= a.height; ++y) {
      for (int x = 0; x + 11 <= a.width; ++x) {
        double ma = 0, mb = 0;
        for (int i = 0; i < 11; ++i) {
          for (int j = 0; j < 11; ++j) {
            ma += g[i][j] / gs * a.at(y + i, x + j, c);
            mb += g[i][j] / gs * b.at(y + i, x + j, c);
          }
        }
        double va = 0, vb = 0, cv = 0;
        for (int i = 0; i < 11; ++i) {
          for (int j = 0; j < 11; ++j) {
            const double da = a.at(y + i, x + j, c) - ma;
            const double db = b.at(y + i, x + j, c) - mb;
            va += g[i][j] / gs * da * da;
            vb += g[i][j] / gs * db * db;
            cv += g[i][j] / gs * da * db;
          }
        }
        total += (2 * ma * mb + c1) * (2 * cv + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    }
  }
  return total / count;
}

}  // namespace rainsr::testing
