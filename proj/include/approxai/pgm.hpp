#pragma once
// ASCII PGM (P2) heatmaps. Values are scaled linearly so the minimum maps to
// 0 and the maximum to 255; a constant map is written as all zeros.

#include <algorithm>
#include <cmath>
#include <string>

#include "approxai/error.hpp"
#include "approxai/matrix.hpp"

namespace approxai {

[[nodiscard]] inline std::string pgm_text(const Matrix<double>& m) {
  if (m.empty()) throw Error(Errc::empty_matrix, "heatmap of an empty matrix");
  const auto [lo_it, hi_it] = std::minmax_element(m.data().begin(), m.data().end());
  const double lo = *lo_it, hi = *hi_it;
  std::string out = "P2\n" + std::to_string(m.cols()) + " " + std::to_string(m.rows()) + "\n255\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      long level = 0;
      if (hi > lo) level = std::lround((m(r, c) - lo) / (hi - lo) * 255.0);
      if (c) out += " ";
      out += std::to_string(std::clamp(level, 0L, 255L));
    }
    out += "\n";
  }
  return out;
}

}  // namespace approxai
