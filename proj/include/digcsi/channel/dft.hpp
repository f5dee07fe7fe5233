#pragma once

#include <cmath>
#include <numbers>

#include "digcsi/channel/scenario.hpp"

namespace digcsi::channel {

/// Unitary DFT matrix: F[m][n] = exp(-j 2 pi m n / N) / sqrt(N).
inline ComplexMatrix unitary_dft(std::size_t n) {
  ComplexMatrix f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      // reduce the index product first so large N keeps full phase accuracy
      const double turns = static_cast<double>((r * c) % n) / static_cast<double>(n);
      f(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          std::polar(scale, -2.0 * std::numbers::pi * turns);
    }
  }
  return f;
}

struct DftPair {
  ComplexMatrix delay;    // F_d, N_f x N_f
  ComplexMatrix angular;  // F_a, N_t x N_t

  DftPair(std::size_t subcarriers, std::size_t antennas)
      : delay(unitary_dft(subcarriers)), angular(unitary_dft(antennas)) {}
};

/// F_d * H * F_a^H
inline ComplexMatrix to_angular_delay(const ComplexMatrix& h, const DftPair& dft) {
  if (h.rows() != dft.delay.rows() || h.cols() != dft.angular.rows()) {
    throw ShapeError("to_angular_delay: CSI matrix is " + std::to_string(h.rows()) + "x" +
                     std::to_string(h.cols()) + " but the DFT pair expects " +
                     std::to_string(dft.delay.rows()) + "x" + std::to_string(dft.angular.rows()));
  }
  return dft.delay * h * dft.angular.adjoint();
}

}  // namespace digcsi::channel
