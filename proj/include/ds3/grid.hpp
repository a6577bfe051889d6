#pragma once

#include <cstddef>

#include "ds3/common.hpp"

namespace ds3 {

// Periodic box [-L/2, L/2)^3 sampled on an n1 x n2 x n3 lattice with x3 the
// fastest-varying index. Spectral slots carry signed integer frequencies
// k in [-n/2, n/2) in FFT storage order; the angular frequency of slot k is
// xi = 2*pi*k/L.
struct GridSpec {
  int n1 = 0, n2 = 0, n3 = 0;
  double L1 = 0, L2 = 0, L3 = 0;

  GridSpec() = default;
  GridSpec(int n1_, int n2_, int n3_, double L1_, double L2_, double L3_)
      : n1(n1_), n2(n2_), n3(n3_), L1(L1_), L2(L2_), L3(L3_) {
    validate();
  }
  static GridSpec cubic(int n, double L) { return GridSpec(n, n, n, L, L, L); }

  void validate() const {
    for (int n : {n1, n2, n3})
      if (n < 8 || n % 2 != 0)
        throw config_error("grid: sample counts must be even and >= 8");
    for (double L : {L1, L2, L3})
      if (!(L > 0.0)) throw config_error("grid: box lengths must be positive");
  }

  std::size_t size() const {
    return std::size_t(n1) * std::size_t(n2) * std::size_t(n3);
  }
  int n(int axis) const { return axis == 0 ? n1 : (axis == 1 ? n2 : n3); }
  double L(int axis) const { return axis == 0 ? L1 : (axis == 1 ? L2 : L3); }
  double spacing(int axis) const { return L(axis) / n(axis); }
  double cell_volume() const { return spacing(0) * spacing(1) * spacing(2); }
  double volume() const { return L1 * L2 * L3; }

  // coordinate of sample i along an axis, box centered at the origin
  double coord(int axis, int i) const {
    return -0.5 * L(axis) + spacing(axis) * i;
  }
  // signed integer frequency of storage slot k
  int freq_index(int axis, int k) const {
    int nn = n(axis);
    return k < nn / 2 ? k : k - nn;
  }
  double freq(int axis, int k) const {
    return 2.0 * pi * freq_index(axis, k) / L(axis);
  }

  std::size_t index(int i1, int i2, int i3) const {
    return (std::size_t(i1) * n2 + i2) * n3 + i3;
  }

  bool operator==(const GridSpec&) const = default;
};

}  // namespace ds3
