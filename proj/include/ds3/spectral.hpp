#pragma once

#include <array>
#include <vector>

#include "ds3/fft.hpp"

namespace ds3 {

// sigma1(xi) = xi1^2 / |xi|^2, extended by sigma1(0) = 0. The zero-mode
// choice makes the operator annihilate constants, so only the mean-free part
// of a density enters the nonlocal coupling.
inline double sigma1_eval(double xi1, double xi2, double xi3) {
  double d = xi1 * xi1 + xi2 * xi2 + xi3 * xi3;
  if (d == 0.0) return 0.0;
  return xi1 * xi1 / d;
}

// Real even Fourier symbol sampled on the frequency lattice of a grid,
// stored in FFT slot order.
struct Multiplier {
  GridSpec grid;
  std::vector<double> symbol;

  Multiplier() = default;
  explicit Multiplier(const GridSpec& g) : grid(g), symbol(g.size(), 0.0) {}

  // f(xi1, xi2, xi3) -> double
  template <class F>
  static Multiplier from_symbol(const GridSpec& g, F&& f) {
    Multiplier m(g);
    std::size_t p = 0;
    for (int k1 = 0; k1 < g.n1; ++k1) {
      double xi1 = g.freq(0, k1);
      for (int k2 = 0; k2 < g.n2; ++k2) {
        double xi2 = g.freq(1, k2);
        for (int k3 = 0; k3 < g.n3; ++k3, ++p)
          m.symbol[p] = f(xi1, xi2, g.freq(2, k3));
      }
    }
    return m;
  }
};

inline Multiplier e1_multiplier(const GridSpec& g) {
  return Multiplier::from_symbol(g, sigma1_eval);
}

inline Multiplier e1sq_multiplier(const GridSpec& g) {
  return Multiplier::from_symbol(g, [](double a, double b, double c) {
    return sq(sigma1_eval(a, b, c));
  });
}

// inverse(symbol * forward(f)); one round trip through spectral space
inline ComplexField apply_multiplier(const ComplexField& f,
                                     const Multiplier& m) {
  check_same_grid(f.grid, m.grid, "apply_multiplier");
  ComplexField out = fft::forward(f);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= m.symbol[i];
  fft::inverse_inplace(out.grid, out.v.data());
  return out;
}

inline ComplexField e1_apply(const ComplexField& f) {
  return apply_multiplier(f, e1_multiplier(f.grid));
}

inline ComplexField e1sq_apply(const ComplexField& f) {
  return apply_multiplier(f, e1sq_multiplier(f.grid));
}

namespace detail {

// Signed angular frequencies per slot for one axis. For odd-order
// derivatives the Nyquist slot is zeroed so that real fields map to real
// fields; the Laplacian keeps it.
inline std::vector<double> axis_freqs(const GridSpec& g, int axis,
                                      bool zero_nyquist) {
  int n = g.n(axis);
  std::vector<double> xi(n);
  for (int k = 0; k < n; ++k) xi[k] = g.freq(axis, k);
  if (zero_nyquist) xi[n / 2] = 0.0;
  return xi;
}

}  // namespace detail

// All derivatives are spectral. Inputs are assumed resolved; no filtering.
inline ComplexField partial(const ComplexField& f, int axis) {
  ComplexField out = fft::forward(f);
  auto xi = detail::axis_freqs(f.grid, axis, true);
  const GridSpec& g = f.grid;
  std::size_t p = 0;
  for (int k1 = 0; k1 < g.n1; ++k1)
    for (int k2 = 0; k2 < g.n2; ++k2)
      for (int k3 = 0; k3 < g.n3; ++k3, ++p) {
        double w = axis == 0 ? xi[k1] : (axis == 1 ? xi[k2] : xi[k3]);
        out.v[p] *= cplx(0.0, w);
      }
  fft::inverse_inplace(g, out.v.data());
  return out;
}

inline std::array<ComplexField, 3> gradient(const ComplexField& f) {
  ComplexField hat = fft::forward(f);
  const GridSpec& g = f.grid;
  std::array<std::vector<double>, 3> xi = {detail::axis_freqs(g, 0, true),
                                           detail::axis_freqs(g, 1, true),
                                           detail::axis_freqs(g, 2, true)};
  std::array<ComplexField, 3> out = {ComplexField(g), ComplexField(g),
                                     ComplexField(g)};
  for (int a = 0; a < 3; ++a) {
    std::size_t p = 0;
    for (int k1 = 0; k1 < g.n1; ++k1)
      for (int k2 = 0; k2 < g.n2; ++k2)
        for (int k3 = 0; k3 < g.n3; ++k3, ++p) {
          double w = a == 0 ? xi[0][k1] : (a == 1 ? xi[1][k2] : xi[2][k3]);
          out[a].v[p] = hat.v[p] * cplx(0.0, w);
        }
    fft::inverse_inplace(g, out[a].v.data());
  }
  return out;
}

inline ComplexField laplacian(const ComplexField& f) {
  ComplexField out = fft::forward(f);
  const GridSpec& g = f.grid;
  auto x1 = detail::axis_freqs(g, 0, false);
  auto x2 = detail::axis_freqs(g, 1, false);
  auto x3 = detail::axis_freqs(g, 2, false);
  std::size_t p = 0;
  for (int k1 = 0; k1 < g.n1; ++k1)
    for (int k2 = 0; k2 < g.n2; ++k2)
      for (int k3 = 0; k3 < g.n3; ++k3, ++p)
        out.v[p] *= -(sq(x1[k1]) + sq(x2[k2]) + sq(x3[k3]));
  fft::inverse_inplace(g, out.v.data());
  return out;
}

// Checks the closed forms
//   xi1 d/dxi1 sigma1 = 2 xi1^2 (xi2^2 + xi3^2)/|xi|^4 = 2 sigma1 - 2 sigma1^2
// on every nonzero lattice point. The right side is 2s(1-s) with s in [0,1],
// so its true sup is 1/2; the a-priori bound is 4.
struct SymbolIdentityReport {
  double max_deviation = 0.0;  // |closed form - 2 sigma1 + 2 sigma1^2|
  double max_value = 0.0;      // sup of xi1 d/dxi1 sigma1 over the lattice
};

inline SymbolIdentityReport symbol_identity_check(const GridSpec& g) {
  SymbolIdentityReport rep;
  for (int k1 = 0; k1 < g.n1; ++k1) {
    double xi1 = g.freq(0, k1);
    for (int k2 = 0; k2 < g.n2; ++k2) {
      double xi2 = g.freq(1, k2);
      for (int k3 = 0; k3 < g.n3; ++k3) {
        double xi3 = g.freq(2, k3);
        double d = xi1 * xi1 + xi2 * xi2 + xi3 * xi3;
        if (d == 0.0) continue;
        double s = xi1 * xi1 / d;
        double lhs = 2.0 * xi1 * xi1 * (xi2 * xi2 + xi3 * xi3) / (d * d);
        double rhs = 2.0 * s - 2.0 * s * s;
        rep.max_deviation = std::max(rep.max_deviation, std::abs(lhs - rhs));
        rep.max_value = std::max(rep.max_value, lhs);
      }
    }
  }
  return rep;
}

struct CylindricalCheck {
  bool ok = false;
  double deviation = 0.0;  // max in-bin rms spread / sup-norm
};

// Tests invariance under rotations about the x1 axis. Lattice points in a
// fixed x1 slice with equal x2^2 + x3^2 must carry equal values; points are
// grouped by the exact integer radius class a^2 + b^2, which requires a
// square transverse section.
inline CylindricalCheck is_cylindrical(const ComplexField& f,
                                       double tol = 1e-8) {
  const GridSpec& g = f.grid;
  if (g.n2 != g.n3 || g.L2 != g.L3)
    throw usage_error("is_cylindrical: needs a square transverse section");
  double sup = sup_norm(f);
  CylindricalCheck res;
  if (sup == 0.0) {
    res.ok = true;
    return res;
  }
  int half = g.n2 / 2;
  std::size_t nkeys = std::size_t(2 * half * half) + 1;
  std::vector<int> count(nkeys, 0);
  std::vector<cplx> sum(nkeys, cplx(0.0));
  std::vector<double> spread(nkeys, 0.0);
  std::vector<std::size_t> touched;
  touched.reserve(g.size() / g.n1);
  double worst = 0.0;
  for (int i1 = 0; i1 < g.n1; ++i1) {
    touched.clear();
    for (int i2 = 0; i2 < g.n2; ++i2) {
      int a = i2 - half;
      for (int i3 = 0; i3 < g.n3; ++i3) {
        int b = i3 - half;
        std::size_t key = std::size_t(a * a + b * b);
        if (count[key] == 0) touched.push_back(key);
        count[key]++;
        sum[key] += f.at(i1, i2, i3);
      }
    }
    // two-pass standard deviation per bin; the means first, then the spread,
    // so bins that agree to 1e-14 are not swamped by cancellation
    for (int i2 = 0; i2 < g.n2; ++i2) {
      int a = i2 - half;
      for (int i3 = 0; i3 < g.n3; ++i3) {
        int b = i3 - half;
        std::size_t key = std::size_t(a * a + b * b);
        cplx mean = sum[key] / double(count[key]);
        spread[key] += std::norm(f.at(i1, i2, i3) - mean);
      }
    }
    for (std::size_t key : touched) {
      worst = std::max(worst, std::sqrt(spread[key] / count[key]));
      count[key] = 0;
      sum[key] = cplx(0.0);
      spread[key] = 0.0;
    }
  }
  res.deviation = worst / sup;
  res.ok = res.deviation <= tol;
  return res;
}

}  // namespace ds3
