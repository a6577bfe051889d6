#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ds3/grid.hpp"

namespace ds3 {

// Complex samples on a grid, one value per lattice point, x3 fastest.
struct ComplexField {
  GridSpec grid;
  std::vector<cplx> v;

  ComplexField() = default;
  explicit ComplexField(const GridSpec& g) : grid(g), v(g.size()) {}

  // f(x1, x2, x3) -> cplx (or anything convertible)
  template <class F>
  static ComplexField sample(const GridSpec& g, F&& f) {
    ComplexField out(g);
    std::size_t p = 0;
    for (int i1 = 0; i1 < g.n1; ++i1) {
      double x1 = g.coord(0, i1);
      for (int i2 = 0; i2 < g.n2; ++i2) {
        double x2 = g.coord(1, i2);
        for (int i3 = 0; i3 < g.n3; ++i3, ++p)
          out.v[p] = cplx(f(x1, x2, g.coord(2, i3)));
      }
    }
    return out;
  }

  cplx& at(int i1, int i2, int i3) { return v[grid.index(i1, i2, i3)]; }
  const cplx& at(int i1, int i2, int i3) const {
    return v[grid.index(i1, i2, i3)];
  }

  bool finite() const {
    for (const cplx& z : v)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
  }
};

// Real samples, same layout. Used for cached geometry tables and |u|^2.
struct RealField {
  GridSpec grid;
  std::vector<double> v;

  RealField() = default;
  explicit RealField(const GridSpec& g) : grid(g), v(g.size(), 0.0) {}

  template <class F>
  static RealField sample(const GridSpec& g, F&& f) {
    RealField out(g);
    std::size_t p = 0;
    for (int i1 = 0; i1 < g.n1; ++i1) {
      double x1 = g.coord(0, i1);
      for (int i2 = 0; i2 < g.n2; ++i2) {
        double x2 = g.coord(1, i2);
        for (int i3 = 0; i3 < g.n3; ++i3, ++p)
          out.v[p] = f(x1, x2, g.coord(2, i3));
      }
    }
    return out;
  }
};

inline void check_same_grid(const GridSpec& a, const GridSpec& b,
                            const char* who) {
  if (!(a == b)) throw shape_error(std::string(who) + ": grid mismatch");
}

inline double l2_norm_sq(const ComplexField& f) {
  CompensatedSum s;
  for (const cplx& z : f.v) s.add(std::norm(z));
  return s.value() * f.grid.cell_volume();
}
inline double l2_norm(const ComplexField& f) { return std::sqrt(l2_norm_sq(f)); }

inline double sup_norm(const ComplexField& f) {
  double m = 0.0;
  for (const cplx& z : f.v) m = std::max(m, std::abs(z));
  return m;
}

inline double l2_distance(const ComplexField& a, const ComplexField& b) {
  check_same_grid(a.grid, b.grid, "l2_distance");
  CompensatedSum s;
  for (std::size_t i = 0; i < a.v.size(); ++i) s.add(std::norm(a.v[i] - b.v[i]));
  return std::sqrt(s.value() * a.grid.cell_volume());
}

// real L2 pairing Re<a, b> = h^3 sum Re(a conj(b))
inline double pairing(const ComplexField& a, const ComplexField& b) {
  check_same_grid(a.grid, b.grid, "pairing");
  CompensatedSum s;
  for (std::size_t i = 0; i < a.v.size(); ++i)
    s.add(a.v[i].real() * b.v[i].real() + a.v[i].imag() * b.v[i].imag());
  return s.value() * a.grid.cell_volume();
}

}  // namespace ds3
