#pragma once

#include <fftw3.h>

#include <map>
#include <mutex>
#include <new>
#include <tuple>

#include "ds3/field.hpp"

namespace ds3::fft {

// Plan cache keyed by grid shape. Plans are created with FFTW_ESTIMATE so
// planning is deterministic and does not touch the data. Planning is guarded
// by a mutex (the FFTW planner is not thread safe); execution through
// fftw_execute_dft on caller-owned buffers is.
namespace detail {

struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
};

inline PlanPair plans_for(const GridSpec& g) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int>, PlanPair> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(g.n1, g.n2, g.n3);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  fftw_complex* buf = fftw_alloc_complex(g.size());
  if (!buf) throw std::bad_alloc();
  unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  PlanPair pp;
  pp.fwd = fftw_plan_dft_3d(g.n1, g.n2, g.n3, buf, buf, FFTW_FORWARD, flags);
  pp.inv = fftw_plan_dft_3d(g.n1, g.n2, g.n3, buf, buf, FFTW_BACKWARD, flags);
  fftw_free(buf);
  if (!pp.fwd || !pp.inv) throw numeric_error("fft: planner failed");
  cache.emplace(key, pp);
  return pp;
}

}  // namespace detail

// Forward DFT in place, unnormalized plain sum over lattice indices.
inline void forward_inplace(const GridSpec& g, cplx* data) {
  detail::PlanPair pp = detail::plans_for(g);
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(pp.fwd, p, p);
}

// Inverse DFT in place; carries the full 1/N normalization so
// inverse(forward(f)) == f up to roundoff.
inline void inverse_inplace(const GridSpec& g, cplx* data) {
  detail::PlanPair pp = detail::plans_for(g);
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(pp.inv, p, p);
  double s = 1.0 / double(g.size());
  std::size_t n = g.size();
  for (std::size_t i = 0; i < n; ++i) data[i] *= s;
}

inline ComplexField forward(const ComplexField& f) {
  ComplexField out = f;
  forward_inplace(out.grid, out.v.data());
  return out;
}

inline ComplexField inverse(const ComplexField& f) {
  ComplexField out = f;
  inverse_inplace(out.grid, out.v.data());
  return out;
}

}  // namespace ds3::fft
