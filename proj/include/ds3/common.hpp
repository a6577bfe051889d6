#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ds3 {

using cplx = std::complex<double>;

inline constexpr const char* version_string = "0.1.0";
inline constexpr double pi = 3.14159265358979323846;

// Error taxonomy. The CLI maps these onto its exit-code contract, so keep the
// categories stable: config_error -> 2, io_error -> 4, everything else -> 1.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct shape_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Neumaier-compensated accumulator. All quadratures and norms run through
// this so that identities asserted at 1e-12..1e-14 relative survive sums over
// 64^3 points.
class CompensatedSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double sq(double x) { return x * x; }

}  // namespace ds3
