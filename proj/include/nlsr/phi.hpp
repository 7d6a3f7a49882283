#pragma once

#include <cmath>
#include <complex>

namespace nlsr {

using cplx = std::complex<double>;

namespace detail {

// Below this modulus the Taylor series is used. The closed forms lose
// roughly eps/|z| (phi1) and eps/|z|^2 (phi2) relative accuracy, so the
// switch sits well above the tiny-argument regime.
inline constexpr double phi_series_radius = 1.0;

// sum_{n>=0} z^n / (n! (n + j)), j = 1, 2; 24 terms reach eps for |z| < 1.
inline cplx phi_series(cplx z, int j) {
  cplx sum = 0.0;
  cplx power = 1.0;
  double factorial = 1.0;
  for (int n = 0; n < 24; ++n) {
    if (n > 0) factorial *= n;
    sum += power / (factorial * (n + j));
    power *= z;
  }
  return sum;
}

} // namespace detail

/// phi1(z) = int_0^1 e^{zs} ds = (e^z - 1)/z, phi1(0) = 1.
inline cplx phi1(cplx z) {
  if (std::abs(z) < detail::phi_series_radius) return detail::phi_series(z, 1);
  return (std::exp(z) - 1.0) / z;
}

/// phi2(z) = int_0^1 s e^{zs} ds = (z e^z - e^z + 1)/z^2, phi2(0) = 1/2.
inline cplx phi2(cplx z) {
  if (std::abs(z) < detail::phi_series_radius) return detail::phi_series(z, 2);
  const cplx ez = std::exp(z);
  return (z * ez - ez + 1.0) / (z * z);
}

/// phi_j on the imaginary axis, z = i y. Uses e^{iy} - 1 = -2 sin^2(y/2) + i sin y
/// so phi1 stays cancellation-free for every y.
inline cplx phi1_imag(double y) {
  if (std::abs(y) < detail::phi_series_radius) return detail::phi_series({0.0, y}, 1);
  const double h = std::sin(0.5 * y);
  return {std::sin(y) / y, 2.0 * h * h / y};
}

inline cplx phi2_imag(double y) {
  if (std::abs(y) < detail::phi_series_radius) return detail::phi_series({0.0, y}, 2);
  const cplx z{0.0, y};
  const cplx ez{std::cos(y), std::sin(y)};
  return (z * ez - ez + 1.0) / (z * z);
}

} // namespace nlsr
