#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "nlsr/error.hpp"
#include "nlsr/fft.hpp"
#include "nlsr/phi.hpp"

namespace nlsr {

using cplx = std::complex<double>;
using Field = std::vector<cplx>; // values on the physical nodes

inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline const double sqrt_two_pi = std::sqrt(two_pi);

/// Torus discretization with K Fourier modes, stored in FFT order
/// (0, 1, ..., K/2-1, -K/2, ..., -1), and nodes x_j = 2 pi j / K.
struct Grid {
  std::size_t K = 0;
  std::vector<int> modes;
  std::vector<double> nodes;

  /// Storage position of mode k, |k| <= K/2 (k = K/2 aliases to -K/2).
  std::size_t index_of(int k) const {
    const auto n = static_cast<long>(K);
    return static_cast<std::size_t>(((k % n) + n) % n);
  }
};

using GridPtr = std::shared_ptr<const Grid>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline GridPtr make_grid(std::size_t K) {
  if (K < 4 || !is_power_of_two(K))
    throw ConfigError("grid size K must be a power of two >= 4, got " + std::to_string(K));
  auto g = std::make_shared<Grid>();
  g->K = K;
  g->modes.resize(K);
  g->nodes.resize(K);
  const long half = static_cast<long>(K / 2);
  for (std::size_t j = 0; j < K; ++j) {
    const long jj = static_cast<long>(j);
    g->modes[j] = static_cast<int>(jj < half ? jj : jj - static_cast<long>(K));
    g->nodes[j] = two_pi * static_cast<double>(j) / static_cast<double>(K);
  }
  return g;
}

/// Nonlinearity lambda |u|^{2p} u.
struct NonlinearityParams {
  double lambda = 1.0;
  int p = 1;

  void validate() const {
    if (p < 1) throw ConfigError("nonlinearity power p must be >= 1");
    if (lambda == 0.0 || !std::isfinite(lambda))
      throw ConfigError("nonlinearity strength lambda must be finite and nonzero");
  }
};

/// Fourier coefficients f^(k) ~ (1/2pi) int e^{-ikx} f dx of a torus field.
class SpectralState {
public:
  SpectralState() = default;
  explicit SpectralState(GridPtr grid) : grid_(std::move(grid)), coeffs_(grid_->K) {}
  SpectralState(GridPtr grid, std::vector<cplx> coeffs) : grid_(std::move(grid)), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != grid_->K) throw NumericError("coefficient vector length does not match grid");
  }

  const GridPtr& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return coeffs_.size(); }
  std::span<const cplx> coeffs() const noexcept { return coeffs_; }
  std::span<cplx> coeffs() noexcept { return coeffs_; }

  cplx& operator[](std::size_t i) { return coeffs_[i]; }
  const cplx& operator[](std::size_t i) const { return coeffs_[i]; }

  cplx at_mode(int k) const { return coeffs_[grid_->index_of(k)]; }
  cplx& at_mode(int k) { return coeffs_[grid_->index_of(k)]; }

  bool all_finite() const {
    return std::all_of(coeffs_.begin(), coeffs_.end(),
                       [](const cplx& c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); });
  }

  SpectralState& operator+=(const SpectralState& o) {
    check_same_grid(o);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
    return *this;
  }
  SpectralState& operator-=(const SpectralState& o) {
    check_same_grid(o);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
    return *this;
  }
  SpectralState& operator*=(cplx s) {
    for (auto& c : coeffs_) c *= s;
    return *this;
  }

  friend SpectralState operator+(SpectralState a, const SpectralState& b) { return a += b; }
  friend SpectralState operator-(SpectralState a, const SpectralState& b) { return a -= b; }
  friend SpectralState operator*(cplx s, SpectralState a) { return a *= s; }
  friend SpectralState operator*(SpectralState a, cplx s) { return a *= s; }

  void check_same_grid(const SpectralState& o) const {
    if (!grid_ || !o.grid_ || grid_->K != o.grid_->K) throw NumericError("spectral states live on different grids");
  }

private:
  GridPtr grid_;
  std::vector<cplx> coeffs_;
};

// ---------------------------------------------------------------------------
// Transforms

inline SpectralState to_frequency(std::span<const cplx> values, const GridPtr& grid) {
  if (values.size() != grid->K) throw NumericError("field length does not match grid");
  SpectralState out(grid);
  detail::fft_plan(grid->K).forward(values, out.coeffs());
  const double scale = 1.0 / static_cast<double>(grid->K);
  out *= scale;
  return out;
}

inline Field to_physical(const SpectralState& s) {
  Field out(s.size());
  detail::fft_plan(s.size()).backward(s.coeffs(), out);
  return out;
}

// ---------------------------------------------------------------------------
// Diagonal (Fourier multiplier) operators

/// e^{-i t k^2}, with k^2 t reduced modulo 2 pi in extended precision so
/// long horizons (t k^2 ~ 1e10) keep their phase.
inline cplx free_phase(int k, double t) {
  const long double x = static_cast<long double>(k) * static_cast<long double>(k) * static_cast<long double>(t);
  constexpr long double two_pi_l = 6.283185307179586476925286766559005768L;
  const long double reduced = x - two_pi_l * std::nearbyint(x / two_pi_l);
  const double r = static_cast<double>(reduced);
  return {std::cos(r), -std::sin(r)};
}

template <class Symbol>
SpectralState apply_symbol(SpectralState s, Symbol&& symbol) {
  const auto& modes = s.grid()->modes;
  for (std::size_t i = 0; i < s.size(); ++i) s[i] *= symbol(modes[i]);
  return s;
}

namespace detail {

enum class SymbolKind { Flow, Phi1, Phi2, PhiDiff };

// Per-thread memo of diagonal symbols. Steps at fixed tau reuse the same few
// tables over and over; tables are recomputed, never approximated.
inline const std::vector<cplx>& symbol_table(const Grid& grid, SymbolKind kind, double c) {
  struct Entry {
    std::size_t K;
    SymbolKind kind;
    double c;
    std::vector<cplx> values;
  };
  constexpr std::size_t capacity = 12;
  thread_local std::vector<Entry> entries;
  thread_local std::size_t next_slot = 0;
  for (const auto& e : entries)
    if (e.K == grid.K && e.kind == kind && e.c == c) return e.values;

  std::vector<cplx> values(grid.K);
  for (std::size_t i = 0; i < grid.K; ++i) {
    const int k = grid.modes[i];
    const double y = 2.0 * c * k * k;
    switch (kind) {
    case SymbolKind::Flow: values[i] = free_phase(k, c); break;
    case SymbolKind::Phi1: values[i] = phi1_imag(y); break;
    case SymbolKind::Phi2: values[i] = phi2_imag(y); break;
    case SymbolKind::PhiDiff: values[i] = phi1_imag(y) - phi2_imag(y); break;
    }
  }
  if (entries.size() < capacity) {
    entries.push_back({grid.K, kind, c, std::move(values)});
    return entries.back().values;
  }
  Entry& slot = entries[next_slot];
  next_slot = (next_slot + 1) % capacity;
  slot = {grid.K, kind, c, std::move(values)};
  return slot.values;
}

inline SpectralState apply_table(SpectralState s, const std::vector<cplx>& table, bool conjugated = false) {
  if (conjugated)
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= std::conj(table[i]);
  else
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= table[i];
  return s;
}

} // namespace detail

/// Linear Schroedinger flow e^{i t Delta}: mode k picks up e^{-i t k^2}.
inline SpectralState free_flow(SpectralState s, double t) {
  if (t == 0.0) return s;
  const auto& table = detail::symbol_table(*s.grid(), detail::SymbolKind::Flow, std::abs(t));
  return detail::apply_table(std::move(s), table, t < 0.0);
}

/// phi_j(-2 i c Delta): mode k is multiplied by phi_j(2 i c k^2).
inline SpectralState apply_phi(SpectralState s, int j, double c) {
  if (j != 1 && j != 2) throw ConfigError("apply_phi: index must be 1 or 2, got " + std::to_string(j));
  const auto kind = (j == 1) ? detail::SymbolKind::Phi1 : detail::SymbolKind::Phi2;
  return detail::apply_table(std::move(s), detail::symbol_table(*s.grid(), kind, c));
}

/// (phi_1 - phi_2)(-2 i c Delta) in one pass.
inline SpectralState apply_phi_difference(SpectralState s, double c) {
  return detail::apply_table(std::move(s), detail::symbol_table(*s.grid(), detail::SymbolKind::PhiDiff, c));
}

/// d/dx^{-1}: divide by ik off the zero mode, zero mode set to 0.
inline SpectralState inv_derivative(SpectralState s) {
  const auto& modes = s.grid()->modes;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const int k = modes[i];
    s[i] = (k == 0) ? cplx{0.0, 0.0} : s[i] / cplx{0.0, static_cast<double>(k)};
  }
  return s;
}

inline SpectralState derivative(SpectralState s) {
  return apply_symbol(std::move(s), [](int k) { return cplx{0.0, static_cast<double>(k)}; });
}

inline cplx zero_mode(const SpectralState& s) { return s[0]; }

// ---------------------------------------------------------------------------
// Norms

inline double l2_norm(const SpectralState& s) {
  double sum = 0.0;
  for (const auto& c : s.coeffs()) sum += std::norm(c);
  return sqrt_two_pi * std::sqrt(sum);
}

inline double hs_norm(const SpectralState& s, double order) {
  if (!(order >= 0.0)) throw ConfigError("Sobolev order must be >= 0");
  const auto& modes = s.grid()->modes;
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double k2 = static_cast<double>(modes[i]) * modes[i];
    sum += std::pow(1.0 + k2, order) * std::norm(s[i]);
  }
  return sqrt_two_pi * std::sqrt(sum);
}

/// L2 norm of a physical field via the trapezoidal rule (exact for the
/// band-limited interpolant).
inline double l2_norm_physical(std::span<const cplx> values) {
  double sum = 0.0;
  for (const auto& c : values) sum += std::norm(c);
  return std::sqrt(two_pi * sum / static_cast<double>(values.size()));
}

/// Copy a state onto a finer grid mode-by-mode (zero padding). The Nyquist
/// mode -K/2 is split evenly between +-K/2 so real fields stay real.
inline SpectralState embed(const SpectralState& s, const GridPtr& fine) {
  const std::size_t K = s.size();
  if (fine->K < K) throw ConfigError("embed: target grid is coarser than source");
  if (fine->K == K) return SpectralState(fine, {s.coeffs().begin(), s.coeffs().end()});
  SpectralState out(fine);
  const int half = static_cast<int>(K / 2);
  for (int k = -half + 1; k < half; ++k) out.at_mode(k) = s.at_mode(k);
  const cplx nyq = s.at_mode(-half);
  out.at_mode(-half) = 0.5 * nyq;
  out.at_mode(half) = 0.5 * nyq;
  return out;
}

// ---------------------------------------------------------------------------
// Pointwise products (plain pseudospectral, no dealiasing)

inline SpectralState pointwise_product(const SpectralState& a, const SpectralState& b) {
  a.check_same_grid(b);
  Field x = to_physical(a);
  const Field y = to_physical(b);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= y[i];
  return to_frequency(x, a.grid());
}

/// Coefficients of conj(a(x)): mode k holds conj(a^(-k)).
inline SpectralState conjugate(const SpectralState& a) {
  SpectralState out(a.grid());
  const std::size_t K = a.size();
  for (std::size_t i = 0; i < K; ++i) out[i] = std::conj(a[(K - i) % K]);
  return out;
}

inline cplx abs_power_times(cplx z, int q) {
  const double m = std::norm(z);
  double w = 1.0;
  for (int i = 0; i < q; ++i) w *= m;
  return w * z;
}

/// |a|^{2q} a.
inline SpectralState pointwise_power_abs(const SpectralState& a, int q) {
  if (q < 0) throw ConfigError("pointwise_power_abs: q must be >= 0");
  Field x = to_physical(a);
  for (auto& z : x) z = abs_power_times(z, q);
  return to_frequency(x, a.grid());
}

inline void require_finite(const SpectralState& s, const char* where) {
  if (!s.all_finite()) throw NumericError(std::string("non-finite state in ") + where);
}

/// H(u) = int |u_x|^2 + lambda/(p+1) |u|^{2p+2} dx (diagnostic only).
inline double energy(const SpectralState& u, const NonlinearityParams& params) {
  const auto& modes = u.grid()->modes;
  double kinetic = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) kinetic += static_cast<double>(modes[i]) * modes[i] * std::norm(u[i]);
  kinetic *= two_pi;
  const Field x = to_physical(u);
  double potential = 0.0;
  for (const auto& z : x) potential += std::pow(std::norm(z), params.p + 1);
  potential *= two_pi / static_cast<double>(x.size());
  return kinetic + params.lambda / (params.p + 1) * potential;
}

} // namespace nlsr
