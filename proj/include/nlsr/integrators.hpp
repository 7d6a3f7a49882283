#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "nlsr/spectral.hpp"

namespace nlsr {

// Kernel roster. Increments (v-form) are Phi^(v) with v_{n+1} = v_n + Phi^(v_n);
// u-form kernels return the full next state.
enum class KernelId { LRI1, LRI_P, LRI2, STRANG, LAWSON, SLRI };

struct SolverOptions {
  double tolerance = 1e-14;
  int max_iterations = 100;
};

struct StepKernel {
  KernelId id = KernelId::LRI1;
  NonlinearityParams params;
  SolverOptions solver;

  void validate() const {
    params.validate();
    if (!(solver.tolerance > 0.0)) throw ConfigError("solver tolerance must be > 0");
    if (solver.max_iterations < 1) throw ConfigError("solver max_iterations must be >= 1");
    const bool cubic_only = id == KernelId::LRI1 || id == KernelId::LRI2 || id == KernelId::LAWSON || id == KernelId::SLRI;
    if (cubic_only && params.p != 1) throw ConfigError(std::string(kernel_name()) + " is a cubic scheme and needs p = 1");
  }

  std::string_view kernel_name() const { return kernel_id_name(id); }

  static std::string_view kernel_id_name(KernelId id) {
    switch (id) {
    case KernelId::LRI1: return "LRI1";
    case KernelId::LRI_P: return "LRI_P";
    case KernelId::LRI2: return "LRI2";
    case KernelId::STRANG: return "STRANG";
    case KernelId::LAWSON: return "LAWSON";
    case KernelId::SLRI: return "SLRI";
    }
    return "?";
  }
};

inline bool has_v_form(KernelId id) { return id == KernelId::LRI1 || id == KernelId::LRI_P || id == KernelId::LRI2; }
inline bool has_u_form(KernelId id) { return id != KernelId::LRI2; }
inline bool is_implicit(KernelId id) { return id == KernelId::LAWSON || id == KernelId::SLRI; }

namespace detail {

inline cplx ipow(cplx z, int n) {
  cplx r = 1.0;
  for (int i = 0; i < n; ++i) r *= z;
  return r;
}

inline void require_positive_step(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("time step must be finite and > 0");
}

inline SpectralState checked(SpectralState s, const char* where) {
  require_finite(s, where);
  return s;
}

// Physical values of phi-filtered (conj(w))^p, where the filter is
// phi1 - phi2 (which = 0) or phi2 (which = 2) at -2 i tau Delta.
inline Field filtered_conj_power(const Field& w, int p, int which, double tau, const GridPtr& grid) {
  Field c(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) c[i] = ipow(std::conj(w[i]), p);
  SpectralState s = to_frequency(c, grid);
  s = (which == 2) ? apply_phi(std::move(s), 2, tau) : apply_phi_difference(std::move(s), tau);
  return to_physical(s);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Second-order resonance-based scheme, cubic case

/// Twisted-variable increment psi_t^tau(v) for the cubic equation.
inline SpectralState psi_step_v(const SpectralState& v, double t, double tau, const NonlinearityParams& params) {
  if (params.p != 1) throw ConfigError("psi_step_v is the cubic scheme (p = 1)");
  detail::require_positive_step(tau);
  const double lam = params.lambda;
  const auto& grid = v.grid();

  // Flows at t +- tau are composed from the t and tau tables.
  const SpectralState g = free_flow(v, t);
  const Field f = to_physical(g);

  // -i lam tau e^{-it Delta}[ f^2 (phi1 - phi2) conj(f) ]
  const Field a = to_physical(apply_phi_difference(conjugate(g), tau));
  Field w1(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) w1[i] = f[i] * f[i] * a[i];
  SpectralState term1 = free_flow(to_frequency(w1, grid), -t) * cplx{0.0, -lam * tau};

  // -i lam tau e^{-i(t+tau)Delta}[ (e^{i(t+tau)Delta}v)^2 phi2 e^{-i(t-tau)Delta} conj(v) ]
  const Field fp = to_physical(free_flow(g, tau));
  const Field b = to_physical(apply_phi(conjugate(free_flow(g, -tau)), 2, tau));
  Field w2(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) w2[i] = fp[i] * fp[i] * b[i];
  SpectralState term2 = free_flow(free_flow(to_frequency(w2, grid), -tau), -t) * cplx{0.0, -lam * tau};

  // -lam^2 tau^2/2 e^{-it Delta}[ |f|^4 f ]
  Field w3(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) w3[i] = abs_power_times(f[i], 2);
  SpectralState term3 = free_flow(to_frequency(w3, grid), -t) * cplx{-0.5 * lam * lam * tau * tau, 0.0};

  term1 += term2;
  term1 += term3;
  return detail::checked(std::move(term1), "psi_step_v");
}

/// u-form step Psi_{1,2}^tau(u) for the cubic equation.
inline SpectralState lri1_step_u(const SpectralState& u, double tau, const NonlinearityParams& params) {
  if (params.p != 1) throw ConfigError("lri1_step_u is the cubic scheme (p = 1)");
  detail::require_positive_step(tau);
  const double lam = params.lambda;
  const auto& grid = u.grid();

  const Field f = to_physical(u);
  const Field a = to_physical(apply_phi_difference(conjugate(u), tau));
  Field w1(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) w1[i] = f[i] * f[i] * a[i];

  const Field ef = to_physical(free_flow(u, tau));
  const Field b = to_physical(free_flow(apply_phi(conjugate(u), 2, tau), tau));
  Field w2(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) w2[i] = ef[i] * ef[i] * b[i];

  Field w3(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) w3[i] = abs_power_times(f[i], 2);

  // e^{i tau Delta}[ u - i lam tau w1 - lam^2 tau^2/2 w3 ] - i lam tau w2
  SpectralState inner = to_frequency(w1, grid) * cplx{0.0, -lam * tau};
  inner += to_frequency(w3, grid) * cplx{-0.5 * lam * lam * tau * tau, 0.0};
  inner += u;
  SpectralState out = free_flow(std::move(inner), tau);
  out += to_frequency(w2, grid) * cplx{0.0, -lam * tau};
  return detail::checked(std::move(out), "lri1_step_u");
}

// ---------------------------------------------------------------------------
// Second-order scheme for general power p

/// Twisted-variable increment phi_t^tau(v) for lambda |u|^{2p} u.
inline SpectralState phi_p_step_v(const SpectralState& v, double t, double tau, const NonlinearityParams& params) {
  params.validate();
  detail::require_positive_step(tau);
  const int p = params.p;
  const double lam = params.lambda;
  const auto& grid = v.grid();

  const SpectralState g = free_flow(v, t);
  const Field f = to_physical(g);
  const Field a = detail::filtered_conj_power(f, p, 0, tau, grid);
  Field w1(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) w1[i] = detail::ipow(f[i], p + 1) * a[i];
  SpectralState term1 = free_flow(to_frequency(w1, grid), -t) * cplx{0.0, -lam * tau};

  const Field fp = to_physical(free_flow(g, tau));
  const Field fm = to_physical(free_flow(g, -tau));
  const Field b = detail::filtered_conj_power(fm, p, 2, tau, grid);
  Field w2(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) w2[i] = detail::ipow(fp[i], p + 1) * b[i];
  SpectralState term2 = free_flow(free_flow(to_frequency(w2, grid), -tau), -t) * cplx{0.0, -lam * tau};

  Field w3(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) w3[i] = abs_power_times(f[i], 2 * p);
  SpectralState term3 = free_flow(to_frequency(w3, grid), -t) * cplx{-0.5 * lam * lam * tau * tau, 0.0};

  term1 += term2;
  term1 += term3;
  return detail::checked(std::move(term1), "phi_p_step_v");
}

/// u-form step Psi_{p,2}^tau(u) for lambda |u|^{2p} u.
inline SpectralState lri_p_step_u(const SpectralState& u, double tau, const NonlinearityParams& params) {
  params.validate();
  detail::require_positive_step(tau);
  const int p = params.p;
  const double lam = params.lambda;
  const auto& grid = u.grid();

  const Field f = to_physical(u);
  const Field a = detail::filtered_conj_power(f, p, 0, tau, grid);
  Field w1(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) w1[i] = detail::ipow(f[i], p + 1) * a[i];

  const Field ef = to_physical(free_flow(u, tau));
  Field cp(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) cp[i] = detail::ipow(std::conj(f[i]), p);
  const Field b = to_physical(free_flow(apply_phi(to_frequency(cp, grid), 2, tau), tau));
  Field w2(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) w2[i] = detail::ipow(ef[i], p + 1) * b[i];

  Field w3(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) w3[i] = abs_power_times(f[i], 2 * p);

  SpectralState inner = to_frequency(w1, grid) * cplx{0.0, -lam * tau};
  inner += to_frequency(w3, grid) * cplx{-0.5 * lam * lam * tau * tau, 0.0};
  inner += u;
  SpectralState out = free_flow(std::move(inner), tau);
  out += to_frequency(w2, grid) * cplx{0.0, -lam * tau};
  return detail::checked(std::move(out), "lri_p_step_u");
}

// ---------------------------------------------------------------------------
// Fourier integrator with exact resonance splitting (cubic, 1-D)

/// J1(g): resonance term integrated along -2 k k3, with the zero-mode
/// corrections added as functions (the scalar ones as constants).
inline SpectralState resonance_j1(const SpectralState& g, double tau) {
  const auto& grid = g.grid();
  const Field gx = to_physical(g);
  const SpectralState dinv_gbar = inv_derivative(conjugate(g));
  const Field dinv_gbar_x = to_physical(dinv_gbar);

  Field g2x(gx.size());
  for (std::size_t i = 0; i < gx.size(); ++i) g2x[i] = gx[i] * gx[i];
  const SpectralState g2 = to_frequency(g2x, grid);

  // e^{-i tau d^2} d^{-1}[ (e^{-i tau d^2} d^{-1} conj g)(e^{i tau d^2} g^2) ]
  const Field lhs = to_physical(free_flow(dinv_gbar, -tau));
  const Field rhs = to_physical(free_flow(g2, tau));
  Field prod(gx.size());
  for (std::size_t i = 0; i < gx.size(); ++i) prod[i] = lhs[i] * rhs[i];
  SpectralState first = free_flow(inv_derivative(to_frequency(prod, grid)), -tau);

  // d^{-1}[ (d^{-1} conj g) g^2 ]
  for (std::size_t i = 0; i < gx.size(); ++i) prod[i] = dinv_gbar_x[i] * g2x[i];
  const SpectralState second = inv_derivative(to_frequency(prod, grid));

  SpectralState out = (first - second) * cplx{0.0, 0.5};

  const cplx g0bar = std::conj(zero_mode(g));
  Field cubic(gx.size());
  for (std::size_t i = 0; i < gx.size(); ++i) cubic[i] = std::norm(gx[i]) * gx[i];
  const cplx cubic0 = zero_mode(to_frequency(cubic, grid));

  out += g2 * (tau * g0bar);
  out[0] += tau * cubic0 - tau * g0bar * zero_mode(g2);
  return out;
}

/// J2(g): resonance term integrated along 2 k1 k2, zero modes of the two
/// undifferentiated factors added back.
inline SpectralState resonance_j2(const SpectralState& g, double tau) {
  const auto& grid = g.grid();
  const Field gx = to_physical(g);
  const SpectralState dinv_g = inv_derivative(g);

  Field sq = to_physical(free_flow(dinv_g, tau));
  for (auto& z : sq) z *= z;
  const Field shifted = to_physical(free_flow(to_frequency(sq, grid), -tau));
  const Field plain = to_physical(dinv_g);

  const cplx g0 = zero_mode(g);
  Field out(gx.size());
  for (std::size_t i = 0; i < gx.size(); ++i) {
    const cplx gbar = std::conj(gx[i]);
    out[i] = cplx{0.0, 0.5} * (shifted[i] - plain[i] * plain[i]) * gbar + tau * g0 * (2.0 * gx[i] - g0) * gbar;
  }
  return to_frequency(out, grid);
}

/// Increment of the Fourier integrator, phi_t^tau(v) - v.
inline SpectralState lri2_step_v(const SpectralState& v, double t, double tau, const NonlinearityParams& params) {
  if (params.p != 1) throw ConfigError("lri2_step_v is the cubic scheme (p = 1)");
  detail::require_positive_step(tau);
  const double lam = params.lambda;
  const auto& grid = v.grid();

  const SpectralState g = free_flow(v, t);
  const Field gx = to_physical(g);
  const Field j = to_physical(resonance_j1(g, tau) + resonance_j2(g, tau));

  Field w(gx.size());
  for (std::size_t i = 0; i < gx.size(); ++i) {
    const double phase = lam * tau * std::norm(gx[i]);
    w[i] = cplx{std::cos(phase), std::sin(phase)} * gx[i] - cplx{0.0, lam} * j[i];
  }
  SpectralState next = free_flow(to_frequency(w, grid), -t);
  next -= v;
  return detail::checked(std::move(next), "lri2_step_v");
}

// ---------------------------------------------------------------------------
// Comparators

/// Strang splitting: half free flow, exact phase rotation e^{-i lam tau |u|^{2p}}, half free flow.
inline SpectralState strang_step(const SpectralState& u, double tau, const NonlinearityParams& params) {
  params.validate();
  detail::require_positive_step(tau);
  Field x = to_physical(free_flow(u, 0.5 * tau));
  for (auto& z : x) {
    const double m = std::pow(std::norm(z), params.p);
    const double phase = -params.lambda * tau * m;
    z *= cplx{std::cos(phase), std::sin(phase)};
  }
  return detail::checked(free_flow(to_frequency(x, u.grid()), 0.5 * tau), "strang_step");
}

/// L2-preserving Lawson method. The stage L = -i lam |w + tau/2 L|^2 (w + tau/2 L),
/// w = e^{i tau/2 Delta} u, is solved by fixed-point iteration from L = -i lam |w|^2 w.
inline SpectralState lawson_step(const SpectralState& u, double tau, const NonlinearityParams& params,
                                 const SolverOptions& opts, int* iterations_out = nullptr) {
  if (params.p != 1) throw ConfigError("lawson_step is the cubic scheme (p = 1)");
  detail::require_positive_step(tau);
  const double lam = params.lambda;
  const Field w = to_physical(free_flow(u, 0.5 * tau));
  const std::size_t K = w.size();

  Field L(K), next(K);
  for (std::size_t i = 0; i < K; ++i) L[i] = cplx{0.0, -lam} * std::norm(w[i]) * w[i];

  double residual = 0.0;
  int it = 0;
  for (;;) {
    ++it;
    double diff = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
      const cplx m = w[i] + 0.5 * tau * L[i];
      next[i] = cplx{0.0, -lam} * std::norm(m) * m;
      diff += std::norm(next[i] - L[i]);
    }
    L.swap(next);
    residual = std::sqrt(two_pi * diff / static_cast<double>(K));
    // tolerance is relative to the stage size once |L| exceeds one
    if (residual <= opts.tolerance * std::max(1.0, l2_norm_physical(L))) break;
    if (!std::isfinite(residual) || it >= opts.max_iterations)
      throw ImplicitSolveError("Lawson fixed point did not converge", residual, it);
  }
  if (iterations_out) *iterations_out = it;

  SpectralState out = free_flow(u, tau);
  out += free_flow(to_frequency(L, u.grid()), 0.5 * tau) * cplx{tau, 0.0};
  return detail::checked(std::move(out), "lawson_step");
}

/// Right-hand side Psi_sym^tau(f) of the symplectic scheme for a given midpoint g,
/// evaluated term by term.
inline SpectralState slri_map(const SpectralState& f, const SpectralState& g, double tau, const NonlinearityParams& params) {
  const double lam = params.lambda;
  const auto& grid = f.grid();
  const cplx half_i{0.0, 0.5};
  const cplx minus_i_lam{0.0, -lam};

  const Field gx = to_physical(g);
  const std::size_t K = gx.size();
  const SpectralState dinv_g = inv_derivative(g);
  const SpectralState conj_dinv_g = conjugate(dinv_g);
  const Field conj_dinv_g_x = to_physical(conj_dinv_g);

  Field g2x(K), abs2x(K), cubicx(K), gbarx(K);
  for (std::size_t i = 0; i < K; ++i) {
    g2x[i] = gx[i] * gx[i];
    abs2x[i] = std::norm(gx[i]);
    cubicx[i] = abs2x[i] * gx[i];
    gbarx[i] = std::conj(gx[i]);
  }
  const SpectralState g2 = to_frequency(g2x, grid);
  const SpectralState abs2 = to_frequency(abs2x, grid);
  const SpectralState cubic = to_frequency(cubicx, grid);
  const SpectralState gbar = to_frequency(gbarx, grid);

  // first bracket
  const Field lhs = to_physical(free_flow(conj_dinv_g, -tau));
  const Field rhs = to_physical(free_flow(g2, tau));
  Field prod(K);
  for (std::size_t i = 0; i < K; ++i) prod[i] = lhs[i] * rhs[i];
  SpectralState bracket1 = inv_derivative(to_frequency(prod, grid)) * half_i;
  for (std::size_t i = 0; i < K; ++i) prod[i] = conj_dinv_g_x[i] * g2x[i];
  bracket1 -= free_flow(inv_derivative(to_frequency(prod, grid)), tau) * half_i;

  // second bracket (under e^{i tau d^2})
  Field sq = to_physical(free_flow(dinv_g, tau));
  for (auto& z : sq) z *= z;
  const Field shifted = to_physical(free_flow(to_frequency(sq, grid), -tau));
  const Field plain = to_physical(dinv_g);
  Field inner(K);
  for (std::size_t i = 0; i < K; ++i)
    inner[i] = half_i * gbarx[i] * shifted[i] - half_i * gbarx[i] * plain[i] * plain[i] - tau * cubicx[i];
  const SpectralState bracket2 = free_flow(to_frequency(inner, grid), tau);

  // third bracket: zero-mode terms
  const cplx g0 = zero_mode(g);
  const cplx g0bar = std::conj(g0);
  SpectralState bracket3 = free_flow(g2, tau) * g0bar;
  bracket3 += free_flow(abs2, tau) * (2.0 * g0);
  bracket3 -= free_flow(gbar, tau) * (g0 * g0);
  bracket3[0] += zero_mode(cubic) - g0bar * zero_mode(g2);
  bracket3 *= tau;

  SpectralState out = free_flow(f, tau);
  out += bracket1 * minus_i_lam;
  out += bracket2 * minus_i_lam;
  out += bracket3 * minus_i_lam;
  return out;
}

/// Symplectic low-regularity step. Solves g = (f + e^{-i tau d^2} Psi_sym(f; g))/2
/// by fixed-point iteration from g = f.
inline SpectralState slri_step(const SpectralState& u, double tau, const NonlinearityParams& params,
                               const SolverOptions& opts, int* iterations_out = nullptr) {
  if (params.p != 1) throw ConfigError("slri_step is the cubic scheme (p = 1)");
  detail::require_positive_step(tau);
  SpectralState g = u;
  SpectralState psi = slri_map(u, g, tau, params);
  double residual = 0.0;
  int it = 0;
  for (;;) {
    ++it;
    SpectralState next = free_flow(psi, -tau);
    next += u;
    next *= 0.5;
    residual = l2_norm(next - g);
    g = std::move(next);
    psi = slri_map(u, g, tau, params);
    if (residual <= opts.tolerance * std::max(1.0, l2_norm(g))) break;
    if (!std::isfinite(residual) || it >= opts.max_iterations)
      throw ImplicitSolveError("SLRI fixed point did not converge", residual, it);
  }
  if (iterations_out) *iterations_out = it;
  return detail::checked(std::move(psi), "slri_step");
}

// ---------------------------------------------------------------------------
// Dispatch

/// v-form increment at twisted time t.
inline SpectralState kernel_increment_v(const StepKernel& kernel, const SpectralState& v, double t, double tau) {
  switch (kernel.id) {
  case KernelId::LRI1: return psi_step_v(v, t, tau, kernel.params);
  case KernelId::LRI_P: return phi_p_step_v(v, t, tau, kernel.params);
  case KernelId::LRI2: return lri2_step_v(v, t, tau, kernel.params);
  default: break;
  }
  throw ConfigError(std::string(kernel.kernel_name()) + " has no twisted-variable form");
}

/// u-form step.
inline SpectralState kernel_step_u(const StepKernel& kernel, const SpectralState& u, double tau) {
  switch (kernel.id) {
  case KernelId::LRI1: return lri1_step_u(u, tau, kernel.params);
  case KernelId::LRI_P: return lri_p_step_u(u, tau, kernel.params);
  case KernelId::STRANG: return strang_step(u, tau, kernel.params);
  case KernelId::LAWSON: return lawson_step(u, tau, kernel.params, kernel.solver);
  case KernelId::SLRI: return slri_step(u, tau, kernel.params, kernel.solver);
  case KernelId::LRI2: break;
  }
  throw ConfigError(std::string(kernel.kernel_name()) + " has no u-form step");
}

/// A e^{ikx} e^{-i(k^2 + lam |A|^{2p}) t}.
inline SpectralState exact_plane_wave(const GridPtr& grid, cplx amplitude, int k, double t, const NonlinearityParams& params) {
  const int half = static_cast<int>(grid->K / 2);
  if (k <= -half || k >= half) throw ConfigError("plane-wave mode outside the resolved band");
  const double omega = static_cast<double>(k) * k + params.lambda * std::pow(std::norm(amplitude), params.p);
  // omega t reduced like the free phase
  const long double x = static_cast<long double>(omega) * t;
  constexpr long double two_pi_l = 6.283185307179586476925286766559005768L;
  const double r = static_cast<double>(x - two_pi_l * std::nearbyint(x / two_pi_l));
  SpectralState s(grid);
  s.at_mode(k) = amplitude * cplx{std::cos(r), -std::sin(r)};
  return s;
}

} // namespace nlsr
