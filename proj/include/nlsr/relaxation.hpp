#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "nlsr/method.hpp"

namespace nlsr {

/// ||increment|| at or below this fraction of ||u0|| counts as a zero increment.
inline constexpr double zero_increment_threshold = 1e-14;

struct GammaResult {
  double gamma = 1.0;
  double increment_norm = 0.0;
  double denominator = 0.0; // ||increment||^2, 0 on the zero-increment branch
};

/// Relaxation coefficient making ||v + gamma * increment|| = mass0, anchored
/// to the initial norm: gamma = 1 - (||v + inc||^2 - mass0^2) / ||inc||^2.
inline GammaResult compute_gamma_detailed(const SpectralState& v, const SpectralState& increment, double mass0) {
  if (!(mass0 > 0.0)) throw ConfigError("compute_gamma: reference norm must be > 0");
  v.check_same_grid(increment);
  double inc2 = 0.0;
  double next2 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    inc2 += std::norm(increment[i]);
    next2 += std::norm(v[i] + increment[i]);
  }
  inc2 *= two_pi;
  next2 *= two_pi;
  GammaResult r;
  r.increment_norm = std::sqrt(inc2);
  if (r.increment_norm <= zero_increment_threshold * mass0) return r;
  r.denominator = inc2;
  r.gamma = 1.0 - (next2 - mass0 * mass0) / inc2;
  return r;
}

inline double compute_gamma(const SpectralState& v, const SpectralState& increment, double mass0) {
  return compute_gamma_detailed(v, increment, mass0).gamma;
}

struct RelaxedStep {
  SpectralState state;
  double gamma = 1.0;
  double t_next = 0.0;
  double increment_norm = 0.0;
  double denominator = 0.0;
};

namespace detail {

inline void require_admissible_gamma(double gamma, double t) {
  if (!(gamma > 0.0 && gamma < 2.0)) {
    std::ostringstream os;
    os << "relaxation coefficient " << gamma << " outside (0, 2) at t = " << t << "; time step too coarse";
    throw RelaxationFailure(os.str(), gamma, t);
  }
}

inline RelaxedStep relax(const SpectralState& x, SpectralState increment, double t, double tau, double mass0,
                         bool force_unit_gamma) {
  const GammaResult g = force_unit_gamma ? GammaResult{1.0, l2_norm(increment), 0.0}
                                         : compute_gamma_detailed(x, increment, mass0);
  require_admissible_gamma(g.gamma, t);
  increment *= g.gamma;
  increment += x;
  return {std::move(increment), g.gamma, t + g.gamma * tau, g.increment_norm, g.denominator};
}

} // namespace detail

/// One relaxed step of a twisted-variable kernel at relaxed time t_tilde.
inline RelaxedStep relaxed_step_v(const SpectralState& v, double t_tilde, double tau, const StepKernel& kernel,
                                  double mass0, bool force_unit_gamma = false) {
  return detail::relax(v, kernel_increment_v(kernel, v, t_tilde, tau), t_tilde, tau, mass0, force_unit_gamma);
}

/// One relaxed step of the u-form LRI1 scheme: u + gamma (Psi(u) - u).
inline RelaxedStep rlri_u_step(const SpectralState& u, double t_tilde, double tau, const StepKernel& kernel,
                               double mass0, bool force_unit_gamma = false) {
  if (kernel.id != KernelId::LRI1) throw ConfigError("u-relaxation is defined for the LRI1 kernel only");
  SpectralState increment = kernel_step_u(kernel, u, tau);
  increment -= u;
  return detail::relax(u, std::move(increment), t_tilde, tau, mass0, force_unit_gamma);
}

// ---------------------------------------------------------------------------
// Trajectory driver

enum class EndpointPolicy {
  /// Last step relaxed with its size s solved from t + gamma(s) s = T, so
  /// every stored state keeps the initial mass.
  RelaxedMatched,
  /// Last step unrelaxed with size T - t (mass not conserved on that step).
  Unrelaxed,
};

/// Relaxed runs may take at most this many times the nominal T/tau steps.
inline constexpr double max_step_factor = 10.0;

struct IntegrateOptions {
  bool force_unit_gamma = false;
  EndpointPolicy endpoint = EndpointPolicy::RelaxedMatched;
  std::vector<double> snapshot_times; // ascending
  double blowup_limit = 1e6;
};

struct StepRecord {
  std::size_t n = 0;
  double t_start = 0.0;    // relaxed time at which the step was taken
  double t_end = 0.0;      // relaxed time reached
  double gamma = 1.0;
  double mass_rel_err = 0.0; // | ||u_{n+1}|| - ||u0|| | / ||u0||
  bool completion = false;
};

struct Snapshot {
  double requested_time = 0.0;
  double time = 0.0;
  SpectralState u;
};

struct Trajectory {
  std::vector<StepRecord> steps;
  std::vector<Snapshot> snapshots;
  SpectralState final_state; // u at final_time
  double final_time = 0.0;
  double mass0 = 0.0;

  double max_mass_rel_err() const {
    double m = 0.0;
    for (const auto& s : steps) m = std::max(m, s.mass_rel_err);
    return m;
  }
  double min_mass_rel_err() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : steps) m = std::min(m, s.mass_rel_err);
    return steps.empty() ? 0.0 : m;
  }
  /// Mean |gamma_n - 1| over all steps.
  double d_gamma() const {
    if (steps.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& s : steps) sum += std::abs(s.gamma - 1.0);
    return sum / static_cast<double>(steps.size());
  }
};

namespace detail {

// Advances the working variable x (v for twisted kernels, u otherwise).
class Stepper {
public:
  Stepper(const MethodSpec& method, double mass0, bool force_unit)
      : method_(method), mass0_(mass0), force_unit_(force_unit),
        twisted_(method.relax == RelaxMode::V_RELAX || (method.relax == RelaxMode::NONE && !has_u_form(method.kernel.id))) {}

  bool twisted() const { return twisted_; }
  bool relaxed() const { return method_.relax != RelaxMode::NONE; }

  RelaxedStep step(const SpectralState& x, double t, double tau, bool relax) const {
    const StepKernel& k = method_.kernel;
    if (twisted_) {
      SpectralState inc = kernel_increment_v(k, x, t, tau);
      if (!relax) return {x + inc, 1.0, t + tau, l2_norm(inc), 0.0};
      return detail::relax(x, std::move(inc), t, tau, mass0_, force_unit_);
    }
    if (method_.relax == RelaxMode::U_RELAX && relax) return rlri_u_step(x, t, tau, k, mass0_, force_unit_);
    return {kernel_step_u(k, x, tau), 1.0, t + tau, 0.0, 0.0};
  }

  SpectralState to_u(const SpectralState& x, double t) const { return twisted_ ? free_flow(x, t) : x; }

private:
  const MethodSpec& method_;
  double mass0_;
  bool force_unit_;
  bool twisted_;
};

inline void guard_blowup(const SpectralState& x, double limit, double t) {
  const auto& modes = x.grid()->modes;
  double l2 = 0.0, h1 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = std::norm(x[i]);
    l2 += a;
    h1 += (1.0 + static_cast<double>(modes[i]) * modes[i]) * a;
  }
  l2 = sqrt_two_pi * std::sqrt(l2);
  h1 = sqrt_two_pi * std::sqrt(h1);
  if (!std::isfinite(l2) || !std::isfinite(h1) || l2 > limit || h1 > limit) {
    std::ostringstream os;
    os << "blow-up guard tripped at t = " << t << " (L2 = " << l2 << ", H1 = " << h1 << ")";
    throw NumericError(os.str());
  }
}

} // namespace detail

/// Integrates u0 to time T with nominal step tau. Relaxed modes advance the
/// clock by gamma_n tau; the last step lands exactly on T.
inline Trajectory integrate(const MethodSpec& method, const SpectralState& u0, double T, double tau,
                            const IntegrateOptions& opts = {}) {
  method.validate();
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("final time T must be finite and > 0");
  detail::require_positive_step(tau);
  if (tau > T) throw ConfigError("time step exceeds the final time");
  require_finite(u0, "initial data");

  Trajectory traj;
  traj.mass0 = l2_norm(u0);
  if (!(traj.mass0 > 0.0)) throw ConfigError("initial data has zero mass");
  const double mass0 = traj.mass0;

  const detail::Stepper stepper(method, mass0, opts.force_unit_gamma);
  SpectralState x = u0; // e^{i 0 Delta} v = u at t = 0
  double t = 0.0;
  std::size_t next_snapshot = 0;

  auto record = [&](const RelaxedStep& s, double t_start, bool completion) {
    const SpectralState u = stepper.to_u(s.state, s.t_next);
    const double err = std::abs(l2_norm(u) - mass0) / mass0;
    traj.steps.push_back({traj.steps.size(), t_start, s.t_next, s.gamma, err, completion});
    while (next_snapshot < opts.snapshot_times.size() && s.t_next >= opts.snapshot_times[next_snapshot]) {
      traj.snapshots.push_back({opts.snapshot_times[next_snapshot], s.t_next, u});
      ++next_snapshot;
    }
  };

  const double slack = tau * (1.0 + 1e-12);
  // gamma_n near 0 passes the (0, 2) test but stalls the relaxed clock
  const double step_budget = max_step_factor * std::ceil(T / tau) + 16.0;
  for (;;) {
    const double remaining = T - t;
    if (remaining <= 0.0) break;
    if (remaining > slack) {
      if (static_cast<double>(traj.steps.size()) >= step_budget) {
        std::ostringstream os;
        os << "relaxed time stalled at t = " << t << " after " << traj.steps.size() << " steps (last gamma "
           << traj.steps.back().gamma << "); time step too coarse";
        throw NumericError(os.str());
      }
      RelaxedStep s = stepper.step(x, t, tau, true);
      if (T - s.t_next > 1e-12 * tau) {
        detail::guard_blowup(s.state, opts.blowup_limit, s.t_next);
        record(s, t, false);
        x = std::move(s.state);
        t = s.t_next;
        continue;
      }
      // a long relaxed step would reach or pass T; redo it as the completion step
    }

    RelaxedStep last;
    if (!stepper.relaxed() || opts.endpoint == EndpointPolicy::Unrelaxed) {
      last = stepper.step(x, t, remaining, false);
    } else {
      double s = remaining;
      for (int it = 0;; ++it) {
        last = stepper.step(x, t, s, true);
        const double s_new = remaining / last.gamma;
        if (std::abs(s_new - s) <= 4.0 * std::numeric_limits<double>::epsilon() * remaining || it >= 60) break;
        if (s_new > 2.0 * slack) break; // gamma < 1/2 on a short step: keep the last admissible size
        s = s_new;
      }
    }
    last.t_next = T;
    detail::guard_blowup(last.state, opts.blowup_limit, T);
    record(last, t, true);
    x = std::move(last.state);
    t = T;
    break;
  }

  traj.final_time = t;
  traj.final_state = stepper.to_u(x, t);
  return traj;
}

} // namespace nlsr
