#pragma once

#include <array>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nlsr/initial_data.hpp"
#include "nlsr/relaxation.hpp"

namespace nlsr {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// The phi functions under test, on the imaginary axis. Replaceable so the
/// suite itself can be checked against a broken implementation.
struct PhiUnderTest {
  std::function<cplx(double)> phi1 = phi1_imag;
  std::function<cplx(double)> phi2 = phi2_imag;
};

struct VerifyOptions {
  PhiUnderTest phi;
  std::size_t samples = 1000000;
  std::uint64_t seed = 20240601;
};

namespace detail {

// 20-point Gauss-Legendre on [0, 1], composite over `panels` subintervals:
// an independent oracle for int_0^1 s^{j-1} e^{isy} ds.
inline cplx phi_quadrature(double y, int j) {
  static constexpr std::array<double, 10> x{0.0765265211334973, 0.2277858511416451, 0.3737060887154195,
                                            0.5108670019508271, 0.6360536807265150, 0.7463319064601508,
                                            0.8391169718222188, 0.9122344282513259, 0.9639719272779138,
                                            0.9931285991850949};
  static constexpr std::array<double, 10> w{0.1527533871307258, 0.1491729864726037, 0.1420961093183820,
                                            0.1316886384491766, 0.1181945319615184, 0.1019301198172404,
                                            0.0832767415767048, 0.0626720483341091, 0.0406014298003869,
                                            0.0176140071391521};
  const int panels = 8 + static_cast<int>(std::abs(y) / 2.0);
  const double h = 1.0 / panels;
  cplx sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * h;
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (double sgn : {-1.0, 1.0}) {
        const double s = mid + sgn * 0.5 * h * x[i];
        const double weight = 0.5 * h * w[i] * (j == 2 ? s : 1.0);
        sum += weight * cplx{std::cos(s * y), std::sin(s * y)};
      }
    }
  }
  return sum;
}

// Arguments spread over many scales, with half the pairs close together
// (where the Lipschitz bounds are tight).
struct SamplePairs {
  std::vector<double> x, y;
};

inline SamplePairs make_pairs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SamplePairs s;
  s.x.resize(n);
  s.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double scale = std::pow(10.0, -6.0 + 10.0 * unit_uniform(rng));
    const double a = scale * (2.0 * unit_uniform(rng) - 1.0);
    double b;
    if (i % 2 == 0) {
      b = a + scale * std::pow(10.0, -8.0 + 8.0 * unit_uniform(rng)) * (2.0 * unit_uniform(rng) - 1.0);
    } else {
      b = std::pow(10.0, -6.0 + 10.0 * unit_uniform(rng)) * (2.0 * unit_uniform(rng) - 1.0);
    }
    s.x[i] = a;
    s.y[i] = b;
  }
  return s;
}

inline std::string format_worst(double ratio, double at) {
  std::ostringstream os;
  os.precision(6);
  os << "worst ratio " << ratio << " at x = " << at;
  return os.str();
}

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

inline SpectralState random_state(const GridPtr& grid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SpectralState s(grid);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double k = std::abs(static_cast<double>(grid->modes[i]));
    s[i] = cplx{unit_uniform(rng) - 0.5, unit_uniform(rng) - 0.5} / (1.0 + k * k);
  }
  return normalized(std::move(s));
}

} // namespace detail

/// Fast property suite: phi bounds and Lipschitz inequalities on random
/// samples, transform and free-flow identities, relaxation anchoring,
/// twisted/untwisted consistency, and the plane-wave oracle.
inline std::vector<CheckResult> run_verify(const VerifyOptions& opts = {}) {
  std::vector<CheckResult> results;
  auto run = [&](const std::string& name, auto&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r{name, false, "", 0.0};
    try {
      body(r);
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    results.push_back(std::move(r));
  };

  const auto pairs = detail::make_pairs(opts.samples, opts.seed);
  const auto& phi1 = opts.phi.phi1;
  const auto& phi2 = opts.phi.phi2;
  constexpr double slack = 4e-16;

  auto bound_check = [&](const std::function<cplx(double)>& f, double bound) {
    return [&, bound](CheckResult& r) {
      double worst = 0.0, at = 0.0;
      for (double x : pairs.x) {
        const double ratio = std::abs(f(x)) / bound;
        if (!(ratio <= worst)) worst = ratio, at = x;
      }
      r.passed = worst <= 1.0 + slack;
      r.detail = detail::format_worst(worst, at);
    };
  };
  // |F(x) - F(y)| <= c |x - y|
  auto lipschitz_check = [&](std::function<cplx(double)> F, double c) {
    return [&, F, c](CheckResult& r) {
      double worst = 0.0, at = 0.0;
      for (std::size_t i = 0; i < pairs.x.size(); ++i) {
        const double x = pairs.x[i], y = pairs.y[i];
        const double d = std::abs(x - y);
        if (d == 0.0) continue;
        const double ratio = (std::abs(F(x) - F(y)) - slack) / (c * d);
        if (!(ratio <= worst)) worst = ratio, at = x;
      }
      r.passed = worst <= 1.0 + 1e-9;
      r.detail = detail::format_worst(worst, at);
    };
  };

  run("phi1-bound", bound_check(phi1, 1.0));
  run("phi2-bound", bound_check(phi2, 0.5));
  run("phi1-lipschitz", lipschitz_check(phi1, 0.5));
  run("phi2-lipschitz", lipschitz_check(phi2, 1.0 / 3.0));
  run("phi1-phase-lipschitz", lipschitz_check([&](double x) { return cplx{std::cos(x), std::sin(x)} * phi1(x); }, 2.0));
  run("phi2-phase-lipschitz", lipschitz_check([&](double x) { return cplx{std::cos(x), std::sin(x)} * phi2(x); }, 1.0));

  run("phi-quadrature", [&](CheckResult& r) {
    double worst = 0.0;
    for (std::size_t i = 0; i < 2000; ++i) {
      const double y = pairs.y[i] * 0.01;
      worst = std::max({worst, std::abs(phi1(y) - detail::phi_quadrature(y, 1)), std::abs(phi2(y) - detail::phi_quadrature(y, 2))});
    }
    r.passed = worst <= 1e-13;
    r.detail = "max deviation from quadrature " + detail::sci(worst);
  });

  const GridPtr grid = make_grid(256);
  const SpectralState u = detail::random_state(grid, opts.seed);

  run("transform-roundtrip", [&](CheckResult& r) {
    const double e = l2_norm(to_frequency(to_physical(u), grid) - u);
    const double iso = std::abs(l2_norm_physical(to_physical(u)) - l2_norm(u));
    r.passed = e <= 1e-12 && iso <= 1e-12;
    r.detail = "roundtrip " + detail::sci(e) + ", Parseval " + detail::sci(iso);
  });

  run("flow-isometry", [&](CheckResult& r) {
    double worst = 0.0;
    for (double t : {1e-3, 0.7, 13.0, 5000.0}) worst = std::max(worst, std::abs(l2_norm(free_flow(u, t)) - l2_norm(u)));
    r.passed = worst <= 1e-12;
    r.detail = "max norm change " + detail::sci(worst);
  });

  run("flow-semigroup", [&](CheckResult& r) {
    double worst = 0.0;
    for (auto [s, t] : {std::pair{0.3, 0.45}, {1.25, -0.5}, {2500.0, 2500.0}, {-7.0, 7.0}})
      worst = std::max(worst, l2_norm(free_flow(free_flow(u, s), t) - free_flow(u, s + t)));
    r.passed = worst <= 1e-12;
    r.detail = "max deviation " + detail::sci(worst);
  });

  run("gamma-anchoring", [&](CheckResult& r) {
    const double m0 = l2_norm(u);
    double worst = 0.0;
    for (std::uint64_t k = 1; k <= 20; ++k) {
      SpectralState inc = detail::random_state(grid, opts.seed + k) * cplx{1e-2 * k, 0.0};
      inc -= u * cplx{0.0, 1e-2};
      const double g = compute_gamma(u, inc, m0);
      worst = std::max(worst, std::abs(l2_norm(u + inc * cplx{g, 0.0}) - m0) / m0);
    }
    const MethodSpec m = *lookup_method("RLRI1-v");
    const Trajectory traj = integrate(m, rough_data(grid, 2.0, opts.seed), 0.2, 0.01);
    worst = std::max(worst, traj.max_mass_rel_err());
    r.passed = worst <= 1e-13;
    r.detail = "max relative mass deviation " + detail::sci(worst);
  });

  run("twisted-consistency", [&](CheckResult& r) {
    const NonlinearityParams params;
    double worst = 0.0;
    for (double t : {0.0, 0.37, 12.5}) {
      const double tau = 0.01;
      const SpectralState v = free_flow(u, -t);
      const SpectralState twisted = free_flow(v + psi_step_v(v, t, tau, params), t + tau);
      worst = std::max(worst, l2_norm(twisted - lri1_step_u(u, tau, params)));
      worst = std::max(worst, l2_norm(phi_p_step_v(v, t, tau, params) - psi_step_v(v, t, tau, params)));
    }
    r.passed = worst <= 1e-12;
    r.detail = "max deviation " + detail::sci(worst);
  });

  run("gamma-pinned-equivalence", [&](CheckResult& r) {
    const NonlinearityParams params;
    const double tau = 0.01;
    const int N = 50;
    SpectralState v = u;
    for (int n = 0; n < N; ++n) v += psi_step_v(v, n * tau, tau, params);
    IntegrateOptions o;
    o.force_unit_gamma = true;
    const Trajectory traj = integrate(*lookup_method("RLRI1-v"), u, N * tau, tau, o);
    const double e = l2_norm(traj.final_state - free_flow(v, N * tau));
    r.passed = e <= 1e-14 && traj.final_time == N * tau;
    r.detail = "deviation " + detail::sci(e);
  });

  run("plane-wave-oracle", [&](CheckResult& r) {
    const NonlinearityParams params;
    const cplx A{0.6, 0.3};
    const int k = 2;
    std::ostringstream os;
    bool ok = true;
    // Strang is exact on plane waves
    SpectralState s = exact_plane_wave(grid, A, k, 0.0, params);
    for (int n = 0; n < 10; ++n) s = strang_step(s, 0.05, params);
    const double strang = l2_norm(s - exact_plane_wave(grid, A, k, 0.5, params));
    ok = ok && strang <= 1e-10;
    os << "Strang " << strang;
    // local order 3 for the explicit kernels: error ratio 8 under halving
    for (KernelId id : {KernelId::LRI1, KernelId::LRI_P, KernelId::LRI2}) {
      const StepKernel kern{id, params, {}};
      double prev = 0.0, ratio = 0.0;
      for (double tau : {0.02, 0.01}) {
        const double t = 0.3;
        const SpectralState v = free_flow(exact_plane_wave(grid, A, k, t, params), -t);
        const SpectralState next = free_flow(v + kernel_increment_v(kern, v, t, tau), t + tau);
        const double e = l2_norm(next - exact_plane_wave(grid, A, k, t + tau, params));
        if (prev > 0.0) ratio = prev / e;
        prev = e;
      }
      ok = ok && std::abs(ratio - 8.0) <= 2.0;
      os << ", " << kern.kernel_name() << " ratio " << ratio;
    }
    r.passed = ok;
    r.detail = os.str();
  });

  return results;
}

} // namespace nlsr
