#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "nlsr/spectral.hpp"

namespace nlsr {

enum class DataKind { Smooth, Rough };

struct InitialDataSpec {
  DataKind kind = DataKind::Smooth;
  double theta = 2.0;      // rough only
  std::uint64_t seed = 0;  // rough only

  void validate() const {
    if (kind == DataKind::Rough && !(theta > 0.5))
      throw ConfigError("rough initial data requires theta > 1/2, got " + std::to_string(theta));
  }

  /// "smooth" or the theta value, as written into result tables.
  std::string label() const {
    if (kind == DataKind::Smooth) return "smooth";
    std::string s = std::to_string(theta);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  }
};

inline SpectralState normalized(SpectralState s) {
  const double n = l2_norm(s);
  if (!(n > 0.0)) throw NumericError("cannot normalize a zero state");
  s *= 1.0 / n;
  return s;
}

/// cos(x)/(2 + sin(x)) sampled on the nodes, unit L2 norm.
inline SpectralState smooth_data(const GridPtr& grid) {
  Field values(grid->K);
  for (std::size_t j = 0; j < grid->K; ++j) {
    const double x = grid->nodes[j];
    values[j] = std::cos(x) / (2.0 + std::sin(x));
  }
  return normalized(to_frequency(values, grid));
}

namespace detail {
// Top 53 bits of a 64-bit draw: uniform on [0, 1), portable across
// standard libraries (std::uniform_real_distribution is not).
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
} // namespace detail

/// |d_x|^{-theta} applied to U = A + iB, A, B ~ U[0,1)^K drawn from
/// mt19937_64(seed) (all real parts first, then all imaginary parts). The
/// i-th draw is the coefficient at storage position i. Unit L2 norm.
inline SpectralState rough_data(const GridPtr& grid, double theta, std::uint64_t seed) {
  if (!(theta > 0.5)) throw ConfigError("rough initial data requires theta > 1/2");
  std::mt19937_64 rng(seed);
  const std::size_t K = grid->K;
  std::vector<double> re(K), im(K);
  for (auto& a : re) a = detail::unit_uniform(rng);
  for (auto& b : im) b = detail::unit_uniform(rng);
  SpectralState s(grid);
  for (std::size_t i = 0; i < K; ++i) {
    const int k = grid->modes[i];
    s[i] = (k == 0) ? cplx{0.0, 0.0} : cplx{re[i], im[i]} * std::pow(std::abs(static_cast<double>(k)), -theta);
  }
  return normalized(std::move(s));
}

inline SpectralState make_initial_data(const InitialDataSpec& spec, const GridPtr& grid) {
  spec.validate();
  return spec.kind == DataKind::Smooth ? smooth_data(grid) : rough_data(grid, spec.theta, spec.seed);
}

} // namespace nlsr
