#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "nlsr/integrators.hpp"

namespace nlsr {

enum class RelaxMode { V_RELAX, U_RELAX, NONE };

inline std::string_view relax_mode_name(RelaxMode m) {
  switch (m) {
  case RelaxMode::V_RELAX: return "v";
  case RelaxMode::U_RELAX: return "u";
  case RelaxMode::NONE: return "none";
  }
  return "?";
}

inline std::optional<RelaxMode> parse_relax_mode(std::string_view s) {
  if (s == "v" || s == "V_RELAX") return RelaxMode::V_RELAX;
  if (s == "u" || s == "U_RELAX") return RelaxMode::U_RELAX;
  if (s == "none" || s == "NONE") return RelaxMode::NONE;
  return std::nullopt;
}

inline std::optional<KernelId> parse_kernel_id(std::string_view s) {
  for (auto id : {KernelId::LRI1, KernelId::LRI_P, KernelId::LRI2, KernelId::STRANG, KernelId::LAWSON, KernelId::SLRI})
    if (s == StepKernel::kernel_id_name(id)) return id;
  return std::nullopt;
}

/// A named integrator: kernel + relaxation mode + nonlinearity.
struct MethodSpec {
  std::string name;
  StepKernel kernel;
  RelaxMode relax = RelaxMode::NONE;

  void validate() const {
    kernel.validate();
    if (relax == RelaxMode::V_RELAX && !has_v_form(kernel.id))
      throw ConfigError(name + ": v-relaxation needs a twisted-variable kernel (LRI1, LRI_P, LRI2)");
    if (relax == RelaxMode::U_RELAX && kernel.id != KernelId::LRI1)
      throw ConfigError(name + ": u-relaxation is defined for the LRI1 kernel only");
  }
};

struct MethodInfo {
  std::string_view name;
  KernelId kernel;
  RelaxMode relax;
  std::string_view note;
};

inline constexpr std::array<MethodInfo, 10> method_roster{{
    {"RLRI1-v", KernelId::LRI1, RelaxMode::V_RELAX, "explicit, mass-conserving, second order"},
    {"RLRI2-v", KernelId::LRI2, RelaxMode::V_RELAX, "explicit, mass-conserving, second order (Fourier integrator kernel)"},
    {"RLRIP-v", KernelId::LRI_P, RelaxMode::V_RELAX, "explicit, mass-conserving, general power p"},
    {"RLRI-u", KernelId::LRI1, RelaxMode::U_RELAX, "explicit, mass-conserving, order-reducing on rough data"},
    {"LRI1", KernelId::LRI1, RelaxMode::NONE, "explicit, second order, not conservative"},
    {"LRI2", KernelId::LRI2, RelaxMode::NONE, "explicit, not conservative"},
    {"LRI-P", KernelId::LRI_P, RelaxMode::NONE, "explicit, general power p, not conservative"},
    {"Strang", KernelId::STRANG, RelaxMode::NONE, "explicit splitting, L2 isometry"},
    {"Lawson", KernelId::LAWSON, RelaxMode::NONE, "implicit (fixed point), L2-preserving"},
    {"SLRI", KernelId::SLRI, RelaxMode::NONE, "implicit (fixed point), symplectic, L2-preserving"},
}};

inline std::optional<MethodSpec> lookup_method(std::string_view name, const NonlinearityParams& params = {},
                                               const SolverOptions& solver = {}) {
  for (const auto& info : method_roster)
    if (info.name == name) return MethodSpec{std::string(info.name), StepKernel{info.kernel, params, solver}, info.relax};
  return std::nullopt;
}

} // namespace nlsr
