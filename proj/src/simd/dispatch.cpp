#include <cstdlib>
#include <stdexcept>
#include <string>

#include "qgraph/simd/kernels.hpp"

namespace qgraph::simd {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::avx512:
      return "avx512";
  }
  return "unknown";
}

bool supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
#if defined(QGRAPH_X86_KERNELS)
    case Isa::avx2:
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    case Isa::avx512:
      return __builtin_cpu_supports("avx512f");
#else
    case Isa::avx2:
    case Isa::avx512:
      return false;
#endif
  }
  return false;
}

std::vector<Isa> supported_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::scalar, Isa::avx2, Isa::avx512}) {
    if (supported(isa)) out.push_back(isa);
  }
  return out;
}

const KernelTable& table(Isa isa) {
  if (!supported(isa)) {
    throw std::runtime_error("kernel ISA not supported on this CPU: " +
                             std::string(isa_name(isa)));
  }
  static const KernelTable scalar = detail::scalar_table();
#if defined(QGRAPH_X86_KERNELS)
  static const KernelTable avx2 = detail::avx2_table();
  static const KernelTable avx512 = detail::avx512_table();
  if (isa == Isa::avx2) return avx2;
  if (isa == Isa::avx512) return avx512;
#endif
  return scalar;
}

namespace {

Isa pick_isa() {
  Isa best = Isa::scalar;
  for (Isa isa : supported_isas()) best = isa;
  if (const char* env = std::getenv("QGRAPH_KERNELS")) {
    const std::string want(env);
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::avx512}) {
      if (want == isa_name(isa)) {
        if (!supported(isa)) {
          throw std::runtime_error("QGRAPH_KERNELS=" + want +
                                   " is not supported on this CPU");
        }
        return isa;
      }
    }
    throw std::runtime_error("unknown QGRAPH_KERNELS value: " + want);
  }
  return best;
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& selected = table(pick_isa());
  return selected;
}

}  // namespace qgraph::simd
