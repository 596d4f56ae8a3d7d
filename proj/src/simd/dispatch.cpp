#include "dreampipe/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "dreampipe/error.hpp"

namespace dreampipe::simd {
namespace {

const KernelTable* table_or_null(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return &detail::kScalarTable;
    case Isa::Avx2:
#if defined(DREAMPIPE_HAVE_AVX2)
      if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &detail::kAvx2Table;
#endif
      return nullptr;
    case Isa::Neon:
#if defined(DREAMPIPE_HAVE_NEON)
      return &detail::kNeonTable;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const KernelTable* pick_initial() noexcept {
  if (const char* env = std::getenv("DREAMPIPE_SIMD")) {
    const std::string_view name(env);
    if (name == "scalar") return &detail::kScalarTable;
    if (name == "avx2" && table_or_null(Isa::Avx2)) return table_or_null(Isa::Avx2);
    if (name == "neon" && table_or_null(Isa::Neon)) return table_or_null(Isa::Neon);
  }
  for (Isa isa : {Isa::Avx2, Isa::Neon})
    if (const KernelTable* t = table_or_null(isa)) return t;
  return &detail::kScalarTable;
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{pick_initial()};
  return table;
}

}  // namespace

const char* to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool supported(Isa isa) noexcept { return table_or_null(isa) != nullptr; }

const KernelTable& kernels_for(Isa isa) {
  const KernelTable* t = table_or_null(isa);
  require(t != nullptr, ErrorKind::InvalidArgument,
          std::string("kernel variant not available: ") + to_string(isa));
  return *t;
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_acquire); }

void set_active(Isa isa) { current().store(&kernels_for(isa), std::memory_order_release); }

}  // namespace dreampipe::simd
