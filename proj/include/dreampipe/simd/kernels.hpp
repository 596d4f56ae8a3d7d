#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops with a scalar reference and ISA-specific variants.
// The active table is picked once at startup from CPU features and can be
// forced with DREAMPIPE_SIMD=scalar|avx2|neon.
//
// Contract shared by every variant:
//   axpy_f32    bit-identical to the scalar reference (no fused multiply-add)
//   intersect4  bit-identical to the scalar reference
//   dot_f32     may reassociate; equal to the reference within float rounding

namespace dreampipe::simd {

enum class Isa { Scalar, Avx2, Neon };

const char* to_string(Isa isa) noexcept;

// Four triangles in structure-of-arrays form: first vertex and two edges.
// Unused lanes carry zero edges, which can never register a hit.
struct alignas(32) TrianglePacket4 {
  double v0[3][4]{};
  double e1[3][4]{};
  double e2[3][4]{};
  std::uint32_t ids[4]{};
};

struct alignas(32) PacketHits4 {
  double t[4];
  double u[4];
  double v[4];
};

struct KernelTable {
  Isa isa;
  float (*dot_f32)(const float* a, const float* b, std::size_t n);
  // y += alpha * x
  void (*axpy_f32)(float alpha, const float* x, float* y, std::size_t n);
  // Moller-Trumbore against four triangles. Lane i hits when its barycentrics
  // are inside the closed triangle and t lies in (t_min, t_max]. Returns the
  // hit lanes as a bit mask.
  unsigned (*intersect4)(const TrianglePacket4& packet, const double origin[3],
                         const double direction[3], double t_min, double t_max,
                         PacketHits4& out);
};

bool supported(Isa isa) noexcept;
// Throws for an ISA the CPU or build lacks.
const KernelTable& kernels_for(Isa isa);
const KernelTable& active() noexcept;
// Test hook; not thread-safe against concurrent kernel use.
void set_active(Isa isa);

namespace detail {
extern const KernelTable kScalarTable;
#if defined(DREAMPIPE_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(DREAMPIPE_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif
unsigned intersect4_scalar(const TrianglePacket4& packet, const double origin[3],
                           const double direction[3], double t_min, double t_max,
                           PacketHits4& out);
}  // namespace detail

}  // namespace dreampipe::simd
