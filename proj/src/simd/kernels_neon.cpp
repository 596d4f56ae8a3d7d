#include "dreampipe/simd/kernels.hpp"

#include <arm_neon.h>

namespace dreampipe::simd::detail {
namespace {

float dot_neon(const float* a, const float* b, std::size_t n) {
  float32x4_t acc0 = vdupq_n_f32(0.0f);
  float32x4_t acc1 = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
    acc1 = vfmaq_f32(acc1, vld1q_f32(a + i + 4), vld1q_f32(b + i + 4));
  }
  float sum = vaddvq_f32(vaddq_f32(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_neon(float alpha, const float* x, float* y, std::size_t n) {
  const float32x4_t a = vdupq_n_f32(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t prod = vmulq_f32(a, vld1q_f32(x + i));
    vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

}  // namespace

// Two-lane float64 gives little over the scalar loop, so packets stay scalar here.
const KernelTable kNeonTable{Isa::Neon, dot_neon, axpy_neon, intersect4_scalar};

}  // namespace dreampipe::simd::detail
