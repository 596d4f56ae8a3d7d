#include "dreampipe/simd/kernels.hpp"

#include <immintrin.h>

namespace dreampipe::simd::detail {
namespace {

float dot_avx2(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8)
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  const __m256 acc = _mm256_add_ps(acc0, acc1);
  __m128 lo = _mm256_castps256_ps128(acc);
  const __m128 hi = _mm256_extractf128_ps(acc, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 0x55));
  float sum = _mm_cvtss_f32(lo);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_avx2(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 a = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 prod = _mm256_mul_ps(a, _mm256_loadu_ps(x + i));
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

inline __m256d mul(__m256d a, __m256d b) { return _mm256_mul_pd(a, b); }
inline __m256d sub(__m256d a, __m256d b) { return _mm256_sub_pd(a, b); }
inline __m256d add(__m256d a, __m256d b) { return _mm256_add_pd(a, b); }

unsigned intersect4_avx2(const TrianglePacket4& p, const double o[3], const double d[3],
                         double t_min, double t_max, PacketHits4& out) {
  const __m256d dx = _mm256_set1_pd(d[0]), dy = _mm256_set1_pd(d[1]), dz = _mm256_set1_pd(d[2]);
  const __m256d e1x = _mm256_load_pd(p.e1[0]), e1y = _mm256_load_pd(p.e1[1]),
                e1z = _mm256_load_pd(p.e1[2]);
  const __m256d e2x = _mm256_load_pd(p.e2[0]), e2y = _mm256_load_pd(p.e2[1]),
                e2z = _mm256_load_pd(p.e2[2]);
  // Same operation order as the scalar reference.
  const __m256d px = sub(mul(dy, e2z), mul(dz, e2y));
  const __m256d py = sub(mul(dz, e2x), mul(dx, e2z));
  const __m256d pz = sub(mul(dx, e2y), mul(dy, e2x));
  const __m256d det = add(add(mul(e1x, px), mul(e1y, py)), mul(e1z, pz));
  const __m256d inv = _mm256_div_pd(_mm256_set1_pd(1.0), det);
  const __m256d tx = sub(_mm256_set1_pd(o[0]), _mm256_load_pd(p.v0[0]));
  const __m256d ty = sub(_mm256_set1_pd(o[1]), _mm256_load_pd(p.v0[1]));
  const __m256d tz = sub(_mm256_set1_pd(o[2]), _mm256_load_pd(p.v0[2]));
  const __m256d u = mul(add(add(mul(tx, px), mul(ty, py)), mul(tz, pz)), inv);
  const __m256d qx = sub(mul(ty, e1z), mul(tz, e1y));
  const __m256d qy = sub(mul(tz, e1x), mul(tx, e1z));
  const __m256d qz = sub(mul(tx, e1y), mul(ty, e1x));
  const __m256d v = mul(add(add(mul(dx, qx), mul(dy, qy)), mul(dz, qz)), inv);
  const __m256d t = mul(add(add(mul(e2x, qx), mul(e2y, qy)), mul(e2z, qz)), inv);
  _mm256_store_pd(out.t, t);
  _mm256_store_pd(out.u, u);
  _mm256_store_pd(out.v, v);
  const __m256d zero = _mm256_setzero_pd();
  __m256d ok = _mm256_cmp_pd(det, zero, _CMP_NEQ_OQ);
  ok = _mm256_and_pd(ok, _mm256_cmp_pd(u, zero, _CMP_GE_OQ));
  ok = _mm256_and_pd(ok, _mm256_cmp_pd(v, zero, _CMP_GE_OQ));
  ok = _mm256_and_pd(ok, _mm256_cmp_pd(add(u, v), _mm256_set1_pd(1.0), _CMP_LE_OQ));
  ok = _mm256_and_pd(ok, _mm256_cmp_pd(t, _mm256_set1_pd(t_min), _CMP_GT_OQ));
  ok = _mm256_and_pd(ok, _mm256_cmp_pd(t, _mm256_set1_pd(t_max), _CMP_LE_OQ));
  return static_cast<unsigned>(_mm256_movemask_pd(ok));
}

}  // namespace

const KernelTable kAvx2Table{Isa::Avx2, dot_avx2, axpy_avx2, intersect4_avx2};

}  // namespace dreampipe::simd::detail
