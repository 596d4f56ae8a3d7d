#include "dreampipe/simd/kernels.hpp"

namespace dreampipe::simd::detail {
namespace {

float dot_scalar(const float* a, const float* b, std::size_t n) {
  float sum = 0.0f;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

}  // namespace

unsigned intersect4_scalar(const TrianglePacket4& p, const double o[3], const double d[3],
                           double t_min, double t_max, PacketHits4& out) {
  unsigned mask = 0;
  for (int i = 0; i < 4; ++i) {
    const double e1x = p.e1[0][i], e1y = p.e1[1][i], e1z = p.e1[2][i];
    const double e2x = p.e2[0][i], e2y = p.e2[1][i], e2z = p.e2[2][i];
    // pvec = d x e2
    const double px = d[1] * e2z - d[2] * e2y;
    const double py = d[2] * e2x - d[0] * e2z;
    const double pz = d[0] * e2y - d[1] * e2x;
    const double det = e1x * px + e1y * py + e1z * pz;
    const double inv = 1.0 / det;
    const double tx = o[0] - p.v0[0][i];
    const double ty = o[1] - p.v0[1][i];
    const double tz = o[2] - p.v0[2][i];
    const double u = (tx * px + ty * py + tz * pz) * inv;
    // qvec = tvec x e1
    const double qx = ty * e1z - tz * e1y;
    const double qy = tz * e1x - tx * e1z;
    const double qz = tx * e1y - ty * e1x;
    const double v = (d[0] * qx + d[1] * qy + d[2] * qz) * inv;
    const double t = (e2x * qx + e2y * qy + e2z * qz) * inv;
    out.t[i] = t;
    out.u[i] = u;
    out.v[i] = v;
    const bool hit = det != 0.0 && u >= 0.0 && v >= 0.0 && u + v <= 1.0 && t > t_min &&
                     t <= t_max;
    if (hit) mask |= 1u << i;
  }
  return mask;
}

const KernelTable kScalarTable{Isa::Scalar, dot_scalar, axpy_scalar, intersect4_scalar};

}  // namespace dreampipe::simd::detail
