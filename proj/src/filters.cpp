#include "dreampipe/filters.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dreampipe/simd/kernels.hpp"

namespace dreampipe {
namespace {

constexpr double kFar = 1e20;

// Felzenszwalb-Huttenlocher lower envelope of parabolas, 1-D.
void distance_transform_1d(const std::vector<double>& f, std::vector<double>& d,
                           std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  d.resize(n);
  v.resize(n);
  z.resize(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -kFar;
  z[1] = kFar;
  for (int q = 1; q < n; ++q) {
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
          (2.0 * q - 2.0 * p);
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates everywhere on the left.
      v[0] = q;
      z[0] = -kFar;
      z[1] = kFar;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kFar;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

ImageF squared_distance_transform(const ImageF& mask, bool wrap_x) {
  require(mask.channels() == 1, ErrorKind::InvalidArgument, "distance transform needs one channel");
  const int w = mask.width();
  const int h = mask.height();
  ImageF cols(w, h, 1);
  {
    std::vector<double> f(h), d;
    std::vector<int> v;
    std::vector<double> z;
    for (int x = 0; x < w; ++x) {
      for (int y = 0; y < h; ++y) f[y] = mask(x, y) >= 0.5f ? 0.0 : kFar;
      distance_transform_1d(f, d, v, z);
      for (int y = 0; y < h; ++y) cols(x, y) = static_cast<float>(std::min(d[y], kFar));
    }
  }
  ImageF out(w, h, 1);
  const int reps = wrap_x ? 3 : 1;
  std::vector<double> f(static_cast<std::size_t>(w) * reps), d;
  std::vector<int> v;
  std::vector<double> z;
  for (int y = 0; y < h; ++y) {
    for (int r = 0; r < reps; ++r)
      for (int x = 0; x < w; ++x) f[static_cast<std::size_t>(r) * w + x] = cols(x, y);
    distance_transform_1d(f, d, v, z);
    const std::size_t base = wrap_x ? static_cast<std::size_t>(w) : 0;
    for (int x = 0; x < w; ++x) out(x, y) = static_cast<float>(d[base + x]);
  }
  return out;
}

ImageF dilate_disk(const ImageF& mask, double radius, bool wrap_x) {
  ImageF out(mask.width(), mask.height(), 1, 0.0f);
  if (radius <= 0.0) {
    for (std::size_t i = 0; i < out.data().size(); ++i)
      out.data()[i] = mask.data()[i] >= 0.5f ? 1.0f : 0.0f;
    return out;
  }
  const ImageF dt = squared_distance_transform(mask, wrap_x);
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = dt.data()[i] <= r2 ? 1.0f : 0.0f;
  return out;
}

ImageF gaussian_blur(const ImageF& image, double sigma, bool wrap_x) {
  if (!(sigma > 0.0)) return image;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<float> taps(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double t = std::exp(-(k * k) / (2.0 * sigma * sigma));
    taps[k + radius] = static_cast<float>(t);
    total += t;
  }
  for (float& t : taps) t = static_cast<float>(t / total);

  const simd::KernelTable& kt = simd::active();
  const int w = image.width();
  const int h = image.height();
  const int ch = image.channels();
  const std::size_t row_len = static_cast<std::size_t>(w) * ch;

  // Horizontal pass over a padded copy of each row.
  ImageF horiz(w, h, ch, 0.0f);
#pragma omp parallel
  {
    std::vector<float> pad(static_cast<std::size_t>(w + 2 * radius) * ch);
#pragma omp for schedule(static)
    for (int y = 0; y < h; ++y) {
      const auto src = image.row(y);
      for (int i = 0; i < w + 2 * radius; ++i) {
        int sx = i - radius;
        if (wrap_x) {
          sx %= w;
          if (sx < 0) sx += w;
        } else {
          sx = std::clamp(sx, 0, w - 1);
        }
        for (int c = 0; c < ch; ++c) pad[static_cast<std::size_t>(i) * ch + c] = src[static_cast<std::size_t>(sx) * ch + c];
      }
      float* dst = horiz.row(y).data();
      for (int k = 0; k <= 2 * radius; ++k)
        kt.axpy_f32(taps[k], pad.data() + static_cast<std::size_t>(k) * ch, dst, row_len);
    }
  }

  ImageF out(w, h, ch, 0.0f);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    float* dst = out.row(y).data();
    for (int k = -radius; k <= radius; ++k) {
      const int sy = std::clamp(y + k, 0, h - 1);
      kt.axpy_f32(taps[k + radius], horiz.row(sy).data(), dst, row_len);
    }
  }
  return out;
}

}  // namespace dreampipe
