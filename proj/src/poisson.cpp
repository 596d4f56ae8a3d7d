#include "dreampipe/poisson.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

namespace dreampipe {
namespace {

constexpr std::int32_t kNone = -1;

struct System {
  std::vector<std::int32_t> pixel_of;             // unknown -> pixel index
  std::vector<std::array<std::int32_t, 4>> nbr;   // unknown ids, kNone when fixed
};

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

PoissonResult poisson_solve(const Image8& target, const Image8& source, const MaskImage& mask,
                            const PoissonOptions& options) {
  require(target.same_shape(source), ErrorKind::InvalidArgument,
          "poisson: target and source must have the same shape");
  require(mask.width() == target.width() && mask.height() == target.height(),
          ErrorKind::InvalidArgument, "poisson: mask size differs from the images");
  require_space(mask, MaskSpace::Panorama, "poisson_blend");
  require(options.tolerance > 0.0 && options.max_iterations > 0, ErrorKind::InvalidArgument,
          "poisson: tolerance and iteration cap must be positive");

  const int w = target.width();
  const int h = target.height();
  const int ch = target.channels();
  PoissonResult result;
  result.solution = to_float(target);

  std::vector<std::int32_t> id(target.pixel_count(), kNone);
  System sys;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask.on(x, y)) {
        id[static_cast<std::size_t>(y) * w + x] = static_cast<std::int32_t>(sys.pixel_of.size());
        sys.pixel_of.push_back(y * w + x);
      }
  const std::size_t n = sys.pixel_of.size();
  if (n == 0) return result;

  // Neighbour order: left, right, up, down. Pixel index -1 marks the ghost.
  auto neighbour_pixel = [&](int x, int y, int k) -> int {
    switch (k) {
      case 0:
        if (x > 0) return y * w + x - 1;
        return options.wrap_x ? y * w + w - 1 : -1;
      case 1:
        if (x + 1 < w) return y * w + x + 1;
        return options.wrap_x ? y * w : -1;
      case 2:
        return y > 0 ? (y - 1) * w + x : -1;
      default:
        return y + 1 < h ? (y + 1) * w + x : -1;
    }
  };

  sys.nbr.resize(n);
  std::vector<std::array<int, 4>> nbr_pixel(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int p = sys.pixel_of[i];
    for (int k = 0; k < 4; ++k) {
      const int q = neighbour_pixel(p % w, p / w, k);
      nbr_pixel[i][k] = q;
      sys.nbr[i][k] = q >= 0 ? id[q] : kNone;
    }
  }

  auto apply = [&](const std::vector<double>& x, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 4.0 * x[i];
      for (int k = 0; k < 4; ++k)
        if (sys.nbr[i][k] != kNone) acc -= x[sys.nbr[i][k]];
      out[i] = acc;
    }
  };

  std::vector<double> b(n), x(n), r(n), d(n), q(n);
  for (int c = 0; c < ch; ++c) {
    auto tv = [&](int pix) { return target.data()[static_cast<std::size_t>(pix) * ch + c] / 255.0; };
    auto sv = [&](int pix) { return source.data()[static_cast<std::size_t>(pix) * ch + c] / 255.0; };
    for (std::size_t i = 0; i < n; ++i) {
      const int p = sys.pixel_of[i];
      double rhs = 0.0;
      for (int k = 0; k < 4; ++k) {
        const int qp = nbr_pixel[i][k];
        if (qp < 0) {
          rhs += tv(p);
          continue;
        }
        double g = sv(p) - sv(qp);
        if (options.mixed_gradients) {
          const double gt = tv(p) - tv(qp);
          if (std::abs(gt) > std::abs(g)) g = gt;
        }
        rhs += g;
        if (sys.nbr[i][k] == kNone) rhs += tv(qp);
      }
      b[i] = rhs;
      x[i] = tv(p);
    }

    apply(x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    d = r;
    double rr = 0.0;
    for (double v : r) rr += v * v;
    double res = max_abs(r);
    int it = 0;
    while (res >= options.tolerance && it < options.max_iterations) {
      apply(d, q);
      double dq = 0.0;
      for (std::size_t i = 0; i < n; ++i) dq += d[i] * q[i];
      const double alpha = rr / dq;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * d[i];
        r[i] -= alpha * q[i];
      }
      double rr_new = 0.0;
      for (double v : r) rr_new += v * v;
      const double beta = rr_new / rr;
      rr = rr_new;
      for (std::size_t i = 0; i < n; ++i) d[i] = r[i] + beta * d[i];
      ++it;
      // Recompute the true residual now and then to stop recurrence drift.
      if (it % 50 == 0) {
        apply(x, q);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
      }
      res = max_abs(r);
    }
    apply(x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    res = max_abs(r);

    result.iterations += it;
    result.residual = std::max(result.residual, res);
    if (res >= options.tolerance) result.converged = false;
    for (std::size_t i = 0; i < n; ++i)
      result.solution.data()[static_cast<std::size_t>(sys.pixel_of[i]) * ch + c] =
          static_cast<float>(x[i]);
  }

  if (!result.converged) {
    const std::string msg = "poisson solve did not converge after " +
                            std::to_string(result.iterations) + " iterations, residual " +
                            std::to_string(result.residual);
    if (options.throw_on_failure) fail(ErrorKind::Numerical, msg);
    spdlog::warn("{}", msg);
  }
  return result;
}

Image8 poisson_blend(const Image8& target, const Image8& source, const MaskImage& mask,
                     const PoissonOptions& options, PoissonResult* info) {
  PoissonResult solved = poisson_solve(target, source, mask, options);
  Image8 out = target;
  const int ch = target.channels();
  for (int y = 0; y < target.height(); ++y)
    for (int x = 0; x < target.width(); ++x) {
      if (!mask.on(x, y)) continue;
      for (int c = 0; c < ch; ++c) {
        const double v = std::lround(solved.solution(x, y, c) * 255.0);
        out(x, y, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  if (info) *info = std::move(solved);
  return out;
}

}  // namespace dreampipe
