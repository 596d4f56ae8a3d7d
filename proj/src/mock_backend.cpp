#include "dreampipe/mock_backend.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "dreampipe/poisson.hpp"
#include "dreampipe/rng.hpp"

namespace dreampipe {
namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

std::uint64_t request_seed(const StylizeRequest& r) {
  return splitmix64(r.seed ^ fnv1a64(r.prompt) ^ fnv1a64(to_string(r.kind)));
}

// Average the first and last columns into both so the image tiles exactly.
void close_wrap(Image8& img) {
  const int w = img.width();
  if (w < 2) return;
  for (int y = 0; y < img.height(); ++y)
    for (int c = 0; c < img.channels(); ++c) {
      const int avg = (img(0, y, c) + img(w - 1, y, c) + 1) / 2;
      img(0, y, c) = img(w - 1, y, c) = static_cast<std::uint8_t>(avg);
    }
}

double luminance(const Image8& img, int x, int y) {
  if (img.channels() < 3) return img(x, y, 0);
  return 0.299 * img(x, y, 0) + 0.587 * img(x, y, 1) + 0.114 * img(x, y, 2);
}

// Smooth value noise, periodic in x with `cells` lattice cells across the width.
double periodic_noise(std::uint64_t seed, double u, double v, int cells_x, int cells_y) {
  const double fx = u * cells_x;
  const double fy = v * cells_y;
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const double tx = fx - x0;
  const double ty = fy - y0;
  auto lattice = [&](int x, int y) {
    const int xm = ((x % cells_x) + cells_x) % cells_x;
    return hash_unit(seed, static_cast<std::uint64_t>(xm), static_cast<std::uint64_t>(y));
  };
  auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  const double sx = smooth(tx);
  const double sy = smooth(ty);
  const double a = lattice(x0, y0) * (1 - sx) + lattice(x0 + 1, y0) * sx;
  const double b = lattice(x0, y0 + 1) * (1 - sx) + lattice(x0 + 1, y0 + 1) * sx;
  return a * (1 - sy) + b * sy;
}

Image8 mock_generate(const StylizeRequest& r, std::uint64_t seed) {
  const ImageF dist = r.payload(slot::kDistance).decode_field();
  std::optional<Image8> edge_src;
  if (r.has(slot::kSoftedgeSource)) edge_src = r.payload(slot::kSoftedgeSource).decode_image();
  const int w = dist.width();
  const int h = dist.height();

  std::array<std::array<double, 3>, 4> palette;
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 3; ++c) palette[i][c] = 40.0 + 200.0 * hash_unit(seed, 100 + i, c);

  Image8 out(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double u = (x + 0.5) / w;
      const double v = (y + 0.5) / h;
      const double n = 0.65 * periodic_noise(seed, u, v, 8, 4) +
                       0.35 * periodic_noise(seed ^ 0x5151, u, v, 32, 16);
      const double t = std::clamp(n, 0.0, 1.0) * 3.0;
      const int i0 = std::min(2, static_cast<int>(t));
      const double f = t - i0;
      const float d = dist(x, y);
      const double shade = d > 0.0f ? 1.0 / (1.0 + 0.15 * d) + 0.25 : 0.6;
      double structure = 1.0;
      if (edge_src) structure = 0.7 + 0.3 * luminance(*edge_src, x, y) / 255.0;
      for (int c = 0; c < 3; ++c) {
        const double col = palette[i0][c] * (1 - f) + palette[i0 + 1][c] * f;
        out(x, y, c) = to_byte(col * std::min(1.0, shade) * structure);
      }
    }
  close_wrap(out);
  return out;
}

Image8 mock_align(const StylizeRequest& r) {
  Image8 out = r.payload(slot::kTileSource).decode_image();
  const Image8 canny = r.payload(slot::kCannySource).decode_image();
  const int w = out.width();
  const int h = out.height();
  auto lum = [&](int x, int y) {
    return luminance(canny, (x + w) % w, std::clamp(y, 0, h - 1));
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = lum(x + 1, y - 1) + 2 * lum(x + 1, y) + lum(x + 1, y + 1) -
                        lum(x - 1, y - 1) - 2 * lum(x - 1, y) - lum(x - 1, y + 1);
      const double gy = lum(x - 1, y + 1) + 2 * lum(x, y + 1) + lum(x + 1, y + 1) -
                        lum(x - 1, y - 1) - 2 * lum(x, y - 1) - lum(x + 1, y - 1);
      if (std::hypot(gx, gy) / 8.0 > 24.0)
        for (int c = 0; c < out.channels(); ++c) out(x, y, c) = static_cast<std::uint8_t>(out(x, y, c) / 2);
    }
  return out;
}

Image8 mock_inpaint(const StylizeRequest& r, std::uint64_t seed) {
  const Image8 partial = r.payload(slot::kPartialImage).decode_image();
  const ImageF soft = r.payload(slot::kMask).decode_field();
  const int w = partial.width();
  const int h = partial.height();

  MaskImage hole(w, h, MaskSpace::Panorama, 0.0f);
  double sum[3] = {0, 0, 0};
  std::size_t kept = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (soft(x, y) > 0.0f) {
        hole(x, y) = 1.0f;
      } else {
        for (int c = 0; c < 3; ++c) sum[c] += partial(x, y, c);
        ++kept;
      }
    }
  if (hole.count_on() == 0) return partial;

  Image8 fill;
  if (kept == 0) {
    StylizeRequest gen = r;
    gen.kind = StylizeKind::Generate;
    fill = mock_generate(gen, seed);
  } else {
    // Seed the hole with the mean of the known pixels so the border rows,
    // which anchor to their own starting value, do not pull toward black.
    Image8 target = partial;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (hole.on(x, y))
          for (int c = 0; c < 3; ++c) target(x, y, c) = to_byte(sum[c] / kept);
    const Image8 flat(w, h, 3, 0);
    PoissonOptions opt;
    opt.tolerance = 1e-3;
    opt.throw_on_failure = false;
    fill = poisson_blend(target, flat, hole, opt);
  }

  Image8 out = partial;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double m = std::clamp(static_cast<double>(soft(x, y)), 0.0, 1.0);
      if (m <= 0.0) continue;
      for (int c = 0; c < 3; ++c) {
        const double dither =
            (hash_unit(seed, static_cast<std::uint64_t>(y) * w + x, c) - 0.5) * 4.0;
        out(x, y, c) = to_byte(m * (fill(x, y, c) + dither) + (1.0 - m) * partial(x, y, c));
      }
    }
  return out;
}

double keys_weight(double t) {
  t = std::abs(t);
  constexpr double a = -0.5;
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

Image8 mock_upscale(const StylizeRequest& r, std::uint64_t seed) {
  Image8 out = bicubic_upscale(r.payload(slot::kImage).decode_image(),
                               r.directives.upscale_factor);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < out.channels(); ++c) {
        const double detail =
            (hash_unit(seed, static_cast<std::uint64_t>(y) * out.width() + x, c) - 0.5) * 6.0;
        out(x, y, c) = to_byte(out(x, y, c) + detail);
      }
  close_wrap(out);
  return out;
}

}  // namespace

Image8 bicubic_upscale(const Image8& image, int factor) {
  require(factor >= 1, ErrorKind::InvalidArgument, "upscale factor must be >= 1");
  const int w = image.width();
  const int h = image.height();
  const int ch = image.channels();
  Image8 out(w * factor, h * factor, ch);
  std::vector<double> acc(ch);
  for (int y = 0; y < out.height(); ++y) {
    const double sy = (y + 0.5) / factor - 0.5;
    const int iy = static_cast<int>(std::floor(sy));
    for (int x = 0; x < out.width(); ++x) {
      const double sx = (x + 0.5) / factor - 0.5;
      const int ix = static_cast<int>(std::floor(sx));
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int j = -1; j <= 2; ++j) {
        const double wy = keys_weight(sy - (iy + j));
        const int yy = std::clamp(iy + j, 0, h - 1);
        for (int i = -1; i <= 2; ++i) {
          const double wgt = wy * keys_weight(sx - (ix + i));
          const int xx = ((ix + i) % w + w) % w;
          for (int c = 0; c < ch; ++c) acc[c] += wgt * image(xx, yy, c);
        }
      }
      for (int c = 0; c < ch; ++c) out(x, y, c) = to_byte(acc[c]);
    }
  }
  return out;
}

double wrap_difference(const Image8& pano) {
  const int w = pano.width();
  double total = 0.0;
  for (int y = 0; y < pano.height(); ++y)
    for (int c = 0; c < pano.channels(); ++c)
      total += std::abs(static_cast<int>(pano(0, y, c)) - static_cast<int>(pano(w - 1, y, c)));
  return total / (static_cast<double>(pano.height()) * pano.channels());
}

StylizeResponse mock_backend(const StylizeRequest& request) {
  validate_request(request);
  const std::uint64_t seed = request_seed(request);
  Image8 img;
  switch (request.kind) {
    case StylizeKind::Generate: img = mock_generate(request, seed); break;
    case StylizeKind::Align: img = mock_align(request); break;
    case StylizeKind::Inpaint: img = mock_inpaint(request, seed); break;
    case StylizeKind::Upscale: img = mock_upscale(request, seed); break;
  }
  if (img.channels() != 3) {
    Image8 rgb(img.width(), img.height(), 3);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        for (int c = 0; c < 3; ++c) rgb(x, y, c) = img(x, y, std::min(c, img.channels() - 1));
    img = std::move(rgb);
  }
  StylizeResponse resp;
  resp.image = ImagePayload::from_image(img);
  resp.metadata.model_id = kMockModelId;
  resp.metadata.seed = request.seed;
  resp.metadata.wall_time_ms = 0.0;  // fixed so replies stay byte-identical
  return resp;
}

}  // namespace dreampipe
