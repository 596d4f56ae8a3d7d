#include "dreampipe/seam_fix.hpp"

#include <algorithm>
#include <cmath>

#include "dreampipe/filters.hpp"
#include "dreampipe/geometry.hpp"
#include "dreampipe/rng.hpp"
#include "dreampipe/stylizer.hpp"

namespace dreampipe {
namespace {

// Bilinear sample at continuous pixel coordinates (pixel centres at +0.5).
template <typename T>
double sample_channel(const Image<T>& img, double fx, double fy, int c, bool wrap_x) {
  const int w = img.width();
  const int h = img.height();
  const double x0f = std::floor(fx);
  const double y0f = std::floor(fy);
  const double ax = fx - x0f;
  const double ay = fy - y0f;
  int x0 = static_cast<int>(x0f);
  int x1 = x0 + 1;
  if (wrap_x) {
    x0 = ((x0 % w) + w) % w;
    x1 = ((x1 % w) + w) % w;
  } else {
    x0 = std::clamp(x0, 0, w - 1);
    x1 = std::clamp(x1, 0, w - 1);
  }
  const int y0 = std::clamp(static_cast<int>(y0f), 0, h - 1);
  const int y1 = std::clamp(static_cast<int>(y0f) + 1, 0, h - 1);
  const double top = (1.0 - ax) * img(x0, y0, c) + ax * img(x1, y0, c);
  const double bottom = (1.0 - ax) * img(x0, y1, c) + ax * img(x1, y1, c);
  return (1.0 - ay) * top + ay * bottom;
}

template <typename T>
T store(double v) {
  if constexpr (std::is_same_v<T, std::uint8_t>)
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  else
    return static_cast<T>(v);
}

Vec3 view_ray(Pole pole, double nx, double ny) {
  return pole == Pole::Up ? Vec3(nx, ny, 1.0) : Vec3(nx, -ny, -1.0);
}

PoleWarp build_warp(Pole pole, double fov_deg, int size, int pano_w, int pano_h) {
  PoleWarp warp;
  warp.pole = pole;
  warp.fov_deg = fov_deg;
  warp.view_size = size;
  warp.pano_width = pano_w;
  warp.pano_height = pano_h;
  const double t = std::tan(deg_to_rad(fov_deg) / 2.0);
  const double half = size / 2.0;
  for (int y = 0; y < pano_h; ++y)
    for (int x = 0; x < pano_w; ++x) {
      const Vec3 d = equirect_to_dir(pixel_center_to_equirect(x, y, pano_w, pano_h)).vec();
      const double forward = pole == Pole::Up ? d.z() : -d.z();
      if (forward <= 0.0) continue;
      const double a = d.x() / forward / t;
      const double b = (pole == Pole::Up ? d.y() : -d.y()) / forward / t;
      const double r = std::hypot(a, b) * half;
      if (r >= half) continue;
      warp.pano_pixel.push_back(y * pano_w + x);
      warp.view_x.push_back(static_cast<float>((a + 1.0) * half - 0.5));
      warp.view_y.push_back(static_cast<float>((b + 1.0) * half - 0.5));
      warp.radius.push_back(static_cast<float>(r));
    }
  return warp;
}

template <typename T>
PoleView<T> unwrap_impl(const Image<T>& pano, Pole pole, double fov_deg, int out_size) {
  require(fov_deg > 0.0 && fov_deg <= 120.0, ErrorKind::InvalidArgument,
          "pole fov must lie in (0, 120] degrees");
  require(out_size > 0, ErrorKind::InvalidArgument, "pole view size must be positive");
  require(pano.width() == 2 * pano.height(), ErrorKind::InvalidArgument,
          "panorama must be 2:1");
  const double t = std::tan(deg_to_rad(fov_deg) / 2.0);
  PoleView<T> view;
  view.image = Image<T>(out_size, out_size, pano.channels());
  const int w = pano.width();
  const int h = pano.height();
#pragma omp parallel for schedule(static)
  for (int j = 0; j < out_size; ++j)
    for (int i = 0; i < out_size; ++i) {
      const double nx = (2.0 * (i + 0.5) / out_size - 1.0) * t;
      const double ny = (2.0 * (j + 0.5) / out_size - 1.0) * t;
      const EquirectCoord e = dir_to_equirect(Direction(view_ray(pole, nx, ny)));
      for (int c = 0; c < pano.channels(); ++c)
        view.image(i, j, c) =
            store<T>(sample_channel(pano, e.u * w - 0.5, e.v * h - 0.5, c, true));
    }
  view.warp = build_warp(pole, fov_deg, out_size, w, h);
  return view;
}

template <typename T>
Image<T> roll_by(const Image<T>& pano, int sign) {
  require(pano.width() % 2 == 0, ErrorKind::InvalidArgument,
          "half roll needs an even panorama width");
  return roll_columns(pano, sign * pano.width() / 2);
}

Image8 composite(const Image8& fill, const Image8& base, const MaskImage& mask) {
  Image8 out = base;
  for (int y = 0; y < base.height(); ++y)
    for (int x = 0; x < base.width(); ++x) {
      const double m = mask(x, y);
      if (m <= 0.0) continue;
      for (int c = 0; c < base.channels(); ++c)
        out(x, y, c) = store<std::uint8_t>(m * fill(x, y, c) + (1.0 - m) * base(x, y, c));
    }
  return out;
}

Image8 inpaint(Stylizer& stylizer, const StylizeRequest& base, const char* label,
               const Image8& partial, const ImageF& distance, const MaskImage& mask) {
  StylizeRequest req = base;
  req.kind = StylizeKind::Inpaint;
  req.seed = derive_seed(base.seed, label);
  req.images.clear();
  req.set_image(slot::kPartialImage, partial);
  req.set_field(slot::kDistance, distance);
  req.set_field(slot::kMask, mask.values);
  return composite(stylizer.stylize_image(req), partial, mask);
}

}  // namespace

PoleView<std::uint8_t> unwrap_pole(const Image8& pano, Pole pole, double fov_deg, int out_size) {
  return unwrap_impl(pano, pole, fov_deg, out_size);
}

PoleView<float> unwrap_pole(const ImageF& pano, Pole pole, double fov_deg, int out_size) {
  return unwrap_impl(pano, pole, fov_deg, out_size);
}

void rewarp_pole(const Image8& edited, const PoleWarp& warp, Image8& pano, double blend_radius) {
  require(edited.width() == warp.view_size && edited.height() == warp.view_size,
          ErrorKind::InvalidArgument, "edited pole view does not match the warp map");
  require(pano.width() == warp.pano_width && pano.height() == warp.pano_height,
          ErrorKind::InvalidArgument, "panorama does not match the warp map");
  require(edited.channels() == pano.channels(), ErrorKind::InvalidArgument,
          "pole view and panorama channel counts differ");
  require(blend_radius > 0.0, ErrorKind::InvalidArgument, "blend radius must be positive");
  const double half = warp.view_size / 2.0;
  for (std::size_t k = 0; k < warp.pano_pixel.size(); ++k) {
    const double alpha = std::clamp((half - warp.radius[k]) / blend_radius, 0.0, 1.0);
    if (alpha <= 0.0) continue;
    const int x = warp.pano_pixel[k] % warp.pano_width;
    const int y = warp.pano_pixel[k] / warp.pano_width;
    for (int c = 0; c < pano.channels(); ++c) {
      const double s = sample_channel(edited, warp.view_x[k], warp.view_y[k], c, false);
      pano(x, y, c) = store<std::uint8_t>(alpha * s + (1.0 - alpha) * pano(x, y, c));
    }
  }
}

Image8 roll_half(const Image8& pano) { return roll_by(pano, 1); }
Image8 unroll_half(const Image8& pano) { return roll_by(pano, -1); }
ImageF roll_half(const ImageF& pano) { return roll_by(pano, 1); }

void SeamParams::validate() const {
  require(pole_fov_deg > 0.0 && pole_fov_deg <= 120.0, ErrorKind::Config,
          "pole fov must lie in (0, 120] degrees");
  require(pole_size > 0 && blend_radius > 0.0 && strip_divisor > 0 && strip_feather >= 0.0,
          ErrorKind::Config, "seam parameters must be positive");
  require(pole_disk_fraction > 0.0 && pole_disk_fraction <= 1.0, ErrorKind::Config,
          "pole disk fraction must lie in (0, 1]");
}

MaskImage center_strip_mask(int width, int height, double strip_width, double feather) {
  MaskImage mask(width, height, MaskSpace::Panorama, 0.0f);
  const double centre = width / 2.0;
  for (int x = 0; x < width; ++x) {
    const double d = std::abs(x + 0.5 - centre) - strip_width / 2.0;
    double m = d <= 0.0 ? 1.0 : (feather > 0.0 ? 1.0 - d / feather : 0.0);
    m = std::clamp(m, 0.0, 1.0);
    for (int y = 0; y < height; ++y) mask(x, y) = static_cast<float>(m);
  }
  return mask;
}

MaskImage disk_mask(int size, double radius, double feather) {
  MaskImage mask(size, size, MaskSpace::Panorama, 0.0f);
  const double c = size / 2.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double d = std::hypot(x + 0.5 - c, y + 0.5 - c) - radius;
      double m = d <= 0.0 ? 1.0 : (feather > 0.0 ? 1.0 - d / feather : 0.0);
      mask(x, y) = static_cast<float>(std::clamp(m, 0.0, 1.0));
    }
  return mask;
}

Image8 fix_seams(const Image8& pano, const ImageF& distance, Stylizer& stylizer,
                 const StylizeRequest& base, const SeamParams& params) {
  params.validate();
  const ImageF dist = distance.empty() ? ImageF(pano.width(), pano.height(), 1, 1.0f) : distance;
  require(dist.width() == pano.width() && dist.height() == pano.height(),
          ErrorKind::InvalidArgument, "seam fix: distance map size differs from the panorama");
  Image8 out = pano;

  auto horizontal = [&] {
    const Image8 rolled = roll_half(out);
    const MaskImage strip =
        center_strip_mask(out.width(), out.height(),
                          static_cast<double>(out.width()) / params.strip_divisor,
                          params.strip_feather);
    out = unroll_half(inpaint(stylizer, base, "seam/horizontal", rolled, roll_half(dist), strip));
  };
  auto poles = [&] {
    for (Pole pole : {Pole::Up, Pole::Down}) {
      auto view = unwrap_pole(out, pole, params.pole_fov_deg, params.pole_size);
      const auto dview = unwrap_pole(dist, pole, params.pole_fov_deg, params.pole_size);
      const MaskImage disk = disk_mask(params.pole_size,
                                       params.pole_disk_fraction * params.pole_size / 2.0,
                                       params.blend_radius);
      const Image8 edited = inpaint(stylizer, base, pole == Pole::Up ? "seam/up" : "seam/down",
                                    view.image, dview.image, disk);
      rewarp_pole(edited, view.warp, out, params.blend_radius);
    }
  };

  if (params.poles_first) {
    if (params.fix_poles) poles();
    if (params.fix_horizontal) horizontal();
  } else {
    if (params.fix_horizontal) horizontal();
    if (params.fix_poles) poles();
  }
  return out;
}

}  // namespace dreampipe
