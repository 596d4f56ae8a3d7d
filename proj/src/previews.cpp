#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Geometry>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "dreampipe/bvh.hpp"
#include "dreampipe/image_io.hpp"
#include "dreampipe/mesh_io.hpp"
#include "dreampipe/pipeline.hpp"
#include "dreampipe/render.hpp"

namespace dreampipe {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Image8 as_rgb(const Image8& img) {
  if (img.channels() == 3) return img;
  Image8 out(img.width(), img.height(), 3);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) out(x, y, c) = img(x, y, img.channels() >= 3 ? c : 0);
  return out;
}

// Stacks images top to bottom; narrower ones are padded with black.
Image8 stack(const std::vector<Image8>& parts) {
  int w = 0, h = 0;
  for (const Image8& p : parts) {
    w = std::max(w, p.width());
    h += p.height();
  }
  Image8 out(w, h, 3, 0);
  int y0 = 0;
  for (const Image8& p : parts) {
    const Image8 rgb = as_rgb(p);
    for (int y = 0; y < rgb.height(); ++y)
      for (int x = 0; x < rgb.width(); ++x)
        for (int c = 0; c < 3; ++c) out(x, y0 + y, c) = rgb(x, y, c);
    y0 += p.height();
  }
  return out;
}

// Mask on: tinted green; off: darkened.
Image8 overlay(const Image8& base, const Image8& mask) {
  Image8 out = as_rgb(base);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      const bool on = mask(x, y, 0) >= 128;
      for (int c = 0; c < 3; ++c) {
        const int v = out(x, y, c);
        out(x, y, c) = static_cast<std::uint8_t>(on ? (c == 1 ? (v + 255) / 2 : v / 2 + 20) : v / 4);
      }
    }
  return out;
}

}  // namespace

PreviewManifest emit_previews(const fs::path& run_dir, const PreviewOptions& options) {
  PreviewManifest manifest;
  const fs::path stages = run_dir / "stages";
  const fs::path previews = run_dir / "previews";
  fs::create_directories(previews);

  auto load = [&](const std::string& name) -> std::optional<Image8> {
    const fs::path p = stages / name;
    if (!fs::exists(p)) {
      manifest.missing.push_back("stages/" + name);
      return std::nullopt;
    }
    try {
      return load_png(p);
    } catch (const Error& e) {
      spdlog::warn("preview: cannot read {}: {}", p.string(), e.what());
      manifest.missing.push_back("stages/" + name);
      return std::nullopt;
    }
  };
  auto emit = [&](const std::string& name, const Image8& img) {
    save_png(previews / name, img);
    manifest.images.push_back("previews/" + name);
  };
  auto stack_available = [&](const std::string& out, const std::vector<std::string>& names) {
    std::vector<Image8> parts;
    for (const auto& n : names)
      if (auto img = load(n)) parts.push_back(std::move(*img));
    if (!parts.empty()) emit(out, stack(parts));
  };

  stack_available("panoramas.png",
                  {"01_real_fine.png", "04_style_first_seamfixed.png", "06_blended.png"});
  stack_available("alignment.png",
                  {"03_style_first_large.png", "05_align_first_large.png", "06_depth_edges.png"});

  std::optional<Image8> atlas = load("10_atlas_final.png");
  if (atlas) emit("atlas_final.png", *atlas);
  std::vector<std::string> masks{"07_init_vis.png", "08_accu.png"};
  if (fs::exists(stages))
    for (const auto& entry : fs::directory_iterator(stages)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("08_vp", 0) == 0 &&
          (name.find("_conf.png") != std::string::npos || name.find("_write.png") != std::string::npos))
        masks.push_back(name);
    }
  std::sort(masks.begin() + 2, masks.end());
  for (const auto& name : masks) {
    auto m = load(name);
    if (!m) continue;
    const Image8 base = atlas ? *atlas : Image8(m->width(), m->height(), 3, 160);
    if (base.width() != m->width() || base.height() != m->height()) continue;
    emit("mask_" + name.substr(0, name.size() - 4).substr(3) + ".png", overlay(base, *m));
  }

  const fs::path mesh_path = run_dir / "mesh" / "textured.obj";
  std::vector<CameraPose> poses = options.poses;
  if (poses.empty() && fs::exists(run_dir / "poses.json")) {
    std::ifstream in(run_dir / "poses.json");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      const json j = json::parse(ss.str());
      const CameraPose central = CameraPose::from_array(j.at("central").get<std::array<double, 7>>());
      for (int k = 0; k < 4; ++k) {
        CameraPose p = central;
        p.rotation = central.rotation *
                     Eigen::AngleAxisd(k * kPi / 2.0, Vec3::UnitZ()).toRotationMatrix();
        poses.push_back(p);
      }
    } catch (const std::exception& e) {
      spdlog::warn("preview: unreadable poses.json: {}", e.what());
    }
  }
  if (!fs::exists(mesh_path)) {
    manifest.missing.push_back("mesh/textured.obj");
  } else if (poses.empty()) {
    manifest.missing.push_back("poses.json");
  } else {
    const TexturedMesh mesh = load_mesh(mesh_path);
    const Bvh bvh(mesh);
    for (std::size_t k = 0; k < poses.size(); ++k) {
      const HitBuffer hits =
          trace_perspective(bvh, poses[k], options.width, options.height, options.fov_deg);
      emit("view_" + std::to_string(k) + ".png", shade_texture(hits, mesh, mesh.texture));
    }
  }

  json j{{"images", manifest.images}, {"missing", manifest.missing}};
  const std::string text = j.dump(2) + "\n";
  write_file(previews / "manifest.json", {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  return manifest;
}

}  // namespace dreampipe
