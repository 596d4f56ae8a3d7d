#include "dreampipe/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "dreampipe/bvh.hpp"
#include "dreampipe/image_io.hpp"
#include "dreampipe/poisson.hpp"
#include "dreampipe/projection.hpp"
#include "dreampipe/render.hpp"
#include "dreampipe/rng.hpp"
#include "dreampipe/uv_fields.hpp"

namespace dreampipe {
namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::size_t> select_viewpoints(const std::vector<CameraPose>& candidates,
                                           std::size_t k, const Vec3& centroid) {
  require(k <= candidates.size(), ErrorKind::InvalidArgument,
          "cannot select " + std::to_string(k) + " viewpoints from " +
              std::to_string(candidates.size()) + " candidates");
  std::vector<std::size_t> picked;
  if (k == 0) return picked;
  std::size_t first = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double d = (candidates[i].center - centroid).squaredNorm();
    if (d < best) {
      best = d;
      first = i;
    }
  }
  picked.push_back(first);
  std::vector<double> nearest(candidates.size(), std::numeric_limits<double>::infinity());
  std::vector<bool> used(candidates.size(), false);
  used[first] = true;
  while (picked.size() < k) {
    const Vec3& last = candidates[picked.back()].center;
    std::size_t arg = candidates.size();
    double far = -1.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      nearest[i] = std::min(nearest[i], (candidates[i].center - last).squaredNorm());
      if (!used[i] && nearest[i] > far) {
        far = nearest[i];
        arg = i;
      }
    }
    used[arg] = true;
    picked.push_back(arg);
  }
  return picked;
}

CameraPose auto_centroid_pose(const TexturedMesh& mesh) {
  require(!mesh.positions.empty(), ErrorKind::InvalidArgument, "mesh has no vertices");
  const Aabb box = mesh.bounds();
  std::vector<double> z;
  z.reserve(mesh.positions.size());
  for (const Vec3& p : mesh.positions) z.push_back(p.z());
  const std::size_t k = static_cast<std::size_t>(0.05 * (z.size() - 1));
  std::nth_element(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(k), z.end());
  const double floor = z[k];
  CameraPose pose;
  pose.center = box.center();
  const double margin = std::min(0.05, 0.25 * box.extent().z());
  pose.center.z() = std::clamp(floor + 1.6, box.lo.z() + margin, box.hi.z() - margin);
  return pose;
}

namespace {

using Clock = std::chrono::steady_clock;

struct RunDir {
  fs::path root;
  fs::path stages() const { return root / "stages"; }
  void png(const std::string& name, const Image8& img) const { save_png(stages() / name, img); }
  void mask(const std::string& name, const MaskImage& m) const {
    save_mask_png(stages() / name, m);
  }
  void pfm(const std::string& name, const ImageF& f) const { save_pfm(stages() / name, f); }
};

double coverage_of(const MaskImage& painted, const UvFieldSet& fields) {
  if (fields.valid_count == 0) return 0.0;
  std::size_t n = 0;
  for (int y = 0; y < fields.height; ++y)
    for (int x = 0; x < fields.width; ++x)
      if (fields.is_valid(x, y) && painted.on(x, y)) ++n;
  return static_cast<double>(n) / static_cast<double>(fields.valid_count);
}

MaskImage validity_mask(const UvFieldSet& fields) {
  MaskImage m(fields.width, fields.height, MaskSpace::Uv, 0.0f);
  for (std::size_t i = 0; i < fields.valid.size(); ++i)
    m.values.data()[i] = fields.valid[i] ? 1.0f : 0.0f;
  return m;
}

json pose_json(const CameraPose& p) { return p.to_array(); }

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace

std::string report_to_json(const PipelineReport& r) {
  json stages = json::array();
  for (const auto& s : r.stages)
    stages.push_back({{"name", s.name}, {"wall_ms", s.wall_ms}, {"coverage", s.coverage}});
  json vps = json::array();
  for (const auto& v : r.viewpoints)
    vps.push_back({{"pose", pose_json(v.pose)},
                   {"inp_vis", v.inp_vis},
                   {"dep_edge", v.dep_edge},
                   {"safe_view", v.safe_view},
                   {"conf", v.conf},
                   {"written", v.written}});
  json seeds = json::object();
  for (const auto& [name, value] : r.seeds) seeds[name] = value;
  json j{{"stages", stages},
         {"viewpoints", vps},
         {"central_pose", pose_json(r.central_pose)},
         {"valid_texels", r.valid_texels},
         {"init_visible_texels", r.init_visible},
         {"final_coverage", r.final_coverage},
         {"imitator",
          {{"final_loss", r.imitator_loss},
           {"holdout_error", r.imitator_holdout_error},
           {"supervised_texels", r.imitator_supervised}}},
         {"bake_consistency_mae", r.bake_consistency_mae},
         {"poisson_residual", r.poisson_residual},
         {"seeds", seeds},
         {"backend", {{"name", r.backend}, {"calls", r.backend_calls}, {"retries", r.backend_retries}}}};
  if (!r.failed_stage.empty()) j["failure"] = {{"stage", r.failed_stage}, {"error", r.error}};
  return j.dump(2) + "\n";
}

PipelineReport run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  MeshLoadOptions opts;
  opts.default_atlas_size = cfg.default_atlas_size;
  TexturedMesh mesh;
  try {
    mesh = load_mesh(cfg.mesh, opts);
  } catch (const Error& e) {
    throw StageError("load-mesh", e);
  }
  auto stylizer = make_stylizer(cfg.backend);
  return run_pipeline(cfg, mesh, *stylizer);
}

PipelineReport run_pipeline(const PipelineConfig& cfg, const TexturedMesh& mesh,
                            Stylizer& stylizer) {
  cfg.validate();
  PipelineReport rep;
  rep.backend = stylizer.name();
  const RunDir out{cfg.output_dir};
  fs::create_directories(out.stages());

  const int W = cfg.pano_width;
  const int H = cfg.pano_height;
  const int FW = W * cfg.upscale_factor;
  const int FH = H * cfg.upscale_factor;

  auto seed_for = [&](const std::string& label) {
    const std::uint64_t s = derive_seed(cfg.seed, label);
    rep.seeds.emplace_back(label, s);
    return s;
  };
  StylizeRequest base;
  base.prompt = cfg.prompt;
  base.directives.circular_padding_fraction = cfg.circular_padding_fraction;
  base.directives.upscale_factor = cfg.upscale_factor;
  base.directives.denoise_strength = cfg.denoise_strength;
  auto request = [&](StylizeKind kind, const std::string& label) {
    StylizeRequest r = base;
    r.kind = kind;
    r.seed = seed_for(label);
    return r;
  };

  std::optional<Bvh> bvh;
  CameraPose central;
  PanoramaFrame coarse, fine;
  Image8 style, style_large, align, align_large, blended;
  UvFieldSet fields;
  Image8 atlas;
  MaskImage init_vis, accu, painted;

  auto stage = [&](const std::string& name, auto&& body) {
    spdlog::info("stage {}", name);
    const auto t0 = Clock::now();
    try {
      body();
    } catch (const Error& e) {
      rep.failed_stage = name;
      rep.error = e.what();
      rep.backend_calls = stylizer.call_count();
      rep.backend_retries = stylizer.retry_count();
      try {
        write_text(out.root / "report.json", report_to_json(rep));
      } catch (const Error&) {
      }
      throw StageError(name, e);
    }
    StageReport s;
    s.name = name;
    s.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    s.coverage = painted.values.empty() ? 0.0 : coverage_of(painted, fields);
    rep.stages.push_back(s);
  };

  stage("render", [&] {
    mesh.validate();
    bvh.emplace(mesh);
    central = cfg.central_pose ? *cfg.central_pose : auto_centroid_pose(mesh);
    central.validate();
    rep.central_pose = central;
    coarse = render_panorama(mesh, *bvh, central, W, H);
    fine = render_panorama(mesh, *bvh, central, FW, FH);
    out.png("01_real_coarse.png", coarse.color);
    out.png("01_real_fine.png", fine.color);
    out.pfm("01_distance_coarse.pfm", coarse.distance);
    out.pfm("01_distance_fine.pfm", fine.distance);
  });

  stage("generate", [&] {
    StylizeRequest r = request(StylizeKind::Generate, "generate");
    r.set_field(slot::kDistance, coarse.distance);
    r.set_image(slot::kSoftedgeSource, coarse.color);
    style = stylizer.stylize_image(r);
    out.png("02_style_first.png", style);
  });

  stage("upscale-style", [&] {
    StylizeRequest r = request(StylizeKind::Upscale, "upscale/style");
    r.set_image(slot::kImage, style);
    style_large = stylizer.stylize_image(r);
    out.png("03_style_first_large.png", style_large);
  });

  stage("seam-fix", [&] {
    StylizeRequest r = request(StylizeKind::Inpaint, "seam/style");
    style_large = fix_seams(style_large, fine.distance, stylizer, r, cfg.seams);
    out.png("04_style_first_seamfixed.png", style_large);
  });

  stage("align", [&] {
    StylizeRequest r = request(StylizeKind::Align, "align");
    r.set_image(slot::kCannySource, coarse.color);
    r.set_image(slot::kTileSource, style);
    align = stylizer.stylize_image(r);
    StylizeRequest u = request(StylizeKind::Upscale, "upscale/align");
    u.set_image(slot::kImage, align);
    align_large = stylizer.stylize_image(u);
    if (cfg.fix_align_seams)
      align_large = fix_seams(align_large, fine.distance, stylizer,
                              request(StylizeKind::Inpaint, "seam/align"), cfg.seams);
    out.png("05_align_first.png", align);
    out.png("05_align_first_large.png", align_large);
  });

  stage("dual-blend", [&] {
    const MaskImage edges = detect_depth_edges(fine.distance, cfg.masks);
    PoissonResult info;
    blended = poisson_blend(style_large, align_large, edges, PoissonOptions{}, &info);
    rep.poisson_residual = info.residual;
    out.mask("06_depth_edges.png", edges);
    out.png("06_blended.png", blended);
  });

  stage("project-central", [&] {
    fields = rasterize_uv_fields(mesh);
    rep.valid_texels = fields.valid_count;
    init_vis = compute_visibility_mask(fields, fine, cfg.visibility_epsilon);
    rep.init_visible = init_vis.count_on();
    atlas = Image8(mesh.atlas_width(), mesh.atlas_height(), 3, 0);
    project_panorama_to_uv(fields, central, blended, init_vis, atlas);
    accu = init_vis;
    painted = accu;
    out.mask("07_valid.png", validity_mask(fields));
    out.mask("07_init_vis.png", init_vis);
    out.png("07_atlas.png", atlas);
  });

  std::vector<CameraPose> viewpoints = cfg.inpaint_poses;
  if (viewpoints.empty() && cfg.fps_count > 0) {
    // The FPS seed sits next to the central viewpoint and would add little,
    // so sample one extra pose and drop the seed when the pool allows it.
    const std::size_t want = static_cast<std::size_t>(cfg.fps_count);
    const std::size_t k = std::min(want + 1, cfg.candidate_poses.size());
    auto picked = select_viewpoints(cfg.candidate_poses, k, mesh.bounds().center());
    if (picked.size() > want) picked.erase(picked.begin());
    for (std::size_t i : picked) viewpoints.push_back(cfg.candidate_poses[i]);
  }

  for (std::size_t i = 0; i < viewpoints.size(); ++i) {
    const std::string tag = "08_vp" + std::to_string(i) + "_";
    stage("inpaint-" + std::to_string(i), [&] {
      const CameraPose& pose = viewpoints[i];
      pose.validate();
      const PanoramaFrame frame = render_panorama(mesh, *bvh, pose, FW, FH);
      const MaskImage painted_pano = shade_uv_mask(frame.hits, mesh, accu);
      Image8 partial = shade_texture(frame.hits, mesh, atlas);
      for (int y = 0; y < FH; ++y)
        for (int x = 0; x < FW; ++x)
          if (!painted_pano.on(x, y))
            for (int c = 0; c < 3; ++c) partial(x, y, c) = 0;
      const MaskImage request_mask = inpaint_request_mask(painted_pano, cfg.masks);

      StylizeRequest r = request(StylizeKind::Inpaint, "inpaint/" + std::to_string(i));
      r.set_image(slot::kPartialImage, partial);
      r.set_field(slot::kDistance, frame.distance);
      r.set_field(slot::kMask, request_mask.values);
      const Image8 inpainted = stylizer.stylize_image(r);

      const MaskImage edge_pano = detect_depth_edges(frame.distance, cfg.masks);
      const MaskImage dep_edge = uv_depth_edge_mask(fields, frame, edge_pano);
      const MaskImage safe = safe_view_mask(fields, pose, cfg.masks);
      const MaskImage inp_vis = compute_visibility_mask(fields, frame, cfg.visibility_epsilon);
      const MaskImage conf = confidential_mask(dep_edge, safe, inp_vis);
      const MaskImage write = mask_subtract(conf, accu);
      project_panorama_to_uv(fields, pose, inpainted, write, atlas);
      accu = mask_union(accu, write);
      painted = accu;

      ViewpointReport v;
      v.pose = pose;
      v.inp_vis = inp_vis.count_on();
      v.dep_edge = dep_edge.count_on();
      v.safe_view = safe.count_on();
      v.conf = conf.count_on();
      v.written = write.count_on();
      rep.viewpoints.push_back(v);

      out.png(tag + "partial.png", partial);
      out.mask(tag + "painted.png", painted_pano);
      out.mask(tag + "inp_mask.png", request_mask);
      out.png(tag + "inpainted.png", inpainted);
      out.mask(tag + "depth_edges.png", edge_pano);
      out.mask(tag + "dep_edge.png", dep_edge);
      out.mask(tag + "safe_view.png", safe);
      out.mask(tag + "inp_vis.png", inp_vis);
      out.mask(tag + "conf.png", conf);
      out.mask(tag + "write.png", write);
      out.mask(tag + "accu.png", accu);
      out.png(tag + "atlas.png", atlas);
    });
  }

  stage("imitate", [&] {
    out.mask("08_accu.png", accu);
    ImitatorParams ip = cfg.imitator;
    ip.seed = seed_for("imitator");
    const TrainResult trained = train_imitator(fields, mesh.texture, atlas, accu, ip);
    rep.imitator_loss = trained.final_loss;
    rep.imitator_holdout_error = trained.holdout_error;
    rep.imitator_supervised = trained.supervised;
    save_imitator(out.root / "imitator.dpim", trained.model);
    const Image8 imitated = imitate_all(trained.model, fields, mesh.texture);
    fuse_imitated(atlas, imitated, accu, fields);
    painted = validity_mask(fields);
    out.png("09_imitated.png", imitated);
    out.png("09_atlas.png", atlas);
  });

  stage("bake", [&] {
    MaskImage written = painted;
    const Image8 baked = dilate_texels(atlas, written, cfg.texel_dilation);
    std::optional<MaskImage> alpha;
    if (!cfg.window_alpha.empty())
      alpha = window_alpha_mask(baked.width(), baked.height(), cfg.window_alpha);
    save_mesh_with_texture(mesh, baked, alpha ? &*alpha : nullptr, out.root / "mesh" / "textured.obj");
    out.png("10_atlas_final.png", baked);
    if (alpha) out.mask("10_alpha.png", *alpha);

    // Re-render the baked atlas from the central pose and compare with the
    // blended panorama where the central projection painted.
    const Image8 rerender = shade_texture(fine.hits, mesh, baked);
    const MaskImage seen = shade_uv_mask(fine.hits, mesh, init_vis);
    double total = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < FH; ++y)
      for (int x = 0; x < FW; ++x) {
        if (!seen.on(x, y)) continue;
        for (int c = 0; c < 3; ++c)
          total += std::abs(static_cast<int>(rerender(x, y, c)) - static_cast<int>(blended(x, y, c)));
        n += 3;
      }
    rep.bake_consistency_mae = n ? total / static_cast<double>(n) : 0.0;
    out.png("10_rerender_central.png", rerender);

    json poses{{"central", pose_json(central)}, {"inpaint", json::array()}};
    for (const CameraPose& p : viewpoints) poses["inpaint"].push_back(pose_json(p));
    write_text(out.root / "poses.json", poses.dump(2) + "\n");
  });

  rep.final_coverage = coverage_of(painted, fields);
  rep.backend_calls = stylizer.call_count();
  rep.backend_retries = stylizer.retry_count();
  write_text(out.root / "report.json", report_to_json(rep));
  spdlog::info("done: coverage {:.4f}, bake consistency {:.3f}/255", rep.final_coverage,
               rep.bake_consistency_mae);
  return rep;
}

}  // namespace dreampipe
