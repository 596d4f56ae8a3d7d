#include <cstdio>
#include <iostream>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "dreampipe/bvh.hpp"
#include "dreampipe/image_io.hpp"
#include "dreampipe/imitator.hpp"
#include "dreampipe/mesh_io.hpp"
#include "dreampipe/pipeline.hpp"
#include "dreampipe/poisson.hpp"
#include "dreampipe/projection.hpp"
#include "dreampipe/render.hpp"
#include "dreampipe/rng.hpp"
#include "dreampipe/seam_fix.hpp"
#include "dreampipe/stylizer.hpp"
#include "dreampipe/toy_scene.hpp"
#include "dreampipe/uv_fields.hpp"

namespace fs = std::filesystem;
using namespace dreampipe;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;
constexpr int kExitStage = 4;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument: return kExitConfig;
    case ErrorKind::Backend:
    case ErrorKind::Contract: return kExitBackend;
    default: return kExitStage;
  }
}

CameraPose parse_pose(const std::string& text, const TexturedMesh& mesh) {
  if (text.empty() || text == "auto-centroid") return auto_centroid_pose(mesh);
  std::array<double, 7> v{};
  std::stringstream ss(text);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    require(i < 7, ErrorKind::Config, "pose takes 7 comma-separated numbers");
    try {
      v[i++] = std::stod(item);
    } catch (const std::exception&) {
      fail(ErrorKind::Config, "bad pose component '" + item + "'");
    }
  }
  require(i == 7, ErrorKind::Config, "pose takes 7 comma-separated numbers: tx,ty,tz,qw,qx,qy,qz");
  CameraPose pose = CameraPose::from_array(v);
  pose.validate();
  return pose;
}

BackendConfig backend_from(const std::string& config_path) {
  if (config_path.empty()) return {};
  std::ifstream in(config_path);
  require(static_cast<bool>(in), ErrorKind::Config, "cannot read " + config_path);
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const std::exception& e) {
    fail(ErrorKind::Config, config_path + ": " + e.what());
  }
  BackendConfig b;
  if (!j.contains("backend")) return b;
  const auto& jb = j.at("backend");
  b.type = jb.value("type", b.type);
  b.endpoint = jb.value("endpoint", b.endpoint);
  b.command = jb.value("command", b.command);
  b.timeout_s = jb.value("timeout_s", b.timeout_s);
  b.retry.attempts = jb.value("attempts", b.retry.attempts);
  b.retry.initial_backoff = std::chrono::milliseconds(
      jb.value("backoff_ms", static_cast<int>(b.retry.initial_backoff.count())));
  return b;
}

void write_toy_scene(const fs::path& dir, int atlas_size, int pano_width) {
  ToySceneOptions opt;
  opt.atlas_size = atlas_size;
  const ToyScene scene = build_toy_scene(opt);
  fs::create_directories(dir);
  save_mesh_with_texture(scene.mesh, scene.mesh.texture, nullptr, dir / "scene.obj");
  save_poses(dir / "poses.json", scene.candidate_poses);
  nlohmann::json cfg{
      {"mesh", "scene.obj"},
      {"prompt", "a cozy wooden cabin interior"},
      {"seed", 42},
      {"output_dir", "run"},
      {"central_viewpoint", "auto-centroid"},
      {"inpaint_viewpoints", "fps:2"},
      {"candidate_poses", "poses.json"},
      {"panorama", {{"width", pano_width}, {"height", pano_width / 2}, {"upscale_factor", 3}}},
      {"seams", {{"pole_size", 256}}},
      {"imitator", {{"hidden_layers", 2}, {"width", 64}, {"batch_size", 1024}, {"iterations", 1500}, {"learning_rate", 3e-3}}},
      {"backend", {{"type", "mock"}}}};
  const std::string text = cfg.dump(2) + "\n";
  write_file(dir / "config.json", {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("dreampipe");
  spdlog::set_default_logger(logger);

  CLI::App app{"Panoramic scene restyling and texture baking for textured room meshes"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  // run
  auto* run = app.add_subcommand("run", "Run the full texturing pipeline");
  std::string config_path;
  run->add_option("--config", config_path, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);

  // preview
  auto* preview = app.add_subcommand("preview", "Write preview images for a run directory");
  std::string run_dir;
  preview->add_option("--run-dir", run_dir, "Run output directory")->required();

  // render-pano
  auto* render = app.add_subcommand("render-pano", "Render an equirectangular panorama");
  std::string mesh_path, pose_text, out_path, dist_path;
  int width = 1024;
  render->add_option("--mesh", mesh_path)->required()->check(CLI::ExistingFile);
  render->add_option("--pose", pose_text, "tx,ty,tz,qw,qx,qy,qz or auto-centroid");
  render->add_option("--width", width, "Panorama width (height is half)");
  render->add_option("--out", out_path, "Colour PNG")->required();
  render->add_option("--dist", dist_path, "Distance PFM");

  // bake-visibility
  auto* bake = app.add_subcommand("bake-visibility", "Write the UV visibility mask for a pose");
  double eps = kDefaultVisibilityEpsilon;
  bake->add_option("--mesh", mesh_path)->required()->check(CLI::ExistingFile);
  bake->add_option("--pose", pose_text);
  bake->add_option("--width", width);
  bake->add_option("--eps", eps);
  bake->add_option("--out", out_path)->required();

  // blend
  auto* blend = app.add_subcommand("blend", "Seamless-clone source into target inside a mask");
  std::string target_path, source_path, mask_path;
  blend->add_option("--target", target_path)->required()->check(CLI::ExistingFile);
  blend->add_option("--source", source_path)->required()->check(CLI::ExistingFile);
  blend->add_option("--mask", mask_path)->required()->check(CLI::ExistingFile);
  blend->add_option("--out", out_path)->required();

  // fix-seams
  auto* seams = app.add_subcommand("fix-seams", "Repair the wrap seam and poles of a panorama");
  std::string pano_path, backend_config;
  seams->add_option("--pano", pano_path)->required()->check(CLI::ExistingFile);
  seams->add_option("--dist", dist_path, "Distance PFM of the panorama")->check(CLI::ExistingFile);
  seams->add_option("--out", out_path)->required();
  seams->add_option("--config", backend_config, "Config whose backend section is used")
      ->check(CLI::ExistingFile);
  std::uint64_t seed = 42;
  seams->add_option("--seed", seed);
  std::string prompt;
  seams->add_option("--prompt", prompt);

  // imitate
  auto* imitate = app.add_subcommand("imitate", "Train or apply the texture imitator");
  bool do_train = false, do_apply = false;
  std::string stylized_path, accu_path, model_path;
  int iterations = 0;
  imitate->add_flag("--train", do_train);
  imitate->add_flag("--apply", do_apply);
  imitate->add_option("--mesh", mesh_path, "Mesh with the real atlas")->required()->check(CLI::ExistingFile);
  imitate->add_option("--stylized", stylized_path, "Partially stylized atlas PNG")->required()->check(CLI::ExistingFile);
  imitate->add_option("--accu", accu_path, "Painted-texel mask PNG")->required()->check(CLI::ExistingFile);
  imitate->add_option("--model", model_path, "Checkpoint path")->required();
  imitate->add_option("--out", out_path, "Fused atlas PNG (--apply)");
  imitate->add_option("--iterations", iterations);
  imitate->add_option("--seed", seed);

  // serve-mock
  auto* serve = app.add_subcommand("serve-mock", "Serve the mock stylizer");
  bool stdio = false;
  int port = -1;
  std::string host = "127.0.0.1", port_file;
  int fail_first = 0;
  serve->add_flag("--stdio", stdio, "Newline-delimited JSON on stdin/stdout");
  serve->add_option("--http", port, "Listen on this port (0 picks one)");
  serve->add_option("--host", host);
  serve->add_option("--port-file", port_file, "Write the bound port here");
  serve->add_option("--fail-first", fail_first, "Answer the first N requests with a transient error");

  // make-toy-scene
  auto* toy = app.add_subcommand("make-toy-scene", "Write a small box-room scene with a config");
  std::string toy_dir;
  int atlas_size = 512;
  int toy_pano = 256;
  toy->add_option("--out", toy_dir)->required();
  toy->add_option("--atlas", atlas_size);
  toy->add_option("--pano-width", toy_pano);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*run) {
      const PipelineConfig cfg = load_config(config_path);
      const PipelineReport rep = run_pipeline(cfg);
      std::cout << "coverage " << rep.final_coverage << ", report " << (cfg.output_dir / "report.json").string()
                << "\n";
    } else if (*preview) {
      const PreviewManifest m = emit_previews(run_dir);
      std::cout << m.images.size() << " preview images";
      if (!m.missing.empty()) std::cout << ", " << m.missing.size() << " intermediates missing";
      std::cout << "\n";
    } else if (*render) {
      const TexturedMesh mesh = load_mesh(mesh_path);
      require(width > 0 && width % 2 == 0, ErrorKind::Config, "--width must be even and positive");
      const PanoramaFrame frame = render_panorama(mesh, parse_pose(pose_text, mesh), width, width / 2);
      save_png(out_path, frame.color);
      if (!dist_path.empty()) save_pfm(dist_path, frame.distance);
    } else if (*bake) {
      const TexturedMesh mesh = load_mesh(mesh_path);
      require(width > 0 && width % 2 == 0, ErrorKind::Config, "--width must be even and positive");
      const PanoramaFrame frame = render_panorama(mesh, parse_pose(pose_text, mesh), width, width / 2);
      const UvFieldSet fields = rasterize_uv_fields(mesh);
      save_mask_png(out_path, compute_visibility_mask(fields, frame, eps));
    } else if (*blend) {
      const Image8 target = load_png(target_path);
      const Image8 source = load_png(source_path);
      const MaskImage mask = load_mask(mask_path, MaskSpace::Panorama);
      save_png(out_path, poisson_blend(target, source, mask));
    } else if (*seams) {
      const Image8 pano = load_png(pano_path);
      const ImageF dist = dist_path.empty() ? ImageF{} : load_pfm(dist_path);
      auto stylizer = make_stylizer(backend_from(backend_config));
      StylizeRequest base;
      base.prompt = prompt;
      base.seed = derive_seed(seed, "seam");
      save_png(out_path, fix_seams(pano, dist, *stylizer, base, SeamParams{}));
    } else if (*imitate) {
      require(do_train != do_apply, ErrorKind::Config, "pass exactly one of --train or --apply");
      const TexturedMesh mesh = load_mesh(mesh_path);
      const UvFieldSet fields = rasterize_uv_fields(mesh);
      Image8 stylized = load_png(stylized_path);
      const MaskImage accu = load_mask(accu_path, MaskSpace::Uv);
      if (do_train) {
        ImitatorParams params;
        params.seed = seed;
        if (iterations > 0) params.iterations = iterations;
        const TrainResult r = train_imitator(fields, mesh.texture, stylized, accu, params);
        save_imitator(model_path, r.model);
        std::cout << "loss " << r.final_loss << ", held-out error " << r.holdout_error << "\n";
      } else {
        require(!out_path.empty(), ErrorKind::Config, "--apply needs --out");
        const ImitatorModel model = load_imitator(model_path);
        fuse_imitated(stylized, imitate_all(model, fields, mesh.texture), accu, fields);
        save_png(out_path, stylized);
      }
    } else if (*serve) {
      require(stdio != (port >= 0), ErrorKind::Config, "pass exactly one of --stdio or --http PORT");
      const ReplyHandler handler = mock_reply_handler(fail_first);
      if (stdio) {
        std::ios::sync_with_stdio(false);
        serve_stdio(std::cin, std::cout, handler);
      } else {
        StylizeHttpServer server(handler);
        const int bound = server.bind(host, port);
        if (!port_file.empty()) {
          const std::string text = std::to_string(bound) + "\n";
          write_file(port_file, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
        }
        spdlog::info("serving mock stylizer on {}:{}", host, bound);
        server.listen();
      }
    } else if (*toy) {
      write_toy_scene(toy_dir, atlas_size, toy_pano);
      std::cout << "wrote " << (fs::path(toy_dir) / "config.json").string() << "\n";
    }
  } catch (const StageError& e) {
    spdlog::error("{}", e.what());
    return e.kind() == ErrorKind::Backend || e.kind() == ErrorKind::Contract ? kExitBackend
           : e.kind() == ErrorKind::Config                                   ? kExitConfig
                                                                             : kExitStage;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitStage;
  }
  return 0;
}
