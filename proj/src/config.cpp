#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "dreampipe/image_io.hpp"
#include "dreampipe/pipeline.hpp"

namespace dreampipe {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  require(obj.is_object(), ErrorKind::Config, where + " must be an object");
  for (const auto& [key, value] : obj.items())
    require(allowed.count(key) != 0, ErrorKind::Config,
            "unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, where + "." + key + ": " + e.what());
  }
}

CameraPose pose_from_json(const json& j, const std::string& where) {
  require(j.is_array() && j.size() == 7, ErrorKind::Config,
          where + ": a pose is [tx, ty, tz, qw, qx, qy, qz]");
  std::array<double, 7> v{};
  for (std::size_t i = 0; i < 7; ++i) {
    require(j[i].is_number(), ErrorKind::Config, where + ": pose entries must be numbers");
    v[i] = j[i].get<double>();
  }
  CameraPose p = CameraPose::from_array(v);
  try {
    p.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Config, where + ": " + e.what());
  }
  return p;
}

std::vector<CameraPose> poses_from_json(const json& j, const std::string& where) {
  require(j.is_array(), ErrorKind::Config, where + " must be an array of poses");
  std::vector<CameraPose> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(pose_from_json(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

json parse_or_fail(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, what + ": " + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Config, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void PipelineConfig::validate() const {
  require(pano_width > 0 && pano_height > 0 && pano_width == 2 * pano_height, ErrorKind::Config,
          "panorama resolution must be 2:1");
  require(upscale_factor >= 1 && upscale_factor <= 8, ErrorKind::Config,
          "upscale_factor must lie in [1, 8]");
  require(visibility_epsilon > 0.0, ErrorKind::Config, "visibility_epsilon must be positive");
  require(texel_dilation >= 0, ErrorKind::Config, "texel_dilation must be non-negative");
  require(fps_count >= 0, ErrorKind::Config, "the number of inpainting viewpoints must be >= 0");
  require(circular_padding_fraction >= 0.0 && circular_padding_fraction <= 1.0, ErrorKind::Config,
          "circular_padding_fraction must lie in [0, 1]");
  require(denoise_strength >= 0.0 && denoise_strength <= 1.0, ErrorKind::Config,
          "denoise_strength must lie in [0, 1]");
  masks.validate();
  seams.validate();
  imitator.validate();
  require(!output_dir.empty(), ErrorKind::Config, "output_dir must be set");
}

std::vector<CameraPose> load_poses(const std::filesystem::path& path) {
  return poses_from_json(parse_or_fail(read_text(path), path.string()), path.string());
}

void save_poses(const std::filesystem::path& path, const std::vector<CameraPose>& poses) {
  json arr = json::array();
  for (const CameraPose& p : poses) arr.push_back(p.to_array());
  const std::string text = arr.dump(2) + "\n";
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

PipelineConfig load_config(const std::filesystem::path& path) {
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return parse_config(read_text(path), base);
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  const json j = parse_or_fail(text, "config");
  check_keys(j,
             {"mesh", "prompt", "seed", "output_dir", "central_viewpoint", "inpaint_viewpoints",
              "candidate_poses", "panorama", "visibility_epsilon", "texel_dilation", "masks",
              "seams", "fix_align_seams", "imitator", "backend", "directives", "window_alpha",
              "default_atlas_size"},
             "config");
  PipelineConfig c;
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  std::string s;
  require(j.contains("mesh"), ErrorKind::Config, "config needs a mesh path");
  read(j, "mesh", s, "config");
  c.mesh = resolve(s);
  require(std::filesystem::exists(c.mesh), ErrorKind::Config,
          "mesh not found: " + c.mesh.string());
  read(j, "prompt", c.prompt, "config");
  read(j, "seed", c.seed, "config");
  if (j.contains("output_dir")) {
    read(j, "output_dir", s, "config");
    c.output_dir = resolve(s);
  } else {
    c.output_dir = base_dir / c.output_dir;
  }
  read(j, "visibility_epsilon", c.visibility_epsilon, "config");
  read(j, "texel_dilation", c.texel_dilation, "config");
  read(j, "fix_align_seams", c.fix_align_seams, "config");
  read(j, "default_atlas_size", c.default_atlas_size, "config");

  if (j.contains("central_viewpoint")) {
    const json& v = j.at("central_viewpoint");
    if (v.is_string()) {
      require(v.get<std::string>() == "auto-centroid", ErrorKind::Config,
              "central_viewpoint must be \"auto-centroid\" or a pose");
    } else {
      c.central_pose = pose_from_json(v, "central_viewpoint");
    }
  }
  if (j.contains("candidate_poses")) {
    const json& v = j.at("candidate_poses");
    if (v.is_string()) {
      const auto path = resolve(v.get<std::string>());
      require(std::filesystem::exists(path), ErrorKind::Config,
              "candidate pose file not found: " + path.string());
      c.candidate_poses = load_poses(path);
    } else {
      c.candidate_poses = poses_from_json(v, "candidate_poses");
    }
  }
  if (j.contains("inpaint_viewpoints")) {
    const json& v = j.at("inpaint_viewpoints");
    if (v.is_string()) {
      const std::string text = v.get<std::string>();
      require(text.rfind("fps:", 0) == 0, ErrorKind::Config,
              "inpaint_viewpoints must be \"fps:N\" or a pose list");
      try {
        std::size_t used = 0;
        c.fps_count = std::stoi(text.substr(4), &used);
        require(used == text.size() - 4, ErrorKind::Config, "bad count");
      } catch (const std::exception&) {
        fail(ErrorKind::Config, "inpaint_viewpoints: cannot parse '" + text + "'");
      }
    } else {
      c.inpaint_poses = poses_from_json(v, "inpaint_viewpoints");
      c.fps_count = 0;
    }
  }
  if (c.inpaint_poses.empty() && c.fps_count > 0)
    require(static_cast<std::size_t>(c.fps_count) <= c.candidate_poses.size(), ErrorKind::Config,
            "fps:" + std::to_string(c.fps_count) + " needs at least that many candidate poses");

  if (j.contains("panorama")) {
    const json& p = j.at("panorama");
    check_keys(p, {"width", "height", "upscale_factor"}, "panorama");
    read(p, "width", c.pano_width, "panorama");
    read(p, "height", c.pano_height, "panorama");
    read(p, "upscale_factor", c.upscale_factor, "panorama");
  }
  if (j.contains("directives")) {
    const json& d = j.at("directives");
    check_keys(d, {"circular_padding_fraction", "denoise_strength"}, "directives");
    read(d, "circular_padding_fraction", c.circular_padding_fraction, "directives");
    read(d, "denoise_strength", c.denoise_strength, "directives");
  }
  if (j.contains("masks")) {
    const json& m = j.at("masks");
    check_keys(m,
               {"depth_edge_threshold", "dilation_radius", "blur_sigma", "reference_width",
                "grazing_cutoff_deg", "max_surface_distance"},
               "masks");
    read(m, "depth_edge_threshold", c.masks.depth_edge_threshold, "masks");
    read(m, "dilation_radius", c.masks.dilation_radius, "masks");
    read(m, "blur_sigma", c.masks.blur_sigma, "masks");
    read(m, "reference_width", c.masks.reference_width, "masks");
    read(m, "grazing_cutoff_deg", c.masks.grazing_cutoff_deg, "masks");
    read(m, "max_surface_distance", c.masks.max_surface_distance, "masks");
  }
  if (j.contains("seams")) {
    const json& m = j.at("seams");
    check_keys(m,
               {"fix_horizontal", "fix_poles", "poles_first", "pole_fov_deg", "pole_size",
                "pole_disk_fraction", "blend_radius", "strip_divisor", "strip_feather"},
               "seams");
    read(m, "fix_horizontal", c.seams.fix_horizontal, "seams");
    read(m, "fix_poles", c.seams.fix_poles, "seams");
    read(m, "poles_first", c.seams.poles_first, "seams");
    read(m, "pole_fov_deg", c.seams.pole_fov_deg, "seams");
    read(m, "pole_size", c.seams.pole_size, "seams");
    read(m, "pole_disk_fraction", c.seams.pole_disk_fraction, "seams");
    read(m, "blend_radius", c.seams.blend_radius, "seams");
    read(m, "strip_divisor", c.seams.strip_divisor, "seams");
    read(m, "strip_feather", c.seams.strip_feather, "seams");
  }
  if (j.contains("imitator")) {
    const json& m = j.at("imitator");
    check_keys(m,
               {"bands", "hidden_layers", "width", "learning_rate", "batch_size", "iterations",
                "holdout_fraction", "min_supervised"},
               "imitator");
    read(m, "bands", c.imitator.bands, "imitator");
    read(m, "hidden_layers", c.imitator.hidden_layers, "imitator");
    read(m, "width", c.imitator.width, "imitator");
    read(m, "learning_rate", c.imitator.learning_rate, "imitator");
    read(m, "batch_size", c.imitator.batch_size, "imitator");
    read(m, "iterations", c.imitator.iterations, "imitator");
    read(m, "holdout_fraction", c.imitator.holdout_fraction, "imitator");
    read(m, "min_supervised", c.imitator.min_supervised, "imitator");
  }
  if (j.contains("backend")) {
    const json& b = j.at("backend");
    check_keys(b, {"type", "endpoint", "command", "timeout_s", "attempts", "backoff_ms"},
               "backend");
    read(b, "type", c.backend.type, "backend");
    read(b, "endpoint", c.backend.endpoint, "backend");
    read(b, "command", c.backend.command, "backend");
    read(b, "timeout_s", c.backend.timeout_s, "backend");
    read(b, "attempts", c.backend.retry.attempts, "backend");
    int backoff = static_cast<int>(c.backend.retry.initial_backoff.count());
    read(b, "backoff_ms", backoff, "backend");
    c.backend.retry.initial_backoff = std::chrono::milliseconds(backoff);
    require(c.backend.type == "mock" || c.backend.type == "http" || c.backend.type == "process",
            ErrorKind::Config, "backend.type must be mock, http or process");
  }
  if (j.contains("window_alpha")) {
    const json& w = j.at("window_alpha");
    require(w.is_array(), ErrorKind::Config, "window_alpha must be a list of [u0, v0, u1, v1]");
    for (const json& r : w) {
      require(r.is_array() && r.size() == 4, ErrorKind::Config,
              "window_alpha entries are [u0, v0, u1, v1]");
      c.window_alpha.push_back(
          {r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()});
    }
  }
  c.imitator.seed = c.seed;
  c.validate();
  return c;
}

}  // namespace dreampipe
