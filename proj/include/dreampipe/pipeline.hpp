#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dreampipe/camera.hpp"
#include "dreampipe/imitator.hpp"
#include "dreampipe/masks.hpp"
#include "dreampipe/mesh.hpp"
#include "dreampipe/mesh_io.hpp"
#include "dreampipe/seam_fix.hpp"
#include "dreampipe/stylizer.hpp"

namespace dreampipe {

struct PipelineConfig {
  std::filesystem::path mesh;
  std::string prompt;
  std::uint64_t seed = 42;
  std::filesystem::path output_dir = "dreampipe_out";

  std::optional<CameraPose> central_pose;  // empty: auto-centroid
  std::vector<CameraPose> inpaint_poses;   // explicit list
  int fps_count = 2;                       // used when the explicit list is empty
  std::vector<CameraPose> candidate_poses;

  int pano_width = 1024;  // coarse panorama; the fine one is upscale_factor times larger
  int pano_height = 512;
  int upscale_factor = 3;
  double visibility_epsilon = 0.01;
  int texel_dilation = 2;
  double circular_padding_fraction = 0.6;
  double denoise_strength = 1.0;
  bool fix_align_seams = false;

  MaskParams masks;
  SeamParams seams;
  ImitatorParams imitator;
  BackendConfig backend;
  std::vector<UvRect> window_alpha;
  int default_atlas_size = 4096;

  void validate() const;
};

// JSON config; relative paths resolve against the file's directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir);
std::vector<CameraPose> load_poses(const std::filesystem::path& path);
void save_poses(const std::filesystem::path& path, const std::vector<CameraPose>& poses);

// Greedy farthest-point sampling on camera centres, starting from the pose
// nearest `centroid`. Ties go to the lower index.
std::vector<std::size_t> select_viewpoints(const std::vector<CameraPose>& candidates,
                                           std::size_t k, const Vec3& centroid);

// AABB centre moved to 1.6 m above the floor (5th-percentile vertex height),
// kept inside the box; identity rotation.
CameraPose auto_centroid_pose(const TexturedMesh& mesh);

struct StageReport {
  std::string name;
  double wall_ms = 0.0;
  double coverage = 0.0;  // painted / valid texels after the stage
};

struct ViewpointReport {
  CameraPose pose;
  std::size_t inp_vis = 0;
  std::size_t dep_edge = 0;
  std::size_t safe_view = 0;
  std::size_t conf = 0;
  std::size_t written = 0;
};

struct PipelineReport {
  std::vector<StageReport> stages;
  std::vector<ViewpointReport> viewpoints;
  CameraPose central_pose;
  std::size_t valid_texels = 0;
  std::size_t init_visible = 0;
  double final_coverage = 0.0;
  double imitator_loss = 0.0;
  double imitator_holdout_error = 0.0;
  std::size_t imitator_supervised = 0;
  double bake_consistency_mae = 0.0;  // 8-bit units
  double poisson_residual = 0.0;
  std::vector<std::pair<std::string, std::uint64_t>> seeds;
  std::string backend;
  int backend_calls = 0;
  int backend_retries = 0;
  std::string failed_stage;
  std::string error;
};

// Raised when a stage fails; keeps the original error kind.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), "stage '" + stage + "' failed: " + cause.what()),
        stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Run directory layout below output_dir:
//   report.json, poses.json, imitator.dpim
//   stages/   per-stage panoramas, masks and atlas snapshots
//   mesh/     textured.obj/.mtl/.png
PipelineReport run_pipeline(const PipelineConfig& config);
// Same, with the mesh and stylizer supplied by the caller.
PipelineReport run_pipeline(const PipelineConfig& config, const TexturedMesh& mesh,
                            Stylizer& stylizer);

std::string report_to_json(const PipelineReport& report);

struct PreviewOptions {
  std::vector<CameraPose> poses;  // empty: four 90-degree turns at the central pose
  int width = 512;
  int height = 384;
  double fov_deg = 90.0;
};

struct PreviewManifest {
  std::vector<std::string> images;   // relative to the run directory
  std::vector<std::string> missing;  // intermediates that were not found
};

// Writes previews/ with panorama comparisons, mask overlays and perspective
// renders of the baked mesh, plus previews/manifest.json.
PreviewManifest emit_previews(const std::filesystem::path& run_dir,
                              const PreviewOptions& options = {});

}  // namespace dreampipe
