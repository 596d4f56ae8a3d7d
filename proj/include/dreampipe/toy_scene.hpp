#pragma once

#include <vector>

#include "dreampipe/camera.hpp"
#include "dreampipe/mesh.hpp"

namespace dreampipe {

struct BoxSpec {
  Vec3 lo;
  Vec3 hi;
  bool inward = false;       // faces point into the box (a room)
  bool skip_bottom = false;  // omit the face at lo.z
};

struct ToySceneOptions {
  Vec3 room{5.0, 4.0, 2.8};
  std::vector<BoxSpec> occluders{
      {{1.0, 2.4, 0.0}, {1.8, 3.2, 0.9}},   // cabinet on the floor
      {{3.4, 0.6, 1.2}, {4.2, 1.2, 1.6}},   // floating shelf
  };
  int subdivisions = 4;  // quads per face edge
  int atlas_size = 512;
  int gutter = 4;        // texels between charts
};

struct ToyScene {
  TexturedMesh mesh;
  std::vector<CameraPose> candidate_poses;
};

// Box room with box occluders. Every face is its own rectangular UV chart
// with a procedural checker texture.
ToyScene build_toy_scene(const ToySceneOptions& options = {});

// Appends the faces of a box as separately charted quads. Each face takes
// the next cell (`chart`, advanced in place) of a grid x grid layout over the
// atlas and paints its texture there.
void append_box(TexturedMesh& mesh, const BoxSpec& box, int subdivisions, int& chart,
                int grid, int atlas_size, int gutter);

}  // namespace dreampipe
