#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "dreampipe/mesh.hpp"
#include "dreampipe/simd/kernels.hpp"

namespace dreampipe {

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();  // unit length, so t is a distance
  double t_min = 1e-9;
  double t_max = std::numeric_limits<double>::infinity();
};

struct RayHit {
  BarycentricSample sample;
  double distance = 0.0;
};

// Binned-SAH bounding volume hierarchy over a mesh's triangles. Leaves hold
// packets of four triangles tested with the active SIMD kernel. Queries
// return the nearest hit; equal distances resolve to the lower triangle index.
class Bvh {
 public:
  explicit Bvh(const TexturedMesh& mesh);
  Bvh(const std::vector<Vec3>& positions, const std::vector<IndexTriple>& triangles);

  std::optional<RayHit> intersect(const Ray& ray) const;

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t triangle_count() const noexcept { return triangle_count_; }

 private:
  struct Node {
    Vec3 lo;
    Vec3 hi;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t first_packet = 0;
    std::uint32_t packet_count = 0;  // 0 for interior nodes
    std::uint32_t axis = 0;
  };

  void build(const std::vector<Vec3>& positions, const std::vector<IndexTriple>& triangles);

  std::vector<Node> nodes_;
  std::vector<simd::TrianglePacket4> packets_;
  std::size_t triangle_count_ = 0;
};

}  // namespace dreampipe
