#pragma once

#include "retriever/geometry.hpp"
#include "retriever/world.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace retriever {

struct CameraIntrinsics {
  double fov_h = deg2rad(60.0);
  double fov_v = deg2rad(45.0);
  int raster_w = 64;
  int raster_h = 48;
  double near = 0.05;
  double far = 3.0;
  double min_visible_fraction = 0.05;  // tau_vis

  bool valid() const;
  /// Frustum and depth-range test in camera coordinates.
  bool in_frustum(const CameraPose& pose, const Vec3& p) const;
};

struct NoiseModel {
  double p_label = 0.0;
  double p_drop = 0.0;
  double sigma_point = 0.0;
  double sigma_descriptor = 0.0;

  bool zero() const { return p_label == 0 && p_drop == 0 && sigma_point == 0 && sigma_descriptor == 0; }
  /// "none", "low" or "high"; throws ValidationError otherwise.
  static NoiseModel profile(const std::string& name);
};

/// What the camera can tell about an articulated container it sees: whether it
/// is open, which way it opens, where the handle is and the amodal body box.
struct ContainerCue {
  ContainerState state = ContainerState::Closed;
  Vec3 aperture_normal = Vec3::Zero();
  Vec3 handle_normal = Vec3::Zero();
  Vec3 handle_point = Vec3::Zero();
  bool handle_visible = false;
  Aabb body;
  bool operator==(const ContainerCue&) const = default;
};

struct Detection {
  PointSet visible_points;
  Descriptor descriptor{};
  std::string observed_label;
  double visible_fraction = 0.0;
  bool frustum_clipped = false;
  std::vector<std::string> facet_tags;
  std::optional<ContainerCue> container;
  /// Ground-truth object id. Only the harness (metrics) and the simulator
  /// (action preconditions) read it; agent code must not.
  std::string truth_id;

  bool operator==(const Detection&) const = default;
};

struct Observation {
  int step = 0;
  CameraPose camera;
  std::vector<Detection> detections;
  bool operator==(const Observation&) const = default;
};

/// Per-object visibility before thresholding and noise.
struct VisibilityReport {
  std::size_t front_facing = 0;
  std::size_t visible = 0;
  bool frustum_clipped = false;
  PointSet visible_points;
  std::array<std::size_t, 6> visible_per_facet{};
  double fraction() const { return front_facing ? static_cast<double>(visible) / front_facing : 0.0; }
};

VisibilityReport object_visibility(const WorldState& world, std::size_t object_index,
                                   const std::vector<Occluder>& occluders, const CameraPose& pose,
                                   const CameraIntrinsics& intr);

/// Virtual RGB-D camera: ray-cast visibility per surface sample, detection
/// thresholding on the visible fraction of front-facing samples, then noise.
Observation observe(const WorldState& world, const CameraPose& pose, const CameraIntrinsics& intr,
                    const NoiseModel& noise, std::uint64_t rng_seed, int step = 0);

/// Union of several observations taken in the same step; one detection per
/// object, keeping the most complete view.
Observation merge_observations(const std::vector<Observation>& views, int step);

struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> depth;  // 0 = empty, larger = nearer
  std::vector<std::uint8_t> mask;   // 255 where a highlight point lands

  std::uint8_t at(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
  std::uint8_t mask_at(int u, int v) const { return mask[static_cast<std::size_t>(v) * width + u]; }
  bool operator==(const Raster&) const = default;
};

struct CanonicalViews {
  Raster front;  // viewer on -y looking +y
  Raster left;   // viewer on -x looking +x
  Raster right;  // viewer on +x looking -x
  bool operator==(const CanonicalViews&) const = default;
};

/// Orthographic depth rasters of a point cloud. `bounds` defaults to the
/// bounding box of points and highlights.
CanonicalViews render_canonical_views(const PointSet& points, const PointSet& highlight, int width, int height,
                                      std::optional<Aabb> bounds = std::nullopt);

void write_pgm(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& data);
/// Returns (width, height, data); throws ParseError on malformed files.
std::tuple<int, int, std::vector<std::uint8_t>> read_pgm(const std::filesystem::path& path);

}  // namespace retriever
