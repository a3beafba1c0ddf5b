#pragma once

#include "retriever/geometry.hpp"
#include "retriever/observation.hpp"
#include "retriever/reasoner.hpp"

#include <functional>
#include <string>
#include <vector>

namespace retriever {

struct PerceptionConfig {
  double k = 1.5;
  double r_min = 0.25;
  double r_max = 1.0;
  double alpha = deg2rad(30.0);
  double alpha_max = deg2rad(90.0);
  int n_directions = 8;
  int m_poses = 4;
  double look_closer_factor = 0.5;
  double near_margin = 0.05;
};

struct PerceptionSphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

struct ViewCandidate {
  CameraPose pose;
  int index = 0;
  double summary = 0.0;  // predicted coverage
  double polar = 0.0;
  double azimuth = 0.0;
  Vec3 axis = Vec3::UnitZ();     // radial axis through the current camera
  Vec3 tangent = Vec3::UnitX();  // arc direction at the axis
};

/// Positions a camera may not occupy.
struct ViewObstacles {
  double support_z = 0.0;
  std::vector<Aabb> boxes;
  bool blocked(const Vec3& p) const;
};

PerceptionSphere build_sphere(const PointSet& target_points, const CameraIntrinsics& intr, const CameraPose& current,
                              const PerceptionConfig& cfg = {});

std::vector<ViewCandidate> sample_directions(const PerceptionSphere& sphere, const CameraPose& current, int n,
                                             const ViewObstacles& obstacles = {}, const PerceptionConfig& cfg = {});

std::vector<ViewCandidate> sample_poses_along(const PerceptionSphere& sphere, const ViewCandidate& direction, int m,
                                              const ViewObstacles& obstacles = {}, const PerceptionConfig& cfg = {});

/// Point the camera should see, optionally only through a container opening.
struct CoverageProbe {
  Vec3 point = Vec3::Zero();
  const Aabb* through = nullptr;  // container body the ray must leave by `aperture`
  Vec3 aperture = Vec3::Zero();
  Vec3 facing = Vec3::Zero();  // when set, the camera must be on this side of the point
};

/// Fraction of probes inside the frustum with a clear line of sight.
double coverage(const CameraPose& pose, const CameraIntrinsics& intr, const std::vector<CoverageProbe>& probes,
                const std::vector<Aabb>& blockers);

/// Camera moved towards `center` along its forward axis.
CameraPose look_closer(const CameraPose& current, const Vec3& center, const CameraIntrinsics& intr,
                       const PerceptionConfig& cfg = {});

struct ViewContext {
  PerceptionSphere sphere;
  CameraPose current;
  ViewObstacles obstacles;
  std::function<double(const CameraPose&)> score;
  PointSet world_points;
  std::string goal_text;
  std::string target;
  CameraIntrinsics intr;
};

struct ViewChoice {
  CameraPose pose;
  bool look_closer = false;
  int direction = -1;
  int pose_index = -1;
};

/// Two-stage selection: a direction on the sphere, then a pose along it.
ViewChoice select_view(const ViewContext& ctx, Reasoner& reasoner, const PerceptionConfig& cfg = {});

}  // namespace retriever
