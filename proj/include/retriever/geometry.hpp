#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace retriever {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using PointSet = std::vector<Vec3>;

/// Position plus yaw/pitch/roll (intrinsic Z-Y-X), meters and radians.
struct Pose {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;

  Mat3 rotation() const;
  bool operator==(const Pose&) const = default;
};

struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  static Aabb of(const PointSet& points);
  static Aabb from_center(const Vec3& center, const Vec3& half) { return {center - half, center + half}; }

  bool empty() const { return (min.array() > max.array()).any(); }
  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 size() const { return empty() ? Vec3::Zero() : Vec3(max - min); }
  double volume() const;
  double footprint_area() const;
  bool contains(const Vec3& p, double pad = 0.0) const;
  bool contains(const Aabb& other, double pad = 0.0) const;
  bool overlaps(const Aabb& other, double pad = 0.0) const;
  void expand(const Vec3& p);
  void expand(const Aabb& other);
  Aabb inflated(double pad) const;
  /// Plan-view (xy) intersection area with another box.
  double footprint_overlap(const Aabb& other) const;
  double distance_to(const Aabb& other) const;
  double distance_to(const Vec3& p) const;

  bool operator==(const Aabb&) const = default;
};

/// Parametric interval [t0, t1] in [0, 1] where segment a->b lies inside the box.
std::optional<std::pair<double, double>> clip_segment(const Aabb& box, const Vec3& a, const Vec3& b);

/// Box with arbitrary orientation; `rotation` columns are the local axes in base frame.
struct OrientedBox {
  Vec3 center = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  Vec3 half = Vec3::Zero();

  Vec3 to_local(const Vec3& p) const { return rotation.transpose() * (p - center); }
  Vec3 to_world(const Vec3& p) const { return rotation * p + center; }
  bool contains(const Vec3& p, double pad = 0.0) const;
  Aabb bounds() const;
  std::optional<std::pair<double, double>> clip_segment(const Vec3& a, const Vec3& b) const;
};

/// True when segment `from`->`to` passes through `box` somewhere other than within
/// `tolerance` meters of either endpoint.
bool segment_blocked(const OrientedBox& box, const Vec3& from, const Vec3& to, double tolerance = 1e-3);
bool segment_blocked(const Aabb& box, const Vec3& from, const Vec3& to, double tolerance = 1e-3);

enum class Facet : int { PosX = 0, NegX, PosY, NegY, PosZ, NegZ };
inline constexpr std::array<Facet, 6> kAllFacets = {Facet::PosX, Facet::NegX, Facet::PosY,
                                                    Facet::NegY, Facet::PosZ, Facet::NegZ};

std::string_view facet_name(Facet f);
std::optional<Facet> parse_facet(std::string_view s);
Vec3 facet_normal(Facet f);
/// The facet whose (object-frame) normal is most aligned with `local_dir`.
Facet facet_towards(const Vec3& local_dir);

/// Camera frame: x = right, y = up, z = forward.
struct CameraPose {
  Vec3 position = Vec3::Zero();
  Vec3 forward = Vec3::UnitX();
  Vec3 up = Vec3::UnitZ();

  Vec3 right() const { return forward.cross(up); }
  bool valid(double tol = 1e-9) const;
  /// Camera-frame coordinates (right, up, depth) of a base-frame point.
  Vec3 to_camera(const Vec3& p) const;

  static CameraPose look_at(const Vec3& position, const Vec3& target);
  bool operator==(const CameraPose&) const = default;
};

double angle_between(const Vec3& a, const Vec3& b);
Vec3 centroid(const PointSet& points);

inline constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double d) { return d * kPi / 180.0; }

}  // namespace retriever
