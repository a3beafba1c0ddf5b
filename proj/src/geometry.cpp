#include "retriever/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace retriever {

Mat3 Pose::rotation() const {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

Aabb Aabb::of(const PointSet& points) {
  Aabb box;
  for (const auto& p : points) box.expand(p);
  return box;
}

double Aabb::volume() const {
  const Vec3 s = size();
  return s.x() * s.y() * s.z();
}

double Aabb::footprint_area() const {
  const Vec3 s = size();
  return s.x() * s.y();
}

bool Aabb::contains(const Vec3& p, double pad) const {
  return (p.array() >= min.array() - pad).all() && (p.array() <= max.array() + pad).all();
}

bool Aabb::contains(const Aabb& other, double pad) const {
  return !other.empty() && contains(other.min, pad) && contains(other.max, pad);
}

bool Aabb::overlaps(const Aabb& other, double pad) const {
  if (empty() || other.empty()) return false;
  return (min.array() < other.max.array() + pad).all() && (other.min.array() < max.array() + pad).all();
}

void Aabb::expand(const Vec3& p) {
  min = min.cwiseMin(p);
  max = max.cwiseMax(p);
}

void Aabb::expand(const Aabb& other) {
  if (other.empty()) return;
  expand(other.min);
  expand(other.max);
}

Aabb Aabb::inflated(double pad) const {
  if (empty()) return *this;
  return {min.array() - pad, max.array() + pad};
}

double Aabb::footprint_overlap(const Aabb& other) const {
  if (empty() || other.empty()) return 0.0;
  const double dx = std::min(max.x(), other.max.x()) - std::max(min.x(), other.min.x());
  const double dy = std::min(max.y(), other.max.y()) - std::max(min.y(), other.min.y());
  return (dx > 0 && dy > 0) ? dx * dy : 0.0;
}

double Aabb::distance_to(const Aabb& other) const {
  Vec3 gap;
  for (int i = 0; i < 3; ++i) gap[i] = std::max({0.0, other.min[i] - max[i], min[i] - other.max[i]});
  return gap.norm();
}

double Aabb::distance_to(const Vec3& p) const {
  Vec3 gap;
  for (int i = 0; i < 3; ++i) gap[i] = std::max({0.0, p[i] - max[i], min[i] - p[i]});
  return gap.norm();
}

std::optional<std::pair<double, double>> clip_segment(const Aabb& box, const Vec3& a, const Vec3& b) {
  double t0 = 0.0;
  double t1 = 1.0;
  const Vec3 d = b - a;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-15) {
      if (a[i] < box.min[i] || a[i] > box.max[i]) return std::nullopt;
      continue;
    }
    double ta = (box.min[i] - a[i]) / d[i];
    double tb = (box.max[i] - a[i]) / d[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return std::make_pair(t0, t1);
}

bool OrientedBox::contains(const Vec3& p, double pad) const {
  const Vec3 l = to_local(p);
  return (l.cwiseAbs().array() <= half.array() + pad).all();
}

Aabb OrientedBox::bounds() const {
  const Vec3 ext = rotation.cwiseAbs() * half;
  return {center - ext, center + ext};
}

std::optional<std::pair<double, double>> OrientedBox::clip_segment(const Vec3& a, const Vec3& b) const {
  return retriever::clip_segment(Aabb{-half, half}, to_local(a), to_local(b));
}

namespace {
bool interval_blocks(const std::optional<std::pair<double, double>>& iv, double length, double tolerance) {
  if (!iv) return false;
  const double s0 = iv->first * length;
  const double s1 = iv->second * length;
  return s1 - s0 > 1e-9 && s1 > tolerance && s0 < length - tolerance;
}
}  // namespace

bool segment_blocked(const OrientedBox& box, const Vec3& from, const Vec3& to, double tolerance) {
  return interval_blocks(box.clip_segment(from, to), (to - from).norm(), tolerance);
}

bool segment_blocked(const Aabb& box, const Vec3& from, const Vec3& to, double tolerance) {
  return interval_blocks(clip_segment(box, from, to), (to - from).norm(), tolerance);
}

std::string_view facet_name(Facet f) {
  switch (f) {
    case Facet::PosX: return "+x";
    case Facet::NegX: return "-x";
    case Facet::PosY: return "+y";
    case Facet::NegY: return "-y";
    case Facet::PosZ: return "+z";
    case Facet::NegZ: return "-z";
  }
  return "?";
}

std::optional<Facet> parse_facet(std::string_view s) {
  for (Facet f : kAllFacets)
    if (facet_name(f) == s) return f;
  return std::nullopt;
}

Vec3 facet_normal(Facet f) {
  switch (f) {
    case Facet::PosX: return Vec3::UnitX();
    case Facet::NegX: return -Vec3::UnitX();
    case Facet::PosY: return Vec3::UnitY();
    case Facet::NegY: return -Vec3::UnitY();
    case Facet::PosZ: return Vec3::UnitZ();
    case Facet::NegZ: return -Vec3::UnitZ();
  }
  return Vec3::Zero();
}

Facet facet_towards(const Vec3& local_dir) {
  Facet best = Facet::PosX;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (Facet f : kAllFacets) {
    const double d = facet_normal(f).dot(local_dir);
    if (d > best_dot + 1e-12) {
      best_dot = d;
      best = f;
    }
  }
  return best;
}

bool CameraPose::valid(double tol) const {
  return std::abs(forward.norm() - 1.0) <= tol && std::abs(up.norm() - 1.0) <= tol &&
         std::abs(forward.dot(up)) <= tol && position.allFinite();
}

Vec3 CameraPose::to_camera(const Vec3& p) const {
  const Vec3 d = p - position;
  return {d.dot(right()), d.dot(up), d.dot(forward)};
}

CameraPose CameraPose::look_at(const Vec3& position, const Vec3& target) {
  CameraPose pose;
  pose.position = position;
  pose.forward = (target - position).normalized();
  Vec3 ref = Vec3::UnitZ();
  if (std::abs(pose.forward.dot(ref)) > 1.0 - 1e-9) ref = Vec3::UnitY();
  pose.up = (ref - ref.dot(pose.forward) * pose.forward).normalized();
  return pose;
}

double angle_between(const Vec3& a, const Vec3& b) {
  // atan2 form stays accurate near 0 and pi.
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

Vec3 centroid(const PointSet& points) {
  Vec3 c = Vec3::Zero();
  if (points.empty()) return c;
  for (const auto& p : points) c += p;
  return c / static_cast<double>(points.size());
}

}  // namespace retriever
