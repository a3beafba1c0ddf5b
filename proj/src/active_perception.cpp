#include "retriever/active_perception.hpp"

#include "retriever/errors.hpp"

#include <algorithm>
#include <cmath>

namespace retriever {

bool ViewObstacles::blocked(const Vec3& p) const {
  if (p.z() < support_z) return true;
  return std::any_of(boxes.begin(), boxes.end(), [&](const Aabb& b) { return b.contains(p); });
}

PerceptionSphere build_sphere(const PointSet& target_points, const CameraIntrinsics& intr, const CameraPose&,
                              const PerceptionConfig& cfg) {
  if (target_points.empty()) throw EmptyTarget();
  const Aabb b = Aabb::of(target_points);
  const double s = b.size().maxCoeff();
  const double fov = std::min(intr.fov_h, intr.fov_v);
  const double r = cfg.k * s / (2.0 * std::tan(0.5 * fov));
  return {centroid(target_points), std::clamp(r, cfg.r_min, cfg.r_max)};
}

namespace {

struct Frame {
  Vec3 u;   // radial axis through the current camera
  Vec3 e1;  // azimuth 0
  Vec3 e2;
};

Frame frame_for(const PerceptionSphere& sphere, const CameraPose& current) {
  Frame f;
  const Vec3 d = current.position - sphere.center;
  f.u = d.norm() > 1e-9 ? Vec3(d.normalized()) : Vec3::UnitZ();
  Vec3 ref = Vec3::UnitX() - Vec3::UnitX().dot(f.u) * f.u;
  if (ref.norm() < 1e-6) ref = Vec3::UnitY() - Vec3::UnitY().dot(f.u) * f.u;
  f.e1 = ref.normalized();
  f.e2 = f.u.cross(f.e1);
  return f;
}

ViewCandidate on_arc(const PerceptionSphere& sphere, const Vec3& u, const Vec3& t, double polar, double azimuth) {
  ViewCandidate c;
  const Vec3 dir = std::cos(polar) * u + std::sin(polar) * t;
  c.pose = CameraPose::look_at(sphere.center + sphere.radius * dir.normalized(), sphere.center);
  c.polar = polar;
  c.azimuth = azimuth;
  c.axis = u;
  c.tangent = t;
  return c;
}

}  // namespace

std::vector<ViewCandidate> sample_directions(const PerceptionSphere& sphere, const CameraPose& current, int n,
                                             const ViewObstacles& obstacles, const PerceptionConfig& cfg) {
  if (n < 1) throw std::invalid_argument("sample_directions: n must be positive");
  const Frame f = frame_for(sphere, current);
  std::vector<ViewCandidate> out;
  for (int k = 0; k < n; ++k) {
    const double phi = 2.0 * kPi * k / n;
    const Vec3 t = std::cos(phi) * f.e1 + std::sin(phi) * f.e2;
    ViewCandidate c = on_arc(sphere, f.u, t, cfg.alpha, phi);
    if (obstacles.blocked(c.pose.position)) {
      c = on_arc(sphere, f.u, t, 0.5 * cfg.alpha, phi);
      if (obstacles.blocked(c.pose.position)) continue;
    }
    c.index = static_cast<int>(out.size());
    out.push_back(c);
  }
  if (out.empty()) throw NoFeasibleCandidate();
  return out;
}

std::vector<ViewCandidate> sample_poses_along(const PerceptionSphere& sphere, const ViewCandidate& direction, int m,
                                              const ViewObstacles& obstacles, const PerceptionConfig& cfg) {
  if (m < 1) throw std::invalid_argument("sample_poses_along: m must be positive");
  std::vector<ViewCandidate> out;
  for (int j = 1; j <= m; ++j) {
    ViewCandidate c = on_arc(sphere, direction.axis, direction.tangent, cfg.alpha_max * j / m, direction.azimuth);
    if (obstacles.blocked(c.pose.position)) continue;
    c.index = static_cast<int>(out.size());
    out.push_back(c);
  }
  if (out.empty()) throw NoFeasibleCandidate();
  return out;
}

double coverage(const CameraPose& pose, const CameraIntrinsics& intr, const std::vector<CoverageProbe>& probes,
                const std::vector<Aabb>& blockers) {
  if (probes.empty()) return 0.0;
  std::size_t seen = 0;
  for (const auto& pr : probes) {
    if (!intr.in_frustum(pose, pr.point)) continue;
    if (!pr.facing.isZero() && (pose.position - pr.point).dot(pr.facing) <= 0.0) continue;
    if (pr.through) {
      // The ray has to leave the body through its opening.
      const Vec3 d = pose.position - pr.point;
      double t_exit = std::numeric_limits<double>::infinity();
      int axis = -1;
      for (int i = 0; i < 3; ++i) {
        if (std::abs(d[i]) < 1e-12) continue;
        const double t = d[i] > 0 ? (pr.through->max[i] - pr.point[i]) / d[i] : (pr.through->min[i] - pr.point[i]) / d[i];
        if (t < t_exit) {
          t_exit = t;
          axis = i;
        }
      }
      int k = 0;
      pr.aperture.cwiseAbs().maxCoeff(&k);
      if (axis != k || (d[k] > 0) != (pr.aperture[k] > 0)) continue;
    }
    bool blocked = false;
    for (const auto& b : blockers) {
      if (pr.through && &b == pr.through) continue;
      if (b.contains(pr.point, 1e-3)) continue;
      if (segment_blocked(b, pr.point, pose.position)) {
        blocked = true;
        break;
      }
    }
    if (!blocked) ++seen;
  }
  return static_cast<double>(seen) / static_cast<double>(probes.size());
}

CameraPose look_closer(const CameraPose& current, const Vec3& center, const CameraIntrinsics& intr,
                       const PerceptionConfig& cfg) {
  const double d = (center - current.position).norm();
  const double target = std::max(d * cfg.look_closer_factor, intr.near + cfg.near_margin);
  CameraPose out = current;
  if (target < d) out.position = current.position + current.forward * (d - target);
  return out;
}

namespace {

std::vector<CandidateInfo> describe(const std::vector<ViewCandidate>& cands) {
  std::vector<CandidateInfo> out;
  for (const auto& c : cands) out.push_back({c.index, c.pose.position, c.polar, c.azimuth, c.summary});
  return out;
}

CanonicalViews prompt_views(const ViewContext& ctx, const std::vector<ViewCandidate>& cands) {
  PointSet highlight;
  for (const auto& c : cands) highlight.push_back(c.pose.position);
  return render_canonical_views(ctx.world_points, highlight, ctx.intr.raster_w, ctx.intr.raster_h);
}

template <class Fn>
auto with_retry(Fn&& fn) {
  try {
    return fn();
  } catch (const OutOfRange&) {
    return fn();
  }
}

}  // namespace

ViewChoice select_view(const ViewContext& ctx, Reasoner& reasoner, const PerceptionConfig& cfg) {
  std::vector<ViewCandidate> dirs = sample_directions(ctx.sphere, ctx.current, cfg.n_directions, ctx.obstacles, cfg);
  // A direction is worth the best view along its arc.
  for (auto& c : dirs) {
    c.summary = 0.0;
    if (!ctx.score) continue;
    c.summary = ctx.score(c.pose);
    try {
      for (const auto& p : sample_poses_along(ctx.sphere, c, cfg.m_poses, ctx.obstacles, cfg))
        c.summary = std::max(c.summary, ctx.score(p.pose));
    } catch (const NoFeasibleCandidate&) {
    }
  }

  ViewChoice choice;
  std::size_t di = 0;
  if (dirs.size() > 1) {
    SelectDirectionRequest req;
    req.goal_text = ctx.goal_text;
    req.target = ctx.target;
    req.center = ctx.sphere.center;
    req.radius = ctx.sphere.radius;
    req.candidates = describe(dirs);
    req.views = prompt_views(ctx, dirs);
    di = with_retry([&] {
      const int idx = ask<IndexResult>(reasoner, req).index;
      if (idx < 0 || idx >= static_cast<int>(dirs.size()))
        throw OutOfRange("SelectDirection: index " + std::to_string(idx) + " of " + std::to_string(dirs.size()));
      return static_cast<std::size_t>(idx);
    });
  }
  choice.direction = static_cast<int>(di);

  std::vector<ViewCandidate> poses = sample_poses_along(ctx.sphere, dirs[di], cfg.m_poses, ctx.obstacles, cfg);
  for (auto& c : poses) c.summary = ctx.score ? ctx.score(c.pose) : 0.0;
  if (poses.size() == 1) {
    choice.pose = poses.front().pose;
    choice.pose_index = 0;
    return choice;
  }

  SelectPoseRequest req;
  req.goal_text = ctx.goal_text;
  req.target = ctx.target;
  req.center = ctx.sphere.center;
  req.radius = ctx.sphere.radius;
  req.candidates = describe(poses);
  req.views = prompt_views(ctx, poses);
  req.current = ctx.current;
  const PoseChoice pc = with_retry([&] {
    PoseChoice r = ask<PoseChoice>(reasoner, req);
    if (!r.look_closer && (r.index < 0 || r.index >= static_cast<int>(poses.size())))
      throw OutOfRange("SelectPose: index " + std::to_string(r.index) + " of " + std::to_string(poses.size()));
    return r;
  });
  if (pc.look_closer) {
    choice.look_closer = true;
    choice.pose = look_closer(ctx.current, ctx.sphere.center, ctx.intr, cfg);
    return choice;
  }
  choice.pose_index = pc.index;
  choice.pose = poses[static_cast<std::size_t>(pc.index)].pose;
  return choice;
}

}  // namespace retriever
