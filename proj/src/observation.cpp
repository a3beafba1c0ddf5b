#include "retriever/observation.hpp"

#include "retriever/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace retriever {

bool CameraIntrinsics::valid() const {
  return fov_h > 0 && fov_h < kPi && fov_v > 0 && fov_v < kPi && near > 0 && near < far && raster_w > 0 &&
         raster_h > 0 && min_visible_fraction > 0 && min_visible_fraction <= 1;
}

bool CameraIntrinsics::in_frustum(const CameraPose& pose, const Vec3& p) const {
  const Vec3 c = pose.to_camera(p);
  if (c.z() < near || c.z() > far) return false;
  return std::abs(c.x()) <= std::tan(0.5 * fov_h) * c.z() && std::abs(c.y()) <= std::tan(0.5 * fov_v) * c.z();
}

NoiseModel NoiseModel::profile(const std::string& name) {
  if (name == "none") return {};
  if (name == "low") return {0.02, 0.02, 0.002, 0.01};
  if (name == "high") return {0.08, 0.08, 0.005, 0.03};
  throw ValidationError("noise", "unknown noise profile '" + name + "'");
}

namespace {

struct CachedOccluder {
  const Occluder* occ;
  Aabb bounds;
};

bool blocked(const std::vector<CachedOccluder>& occ, std::size_t self, const Vec3& from, const Vec3& to) {
  Aabb seg;
  seg.expand(from);
  seg.expand(to);
  for (const auto& c : occ) {
    if (c.occ->object_index == self) continue;
    if (!c.bounds.overlaps(seg, 1e-9)) continue;
    if (segment_blocked(c.occ->box, from, to, 1e-3)) return true;
  }
  return false;
}

}  // namespace

VisibilityReport object_visibility(const WorldState& world, std::size_t object_index,
                                   const std::vector<Occluder>& occluders, const CameraPose& pose,
                                   const CameraIntrinsics& intr) {
  std::vector<CachedOccluder> cache;
  cache.reserve(occluders.size());
  for (const auto& o : occluders) cache.push_back({&o, o.box.bounds()});

  VisibilityReport rep;
  const Vec3& cam = pose.position;
  for (const auto& s : surface_samples(world.objects[object_index])) {
    if (s.normal.dot(cam - s.point) <= 0.0) continue;
    ++rep.front_facing;
    const bool inside = intr.in_frustum(pose, s.point);
    const bool occluded = blocked(cache, object_index, s.point, cam);
    if (occluded) continue;
    if (!inside) {
      rep.frustum_clipped = true;
      continue;
    }
    ++rep.visible;
    ++rep.visible_per_facet[static_cast<int>(s.facet)];
    rep.visible_points.push_back(s.point);
  }
  return rep;
}

Observation observe(const WorldState& world, const CameraPose& pose, const CameraIntrinsics& intr,
                    const NoiseModel& noise, std::uint64_t rng_seed, int step) {
  Observation obs;
  obs.step = step;
  obs.camera = pose;
  const auto occluders = world.occluders();

  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::string> vocabulary;
  for (const auto& o : world.objects) vocabulary.push_back(o.class_label);
  std::sort(vocabulary.begin(), vocabulary.end());
  vocabulary.erase(std::unique(vocabulary.begin(), vocabulary.end()), vocabulary.end());

  for (std::size_t i = 0; i < world.objects.size(); ++i) {
    const SimObject& o = world.objects[i];
    if (world.held == o.id) continue;
    VisibilityReport rep = object_visibility(world, i, occluders, pose, intr);
    if (rep.visible == 0 || rep.fraction() < intr.min_visible_fraction) continue;

    Detection d;
    d.truth_id = o.id;
    d.visible_fraction = rep.fraction();
    d.frustum_clipped = rep.frustum_clipped;
    d.visible_points = std::move(rep.visible_points);

    Descriptor desc{};
    bool tag_seen = false;
    std::set<std::string> tags;
    for (Facet f : kAllFacets) {
      const std::size_t n = rep.visible_per_facet[static_cast<int>(f)];
      if (n == 0) continue;
      const FacetInfo& fi = o.facet(f);
      for (int k = 0; k < kDescriptorDim; ++k) desc[k] += fi.descriptor[k] * static_cast<double>(n);
      if (!fi.tag.empty()) {
        tags.insert(fi.tag);
        tag_seen = true;
      }
    }
    for (double& v : desc) v /= static_cast<double>(rep.visible);
    // Labels stuck on drawers and bins are readable whenever the body is seen.
    if (!o.semantic_tag.empty()) tags.insert(o.semantic_tag);
    d.descriptor = desc;
    d.facet_tags.assign(tags.begin(), tags.end());
    d.observed_label = (!o.has_tagged_facet() || tag_seen) ? o.fine_label : o.class_label;

    if (const Container* c = world.container(o.id)) {
      const Mat3 R = o.pose.rotation();
      const Facet hf = handle_facet(o, *c);
      ContainerCue cue;
      cue.state = c->state;
      cue.aperture_normal = R * facet_normal(c->aperture);
      cue.handle_normal = R * facet_normal(hf);
      cue.handle_point = c->handle_point;
      cue.handle_visible = rep.visible_per_facet[static_cast<int>(hf)] > 0;
      cue.body = o.aabb();
      d.container = cue;
    }

    if (!noise.zero()) {
      const double u_drop = uniform(rng);
      const double u_label = uniform(rng);
      const std::size_t pick = static_cast<std::size_t>(uniform(rng) * static_cast<double>(vocabulary.size()));
      if (u_drop < noise.p_drop) continue;
      if (u_label < noise.p_label && !vocabulary.empty()) d.observed_label = vocabulary[std::min(pick, vocabulary.size() - 1)];
      if (noise.sigma_point > 0)
        for (auto& p : d.visible_points) p += noise.sigma_point * Vec3(gauss(rng), gauss(rng), gauss(rng));
      if (noise.sigma_descriptor > 0)
        for (double& v : d.descriptor) v += noise.sigma_descriptor * gauss(rng);
    }
    obs.detections.push_back(std::move(d));
  }
  return obs;
}

Observation merge_observations(const std::vector<Observation>& views, int step) {
  Observation out;
  out.step = step;
  if (!views.empty()) out.camera = views.front().camera;
  std::map<std::string, std::size_t> slot;
  for (const auto& v : views) {
    for (const auto& d : v.detections) {
      auto it = slot.find(d.truth_id);
      if (it == slot.end()) {
        slot[d.truth_id] = out.detections.size();
        out.detections.push_back(d);
      } else if (d.visible_fraction > out.detections[it->second].visible_fraction) {
        out.detections[it->second] = d;
      }
    }
  }
  return out;
}

namespace {

struct Projection {
  int u;
  int v;
  double depth_norm;
};

int to_pixel(double value, double lo, double extent, int n) {
  if (extent <= 0.0) return n / 2;
  const int px = static_cast<int>(std::floor((value - lo) / extent * n));
  return std::clamp(px, 0, n - 1);
}

enum class View { Front, Left, Right };

Projection project(View view, const Vec3& p, const Aabb& b, int w, int h) {
  const Vec3 s = b.size();
  Projection pr{};
  pr.v = to_pixel(b.max.z() - p.z(), 0.0, s.z(), h);
  switch (view) {
    case View::Front:
      pr.u = to_pixel(p.x(), b.min.x(), s.x(), w);
      pr.depth_norm = s.y() > 0 ? (p.y() - b.min.y()) / s.y() : 0.0;
      break;
    case View::Left:
      pr.u = to_pixel(b.max.y() - p.y(), 0.0, s.y(), w);
      pr.depth_norm = s.x() > 0 ? (p.x() - b.min.x()) / s.x() : 0.0;
      break;
    case View::Right:
      pr.u = to_pixel(p.y(), b.min.y(), s.y(), w);
      pr.depth_norm = s.x() > 0 ? (b.max.x() - p.x()) / s.x() : 0.0;
      break;
  }
  return pr;
}

Raster render(View view, const PointSet& points, const PointSet& highlight, int w, int h, const Aabb& b) {
  Raster r;
  r.width = w;
  r.height = h;
  r.depth.assign(static_cast<std::size_t>(w) * h, 0);
  r.mask.assign(static_cast<std::size_t>(w) * h, 0);
  if (b.empty()) return r;
  for (const auto& p : points) {
    const Projection pr = project(view, p, b, w, h);
    const double d = std::clamp(pr.depth_norm, 0.0, 1.0);
    const auto value = static_cast<std::uint8_t>(1 + static_cast<int>(std::floor(254.0 * (1.0 - d))));
    auto& px = r.depth[static_cast<std::size_t>(pr.v) * w + pr.u];
    px = std::max(px, value);
  }
  for (const auto& p : highlight) {
    const Projection pr = project(view, p, b, w, h);
    r.mask[static_cast<std::size_t>(pr.v) * w + pr.u] = 255;
  }
  return r;
}

}  // namespace

CanonicalViews render_canonical_views(const PointSet& points, const PointSet& highlight, int width, int height,
                                      std::optional<Aabb> bounds) {
  Aabb b;
  if (bounds) {
    b = *bounds;
  } else {
    for (const auto& p : points) b.expand(p);
    for (const auto& p : highlight) b.expand(p);
  }
  return {render(View::Front, points, highlight, width, height, b),
          render(View::Left, points, highlight, width, height, b),
          render(View::Right, points, highlight, width, height, b)};
}

void write_pgm(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

std::tuple<int, int, std::vector<std::uint8_t>> read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw ParseError(path.string() + ": not a binary PGM");
  auto next_int = [&]() {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string line;
      std::getline(in, line);
      in >> std::ws;
    }
    int v = 0;
    if (!(in >> v)) throw ParseError(path.string() + ": malformed PGM header");
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  if (w <= 0 || h <= 0 || maxval != 255) throw ParseError(path.string() + ": unsupported PGM");
  in.get();
  std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size())) throw ParseError(path.string() + ": truncated PGM");
  return {w, h, std::move(data)};
}

}  // namespace retriever
