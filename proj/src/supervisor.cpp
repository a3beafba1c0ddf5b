#include "retriever/supervisor.hpp"

#include "retriever/errors.hpp"
#include "retriever/relations.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

namespace retriever {

using json = nlohmann::json;

std::string_view ablation_name(Ablation a) {
  switch (a) {
    case Ablation::None: return "None";
    case Ablation::FixedCamera: return "FixedCamera";
    case Ablation::ThreeFixedCameras: return "ThreeFixedCameras";
    case Ablation::GenerativePose: return "GenerativePose";
    case Ablation::NoMemory: return "NoMemory";
  }
  return "?";
}

std::optional<Ablation> parse_ablation(std::string_view s) {
  for (auto a : {Ablation::None, Ablation::FixedCamera, Ablation::ThreeFixedCameras, Ablation::GenerativePose,
                 Ablation::NoMemory})
    if (ablation_name(a) == s) return a;
  return std::nullopt;
}

std::string_view status_name(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::Success: return "Success";
    case EpisodeStatus::Failure: return "Failure";
    case EpisodeStatus::BudgetExhausted: return "BudgetExhausted";
  }
  return "?";
}

std::optional<EpisodeStatus> parse_status(std::string_view s) {
  for (auto v : {EpisodeStatus::Success, EpisodeStatus::Failure, EpisodeStatus::BudgetExhausted})
    if (status_name(v) == s) return v;
  return std::nullopt;
}

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool flips(const Decision& d, const ActionRecord& r) {
  if (!d.primitive || r.target != d.target || r.goal_text != d.goal_text || !r.success) return false;
  if (*d.primitive == PrimitiveKind::Open) return r.action == "Close";
  if (*d.primitive == PrimitiveKind::Close) return r.action == "Open";
  return false;
}

bool dithers(const Decision& d, const std::vector<ActionRecord>& history) {
  if (d.action != ActionKind::InteractivePerception) return false;
  const std::size_t n = history.size();
  for (std::size_t k = n >= 2 ? n - 2 : 0; k < n; ++k)
    if (flips(d, history[k])) return true;
  return false;
}

void validate(const Decision& d, const Memory& mem) {
  if (d.declare_done || d.declare_failure) return;
  const SceneNode* n = mem.graph.find(d.target);
  if (!n) throw SchemaError("decision targets missing node '" + d.target + "'");
  if (d.action == ActionKind::None) throw SchemaError("decision without an action");
  if (d.action == ActionKind::InteractivePerception && !d.primitive)
    throw SchemaError("InteractivePerception without a primitive");
  if (d.action != ActionKind::ActivePerception && n->kind != NodeKind::Known)
    throw SchemaError("cannot manipulate Unknown node '" + d.target + "'");
}

}  // namespace

Decision decide(const DecideRequest& req, const Memory& mem, Reasoner& reasoner) {
  Decision d = ask<Decision>(reasoner, req);
  validate(d, mem);
  if (dithers(d, mem.history)) {
    d = heuristic_decide(req);
    if (dithers(d, mem.history)) {
      d = Decision{};
      d.declare_failure = "Dithering";
    }
  }
  return d;
}

std::optional<Pose> find_place_spot(const Memory& mem, const std::string& node_id, const Aabb& avoid,
                                    const MemoryConfig& cfg) {
  const SceneNode* node = mem.graph.find(node_id);
  if (!node) return std::nullopt;
  const Aabb self = node->bounds();
  if (self.empty()) return std::nullopt;
  const Vec3 half = 0.5 * self.size();

  std::vector<Aabb> taken;
  for (const auto& [id, n] : mem.graph.nodes) {
    if (id == node_id) continue;
    if (n.kind == NodeKind::Known) {
      if (is_support_label(n.attrs.name)) continue;
      const Aabb b = n.bounds();
      if (!b.empty()) taken.push_back(b);
    } else if (n.region && n.region->relation != Relation::On) {
      taken.push_back(region_bounds(*n.region, cfg.cell));
    }
  }
  if (!avoid.empty()) taken.push_back(avoid);
  taken.push_back(self);  // somewhere else than where it is now

  const double margin = 0.03, step = 0.05;
  std::optional<Pose> best;
  double best_clear = -1.0;
  const Aabb& ws = cfg.workspace;
  for (double x = ws.min.x() + half.x() + margin; x <= ws.max.x() - half.x() - margin + 1e-9; x += step) {
    for (double y = ws.min.y() + half.y() + margin; y <= ws.max.y() - half.y() - margin + 1e-9; y += step) {
      double clear = std::numeric_limits<double>::infinity();
      for (const auto& b : taken) {
        const double dx = std::max({b.min.x() - (x + half.x()), (x - half.x()) - b.max.x(), 0.0});
        const double dy = std::max({b.min.y() - (y + half.y()), (y - half.y()) - b.max.y(), 0.0});
        clear = std::min(clear, std::hypot(dx, dy));
      }
      if (clear < margin) continue;
      if (clear > best_clear + 1e-9) {
        best_clear = clear;
        Pose p;
        // Released well above the table; the object drops onto whatever is below.
        p.position = Vec3(x, y, 0.5 + half.z());
        best = p;
      }
    }
  }
  return best;
}

namespace {

struct ViewSetup {
  PointSet target_points;
  std::vector<Aabb> blockers;
  std::vector<CoverageProbe> probes;
  ViewObstacles obstacles;
  PointSet world_points;
};

PointSet subsample(const PointSet& pts, std::size_t max_n) {
  if (pts.size() <= max_n) return pts;
  PointSet out;
  const double stride = static_cast<double>(pts.size()) / static_cast<double>(max_n);
  for (std::size_t i = 0; i < max_n; ++i) out.push_back(pts[static_cast<std::size_t>(i * stride)]);
  return out;
}

ViewSetup view_setup(const Memory& mem, const std::string& target, const MemoryConfig& cfg) {
  ViewSetup s;
  const SceneNode& n = *mem.graph.find(target);
  const SceneNode* through = nullptr;
  if (n.kind == NodeKind::Unknown) {
    for (const auto& c : n.region->cells) s.target_points.push_back(cell_center(c, cfg.cell));
    const SceneNode* parent = mem.graph.find(n.region->parent);
    if (n.region->relation == Relation::Inside && parent && parent->container &&
        parent->container->state == ContainerState::Open)
      through = parent;
  } else {
    s.target_points = n.merged_points;
  }

  std::size_t through_idx = 0;
  for (const auto& [id, m] : mem.graph.nodes) {
    if (m.kind != NodeKind::Known || id == target) continue;
    const Aabb b = m.bounds();
    if (b.empty()) continue;
    if (&m == through) through_idx = s.blockers.size();
    s.blockers.push_back(b);
    s.obstacles.boxes.push_back(b.inflated(0.03));
    for (const auto& p : subsample(m.merged_points, 200)) s.world_points.push_back(p);
  }
  s.obstacles.support_z = 0.05;
  // A closed container is looked at for its handle: probe the handle face only.
  if (n.kind == NodeKind::Known && n.container && n.container->state == ContainerState::Closed &&
      !n.container->handle_normal.isZero()) {
    const Vec3 hn = n.container->handle_normal;
    const Aabb& body = n.container->body;
    const Vec3 half = 0.5 * body.size();
    for (double u : {-0.8, -0.4, 0.0, 0.4, 0.8})
      for (double v : {-0.8, -0.4, 0.0, 0.4, 0.8}) {
        Vec3 p = body.center();
        int a = 0;
        hn.cwiseAbs().maxCoeff(&a);
        const int b = (a + 1) % 3, c = (a + 2) % 3;
        p[a] += (hn[a] > 0 ? 1.0 : -1.0) * (half[a] + 0.002);
        p[b] += u * half[b];
        p[c] += v * half[c];
        CoverageProbe pr;
        pr.point = p;
        pr.facing = hn;
        s.probes.push_back(pr);
      }
    return s;
  }
  for (const auto& p : subsample(s.target_points, 60)) {
    CoverageProbe pr;
    pr.point = p;
    if (through) {
      pr.through = &s.blockers[through_idx];
      pr.aperture = through->container->aperture_normal;
    }
    s.probes.push_back(pr);
  }
  return s;
}

std::array<CameraPose, 2> side_cameras() {
  return {CameraPose::look_at(Vec3(-0.75, -0.55, 0.55), Vec3(0.0, 0.0, 0.05)),
          CameraPose::look_at(Vec3(0.75, -0.55, 0.55), Vec3(0.0, 0.0, 0.05))};
}

struct Episode {
  const Scenario& sc;
  Reasoner& reasoner;
  const CameraIntrinsics& intr;
  const NoiseModel& noise;
  const EpisodeConfig& cfg;

  WorldState world;
  Memory mem;
  std::set<std::string> discovered;
  std::vector<bool> fired;
  CameraPose initial_camera;
  std::uint64_t noise_seed = 0;
  Transcript tr;

  Episode(const Scenario& s, Reasoner& r, const CameraIntrinsics& i, const NoiseModel& nm, const EpisodeConfig& c)
      : sc(s), reasoner(r), intr(i), noise(nm), cfg(c), world(s.initial_world), fired(s.interventions.size(), false) {
    initial_camera = world.camera;
    noise_seed = cfg.noise_seed.value_or(sc.seed);
    tr.scenario = sc.name;
    tr.category = std::string(category_name(sc.category));
    tr.seed = sc.seed;
    tr.ablation = std::string(ablation_name(cfg.ablation));
    tr.noise = cfg.noise_name;
    tr.object_count = world.objects.size();
  }

  void fire_interventions() {
    for (std::size_t k = 0; k < sc.interventions.size(); ++k) {
      if (fired[k] || sc.interventions[k].trigger_step > world.step) continue;
      world = apply_intervention(world, sc.interventions[k].script);
      fired[k] = true;
    }
  }

  Observation perceive() {
    const int step = world.step;
    const std::uint64_t seed = mix(noise_seed, static_cast<std::uint64_t>(step));
    if (cfg.ablation == Ablation::ThreeFixedCameras) {
      std::vector<Observation> views{observe(world, initial_camera, intr, noise, mix(seed, 0), step)};
      int k = 1;
      for (const auto& cam : side_cameras())
        views.push_back(observe(world, cam, intr, noise, mix(seed, static_cast<std::uint64_t>(k++)), step));
      Observation o = merge_observations(views, step);
      o.camera = world.camera;
      return o;
    }
    return observe(world, world.camera, intr, noise, seed, step);
  }

  void notify(const std::string& target_id) {
    if (!cfg.on_state) return;
    cfg.on_state(EpisodeView{&world, &mem, &discovered, target_id, &intr});
  }

  /// Moves the camera; returns (low-level description, outcome, success).
  std::tuple<std::string, std::string, bool> active_perception(const Decision& d) {
    SceneNode* node = mem.graph.find(d.target);
    ++node->ap_attempts;
    if (cfg.ablation == Ablation::FixedCamera || cfg.ablation == Ablation::ThreeFixedCameras)
      return {"hold camera", "CameraFixed", false};

    ViewSetup s = view_setup(mem, d.target, cfg.memory);
    try {
      const PerceptionSphere sphere = build_sphere(s.target_points, intr, world.camera, cfg.perception);
      if (cfg.ablation == Ablation::GenerativePose) {
        SelectPoseRequest req;
        req.goal_text = d.goal_text;
        req.target = d.target;
        req.center = sphere.center;
        req.radius = sphere.radius;
        req.allow_look_closer = false;
        req.generative = true;
        req.current = world.camera;
        const PoseChoice pc = ask<PoseChoice>(reasoner, req);
        if (!pc.pose) throw SchemaError("generative SelectPose returned no pose");
        if (s.obstacles.blocked(pc.pose->position)) return {"move camera", "PoseInfeasible", false};
        world.camera = *pc.pose;
        return {"move camera", "Ok", true};
      }
      ViewContext ctx;
      ctx.sphere = sphere;
      ctx.current = world.camera;
      ctx.obstacles = s.obstacles;
      ctx.score = [&](const CameraPose& p) { return coverage(p, intr, s.probes, s.blockers); };
      ctx.world_points = s.world_points;
      ctx.goal_text = d.goal_text;
      ctx.target = d.target;
      ctx.intr = intr;
      ViewChoice vc;
      try {
        vc = select_view(ctx, reasoner, cfg.perception);
      } catch (const NoFeasibleCandidate&) {
        // Boxed in around the current view; sample again around the start pose.
        ctx.current = initial_camera;
        vc = select_view(ctx, reasoner, cfg.perception);
      }
      world.camera = vc.pose;
      return {vc.look_closer ? "look closer" : "move camera", "Ok", true};
    } catch (const EmptyTarget&) {
      return {"move camera", "EmptyTarget", false};
    } catch (const NoFeasibleCandidate&) {
      return {"move camera", "NoFeasibleCandidate", false};
    }
  }

  std::tuple<std::string, std::string, bool> interact(const Decision& d) {
    Primitive p;
    p.kind = *d.primitive;
    p.target = d.target;
    if (p.kind == PrimitiveKind::PickPlace) {
      p.destination = find_place_spot(mem, d.target, world.goal_region, cfg.memory);
      if (!p.destination) return {"PickPlace " + d.target, "NoPlaceSpot", false};
    }
    if (p.kind == PrimitiveKind::Rotate) p.angle = d.angle;
    if (p.kind == PrimitiveKind::Retrieve) p.goal_region = world.goal_region;
    auto [w, out] = execute_primitive(world, p, mem, cfg.actions);
    world = std::move(w);
    return {std::string(primitive_name(p.kind)) + " " + d.target, std::string(reason_name(out.reason)), out.success};
  }

  bool target_delivered(const std::string& id) const {
    const SimObject* o = world.find(id);
    return o && world.goal_region.contains(o->pose.position);
  }

  InstructionResult run_instruction(int idx, CountingReasoner& counting) {
    InstructionResult res;
    res.instruction = sc.instructions[static_cast<std::size_t>(idx)];
    res.target_id = sc.target_ids[static_cast<std::size_t>(idx)];
    counting.reset(sc.budgets.max_reasoner_calls);

    for (;;) {
      if (res.steps >= sc.budgets.max_steps) {
        res.status = EpisodeStatus::BudgetExhausted;
        res.reason = "MaxSteps";
        break;
      }
      StepRecord rec;
      rec.step = world.step;
      rec.instruction = idx;

      const Observation obs = perceive();
      rec.camera = obs.camera;
      for (const auto& det : obs.detections) {
        rec.detections.push_back({det.observed_label, det.visible_fraction, det.truth_id});
        discovered.insert(det.truth_id);
      }
      rec.discovered.assign(discovered.begin(), discovered.end());

      bool stop = false;
      try {
        Memory base = mem;
        if (cfg.ablation == Ablation::NoMemory) {
          base = Memory{};
          base.history = mem.history;
          base.next_serial = mem.next_serial;
        }
        mem = update_memory(base, obs, counting, intr, cfg.memory);
        notify(res.target_id);
        const DecideRequest req = make_decide_request(mem, res.instruction, world.step, cfg.memory);
        rec.decision = decide(req, mem, counting);
      } catch (const BudgetExceeded&) {
        res.status = EpisodeStatus::BudgetExhausted;
        res.reason = "ReasonerCalls";
        rec.outcome = "BudgetExhausted";
        stop = true;
      } catch (const ReasonerError& e) {
        res.status = EpisodeStatus::Failure;
        res.reason = std::string("ReasonerError: ") + e.what();
        rec.outcome = "ReasonerError";
        stop = true;
      }
      rec.memory_hash = fnv1a(graph_summary(mem.graph).dump());
      tr.graphs.push_back(graph_summary(mem.graph).dump());

      if (!stop) {
        const Decision& d = rec.decision;
        if (d.declare_failure) {
          res.status = EpisodeStatus::Failure;
          res.reason = *d.declare_failure;
          rec.outcome = "DeclaredFailure";
          stop = true;
        } else if (d.declare_done) {
          const bool ok = target_delivered(res.target_id);
          res.status = ok ? EpisodeStatus::Success : EpisodeStatus::Failure;
          res.reason = ok ? "" : "DeclaredDone";
          rec.outcome = "DeclaredDone";
          stop = true;
        } else {
          const Aabb before = mem.graph.find(d.target)->bounds();
          std::tuple<std::string, std::string, bool> r;
          std::string action;
          try {
            if (d.action == ActionKind::ActivePerception) {
              r = active_perception(d);
              action = "ActivePerception";
            } else if (d.action == ActionKind::InteractivePerception) {
              r = interact(d);
              action = std::string(primitive_name(*d.primitive));
            } else {
              auto [w, out] = retrieve(world, d.target, world.goal_region, mem, cfg.actions);
              world = std::move(w);
              r = {"Retrieve " + d.target, std::string(reason_name(out.reason)), out.success};
              action = "Retrieve";
            }
          } catch (const BudgetExceeded&) {
            res.status = EpisodeStatus::BudgetExhausted;
            res.reason = "ReasonerCalls";
            r = {"", "BudgetExhausted", false};
            stop = true;
          } catch (const ReasonerError& e) {
            res.status = EpisodeStatus::Failure;
            res.reason = std::string("ReasonerError: ") + e.what();
            r = {"", "ReasonerError", false};
            stop = true;
          }
          std::tie(rec.low_level, rec.outcome, rec.success) = r;
          if (!stop) {
            mem.history.push_back({world.step, d.target, action, d.goal_text, rec.success, rec.outcome, before});
            if (action == "Retrieve" && rec.success) {
              const bool ok = target_delivered(res.target_id);
              res.status = ok ? EpisodeStatus::Success : EpisodeStatus::Failure;
              res.reason = ok ? "" : "WrongObject";
              stop = true;
            }
          }
        }
      }

      rec.reasoner_calls = counting.calls();
      tr.steps.push_back(std::move(rec));
      ++res.steps;
      ++world.step;
      fire_interventions();
      if (stop) break;
    }
    res.reasoner_calls = counting.calls();
    return res;
  }

  EpisodeResult run() {
    const auto t0 = std::chrono::steady_clock::now();
    fire_interventions();
    CountingReasoner counting(reasoner, sc.budgets.max_reasoner_calls);
    for (int i = 0; i < static_cast<int>(sc.instructions.size()); ++i) {
      InstructionResult r = run_instruction(i, counting);
      tr.reasoner_calls += r.reasoner_calls;
      tr.instructions.push_back(std::move(r));
    }
    tr.status = EpisodeStatus::Success;
    for (const auto& r : tr.instructions) {
      if (r.status != EpisodeStatus::Success) {
        tr.status = r.status;
        tr.reason = r.reason;
        break;
      }
    }
    if (tr.instructions.empty()) {
      tr.status = EpisodeStatus::Failure;
      tr.reason = "NoInstructions";
    }
    tr.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(tr), std::move(mem), std::move(world)};
  }
};

}  // namespace

EpisodeResult run_episode(const Scenario& scenario, Reasoner& reasoner, const CameraIntrinsics& intr,
                          const NoiseModel& noise, const EpisodeConfig& cfg) {
  return Episode(scenario, reasoner, intr, noise, cfg).run();
}

// --- transcript serialization -------------------------------------------------

std::string transcript_json(const Transcript& t) {
  json steps = json::array();
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const auto& s = t.steps[i];
    json dets = json::array();
    for (const auto& d : s.detections)
      dets.push_back({{"label", d.label}, {"visible_fraction", d.visible_fraction}, {"truth_id", d.truth_id}});
    steps.push_back({{"step", s.step},
                     {"instruction", s.instruction},
                     {"camera", s.camera},
                     {"detections", dets},
                     {"memory_hash", s.memory_hash},
                     {"graph", i < t.graphs.size() ? json::parse(t.graphs[i]) : json()},
                     {"decision", response_to_json(s.decision)},
                     {"low_level", s.low_level},
                     {"outcome", s.outcome},
                     {"success", s.success},
                     {"discovered", s.discovered},
                     {"reasoner_calls", s.reasoner_calls}});
  }
  json instr = json::array();
  for (const auto& r : t.instructions)
    instr.push_back({{"instruction", r.instruction},
                     {"target_id", r.target_id},
                     {"status", status_name(r.status)},
                     {"reason", r.reason},
                     {"steps", r.steps},
                     {"reasoner_calls", r.reasoner_calls}});
  const json j = {{"scenario", t.scenario},
                  {"category", t.category},
                  {"seed", t.seed},
                  {"ablation", t.ablation},
                  {"noise", t.noise},
                  {"object_count", t.object_count},
                  {"status", status_name(t.status)},
                  {"reason", t.reason},
                  {"reasoner_calls", t.reasoner_calls},
                  {"instructions", instr},
                  {"steps", steps}};
  return j.dump(1) + "\n";
}

Transcript transcript_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    Transcript t;
    t.scenario = j.at("scenario").get<std::string>();
    t.category = j.at("category").get<std::string>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.ablation = j.at("ablation").get<std::string>();
    t.noise = j.at("noise").get<std::string>();
    t.object_count = j.at("object_count").get<std::size_t>();
    const auto st = parse_status(j.at("status").get<std::string>());
    if (!st) throw ParseError("bad status in transcript");
    t.status = *st;
    t.reason = j.at("reason").get<std::string>();
    t.reasoner_calls = j.at("reasoner_calls").get<int>();
    for (const auto& r : j.at("instructions")) {
      InstructionResult ir;
      ir.instruction = r.at("instruction").get<std::string>();
      ir.target_id = r.at("target_id").get<std::string>();
      ir.status = parse_status(r.at("status").get<std::string>()).value_or(EpisodeStatus::Failure);
      ir.reason = r.at("reason").get<std::string>();
      ir.steps = r.at("steps").get<int>();
      ir.reasoner_calls = r.at("reasoner_calls").get<int>();
      t.instructions.push_back(ir);
    }
    const DecideRequest any_decide;
    for (const auto& s : j.at("steps")) {
      StepRecord r;
      r.step = s.at("step").get<int>();
      r.instruction = s.at("instruction").get<int>();
      r.camera = s.at("camera").get<CameraPose>();
      for (const auto& d : s.at("detections"))
        r.detections.push_back({d.at("label").get<std::string>(), d.at("visible_fraction").get<double>(),
                                d.at("truth_id").get<std::string>()});
      r.memory_hash = s.at("memory_hash").get<std::string>();
      r.decision = std::get<Decision>(response_from_json(any_decide, s.at("decision")));
      r.low_level = s.at("low_level").get<std::string>();
      r.outcome = s.at("outcome").get<std::string>();
      r.success = s.at("success").get<bool>();
      r.discovered = s.at("discovered").get<std::vector<std::string>>();
      r.reasoner_calls = s.at("reasoner_calls").get<int>();
      t.graphs.push_back(s.at("graph").dump());
      t.steps.push_back(std::move(r));
    }
    return t;
  } catch (const json::exception& e) {
    throw ParseError(std::string("transcript: ") + e.what());
  } catch (const SchemaError& e) {
    throw ParseError(std::string("transcript: ") + e.what());
  }
}

}  // namespace retriever
