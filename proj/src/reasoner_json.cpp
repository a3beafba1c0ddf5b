#include "retriever/errors.hpp"
#include "retriever/reasoner.hpp"

#include <nlohmann/json.hpp>

namespace retriever {

using json = nlohmann::json;

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

std::string state_name(ContainerState s) { return s == ContainerState::Open ? "Open" : "Closed"; }
ContainerState parse_state(const std::string& s) {
  if (s == "Open") return ContainerState::Open;
  if (s == "Closed") return ContainerState::Closed;
  throw SchemaError("bad container state '" + s + "'");
}

Relation parse_rel(const std::string& s) {
  auto r = parse_relation(s);
  if (!r) throw SchemaError("bad relation '" + s + "'");
  return *r;
}

// --- rasters ---------------------------------------------------------------

struct Sidecar {
  std::filesystem::path dir;
  std::string prefix;
};

json raster_json(const Raster& r, const Sidecar& sc, const std::string& name) {
  json j = {{"width", r.width}, {"height", r.height}};
  if (sc.dir.empty() || r.width <= 0 || r.height <= 0) return j;
  const auto depth = sc.dir / (sc.prefix + "_" + name + "_depth.pgm");
  const auto mask = sc.dir / (sc.prefix + "_" + name + "_mask.pgm");
  write_pgm(depth, r.width, r.height, r.depth);
  write_pgm(mask, r.width, r.height, r.mask);
  j["depth"] = depth.string();
  j["mask"] = mask.string();
  return j;
}

Raster raster_from(const json& j) {
  Raster r;
  r.width = j.at("width").get<int>();
  r.height = j.at("height").get<int>();
  if (j.contains("depth")) std::tie(r.width, r.height, r.depth) = read_pgm(j.at("depth").get<std::string>());
  if (j.contains("mask")) r.mask = std::get<2>(read_pgm(j.at("mask").get<std::string>()));
  return r;
}

json views_json(const CanonicalViews& v, const Sidecar& sc) {
  return {{"front", raster_json(v.front, sc, "front")},
          {"left", raster_json(v.left, sc, "left")},
          {"right", raster_json(v.right, sc, "right")}};
}

CanonicalViews views_from(const json& j) {
  return {raster_from(j.at("front")), raster_from(j.at("left")), raster_from(j.at("right"))};
}

json candidates_json(const std::vector<CandidateInfo>& cs) {
  json a = json::array();
  for (const auto& c : cs)
    a.push_back({{"index", c.index}, {"position", vec(c.position)}, {"polar", c.polar}, {"azimuth", c.azimuth},
                 {"score", c.score}});
  return a;
}

std::vector<CandidateInfo> candidates_from(const json& j) {
  std::vector<CandidateInfo> out;
  for (const auto& c : j)
    out.push_back({c.at("index").get<int>(), vec(c.at("position")), c.at("polar").get<double>(),
                   c.at("azimuth").get<double>(), c.at("score").get<double>()});
  return out;
}

// --- Decide ------------------------------------------------------------------

json node_json(const NodeView& n) {
  json j = {{"id", n.id},
            {"known", n.known},
            {"name", n.name},
            {"tags", n.tags},
            {"movable", n.movable},
            {"conf", n.conf},
            {"occl", n.occl},
            {"view", n.view},
            {"last_seen_step", n.last_seen_step},
            {"detected_last", n.detected_last},
            {"handle_seen", n.handle_seen},
            {"bounds", n.bounds},
            {"ap_attempts", n.ap_attempts}};
  if (n.container_state) j["container_state"] = state_name(*n.container_state);
  if (n.region_relation) {
    j["region"] = {{"relation", relation_name(*n.region_relation)},
                   {"parent", n.region_parent},
                   {"volume", n.region_volume},
                   {"explored_fraction", n.explored_fraction}};
  }
  return j;
}

NodeView node_from(const json& j) {
  NodeView n;
  n.id = j.at("id").get<std::string>();
  n.known = j.at("known").get<bool>();
  n.name = j.at("name").get<std::string>();
  n.tags = j.at("tags").get<std::vector<std::string>>();
  n.movable = j.at("movable").get<bool>();
  n.conf = j.at("conf").get<double>();
  n.occl = j.at("occl").get<bool>();
  n.view = j.at("view").get<bool>();
  n.last_seen_step = j.at("last_seen_step").get<int>();
  n.detected_last = j.at("detected_last").get<bool>();
  n.handle_seen = j.at("handle_seen").get<bool>();
  n.bounds = j.at("bounds").get<Aabb>();
  n.ap_attempts = j.at("ap_attempts").get<int>();
  if (j.contains("container_state")) n.container_state = parse_state(j.at("container_state").get<std::string>());
  if (j.contains("region")) {
    const auto& r = j.at("region");
    n.region_relation = parse_rel(r.at("relation").get<std::string>());
    n.region_parent = r.at("parent").get<std::string>();
    n.region_volume = r.at("volume").get<double>();
    n.explored_fraction = r.at("explored_fraction").get<double>();
  }
  return n;
}

json record_json(const ActionRecord& r) {
  return {{"step", r.step},       {"target", r.target},   {"action", r.action},
          {"goal_text", r.goal_text}, {"success", r.success}, {"outcome", r.outcome},
          {"target_bounds", r.target_bounds}};
}

ActionRecord record_from(const json& j) {
  ActionRecord r;
  r.step = j.at("step").get<int>();
  r.target = j.at("target").get<std::string>();
  r.action = j.at("action").get<std::string>();
  r.goal_text = j.at("goal_text").get<std::string>();
  r.success = j.at("success").get<bool>();
  r.outcome = j.at("outcome").get<std::string>();
  r.target_bounds = j.at("target_bounds").get<Aabb>();
  return r;
}

json decision_json(const Decision& d) {
  json j = {{"target", d.target},
            {"action", action_kind_name(d.action)},
            {"angle", d.angle},
            {"goal_text", d.goal_text},
            {"declare_done", d.declare_done}};
  if (d.primitive) j["primitive"] = primitive_name(*d.primitive);
  if (d.declare_failure) j["declare_failure"] = *d.declare_failure;
  return j;
}

Decision decision_from(const json& j) {
  Decision d;
  d.target = j.value("target", "");
  const auto a = parse_action_kind(j.value("action", "None"));
  if (!a) throw SchemaError("bad action kind '" + j.value("action", "") + "'");
  d.action = *a;
  if (j.contains("primitive") && !j.at("primitive").is_null()) {
    const auto p = parse_primitive(j.at("primitive").get<std::string>());
    if (!p) throw SchemaError("bad primitive '" + j.at("primitive").get<std::string>() + "'");
    d.primitive = *p;
  }
  d.angle = j.value("angle", 0.0);
  d.goal_text = j.value("goal_text", "");
  d.declare_done = j.value("declare_done", false);
  if (j.contains("declare_failure") && !j.at("declare_failure").is_null())
    d.declare_failure = j.at("declare_failure").get<std::string>();
  if (d.action == ActionKind::InteractivePerception && !d.primitive)
    throw SchemaError("InteractivePerception decision without a primitive");
  return d;
}

// --- requests ----------------------------------------------------------------

json to_payload(const MatchInstancesRequest& r, const Sidecar&) {
  json nodes = json::array(), dets = json::array();
  for (const auto& n : r.nodes) nodes.push_back({{"node_id", n.node_id}, {"name", n.name}, {"history", n.history}});
  for (const auto& d : r.detections)
    dets.push_back({{"descriptor", d.descriptor}, {"label", d.label}, {"centroid_distance", d.centroid_distance}});
  return {{"nodes", nodes},
          {"detections", dets},
          {"lambda", r.lambda},
          {"theta", r.theta},
          {"exact_limit", r.exact_limit}};
}

json to_payload(const InferAttributesRequest& r, const Sidecar&) {
  json items = json::array();
  for (const auto& it : r.items) items.push_back({{"node_id", it.node_id}, {"history", it.history}});
  return {{"items", items}, {"theta_full", r.theta_full}};
}

json to_payload(const InferRelationsVetoRequest& r, const Sidecar&) {
  json edges = json::array();
  for (const auto& e : r.edges)
    edges.push_back({{"src", e.src},
                     {"src_name", e.src_name},
                     {"dst", e.dst},
                     {"dst_name", e.dst_name},
                     {"relation", relation_name(e.relation)}});
  return {{"edges", edges}};
}

json to_payload(const HypothesizeUnknownRequest& r, const Sidecar&) {
  json ps = json::array();
  for (const auto& p : r.proposals)
    ps.push_back({{"parent", p.parent},
                  {"parent_name", p.parent_name},
                  {"relation", relation_name(p.relation)},
                  {"volume", p.volume}});
  return {{"proposals", ps}};
}

json to_payload(const SelectDirectionRequest& r, const Sidecar& sc) {
  return {{"goal_text", r.goal_text}, {"target", r.target},
          {"center", vec(r.center)},  {"radius", r.radius},
          {"candidates", candidates_json(r.candidates)}, {"views", views_json(r.views, sc)}};
}

json to_payload(const SelectPoseRequest& r, const Sidecar& sc) {
  return {{"goal_text", r.goal_text},
          {"target", r.target},
          {"center", vec(r.center)},
          {"radius", r.radius},
          {"candidates", candidates_json(r.candidates)},
          {"views", views_json(r.views, sc)},
          {"allow_look_closer", r.allow_look_closer},
          {"generative", r.generative},
          {"current", r.current}};
}

json to_payload(const DecideRequest& r, const Sidecar&) {
  json nodes = json::array(), hist = json::array();
  for (const auto& n : r.nodes) nodes.push_back(node_json(n));
  for (const auto& h : r.history) hist.push_back(record_json(h));
  json edges = json::array();
  for (const auto& e : r.edges) edges.push_back({e.src, relation_name(e.relation), e.dst});
  return {{"instruction", r.instruction}, {"step", r.step}, {"nodes", nodes}, {"edges", edges}, {"history", hist}};
}

ReasonerRequest parse_payload(const std::string& variant, const json& p) {
  if (variant == "MatchInstances") {
    MatchInstancesRequest r;
    for (const auto& n : p.at("nodes"))
      r.nodes.push_back({n.at("node_id").get<std::string>(), n.at("name").get<std::string>(),
                         n.at("history").get<std::vector<Descriptor>>()});
    for (const auto& d : p.at("detections"))
      r.detections.push_back({d.at("descriptor").get<Descriptor>(), d.at("label").get<std::string>(),
                              d.at("centroid_distance").get<std::vector<double>>()});
    r.lambda = p.at("lambda").get<double>();
    r.theta = p.at("theta").get<double>();
    r.exact_limit = p.at("exact_limit").get<std::size_t>();
    return r;
  }
  if (variant == "InferAttributes") {
    InferAttributesRequest r;
    for (const auto& it : p.at("items"))
      r.items.push_back({it.at("node_id").get<std::string>(), it.at("history").get<std::vector<ObservationRecord>>()});
    r.theta_full = p.at("theta_full").get<double>();
    return r;
  }
  if (variant == "InferRelationsVeto") {
    InferRelationsVetoRequest r;
    for (const auto& e : p.at("edges"))
      r.edges.push_back({e.at("src").get<std::string>(), e.at("src_name").get<std::string>(),
                         e.at("dst").get<std::string>(), e.at("dst_name").get<std::string>(),
                         parse_rel(e.at("relation").get<std::string>())});
    return r;
  }
  if (variant == "HypothesizeUnknown") {
    HypothesizeUnknownRequest r;
    for (const auto& u : p.at("proposals"))
      r.proposals.push_back({u.at("parent").get<std::string>(), u.at("parent_name").get<std::string>(),
                             parse_rel(u.at("relation").get<std::string>()), u.at("volume").get<double>()});
    return r;
  }
  if (variant == "SelectDirection") {
    SelectDirectionRequest r;
    r.goal_text = p.at("goal_text").get<std::string>();
    r.target = p.at("target").get<std::string>();
    r.center = vec(p.at("center"));
    r.radius = p.at("radius").get<double>();
    r.candidates = candidates_from(p.at("candidates"));
    r.views = views_from(p.at("views"));
    return r;
  }
  if (variant == "SelectPose") {
    SelectPoseRequest r;
    r.goal_text = p.at("goal_text").get<std::string>();
    r.target = p.at("target").get<std::string>();
    r.center = vec(p.at("center"));
    r.radius = p.at("radius").get<double>();
    r.candidates = candidates_from(p.at("candidates"));
    r.views = views_from(p.at("views"));
    r.allow_look_closer = p.at("allow_look_closer").get<bool>();
    r.generative = p.at("generative").get<bool>();
    r.current = p.at("current").get<CameraPose>();
    return r;
  }
  if (variant == "Decide") {
    DecideRequest r;
    r.instruction = p.at("instruction").get<std::string>();
    r.step = p.at("step").get<int>();
    for (const auto& n : p.at("nodes")) r.nodes.push_back(node_from(n));
    for (const auto& e : p.at("edges")) {
      SceneEdge se;
      se.src = e.at(0).get<std::string>();
      se.relation = parse_rel(e.at(1).get<std::string>());
      se.dst = e.at(2).get<std::string>();
      r.edges.push_back(se);
    }
    for (const auto& h : p.at("history")) r.history.push_back(record_from(h));
    return r;
  }
  throw SchemaError("unknown request variant '" + variant + "'");
}

template <class T>
std::vector<T> sized(const json& j, std::size_t n, const char* what) {
  auto v = j.get<std::vector<T>>();
  if (v.size() != n)
    throw SchemaError(std::string(what) + ": expected " + std::to_string(n) + " entries, got " +
                      std::to_string(v.size()));
  return v;
}

}  // namespace

json request_to_json(const ReasonerRequest& req, const std::filesystem::path& sidecar_dir, const std::string& prefix) {
  const Sidecar sc{sidecar_dir, prefix};
  return std::visit([&](const auto& r) { return to_payload(r, sc); }, req);
}

ReasonerRequest request_from_json(const std::string& variant, const json& payload) {
  try {
    return parse_payload(variant, payload);
  } catch (const json::exception& e) {
    throw SchemaError(variant + " request: " + e.what());
  }
}

json response_to_json(const ReasonerResponse& resp) {
  return std::visit(
      [](const auto& r) -> json {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, MatchInstancesResult>) return {{"assignment", r.assignment}};
        else if constexpr (std::is_same_v<T, InferAttributesResult>) return {{"attributes", r.attributes}};
        else if constexpr (std::is_same_v<T, KeepResult>) return {{"keep", r.keep}};
        else if constexpr (std::is_same_v<T, IndexResult>) return {{"index", r.index}};
        else if constexpr (std::is_same_v<T, PoseChoice>) {
          json j = {{"index", r.index}, {"look_closer", r.look_closer}};
          if (r.pose) j["pose"] = *r.pose;
          return j;
        } else
          return decision_json(r);
      },
      resp);
}

ReasonerResponse response_from_json(const ReasonerRequest& req, const json& result) {
  const std::string variant(variant_name(req));
  try {
    if (!result.is_object()) throw SchemaError(variant + " response is not an object");
    return std::visit(
        [&](const auto& r) -> ReasonerResponse {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, MatchInstancesRequest>)
            return MatchInstancesResult{sized<int>(result.at("assignment"), r.detections.size(), "assignment")};
          else if constexpr (std::is_same_v<T, InferAttributesRequest>)
            return InferAttributesResult{sized<NodeAttributes>(result.at("attributes"), r.items.size(), "attributes")};
          else if constexpr (std::is_same_v<T, InferRelationsVetoRequest>)
            return KeepResult{sized<bool>(result.at("keep"), r.edges.size(), "keep")};
          else if constexpr (std::is_same_v<T, HypothesizeUnknownRequest>)
            return KeepResult{sized<bool>(result.at("keep"), r.proposals.size(), "keep")};
          else if constexpr (std::is_same_v<T, SelectDirectionRequest>)
            return IndexResult{result.at("index").get<int>()};
          else if constexpr (std::is_same_v<T, SelectPoseRequest>) {
            PoseChoice c;
            c.index = result.value("index", 0);
            c.look_closer = result.value("look_closer", false);
            if (c.look_closer && !r.allow_look_closer) throw SchemaError("look_closer not allowed here");
            if (result.contains("pose") && !result.at("pose").is_null()) c.pose = result.at("pose").get<CameraPose>();
            if (r.generative && !c.pose) throw SchemaError("generative SelectPose needs a pose");
            return c;
          } else
            return decision_from(result);
        },
        req);
  } catch (const json::exception& e) {
    throw SchemaError(variant + " response: " + e.what());
  }
}

}  // namespace retriever
