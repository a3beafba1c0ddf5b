#include "retriever/harness/oracle_reasoner.hpp"

#include "retriever/memory.hpp"

namespace retriever {

double OracleReasoner::view_score(const Vec3& position, const Vec3& center) const {
  if (!view_.world || !view_.intr) return 0.0;
  const Observation o = observe(*view_.world, CameraPose::look_at(position, center), *view_.intr, NoiseModel{}, 0,
                                view_.world->step);
  double score = 0.0;
  for (const auto& d : o.detections) {
    if (d.truth_id == view_.target_id) score += 10.0;
    if (view_.discovered && !view_.discovered->count(d.truth_id)) score += 1.0;
  }
  return score;
}

ReasonerResponse OracleReasoner::respond(const ReasonerRequest& req) {
  if (const auto* r = std::get_if<DecideRequest>(&req)) {
    Vec3 truth = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
    if (view_.world)
      if (const SimObject* t = view_.world->find(view_.target_id)) truth = t->pose.position;
    return heuristic_decide(*r, [&](const NodeView& n) {
      return !n.bounds.empty() && truth.allFinite() && n.bounds.inflated(0.03).contains(truth) ? 1.0 : 0.0;
    });
  }
  if (const auto* r = std::get_if<SelectDirectionRequest>(&req)) {
    SelectDirectionRequest scored = *r;
    for (auto& c : scored.candidates) c.score = view_score(c.position, r->center) + 2.0 * c.score;
    return IndexResult{heuristic_select_direction(scored)};
  }
  if (const auto* r = std::get_if<SelectPoseRequest>(&req)) {
    if (r->generative) return heuristic_select_pose(*r);
    SelectPoseRequest scored = *r;
    for (auto& c : scored.candidates) c.score = view_score(c.position, r->center) + 2.0 * c.score;
    return heuristic_select_pose(scored);
  }
  return HeuristicReasoner().respond(req);
}

}  // namespace retriever
