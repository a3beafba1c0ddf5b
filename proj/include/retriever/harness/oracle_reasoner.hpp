#pragma once

#include "retriever/reasoner.hpp"
#include "retriever/supervisor.hpp"

namespace retriever {

/// Reasoner with ground-truth access: explores the region that actually holds
/// the target first and scores views by simulating the camera. Everything else
/// falls back to the heuristic.
class OracleReasoner : public Reasoner {
 public:
  ReasonerResponse respond(const ReasonerRequest& req) override;
  /// Hook for EpisodeConfig::on_state.
  void attach(const EpisodeView& view) { view_ = view; }

 private:
  double view_score(const Vec3& position, const Vec3& center) const;
  EpisodeView view_;
};

}  // namespace retriever
