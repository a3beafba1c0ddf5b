#pragma once

#include "retriever/harness/metrics.hpp"
#include "retriever/supervisor.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace retriever {

struct EvalConfig {
  Ablation ablation = Ablation::None;
  std::string noise = "none";
  CameraIntrinsics intr;
  unsigned threads = 0;  // 0: hardware concurrency
};

/// "heuristic", "oracle" or "external:CMD".
std::unique_ptr<Reasoner> make_reasoner(const std::string& spec);

/// Runs one episode, wiring the oracle hook when the reasoner is an oracle.
EpisodeResult run_with(const Scenario& s, Reasoner& reasoner, const EvalConfig& cfg);

EpisodeRow episode_row(const Scenario& s, const EpisodeResult& r);

/// One fresh reasoner per episode from `reasoner_spec`; episodes run in parallel.
MetricsReport evaluate(const std::vector<Scenario>& suite, const std::string& reasoner_spec, const EvalConfig& cfg = {});

}  // namespace retriever
