#pragma once

#include "retriever/actions.hpp"
#include "retriever/active_perception.hpp"
#include "retriever/memory.hpp"
#include "retriever/observation.hpp"
#include "retriever/reasoner.hpp"
#include "retriever/world.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace retriever {

enum class Ablation { None, FixedCamera, ThreeFixedCameras, GenerativePose, NoMemory };
std::string_view ablation_name(Ablation a);
std::optional<Ablation> parse_ablation(std::string_view s);

enum class EpisodeStatus { Success, Failure, BudgetExhausted };
std::string_view status_name(EpisodeStatus s);
std::optional<EpisodeStatus> parse_status(std::string_view s);

/// What the harness may look at between steps (the oracle reasoner uses it).
struct EpisodeView {
  const WorldState* world = nullptr;
  const Memory* memory = nullptr;
  const std::set<std::string>* discovered = nullptr;
  std::string target_id;
  const CameraIntrinsics* intr = nullptr;
};

struct EpisodeConfig {
  Ablation ablation = Ablation::None;
  std::string noise_name = "none";
  std::optional<std::uint64_t> noise_seed;  // defaults to the scenario seed
  MemoryConfig memory;
  PerceptionConfig perception;
  ActionConfig actions;
  std::function<void(const EpisodeView&)> on_state;
};

struct DetectionSummary {
  std::string label;
  double visible_fraction = 0.0;
  std::string truth_id;
  bool operator==(const DetectionSummary&) const = default;
};

struct StepRecord {
  int step = 0;
  int instruction = 0;
  CameraPose camera;
  std::vector<DetectionSummary> detections;
  std::string memory_hash;
  Decision decision;
  std::string low_level;  // what was executed
  std::string outcome;
  bool success = false;
  std::vector<std::string> discovered;  // cumulative, sorted
  int reasoner_calls = 0;                // cumulative within the instruction
};

struct InstructionResult {
  std::string instruction;
  std::string target_id;
  EpisodeStatus status = EpisodeStatus::Failure;
  std::string reason;
  int steps = 0;
  int reasoner_calls = 0;
};

struct Transcript {
  std::string scenario;
  std::string category;
  std::uint64_t seed = 0;
  std::string ablation;
  std::string noise;
  std::size_t object_count = 0;
  std::vector<StepRecord> steps;
  std::vector<std::string> graphs;  // graph summary (JSON text) after each step's memory update
  std::vector<InstructionResult> instructions;
  EpisodeStatus status = EpisodeStatus::Failure;
  std::string reason;
  int reasoner_calls = 0;
  double wall_time_s = 0.0;  // not serialized, so transcripts stay byte-identical
};

struct EpisodeResult {
  Transcript transcript;
  Memory memory;
  WorldState world;
};

/// Sends the Decide request, validates the answer against the graph and
/// replaces Open/Close flip-flops on the same container with the heuristic.
Decision decide(const DecideRequest& req, const Memory& mem, Reasoner& reasoner);

EpisodeResult run_episode(const Scenario& scenario, Reasoner& reasoner, const CameraIntrinsics& intr,
                          const NoiseModel& noise, const EpisodeConfig& cfg = {});

/// Free table spot in the agent's belief for an object of the given bounds.
std::optional<Pose> find_place_spot(const Memory& mem, const std::string& node_id, const Aabb& avoid,
                                    const MemoryConfig& cfg = {});

std::string transcript_json(const Transcript& t);
Transcript transcript_from_json(const std::string& text);

}  // namespace retriever
