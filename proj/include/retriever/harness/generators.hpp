#pragma once

#include "retriever/observation.hpp"
#include "retriever/world.hpp"

#include <cstdint>

namespace retriever {

/// Seeded scenario for one task category. HiddenInside, SequentialRetrieval and
/// SemanticTargeting share the same world for a given seed; so do
/// RecursiveSearch and CompositionalReasoning. Throws GenerationFailed when no
/// layout passing the category checks is found in 100 attempts.
Scenario generate_scenario(Category category, std::uint64_t seed, const CameraIntrinsics& intr = {});

/// Re-runs the structural checks of the scenario's category; throws
/// ValidationError naming the failed check.
void verify_scenario(const Scenario& scenario, const CameraIntrinsics& intr = {});

}  // namespace retriever
