#include "fixtures.hpp"

#include "retriever/errors.hpp"
#include "retriever/reasoner.hpp"
#include "retriever/supervisor.hpp"

#include <doctest.h>

#include <filesystem>

using namespace retriever;

namespace {

std::string fake(const std::string& args) { return std::string(FAKE_REASONER_PATH) + " " + args; }

SelectDirectionRequest direction_request() {
  SelectDirectionRequest r;
  r.goal_text = "look";
  r.target = "n1";
  r.radius = 0.5;
  for (int k = 0; k < 3; ++k) r.candidates.push_back({k, Vec3(0.1 * k, 0, 0.5), 0.5, 0.1 * k, 0.2 * k});
  return r;
}

Transcript episode_with(const std::string& args) {
  ExternalReasoner ext(fake(args), 2.0);
  const Scenario s = fixture::scenario_of(fixture::cabinet_world(), "find the lotion", "lotion");
  return run_episode(s, ext, CameraIntrinsics{}, NoiseModel{}).transcript;
}

}  // namespace

TEST_CASE("a conforming process gives the same answers as the heuristic") {
  ExternalReasoner ext(fake("echo"));
  HeuristicReasoner h;
  const SelectDirectionRequest r = direction_request();
  CHECK(ext.respond(r) == h.respond(r));
  CHECK(ext.respond(r) == h.respond(r));  // same process, next id

  const Scenario s = fixture::scenario_of(fixture::cabinet_world(), "find the lotion", "lotion");
  const std::string via_pipe = transcript_json(run_episode(s, ext, CameraIntrinsics{}, NoiseModel{}).transcript);
  const std::string in_process = transcript_json(run_episode(s, h, CameraIntrinsics{}, NoiseModel{}).transcript);
  CHECK(via_pipe == in_process);
}

TEST_CASE("protocol faults map to typed errors") {
  const SelectDirectionRequest r = direction_request();
  auto fails = [&](const std::string& mode) {
    ExternalReasoner ext(fake(mode), 2.0);
    ext.respond(r);
  };
  CHECK_THROWS_AS(fails("garbage"), ProtocolError);
  CHECK_THROWS_AS(fails("wrong-id"), ProtocolError);
  CHECK_THROWS_AS(fails("die"), ProtocolError);
  CHECK_THROWS_AS(fails("silent"), ProtocolError);
  CHECK_THROWS_AS(fails("no-result"), SchemaError);
  CHECK_THROWS_AS(fails("bad-schema"), SchemaError);
  CHECK_THROWS_AS(fails("error"), ReasonerError);
}

TEST_CASE("an out-of-range choice is rejected") {
  const Transcript t = episode_with("bad-index");
  CHECK(t.status == EpisodeStatus::Failure);
  CHECK(t.reason.find("ReasonerError") == 0);
  CHECK(t.steps.back().outcome == "ReasonerError");
}

TEST_CASE("faulty replies end the episode cleanly") {
  for (const char* mode : {"garbage", "error", "wrong-id", "no-result", "bad-schema", "die"}) {
    CAPTURE(mode);
    const Transcript t = episode_with(std::string(mode) + " Decide");
    CHECK(t.status == EpisodeStatus::Failure);
    CHECK(t.reason.find("ReasonerError") == 0);
    // The transcript is still well formed.
    CHECK(transcript_json(transcript_from_json(transcript_json(t))) == transcript_json(t));
  }
}

TEST_CASE("sidecar directory holds the rasters and is removed") {
  std::filesystem::path dir;
  {
    ExternalReasoner ext(fake("echo"));
    dir = ext.sidecar_dir();
    CHECK(std::filesystem::is_directory(dir));
  }
  CHECK(!std::filesystem::exists(dir));
}
