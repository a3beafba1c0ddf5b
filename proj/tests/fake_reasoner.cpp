// Scripted stand-in for an external reasoner process, used by the protocol tests.
//
//   fake_reasoner MODE [VARIANT]
//
// MODE: echo       answer every request like the built-in heuristic
//       bad-index  out-of-range index for SelectDirection / SelectPose
//       garbage    a line that is not JSON
//       error      {"id": .., "error": ..}
//       wrong-id   reply carries another id
//       no-result  reply without "result"
//       bad-schema result of the wrong shape
//       silent     never answers
//       die        exits without answering
// Faulty modes only misbehave on VARIANT when given, otherwise on every request.
#include "retriever/reasoner.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <iostream>
#include <string>
#include <thread>

using nlohmann::json;
using namespace retriever;

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "echo";
  const std::string only = argc > 2 ? argv[2] : "";
  HeuristicReasoner heuristic;
  std::string line;
  while (std::getline(std::cin, line)) {
    const json msg = json::parse(line);
    const std::string variant = msg.at("variant").get<std::string>();
    const ReasonerRequest req = request_from_json(variant, msg.at("payload"));
    json reply = {{"id", msg.at("id")}, {"result", response_to_json(heuristic.respond(req))}};

    const bool hit = only.empty() || only == variant;
    if (hit && mode == "bad-index" && (variant == "SelectDirection" || variant == "SelectPose")) {
      reply["result"]["index"] = 999;
      reply["result"]["look_closer"] = false;
    } else if (hit && mode == "garbage") {
      std::cout << "this is not json" << std::endl;
      continue;
    } else if (hit && mode == "error") {
      reply = {{"id", msg.at("id")}, {"error", "model unavailable"}};
    } else if (hit && mode == "wrong-id") {
      reply["id"] = msg.at("id").get<long>() + 1000;
    } else if (hit && mode == "no-result") {
      reply.erase("result");
    } else if (hit && mode == "bad-schema") {
      reply["result"] = json::array({1, 2, 3});
    } else if (hit && mode == "silent") {
      std::this_thread::sleep_for(std::chrono::seconds(30));
      continue;
    } else if (hit && mode == "die") {
      return 3;
    }
    std::cout << reply.dump() << std::endl;
  }
  return 0;
}
