#include "retriever/errors.hpp"
#include "retriever/harness/evaluate.hpp"
#include "retriever/harness/generators.hpp"
#include "retriever/scenario_io.hpp"
#include "retriever/supervisor.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace retriever;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

Category category_arg(const std::string& s) {
  auto c = parse_category(s);
  if (!c) throw Error("unknown category '" + s + "'");
  return *c;
}

Ablation ablation_arg(const std::string& s) {
  auto a = parse_ablation(s);
  if (!a) throw Error("unknown ablation '" + s + "'");
  return *a;
}

std::vector<Scenario> load_suite(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Scenario> out;
  for (const auto& f : files) out.push_back(load_scenario(f));
  return out;
}

// Keyed node/edge sets of a graph summary, for diffs between steps.
struct GraphKeys {
  std::map<std::string, std::string> nodes;  // id -> "kind name region"
  std::set<std::string> edges;
};

GraphKeys keys_of(const std::string& text) {
  GraphKeys k;
  if (text.empty()) return k;
  const json g = json::parse(text);
  for (const auto& n : g.at("nodes")) {
    std::string desc = n.at("kind").get<std::string>() + " " + n.at("name").get<std::string>();
    if (n.contains("region")) desc += " " + n.at("region").get<std::string>();
    k.nodes[n.at("id").get<std::string>()] = desc;
  }
  for (const auto& e : g.at("edges"))
    k.edges.insert(e.at(0).get<std::string>() + " " + e.at(1).get<std::string>() + " " + e.at(2).get<std::string>());
  return k;
}

void print_diff(const GraphKeys& a, const GraphKeys& b) {
  for (const auto& [id, d] : b.nodes) {
    auto it = a.nodes.find(id);
    if (it == a.nodes.end()) std::cout << "    + node " << id << " (" << d << ")\n";
    else if (it->second != d) std::cout << "    ~ node " << id << " (" << it->second << " -> " << d << ")\n";
  }
  for (const auto& [id, d] : a.nodes)
    if (!b.nodes.count(id)) std::cout << "    - node " << id << " (" << d << ")\n";
  for (const auto& e : b.edges)
    if (!a.edges.count(e)) std::cout << "    + edge " << e << "\n";
  for (const auto& e : a.edges)
    if (!b.edges.count(e)) std::cout << "    - edge " << e << "\n";
}

void replay(const Transcript& t) {
  std::cout << t.scenario << " [" << t.category << ", seed " << t.seed << ", ablation " << t.ablation << ", noise "
            << t.noise << "]\n";
  GraphKeys prev;
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const auto& s = t.steps[i];
    const Decision& d = s.decision;
    std::cout << "step " << s.step << " (instruction " << s.instruction << "): " << s.detections.size()
              << " detections, memory " << s.memory_hash << "\n";
    if (d.declare_failure) std::cout << "  give up: " << *d.declare_failure << "\n";
    else if (!d.target.empty())
      std::cout << "  " << action_kind_name(d.action) << (d.primitive ? "/" + std::string(primitive_name(*d.primitive)) : "")
                << " on " << d.target << ": \"" << d.goal_text << "\"\n";
    if (!s.low_level.empty() || !s.outcome.empty())
      std::cout << "  -> " << s.low_level << " [" << s.outcome << (s.success ? ", ok" : "") << "]\n";
    const GraphKeys cur = keys_of(i < t.graphs.size() ? t.graphs[i] : std::string());
    print_diff(prev, cur);
    prev = cur;
  }
  for (const auto& r : t.instructions)
    std::cout << "\"" << r.instruction << "\": " << status_name(r.status) << (r.reason.empty() ? "" : " (" + r.reason + ")")
              << " in " << r.steps << " steps, " << r.reasoner_calls << " reasoner calls\n";
  std::cout << "episode: " << status_name(t.status) << (t.reason.empty() ? "" : " (" + t.reason + ")") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object retrieval agent on a simulated tabletop"};
  app.require_subcommand(1);

  std::string category, out, scenario_path, reasoner = "heuristic", ablation = "None", noise = "none", suite, report,
                                                  transcript;
  std::uint64_t seed = 0;
  int count = 1;
  unsigned threads = 0;

  auto* gen = app.add_subcommand("gen", "generate a scenario file");
  gen->add_option("--category", category, "task category")->required();
  gen->add_option("--seed", seed, "random seed")->required();
  gen->add_option("--out", out, "output file")->required();

  auto* gen_suite = app.add_subcommand("suite", "generate seeds 0..N-1 of a category into a directory");
  gen_suite->add_option("--category", category, "task category")->required();
  gen_suite->add_option("--seeds", count, "number of seeds")->required();
  gen_suite->add_option("--out", out, "output directory")->required();

  auto* run = app.add_subcommand("run", "run one episode and write its transcript");
  run->add_option("--scenario", scenario_path, "scenario file")->required();
  run->add_option("--reasoner", reasoner, "heuristic | oracle | external:CMD");
  run->add_option("--ablation", ablation, "None | FixedCamera | ThreeFixedCameras | GenerativePose | NoMemory");
  run->add_option("--noise", noise, "none | low | high");
  run->add_option("--out", out, "transcript file")->required();

  auto* eval = app.add_subcommand("eval", "run every scenario in a directory and report metrics");
  eval->add_option("--suite", suite, "directory of scenario files")->required();
  eval->add_option("--reasoner", reasoner, "heuristic | oracle | external:CMD");
  eval->add_option("--ablation", ablation, "ablation mode");
  eval->add_option("--noise", noise, "noise profile");
  eval->add_option("--threads", threads, "worker threads (0: all cores)");
  eval->add_option("--report", report, "report file (JSON; CSV files are written next to it)")->required();

  auto* rep = app.add_subcommand("replay", "print a transcript step by step");
  rep->add_option("--transcript", transcript, "transcript file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      save_scenario(generate_scenario(category_arg(category), seed), out);
    } else if (*gen_suite) {
      const Category c = category_arg(category);
      fs::create_directories(out);
      for (int s = 0; s < count; ++s) {
        const Scenario sc = generate_scenario(c, static_cast<std::uint64_t>(s));
        save_scenario(sc, fs::path(out) / (sc.name + ".json"));
      }
    } else if (*run) {
      const Scenario sc = load_scenario(scenario_path);
      EvalConfig cfg;
      cfg.ablation = ablation_arg(ablation);
      cfg.noise = noise;
      auto r = make_reasoner(reasoner);
      const EpisodeResult res = run_with(sc, *r, cfg);
      write_file(out, transcript_json(res.transcript));
      std::cout << sc.name << ": " << status_name(res.transcript.status) << " in " << res.transcript.steps.size()
                << " steps\n";
    } else if (*eval) {
      EvalConfig cfg;
      cfg.ablation = ablation_arg(ablation);
      cfg.noise = noise;
      cfg.threads = threads;
      const MetricsReport m = evaluate(load_suite(suite), reasoner, cfg);
      const fs::path rp(report);
      write_file(rp, report_json(m).dump(2) + "\n");
      fs::path csv = rp, series = rp;
      write_file(csv.replace_extension(".csv"), report_csv(m));
      write_file(series.replace_filename(rp.stem().string() + "_odr.csv"), odr_csv(m));
      for (const auto& c : m.categories)
        std::cout << c.category << ": success " << c.success_rate << ", ODR " << c.mean_odr << ", steps "
                  << c.mean_rollout_length << ", GED " << c.mean_ged << " over " << c.episodes << " episodes\n";
    } else if (*rep) {
      replay(transcript_from_json(read_file(transcript)));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
