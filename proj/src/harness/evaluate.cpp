#include "retriever/harness/evaluate.hpp"

#include "retriever/ged.hpp"
#include "retriever/harness/oracle_reasoner.hpp"

#include <atomic>
#include <mutex>
#include <thread>

namespace retriever {

std::unique_ptr<Reasoner> make_reasoner(const std::string& spec) {
  if (spec == "heuristic") return std::make_unique<HeuristicReasoner>();
  if (spec == "oracle") return std::make_unique<OracleReasoner>();
  if (spec.rfind("external:", 0) == 0 && spec.size() > 9) return std::make_unique<ExternalReasoner>(spec.substr(9));
  throw std::invalid_argument("unknown reasoner '" + spec + "' (heuristic, oracle or external:CMD)");
}

EpisodeResult run_with(const Scenario& s, Reasoner& reasoner, const EvalConfig& cfg) {
  EpisodeConfig ec;
  ec.ablation = cfg.ablation;
  ec.noise_name = cfg.noise;
  if (auto* oracle = dynamic_cast<OracleReasoner*>(&reasoner))
    ec.on_state = [oracle](const EpisodeView& v) { oracle->attach(v); };
  return run_episode(s, reasoner, cfg.intr, NoiseModel::profile(cfg.noise), ec);
}

EpisodeRow episode_row(const Scenario& s, const EpisodeResult& r) {
  const Transcript& t = r.transcript;
  EpisodeRow row;
  row.scenario = s.name;
  row.category = std::string(category_name(s.category));
  row.seed = s.seed;
  row.status = std::string(status_name(t.status));
  row.reason = t.reason;
  row.steps = static_cast<int>(t.steps.size());
  for (const auto& i : t.instructions) row.instruction_steps.push_back(i.steps);
  row.reasoner_calls = t.reasoner_calls;
  const OdrResult o = odr(t, t.object_count);
  row.odr_final = o.final_value;
  row.odr_series = o.series;

  std::vector<std::string> discovered;
  if (!t.steps.empty())
    for (const auto& id : t.steps.back().discovered)
      if (r.world.find(id)) discovered.push_back(id);
  const GedResult g = graph_edit_distance(known_subgraph(r.memory.graph), ground_truth_graph(r.world, discovered));
  row.ged = g.distance;
  row.ged_exact = g.exact;
  return row;
}

MetricsReport evaluate(const std::vector<Scenario>& suite, const std::string& reasoner_spec, const EvalConfig& cfg) {
  std::vector<EpisodeRow> rows(suite.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < suite.size(); i = next++) {
      try {
        auto reasoner = make_reasoner(reasoner_spec);
        rows[i] = episode_row(suite[i], run_with(suite[i], *reasoner, cfg));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  unsigned n = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n = std::min<unsigned>(n, static_cast<unsigned>(std::max<std::size_t>(suite.size(), 1)));
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return aggregate(std::move(rows));
}

}  // namespace retriever
