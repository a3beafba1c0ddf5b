#include "retriever/harness/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <sstream>

namespace retriever {

using json = nlohmann::json;

OdrResult odr(const Transcript& t, std::size_t object_count) {
  OdrResult r;
  if (object_count == 0) return r;
  std::set<std::string> seen;
  for (const auto& s : t.steps) {
    for (const auto& d : s.detections) seen.insert(d.truth_id);
    r.series.push_back(static_cast<double>(std::min(seen.size(), object_count)) / static_cast<double>(object_count));
  }
  r.final_value = r.series.empty() ? 0.0 : r.series.back();
  return r;
}

MetricsReport aggregate(std::vector<EpisodeRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const EpisodeRow& a, const EpisodeRow& b) {
    return std::tie(a.category, a.seed, a.scenario) < std::tie(b.category, b.seed, b.scenario);
  });
  MetricsReport rep;
  rep.rows = std::move(rows);
  if (rep.rows.empty()) return rep;

  std::map<std::string, CategoryStats> cats;
  std::size_t longest = 0;
  int successes = 0;
  for (const auto& r : rep.rows) {
    auto& c = cats[r.category];
    c.category = r.category;
    ++c.episodes;
    const bool ok = r.status == "Success";
    c.successes += ok;
    successes += ok;
    c.mean_odr += r.odr_final;
    c.mean_rollout_length += r.steps;
    c.mean_ged += r.ged;
    rep.mean_odr += r.odr_final;
    rep.mean_rollout_length += r.steps;
    rep.mean_ged += r.ged;
    rep.ged_exact = rep.ged_exact && r.ged_exact;
    longest = std::max(longest, r.odr_series.size());
  }
  for (auto& [name, c] : cats) {
    c.success_rate = static_cast<double>(c.successes) / c.episodes;
    c.mean_odr /= c.episodes;
    c.mean_rollout_length /= c.episodes;
    c.mean_ged /= c.episodes;
    rep.categories.push_back(c);
  }
  const double n = static_cast<double>(rep.rows.size());
  rep.success_rate = successes / n;
  rep.mean_odr /= n;
  rep.mean_rollout_length /= n;
  rep.mean_ged /= n;

  rep.mean_odr_series.assign(longest, 0.0);
  for (const auto& r : rep.rows)
    for (std::size_t i = 0; i < longest; ++i)
      rep.mean_odr_series[i] += (r.odr_series.empty() ? 0.0 : r.odr_series[std::min(i, r.odr_series.size() - 1)]) / n;
  return rep;
}

json report_json(const MetricsReport& r) {
  json rows = json::array();
  for (const auto& e : r.rows)
    rows.push_back({{"scenario", e.scenario},
                    {"category", e.category},
                    {"seed", e.seed},
                    {"status", e.status},
                    {"reason", e.reason},
                    {"steps", e.steps},
                    {"instruction_steps", e.instruction_steps},
                    {"reasoner_calls", e.reasoner_calls},
                    {"odr_final", e.odr_final},
                    {"odr_series", e.odr_series},
                    {"ged", e.ged},
                    {"ged_exact", e.ged_exact}});
  json cats = json::array();
  for (const auto& c : r.categories)
    cats.push_back({{"category", c.category},
                    {"episodes", c.episodes},
                    {"successes", c.successes},
                    {"success_rate", c.success_rate},
                    {"mean_odr", c.mean_odr},
                    {"mean_rollout_length", c.mean_rollout_length},
                    {"mean_ged", c.mean_ged}});
  return {{"rows", rows},
          {"categories", cats},
          {"success_rate", r.success_rate},
          {"mean_odr", r.mean_odr},
          {"mean_rollout_length", r.mean_rollout_length},
          {"mean_ged", r.mean_ged},
          {"ged_exact", r.ged_exact},
          {"mean_odr_series", r.mean_odr_series}};
}

std::string report_csv(const MetricsReport& r) {
  std::ostringstream out;
  out << "scenario,category,seed,status,reason,steps,reasoner_calls,odr_final,ged,ged_exact\n";
  for (const auto& e : r.rows)
    out << e.scenario << ',' << e.category << ',' << e.seed << ',' << e.status << ",\"" << e.reason << "\","
        << e.steps << ',' << e.reasoner_calls << ',' << e.odr_final << ',' << e.ged << ',' << (e.ged_exact ? 1 : 0)
        << '\n';
  return out.str();
}

std::string odr_csv(const MetricsReport& r) {
  std::ostringstream out;
  out << "scenario,step,odr\n";
  for (const auto& e : r.rows)
    for (std::size_t i = 0; i < e.odr_series.size(); ++i) out << e.scenario << ',' << i << ',' << e.odr_series[i] << '\n';
  return out.str();
}

}  // namespace retriever
