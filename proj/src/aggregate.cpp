#include "nellcom/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "nellcom/errors.hpp"

namespace nellcom {

namespace fs = std::filesystem;

const MetricStats& AggregateResult::at(const std::string& phase, int epoch,
                                       const std::string& metric) const {
  const auto p = stats.find(phase);
  if (p == stats.end()) throw DataError("aggregate: unknown phase " + phase);
  const auto e = p->second.find(epoch);
  if (e == p->second.end())
    throw DataError("aggregate: no epoch " + std::to_string(epoch) + " in phase " + phase);
  const auto m = e->second.find(metric);
  if (m == e->second.end()) throw DataError("aggregate: unknown metric " + metric);
  return m->second;
}

AggregateResult aggregate(const std::vector<RunArtifacts>& runs) {
  if (runs.empty()) throw DataError("aggregate: no runs");
  AggregateResult agg;
  agg.grammar = runs.front().config.grammar;
  agg.n_runs = runs.size();
  for (const RunArtifacts& run : runs) {
    if (run.config.grammar != agg.grammar)
      throw DataError("aggregate: mixed grammars ('" + agg.grammar + "' vs '" +
                      run.config.grammar + "')");
  }

  // Key skeleton from the first run; every other run must match exactly so a
  // missing epoch is an error rather than a silently skewed mean.
  const auto& ref_records = runs.front().trajectory.records;
  for (const EpochRecord& rec : ref_records) agg.epochs.emplace_back(rec.phase, rec.epoch);
  for (const RunArtifacts& run : runs) {
    const auto& records = run.trajectory.records;
    if (records.size() != ref_records.size())
      throw DataError("aggregate: run '" + run.dir.string() + "' has a different epoch count");
    for (size_t i = 0; i < records.size(); ++i) {
      if (records[i].phase != ref_records[i].phase || records[i].epoch != ref_records[i].epoch)
        throw DataError("aggregate: run '" + run.dir.string() + "' is missing " +
                        ref_records[i].phase + " epoch " +
                        std::to_string(ref_records[i].epoch));
      if (records[i].metrics.size() != ref_records[i].metrics.size())
        throw DataError("aggregate: run '" + run.dir.string() + "' records different metrics");
    }
  }

  for (size_t i = 0; i < ref_records.size(); ++i) {
    const std::string& phase = ref_records[i].phase;
    const int epoch = ref_records[i].epoch;
    for (size_t k = 0; k < ref_records[i].metrics.size(); ++k) {
      const std::string& name = ref_records[i].metrics[k].first;
      double sum = 0.0, sumsq = 0.0;
      size_t n = 0;
      for (const RunArtifacts& run : runs) {
        const auto& kv = run.trajectory.records[i].metrics[k];
        if (kv.first != name)
          throw DataError("aggregate: metric order mismatch in '" + run.dir.string() + "'");
        if (!std::isnan(kv.second)) {
          sum += kv.second;
          sumsq += kv.second * kv.second;
          ++n;
        }
      }
      MetricStats st;
      st.n = n;
      if (n == 0) {
        st.mean = std::numeric_limits<double>::quiet_NaN();
        st.sd = std::numeric_limits<double>::quiet_NaN();
      } else {
        st.mean = sum / static_cast<double>(n);
        st.sd = n < 2 ? 0.0
                      : std::sqrt(std::max(0.0, (sumsq - sum * sum / static_cast<double>(n)) /
                                                    static_cast<double>(n - 1)));
      }
      agg.stats[phase][epoch][name] = st;
    }
  }

  const auto json_number = [](const nlohmann::json& j) {
    // NaN metrics serialize as null; carry them back as NaN.
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
  };
  for (const RunArtifacts& run : runs) {
    SeedPoint pt;
    pt.seed_index = run.summary.value("seed_index", 0);
    const auto& tr = run.summary.at("tradeoff");
    pt.h = json_number(tr.at("h"));
    pt.e = json_number(tr.at("e"));
    agg.final_points.push_back(pt);
  }
  std::sort(agg.final_points.begin(), agg.final_points.end(),
            [](const SeedPoint& a, const SeedPoint& b) { return a.seed_index < b.seed_index; });

  const auto& init = runs.front().summary.at("initial_tradeoff");
  agg.initial_h = init.at("h").get<double>();
  agg.initial_e = init.at("e").get<double>();
  return agg;
}

std::vector<AggregateResult> aggregate_by_grammar(const std::vector<RunArtifacts>& runs) {
  std::map<std::string, std::vector<RunArtifacts>> groups;
  for (const RunArtifacts& run : runs) groups[run.config.grammar].push_back(run);
  std::vector<AggregateResult> out;
  for (auto& [grammar, group] : groups) {
    std::sort(group.begin(), group.end(), [](const RunArtifacts& a, const RunArtifacts& b) {
      return a.dir < b.dir;
    });
    out.push_back(aggregate(group));
  }
  return out;
}

fs::path analyze_runs(const fs::path& root, const fs::path& out_dir) {
  const std::vector<fs::path> dirs = find_run_dirs(root);
  if (dirs.empty()) throw DataError("no completed runs under '" + root.string() + "'");
  std::vector<RunArtifacts> runs;
  runs.reserve(dirs.size());
  for (const fs::path& d : dirs) runs.push_back(load_run(d));

  const std::vector<AggregateResult> aggs = aggregate_by_grammar(runs);
  fs::create_directories(out_dir);

  nlohmann::json report;
  std::ofstream tradeoff(out_dir / "tradeoff.csv", std::ios::binary);
  if (!tradeoff) throw DataError("cannot write tradeoff.csv");
  tradeoff << "grammar,kind,seed,h,e\n";

  for (const AggregateResult& agg : aggs) {
    const fs::path gdir = out_dir / agg.grammar;
    fs::create_directories(gdir);
    std::ofstream csv(gdir / "metrics_mean.csv", std::ios::binary);
    if (!csv) throw DataError("cannot write metrics_mean.csv");
    csv << "phase,epoch,metric,mean,sd,n\n";
    for (const auto& [phase, epoch] : agg.epochs) {
      for (const auto& [metric, st] : agg.stats.at(phase).at(epoch)) {
        csv << phase << ',' << epoch << ',' << metric << ',' << format_double(st.mean) << ','
            << format_double(st.sd) << ',' << st.n << '\n';
      }
    }

    tradeoff << agg.grammar << ",initial,-1," << format_double(agg.initial_h) << ','
             << format_double(agg.initial_e) << '\n';
    double h_sum = 0.0, e_sum = 0.0;
    size_t n_defined = 0;
    nlohmann::json per_seed = nlohmann::json::array();
    for (const SeedPoint& pt : agg.final_points) {
      tradeoff << agg.grammar << ",pair," << pt.seed_index << ',' << format_double(pt.h) << ','
               << format_double(pt.e) << '\n';
      per_seed.push_back({{"seed", pt.seed_index}, {"h", pt.h}, {"e", pt.e}});
      if (!std::isnan(pt.h) && !std::isnan(pt.e)) {
        h_sum += pt.h;
        e_sum += pt.e;
        ++n_defined;
      }
    }
    const double inv = n_defined > 0 ? 1.0 / static_cast<double>(n_defined)
                                     : std::numeric_limits<double>::quiet_NaN();
    report[agg.grammar] = {{"n_runs", agg.n_runs},
                           {"initial", {{"h", agg.initial_h}, {"e", agg.initial_e}}},
                           {"final_mean", {{"h", h_sum * inv}, {"e", e_sum * inv}}},
                           {"per_seed", per_seed}};
  }

  std::ofstream jf(out_dir / "aggregate.json", std::ios::binary);
  if (!jf) throw DataError("cannot write aggregate.json");
  jf << report.dump(2) << '\n';
  return out_dir;
}

}  // namespace nellcom
