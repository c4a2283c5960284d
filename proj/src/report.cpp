#include "stylebc/report.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "stylebc/error.hpp"
#include "stylebc/parallel.hpp"

namespace stylebc {

const MetricCell* MetricTable::find(const std::string& policy, std::uint32_t style, const std::string& metric) const {
  for (const auto& c : cells) {
    if (c.policy == policy && c.style == style && c.metric == metric) return &c;
  }
  return nullptr;
}

std::vector<std::string> MetricTable::policies() const {
  std::vector<std::string> out;
  for (const auto& c : cells) {
    if (std::find(out.begin(), out.end(), c.policy) == out.end()) out.push_back(c.policy);
  }
  return out;
}

std::uint32_t MetricTable::num_styles() const {
  std::uint32_t k = 0;
  for (const auto& c : cells) k = std::max(k, c.style + 1);
  return k;
}

void write_csv(std::ostream& os, const MetricTable& table) {
  os << "policy,style,metric,mean,std,seeds,episodes\n";
  for (const auto& c : table.cells) {
    os << fmt::format("{},{},{},{:.9g},{:.9g},{},{}\n", c.policy, c.style, c.metric, c.mean, c.std, c.seeds,
                      c.episodes);
  }
}

nlohmann::ordered_json to_json(const MetricTable& table) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : table.cells) {
    arr.push_back({{"policy", c.policy},
                   {"style", c.style},
                   {"metric", c.metric},
                   {"mean", c.mean},
                   {"std", c.std},
                   {"seeds", c.seeds},
                   {"episodes", c.episodes},
                   {"per_seed", c.per_seed}});
  }
  return {{"cells", arr}};
}

MetricTable table_from_json(const nlohmann::ordered_json& j) {
  MetricTable t;
  try {
    for (const auto& c : j.at("cells")) {
      t.cells.push_back({c.at("policy").get<std::string>(), c.at("style").get<std::uint32_t>(),
                         c.at("metric").get<std::string>(), c.at("mean").get<double>(), c.at("std").get<double>(),
                         c.at("seeds").get<std::size_t>(), c.at("episodes").get<std::size_t>(),
                         c.at("per_seed").get<std::vector<double>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed metric report: ") + e.what());
  }
  return t;
}

namespace {

void summarize(MetricCell& c) {
  const double n = static_cast<double>(c.per_seed.size());
  double sum = 0.0;
  for (double v : c.per_seed) sum += v;
  c.mean = sum / n;
  double ss = 0.0;
  for (double v : c.per_seed) ss += (v - c.mean) * (v - c.mean);
  c.std = c.per_seed.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  c.seeds = c.per_seed.size();
}

}  // namespace

MetricTable build_report(const std::vector<PolicyUnderTest>& policies, const ReportConfig& cfg,
                         const LabelingFn& label) {
  if (cfg.seeds.empty()) throw UsageError("build_report: at least one seed is required");
  const auto k = static_cast<std::uint32_t>(cfg.env.styles.size());
  for (const auto& p : policies) {
    if (p.per_seed.size() != cfg.seeds.size()) {
      throw UsageError(fmt::format("build_report: policy '{}' has {} actors for {} seeds", p.tag, p.per_seed.size(),
                                   cfg.seeds.size()));
    }
  }
  MetricTable table;
  for (const auto& p : policies) {
    for (std::uint32_t z = 0; z < k; ++z) {
      for (const auto& m : kMetricNames) table.cells.push_back({p.tag, z, m, 0.0, 0.0, 0, cfg.episodes, {}});
    }
  }
  const Actor expert = expert_actor(cfg.env.styles, cfg.env.noise);
  for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
    for (std::uint32_t z = 0; z < k; ++z) {
      const auto reference =
          rollout(expert, cfg.env, z, cfg.episodes, derive_seed(cfg.seeds[s], "reference"), "reference", cfg.threads);
      const auto clean =
          circle2d::expert_episode(cfg.env.styles[z], 0, circle2d::NoiseConfig::none(), cfg.env.speed).positions();
      for (std::size_t pi = 0; pi < policies.size(); ++pi) {
        const auto& p = policies[pi];
        const auto set = rollout(p.per_seed[s], cfg.env, z, cfg.episodes, derive_seed(cfg.seeds[s], "policy-rollout"),
                                 p.tag, cfg.threads);
        std::vector<double> d(set.trajectories.size()), ed(set.trajectories.size());
        parallel_for(set.trajectories.size(), cfg.threads, [&](std::size_t e) {
          const auto pos = set.trajectories[e].positions();
          d[e] = dtw(pos, clean);
          ed[e] = euclid_dist(pos, clean);
        });
        double dsum = 0.0, esum = 0.0;
        for (std::size_t e = 0; e < d.size(); ++e) {
          dsum += d[e];
          esum += ed[e];
        }
        const double n = static_cast<double>(d.size());
        const std::size_t base = (pi * k + z) * kMetricNames.size();
        table.cells[base + 0].per_seed.push_back(dsum / n);
        table.cells[base + 1].per_seed.push_back(esum / n);
        table.cells[base + 2].per_seed.push_back(kl_state_action(set.trajectories, reference.trajectories, cfg.kl));
        table.cells[base + 3].per_seed.push_back(calibration(set, label));
      }
    }
  }
  for (auto& c : table.cells) summarize(c);
  return table;
}

std::string summary_markdown(const MetricTable& table, const std::string& title) {
  const auto pols = table.policies();
  std::string out = fmt::format("# {}\n\n| Style | Metric |", title);
  for (const auto& p : pols) out += fmt::format(" {} |", p);
  out += "\n|---|---|";
  for (std::size_t i = 0; i < pols.size(); ++i) out += "---|";
  out += "\n";
  for (std::uint32_t z = 0; z < table.num_styles(); ++z) {
    for (const auto& m : kMetricNames) {
      out += fmt::format("| Class {} | {} |", z + 1, m);
      for (const auto& p : pols) {
        const auto* c = table.find(p, z, m);
        out += c ? fmt::format(" {:.3f} ± {:.3f} |", c->mean, c->std) : std::string(" - |");
      }
      out += "\n";
    }
  }
  if (!table.cells.empty()) {
    out += fmt::format("\nMean ± sample std over {} seeds, {} evaluation episodes per cell.\n",
                       table.cells.front().seeds, table.cells.front().episodes);
  }
  return out;
}

}  // namespace stylebc
