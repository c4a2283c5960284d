#include "stylebc/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "stylebc/checksum.hpp"
#include "stylebc/error.hpp"
#include "stylebc/svg.hpp"

namespace stylebc {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace paths {
fs::path dataset(const RunConfig& cfg) { return fs::path(cfg.out) / "dataset.sbds"; }
fs::path manifest(const RunConfig& cfg) { return fs::path(cfg.out) / "dataset.manifest.json"; }
fs::path estimator_stem(const RunConfig& cfg, std::size_t run) {
  return fs::path(cfg.out) / "mine" / fmt::format("run{}", run) / "estimator";
}
fs::path mi_curve(const RunConfig& cfg, std::size_t run) {
  return fs::path(cfg.out) / "mine" / fmt::format("run{}", run) / "mi_curve.csv";
}
fs::path policy_stem(const RunConfig& cfg, std::size_t run, const std::string& variant) {
  return fs::path(cfg.out) / "policies" / fmt::format("run{}", run) / variant;
}
fs::path metrics_csv(const RunConfig& cfg) { return fs::path(cfg.out) / "metrics.csv"; }
fs::path report_json(const RunConfig& cfg) { return fs::path(cfg.out) / "report.json"; }
fs::path summary(const RunConfig& cfg) { return fs::path(cfg.out) / "summary.md"; }
fs::path plots(const RunConfig& cfg) { return fs::path(cfg.out) / "plots"; }
}  // namespace paths

namespace {

fs::path with_ext(fs::path stem, const char* ext) {
  stem += ext;
  return stem;
}

void logf(const StageOptions& opt, const std::string& line) {
  if (opt.log) *opt.log << line << '\n' << std::flush;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create directory {}: {}", dir.string(), ec.message()));
}

void refuse_overwrite(const fs::path& p, const StageOptions& opt) {
  if (!opt.force && fs::exists(p)) throw UsageError(fmt::format("{} already exists; pass --force to overwrite", p.string()));
}

void write_text(const fs::path& p, const std::string& text) {
  ensure_dir(p.parent_path());
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + p.string() + " for writing");
  os << text;
  if (!os) throw IoError("write failed for " + p.string());
}

std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ojson read_json(const fs::path& p) {
  ojson j = ojson::parse(read_text(p), nullptr, false);
  if (j.is_discarded()) throw FormatError(p.string() + " is not valid JSON");
  return j;
}

/// Loads the dataset and checks it against the checksum recorded by gen.
std::pair<StyleDataset, std::string> load_checked_dataset(const RunConfig& cfg) {
  const auto path = paths::dataset(cfg);
  if (!fs::exists(path)) throw IoError(fmt::format("{} not found; run `stylebc gen` first", path.string()));
  const auto sha = sha256_file(path);
  if (fs::exists(paths::manifest(cfg))) {
    const auto m = read_json(paths::manifest(cfg));
    if (m.value("sha256", std::string{}) != sha) {
      throw FormatError(fmt::format("{} does not match the checksum in its manifest", path.string()));
    }
  }
  auto ds = load_dataset(path);
  if (ds.num_styles() != cfg.env.headings_deg.size()) {
    throw UsageError(fmt::format("dataset has K = {} but the config defines {} styles", ds.num_styles(),
                                 cfg.env.headings_deg.size()));
  }
  return {std::move(ds), sha};
}

/// Hash of all files belonging to a policy checkpoint, in listing order.
std::string policy_checksum(const fs::path& stem) {
  const auto side = read_json(with_ext(stem, ".json"));
  std::string cat = sha256_file(with_ext(stem, ".json"));
  for (const auto& f : side.at("nets")) cat += sha256_file(stem.parent_path() / f.get<std::string>());
  return sha256_hex(cat);
}

ojson policy_settings_json(const PolicySettings& p) {
  RunConfig tmp;
  tmp.policies = {{"x", p}};
  return to_json(tmp)["policies"]["x"];
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

void cmd_gen(const RunConfig& cfg, const StageOptions& opt) {
  refuse_overwrite(paths::dataset(cfg), opt);
  ensure_dir(cfg.out);
  save_config(fs::path(cfg.out) / "config.json", cfg);
  const auto env = env_config(cfg);
  const auto noise = dataset_noise(cfg);
  StyleDataset ds(circle2d::generate_demos(env.styles, cfg.dataset.episodes_per_style, noise, env.speed, cfg.threads),
                  static_cast<std::uint32_t>(env.styles.size()));
  save_dataset(paths::dataset(cfg), ds);
  const auto sha = sha256_file(paths::dataset(cfg));
  ojson m = {{"dataset", paths::dataset(cfg).filename().string()},
             {"format_version", kDatasetFormatVersion},
             {"sha256", sha},
             {"K", ds.num_styles()},
             {"episodes_per_style", cfg.dataset.episodes_per_style},
             {"trajectories", ds.trajectories().size()},
             {"samples", ds.size()},
             {"samples_per_style", ds.style_counts()},
             {"prior", style_prior(ds)},
             {"master_seed", cfg.seed},
             {"noise_seed", noise.seed}};
  write_text(paths::manifest(cfg), m.dump(2) + "\n");
  logf(opt, fmt::format("gen: {} samples, {} trajectories -> {}", ds.size(), ds.trajectories().size(),
                        paths::dataset(cfg).string()));
}

void cmd_train_mine(const RunConfig& cfg, const StageOptions& opt) {
  const auto [ds, ds_sha] = load_checked_dataset(cfg);
  for (std::size_t r = 0; r < cfg.eval.seeds; ++r) {
    const auto stem = paths::estimator_stem(cfg, r);
    refuse_overwrite(with_ext(stem, ".sbnn"), opt);
    ensure_dir(stem.parent_path());
    const auto mc = mine_config(cfg, r);
    const auto est = train_mine(ds, mc);
    ojson extra = {{"dataset_sha256", ds_sha}, {"run", r}, {"seed", mc.seed}};
    save_estimator(stem, est, extra.dump());
    std::string csv = "iteration,bound\n";
    for (std::size_t i = 0; i < est.mi_history.size(); ++i) csv += fmt::format("{},{:.9g}\n", i, est.mi_history[i]);
    write_text(paths::mi_curve(cfg, r), csv);
    const std::size_t tail = std::min<std::size_t>(100, est.mi_history.size());
    double avg = 0.0;
    for (std::size_t i = est.mi_history.size() - tail; i < est.mi_history.size(); ++i) avg += est.mi_history[i];
    logf(opt, fmt::format("train-mine run {}: bound over the last {} iterations {:.4f} (ln K = {:.4f})", r, tail,
                          avg / static_cast<double>(tail), std::log(static_cast<double>(ds.num_styles()))));
  }
}

void cmd_train_policy(const RunConfig& cfg, const StageOptions& opt) {
  if (opt.variant) cfg.policy(*opt.variant);  // unknown variant -> usage error before any work
  // Check every prerequisite before training anything.
  for (std::size_t r = 0; r < cfg.eval.seeds; ++r) {
    for (const auto& [name, ps] : cfg.policies) {
      if (opt.variant && *opt.variant != name) continue;
      refuse_overwrite(with_ext(paths::policy_stem(cfg, r, name), ".json"), opt);
      if (policy_mode_from_string(ps.mode) == PolicyMode::bc_pmi &&
          !fs::exists(with_ext(paths::estimator_stem(cfg, r), ".sbnn"))) {
        throw UsageError(fmt::format("policy '{}' (bc_pmi) needs a trained estimator at {}; run train-mine first", name,
                                     with_ext(paths::estimator_stem(cfg, r), ".sbnn").string()));
      }
    }
  }
  const auto [ds, ds_sha] = load_checked_dataset(cfg);
  for (std::size_t r = 0; r < cfg.eval.seeds; ++r) {
    std::map<double, std::vector<double>> weight_cache;  // keyed by w_max
    std::optional<MineEstimator> est;
    std::string est_sha;
    for (const auto& [name, ps] : cfg.policies) {
      if (opt.variant && *opt.variant != name) continue;
      const auto mode = policy_mode_from_string(ps.mode);
      const auto pc = policy_config(cfg, name, r);
      ojson side = {{"variant", name},
                    {"run", r},
                    {"seed", pc.seed},
                    {"training_config", policy_settings_json(ps)},
                    {"dataset_sha256", ds_sha}};
      TrainLog log;
      Policy policy;
      Stopwatch sw;
      switch (mode) {
        case PolicyMode::bc:
          policy = train_bc(ds, pc, &log);
          break;
        case PolicyMode::cond_bc:
          policy = train_cond_bc(ds, pc, &log);
          break;
        case PolicyMode::cbc_separate:
          policy = train_cbc_separate(ds, pc);
          break;
        case PolicyMode::bc_pmi: {
          if (!est) {
            const auto stem = paths::estimator_stem(cfg, r);
            est = load_estimator(stem);
            est_sha = sha256_hex(sha256_file(with_ext(stem, ".sbnn")) + sha256_file(with_ext(stem, ".json")));
          }
          if (est->num_styles != ds.num_styles()) {
            throw UsageError(fmt::format("estimator for run {} has K = {} but the dataset has K = {}", r,
                                         est->num_styles, ds.num_styles()));
          }
          auto it = weight_cache.find(pc.w_max);
          if (it == weight_cache.end()) {
            it = weight_cache.emplace(pc.w_max, precompute_weights(*est, ds, pc.w_max, cfg.threads)).first;
          }
          policy = train_bc_pmi(ds, it->second, pc, &log);
          side["estimator_sha256"] = est_sha;
          break;
        }
      }
      if (!log.epoch_loss.empty()) side["epoch_loss"] = log.epoch_loss;
      ensure_dir(paths::policy_stem(cfg, r, name).parent_path());
      save_policy(paths::policy_stem(cfg, r, name), policy, side.dump());
      logf(opt, fmt::format("train-policy run {} {}: {:.1f}s", r, name, sw.seconds()));
    }
  }
}

MetricTable cmd_eval(const RunConfig& cfg, const StageOptions& opt) {
  refuse_overwrite(paths::metrics_csv(cfg), opt);
  const auto env = env_config(cfg);
  ReportConfig rc;
  rc.env = env;
  rc.episodes = cfg.eval.episodes;
  rc.kl = kl_config(cfg);
  rc.threads = cfg.threads;
  for (std::size_t r = 0; r < cfg.eval.seeds; ++r) rc.seeds.push_back(eval_seed(cfg, r));

  std::vector<PolicyUnderTest> pols;
  ojson checks = ojson::object();
  for (const auto& [name, ps] : cfg.policies) {
    PolicyUnderTest put{name, {}};
    auto arr = ojson::array();
    for (std::size_t r = 0; r < cfg.eval.seeds; ++r) {
      const auto stem = paths::policy_stem(cfg, r, name);
      if (!fs::exists(with_ext(stem, ".json"))) {
        throw IoError(fmt::format("{} not found; run train-policy first", with_ext(stem, ".json").string()));
      }
      auto p = std::make_shared<const Policy>(load_policy(stem));
      if (p->num_styles() != env.styles.size()) {
        throw UsageError(fmt::format("policy {} has K = {} but the config defines {} styles", stem.string(),
                                     p->num_styles(), env.styles.size()));
      }
      put.per_seed.push_back(policy_actor(p, cfg.eval.greedy));
      arr.push_back(policy_checksum(stem));
    }
    checks[name] = arr;
    pols.push_back(std::move(put));
  }
  pols.push_back({"expert", std::vector<Actor>(cfg.eval.seeds, expert_actor(env.styles, env.noise))});

  const auto table = build_report(pols, rc, circle2d_quadrant_label(env.styles));
  std::ostringstream csv;
  write_csv(csv, table);
  write_text(paths::metrics_csv(cfg), csv.str());
  ojson report = {{"experiment", cfg.experiment},
                  {"master_seed", cfg.seed},
                  {"seeds", cfg.eval.seeds},
                  {"episodes", cfg.eval.episodes},
                  {"dataset_sha256", fs::exists(paths::dataset(cfg)) ? sha256_file(paths::dataset(cfg)) : ""},
                  {"policy_sha256", checks},
                  {"table", to_json(table)}};
  write_text(paths::report_json(cfg), report.dump(1) + "\n");
  logf(opt, fmt::format("eval: {} cells -> {}", table.cells.size(), paths::metrics_csv(cfg).string()));
  return table;
}

void cmd_plot(const RunConfig& cfg, const StageOptions& opt) {
  const auto dir = paths::plots(cfg);
  refuse_overwrite(dir / "expert.svg", opt);
  const auto env = env_config(cfg);
  const auto& colors = style_colors();
  auto clean_bundle = [&] {
    PathBundle b{"noise-free expert", "#000000", {}, 0.9, 1.2};
    for (const auto& s : env.styles) {
      b.paths.push_back(circle2d::expert_episode(s, 0, circle2d::NoiseConfig::none(), env.speed).positions());
    }
    return b;
  };
  constexpr std::size_t kPlotEpisodes = 20;
  auto bundles_for = [&](const Actor& actor, const std::string& tag) {
    std::vector<PathBundle> out;
    for (std::uint32_t z = 0; z < env.styles.size(); ++z) {
      const auto set = rollout(actor, env, z, kPlotEpisodes, derive_seed(eval_seed(cfg, 0), "plot"), tag, cfg.threads);
      PathBundle b{fmt::format("style {}", z + 1), colors[z % colors.size()], {}};
      for (const auto& t : set.trajectories) b.paths.push_back(t.positions());
      out.push_back(std::move(b));
    }
    out.push_back(clean_bundle());
    return out;
  };

  std::vector<std::pair<fs::path, std::string>> files;
  files.emplace_back(dir / "expert.svg", trajectories_svg({clean_bundle()}, "Expert (without noise)"));
  files.emplace_back(dir / "expert_noisy.svg",
                     trajectories_svg(bundles_for(expert_actor(env.styles, env.noise), "expert"), "Expert (noisy)"));
  for (const auto& [name, ps] : cfg.policies) {
    const auto stem = paths::policy_stem(cfg, 0, name);
    if (!fs::exists(with_ext(stem, ".json"))) continue;
    auto p = std::make_shared<const Policy>(load_policy(stem));
    files.emplace_back(dir / (name + ".svg"), trajectories_svg(bundles_for(policy_actor(p, cfg.eval.greedy), name), name));
  }
  if (fs::exists(paths::mi_curve(cfg, 0))) {
    std::istringstream is(read_text(paths::mi_curve(cfg, 0)));
    std::string line;
    std::getline(is, line);  // header
    std::vector<double> v;
    while (std::getline(is, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw FormatError("malformed mi_curve.csv line: " + line);
      v.push_back(std::stod(line.substr(comma + 1)));
    }
    files.emplace_back(dir / "mi_curve.svg", curve_svg(v, "MINE lower bound during training", "DV bound (nats)"));
  }
  // Everything is rendered before the first write, so a failure leaves no partial output.
  for (const auto& [path, text] : files) write_text(path, text);
  logf(opt, fmt::format("plot: {} files -> {}", files.size(), dir.string()));
}

MetricTable cmd_repro(const RunConfig& cfg, const StageOptions& opt) {
  ojson timings = ojson::object();
  Stopwatch total;
  auto timed = [&](const char* stage, auto&& fn) {
    Stopwatch sw;
    fn();
    timings[stage] = sw.seconds();
    logf(opt, fmt::format("[{}] {:.1f}s", stage, sw.seconds()));
  };
  MetricTable table;
  timed("gen", [&] { cmd_gen(cfg, opt); });
  timed("train-mine", [&] { cmd_train_mine(cfg, opt); });
  timed("train-policy", [&] { cmd_train_policy(cfg, opt); });
  timed("eval", [&] { table = cmd_eval(cfg, opt); });
  timed("plot", [&] { cmd_plot(cfg, opt); });
  write_text(paths::summary(cfg), summary_markdown(table, fmt::format("{} (master seed {})", cfg.experiment, cfg.seed)));
  timings["total"] = total.seconds();
  write_text(fs::path(cfg.out) / "timings.json", timings.dump(2) + "\n");
  return table;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Style-conditioned imitation with PMI-weighted behavioral cloning"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out_dir;
  std::vector<std::string> sets;
  bool force = false;
  std::optional<std::string> variant;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--seed", seed, "master seed");
    sub->add_flag("--force", force, "overwrite existing outputs");
    sub->add_option("--threads", threads, "worker threads (1 keeps results independent of scheduling)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--set", sets, "override a config field, e.g. --set mine.iterations=500");
  };
  std::map<std::string, CLI::App*> subs;
  for (const char* name : {"gen", "train-mine", "train-policy", "eval", "plot", "repro"}) {
    subs[name] = app.add_subcommand(name);
    add_common(subs[name]);
  }
  subs["gen"]->description("generate the demonstration dataset");
  subs["train-mine"]->description("train one MINE estimator per evaluation seed");
  subs["train-policy"]->description("train every policy variant for every evaluation seed");
  subs["train-policy"]->add_option("--policy", variant, "train only this variant");
  subs["eval"]->description("roll out all policies and write metrics.csv and report.json");
  subs["plot"]->description("write trajectory and MI-curve SVGs");
  subs["repro"]->description("run every stage and write summary.md");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    ojson j = config_path.empty() ? to_json(RunConfig{}) : to_json(load_config(config_path));
    for (const auto& s : sets) apply_override(j, s);
    if (seed) j["seed"] = *seed;
    if (threads) j["threads"] = *threads;
    if (out_dir) j["out"] = *out_dir;
    const RunConfig cfg = config_from_json(j);
    StageOptions opt{force, variant, &err};
    if (subs["gen"]->parsed()) cmd_gen(cfg, opt);
    if (subs["train-mine"]->parsed()) cmd_train_mine(cfg, opt);
    if (subs["train-policy"]->parsed()) cmd_train_policy(cfg, opt);
    if (subs["eval"]->parsed()) cmd_eval(cfg, opt);
    if (subs["plot"]->parsed()) cmd_plot(cfg, opt);
    if (subs["repro"]->parsed()) {
      cmd_repro(cfg, opt);
      out << read_text(paths::summary(cfg));
    }
    return 0;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    err << "I/O failure: " << e.what() << '\n';
    return 4;
  } catch (const Error& e) {
    // Shape, label-range and empty-dataset errors all stem from inconsistent inputs.
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace stylebc
