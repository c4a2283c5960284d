#include "stylebc/config.hpp"

#include <fstream>
#include <numbers>
#include <set>

#include <fmt/format.h>

#include "stylebc/error.hpp"

namespace stylebc {

using ojson = nlohmann::ordered_json;

std::vector<std::pair<std::string, PolicySettings>> RunConfig::default_policies() {
  PolicySettings bc;
  bc.mode = "bc";
  PolicySettings cond;
  cond.mode = "cond_bc";
  PolicySettings sep;
  sep.mode = "cbc_separate";
  PolicySettings pmi;
  pmi.mode = "bc_pmi";
  PolicySettings pmi_b = pmi;
  pmi_b.use_baseline = true;
  return {{"bc", bc}, {"cond_bc", cond}, {"cbc_separate", sep}, {"bc_pmi", pmi}, {"bc_pmi_baseline", pmi_b}};
}

const PolicySettings& RunConfig::policy(const std::string& variant) const {
  for (const auto& [name, p] : policies) {
    if (name == variant) return p;
  }
  throw UsageError(fmt::format("no policy variant named '{}' in the config", variant));
}

namespace {

ojson policy_json(const PolicySettings& p) {
  return {{"mode", p.mode},
          {"epochs", p.epochs},
          {"batch", p.batch},
          {"lr", p.lr},
          {"hidden", p.hidden},
          {"hidden_layers", p.hidden_layers},
          {"activation", p.activation},
          {"use_baseline", p.use_baseline},
          {"clip_negative", p.clip_negative},
          {"baseline_decay", p.baseline_decay},
          {"w_max", p.w_max}};
}

/// Reads the keys of one JSON object, rejecting anything not consumed.
class Reader {
 public:
  Reader(const ojson& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw UsageError(fmt::format("config: '{}' must be an object", where_));
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) {
        throw UsageError(fmt::format("config: unknown key '{}{}'", where_.empty() ? "" : where_ + ".", item.key()));
      }
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw UsageError(fmt::format("config: '{}{}' has the wrong type", where_.empty() ? "" : where_ + ".", key));
    }
  }

  const ojson* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const ojson& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

ojson to_json(const RunConfig& cfg) {
  ojson pol = ojson::object();
  for (const auto& [name, p] : cfg.policies) pol[name] = policy_json(p);
  return {{"experiment", cfg.experiment},
          {"seed", cfg.seed},
          {"out", cfg.out},
          {"threads", cfg.threads},
          {"env",
           {{"speed", cfg.env.speed},
            {"headings_deg", cfg.env.headings_deg},
            {"angular_velocity_deg", cfg.env.angular_velocity_deg},
            {"translation_steps", cfg.env.translation_steps},
            {"action_angle_sigma", cfg.env.action_angle_sigma},
            {"position_sigma", cfg.env.position_sigma}}},
          {"dataset", {{"episodes_per_style", cfg.dataset.episodes_per_style}}},
          {"mine",
           {{"iterations", cfg.mine.iterations},
            {"batch", cfg.mine.batch},
            {"lr", cfg.mine.lr},
            {"ema_decay", cfg.mine.ema_decay},
            {"hidden", cfg.mine.hidden},
            {"activation", cfg.mine.activation},
            {"marginal", cfg.mine.marginal}}},
          {"policies", pol},
          {"eval",
           {{"seeds", cfg.eval.seeds},
            {"episodes", cfg.eval.episodes},
            {"grid", cfg.eval.grid},
            {"octants", cfg.eval.octants},
            {"smoothing", cfg.eval.smoothing},
            {"expand", cfg.eval.expand},
            {"greedy", cfg.eval.greedy}}}};
}

RunConfig config_from_json(const ojson& j) {
  RunConfig cfg;
  Reader top(j, "");
  top.get("experiment", cfg.experiment);
  top.get("seed", cfg.seed);
  top.get("out", cfg.out);
  top.get("threads", cfg.threads);
  if (const auto* e = top.child("env")) {
    Reader r(*e, "env");
    r.get("speed", cfg.env.speed);
    r.get("headings_deg", cfg.env.headings_deg);
    r.get("angular_velocity_deg", cfg.env.angular_velocity_deg);
    r.get("translation_steps", cfg.env.translation_steps);
    r.get("action_angle_sigma", cfg.env.action_angle_sigma);
    r.get("position_sigma", cfg.env.position_sigma);
  }
  if (const auto* d = top.child("dataset")) {
    Reader r(*d, "dataset");
    r.get("episodes_per_style", cfg.dataset.episodes_per_style);
  }
  if (const auto* m = top.child("mine")) {
    Reader r(*m, "mine");
    r.get("iterations", cfg.mine.iterations);
    r.get("batch", cfg.mine.batch);
    r.get("lr", cfg.mine.lr);
    r.get("ema_decay", cfg.mine.ema_decay);
    r.get("hidden", cfg.mine.hidden);
    r.get("activation", cfg.mine.activation);
    r.get("marginal", cfg.mine.marginal);
  }
  if (const auto* p = top.child("policies")) {
    if (!p->is_object()) throw UsageError("config: 'policies' must be an object");
    // A policies object replaces the defaults, but each listed variant starts from
    // the default of the same name so partial entries stay short.
    const auto defaults = RunConfig::default_policies();
    cfg.policies.clear();
    for (const auto& item : p->items()) {
      PolicySettings ps;
      for (const auto& [name, d] : defaults) {
        if (name == item.key()) ps = d;
      }
      Reader r(item.value(), "policies." + item.key());
      r.get("mode", ps.mode);
      r.get("epochs", ps.epochs);
      r.get("batch", ps.batch);
      r.get("lr", ps.lr);
      r.get("hidden", ps.hidden);
      r.get("hidden_layers", ps.hidden_layers);
      r.get("activation", ps.activation);
      r.get("use_baseline", ps.use_baseline);
      r.get("clip_negative", ps.clip_negative);
      r.get("baseline_decay", ps.baseline_decay);
      r.get("w_max", ps.w_max);
      cfg.policies.emplace_back(item.key(), ps);
    }
  }
  if (const auto* e = top.child("eval")) {
    Reader r(*e, "eval");
    r.get("seeds", cfg.eval.seeds);
    r.get("episodes", cfg.eval.episodes);
    r.get("grid", cfg.eval.grid);
    r.get("octants", cfg.eval.octants);
    r.get("smoothing", cfg.eval.smoothing);
    r.get("expand", cfg.eval.expand);
    r.get("greedy", cfg.eval.greedy);
  }
  validate(cfg);
  return cfg;
}

void apply_override(ojson& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw UsageError(fmt::format("override '{}' must look like path.to.key=value", assignment));
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  ojson value = ojson::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  ojson* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw UsageError(fmt::format("override '{}' has an empty path component", assignment));
    if (!node->is_object()) throw UsageError(fmt::format("override '{}': '{}' is not an object", assignment, key));
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

void validate(const RunConfig& cfg) {
  const auto& e = cfg.env;
  if (e.headings_deg.size() != e.angular_velocity_deg.size() || e.headings_deg.empty()) {
    throw UsageError("config: env.headings_deg and env.angular_velocity_deg need the same non-zero length");
  }
  if (e.action_angle_sigma < 0.0 || e.position_sigma < 0.0) throw UsageError("config: noise sigmas must be >= 0");
  circle2d::validate_styles(env_config(cfg).styles, e.speed);
  if (cfg.dataset.episodes_per_style == 0) throw UsageError("config: dataset.episodes_per_style must be >= 1");
  if (cfg.mine.iterations == 0 || cfg.mine.batch < 2) throw UsageError("config: mine needs iterations >= 1, batch >= 2");
  activation_from_string(cfg.mine.activation);
  marginal_strategy_from_string(cfg.mine.marginal);
  if (cfg.policies.empty()) throw UsageError("config: at least one policy variant is required");
  std::set<std::string> names;
  for (const auto& [name, p] : cfg.policies) {
    if (name.empty() || name.find_first_of("/\\. ") != std::string::npos) {
      throw UsageError(fmt::format("config: policy variant name '{}' is not a plain file stem", name));
    }
    if (!names.insert(name).second) throw UsageError(fmt::format("config: duplicate policy variant '{}'", name));
    policy_mode_from_string(p.mode);
    activation_from_string(p.activation);
    if (p.epochs < 0 || p.batch == 0 || p.hidden == 0 || p.hidden_layers == 0) {
      throw UsageError(fmt::format("config: policy '{}' needs epochs >= 0 and positive batch/hidden sizes", name));
    }
    if (!(p.w_max > 0.0)) throw UsageError(fmt::format("config: policy '{}' needs w_max > 0", name));
  }
  if (cfg.eval.seeds == 0 || cfg.eval.episodes == 0) throw UsageError("config: eval.seeds and eval.episodes must be >= 1");
  if (cfg.eval.grid == 0 || cfg.eval.octants == 0 || !(cfg.eval.smoothing > 0.0)) {
    throw UsageError("config: eval grid/octants must be positive and smoothing > 0");
  }
  if (cfg.out.empty()) throw UsageError("config: out must name a directory");
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  ojson j = ojson::parse(is, nullptr, false);
  if (j.is_discarded()) throw UsageError("config " + path.string() + " is not valid JSON");
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const RunConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << to_json(cfg).dump(2) << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

EnvConfig env_config(const RunConfig& cfg) {
  EnvConfig env;
  env.speed = cfg.env.speed;
  env.styles.clear();
  constexpr double to_rad = std::numbers::pi / 180.0;
  for (std::size_t i = 0; i < cfg.env.headings_deg.size(); ++i) {
    env.styles.push_back({static_cast<std::uint32_t>(i), cfg.env.headings_deg[i] * to_rad,
                          cfg.env.angular_velocity_deg[i] * to_rad, cfg.env.translation_steps});
  }
  env.noise = {cfg.env.action_angle_sigma, cfg.env.position_sigma, derive_seed(cfg.seed, "rollout-noise")};
  return env;
}

circle2d::NoiseConfig dataset_noise(const RunConfig& cfg) {
  return {cfg.env.action_angle_sigma, cfg.env.position_sigma, derive_seed(cfg.seed, "dataset")};
}

MineConfig mine_config(const RunConfig& cfg, std::size_t run) {
  MineConfig m;
  m.iterations = cfg.mine.iterations;
  m.batch = cfg.mine.batch;
  m.lr = cfg.mine.lr;
  m.ema_decay = cfg.mine.ema_decay;
  m.hidden = cfg.mine.hidden;
  m.activation = activation_from_string(cfg.mine.activation);
  m.marginal = marginal_strategy_from_string(cfg.mine.marginal);
  m.seed = derive_seed(cfg.seed, "mine", run);
  return m;
}

PolicyTrainConfig policy_config(const RunConfig& cfg, const std::string& variant, std::size_t run) {
  const auto& p = cfg.policy(variant);
  PolicyTrainConfig c;
  c.epochs = p.epochs;
  c.batch = p.batch;
  c.lr = p.lr;
  c.hidden = p.hidden;
  c.hidden_layers = p.hidden_layers;
  c.activation = activation_from_string(p.activation);
  c.use_baseline = p.use_baseline;
  c.clip_negative = p.clip_negative;
  c.baseline_decay = p.baseline_decay;
  c.w_max = p.w_max;
  // Same seed for every variant of a run: variants differ only in their objective.
  c.seed = derive_seed(cfg.seed, "policy", run);
  c.threads = cfg.threads;
  return c;
}

KlConfig kl_config(const RunConfig& cfg) {
  return {cfg.eval.grid, cfg.eval.octants, cfg.eval.smoothing, cfg.eval.expand};
}

std::uint64_t eval_seed(const RunConfig& cfg, std::size_t run) { return derive_seed(cfg.seed, "eval", run); }

}  // namespace stylebc
