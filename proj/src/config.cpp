#include "dvdn/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace dvdn {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::iql:
      return "iql";
    case Algorithm::vdn:
      return "vdn";
    case Algorithm::vdn_ps:
      return "vdn_ps";
    case Algorithm::dvdn:
      return "dvdn";
    default:
      return "dvdn_gt";
  }
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "iql") return Algorithm::iql;
  if (s == "vdn") return Algorithm::vdn;
  if (s == "vdn_ps") return Algorithm::vdn_ps;
  if (s == "dvdn") return Algorithm::dvdn;
  if (s == "dvdn_gt") return Algorithm::dvdn_gt;
  throw std::invalid_argument("unknown algorithm '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw std::invalid_argument("config key '" + key + "': cannot parse '" +
                              value + "' as " + expected);
}

long parse_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) bad_value(key, v, "an integer");
    return x;
  } catch (const std::invalid_argument&) {
    bad_value(key, v, "an integer");
  } catch (const std::out_of_range&) {
    bad_value(key, v, "an integer");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  return static_cast<int>(parse_long(key, v));
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) bad_value(key, v, "a number");
    return x;
  } catch (const std::invalid_argument&) {
    bad_value(key, v, "a number");
  } catch (const std::out_of_range&) {
    bad_value(key, v, "a number");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(v);
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

template <typename T, typename Fmt>
std::string join(const std::vector<T>& values, Fmt fmt) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ",";
    s += fmt(values[i]);
  }
  return s;
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      {"run.algorithm",
       [](C& c, const std::string& v) { c.algorithm = algorithm_from_string(v); },
       [](const C& c) { return to_string(c.algorithm); }},
      {"run.total_steps",
       [](C& c, const std::string& v) { c.total_steps = parse_long("run.total_steps", v); },
       [](const C& c) { return std::to_string(c.total_steps); }},
      {"run.eval_interval",
       [](C& c, const std::string& v) { c.eval_interval = parse_long("run.eval_interval", v); },
       [](const C& c) { return std::to_string(c.eval_interval); }},
      {"run.eval_episodes",
       [](C& c, const std::string& v) { c.eval_episodes = parse_int("run.eval_episodes", v); },
       [](const C& c) { return std::to_string(c.eval_episodes); }},
      {"run.seeds",
       [](C& c, const std::string& v) {
         c.seeds.clear();
         for (const std::string& item : split_list(v))
           c.seeds.push_back(
               static_cast<std::uint64_t>(parse_long("run.seeds", item)));
       },
       [](const C& c) {
         return join(c.seeds, [](std::uint64_t s) { return std::to_string(s); });
       }},
      {"run.threads",
       [](C& c, const std::string& v) { c.threads = parse_int("run.threads", v); },
       [](const C& c) { return std::to_string(c.threads); }},
      {"run.train_interval",
       [](C& c, const std::string& v) {
         if (v == "step")
           c.train_interval = TrainInterval::step;
         else if (v == "episode")
           c.train_interval = TrainInterval::episode;
         else
           bad_value("run.train_interval", v, "step or episode");
       },
       [](const C& c) {
         return c.train_interval == TrainInterval::step ? "step" : "episode";
       }},
      {"run.run_id", [](C& c, const std::string& v) { c.run_id = v; },
       [](const C& c) { return c.run_id; }},
      {"run.diagnostics",
       [](C& c, const std::string& v) { c.diagnostics = parse_bool("run.diagnostics", v); },
       [](const C& c) { return c.diagnostics ? "true" : "false"; }},
      {"run.trace_episodes",
       [](C& c, const std::string& v) { c.trace_episodes = parse_bool("run.trace_episodes", v); },
       [](const C& c) { return c.trace_episodes ? "true" : "false"; }},
      {"env.id", [](C& c, const std::string& v) { c.env_id = v; },
       [](const C& c) { return c.env_id; }},
      {"env.gamma",
       [](C& c, const std::string& v) { c.gamma = parse_double("env.gamma", v); },
       [](const C& c) { return fmt_double(c.gamma); }},
      {"env.horizon",
       [](C& c, const std::string& v) { c.horizon = parse_int("env.horizon", v); },
       [](const C& c) { return std::to_string(c.horizon); }},
      {"env.n_agents",
       [](C& c, const std::string& v) { c.n_agents = parse_int("env.n_agents", v); },
       [](const C& c) { return std::to_string(c.n_agents); }},
      {"env.grid_size",
       [](C& c, const std::string& v) { c.grid_size = parse_int("env.grid_size", v); },
       [](const C& c) { return std::to_string(c.grid_size); }},
      {"env.n_fruits",
       [](C& c, const std::string& v) { c.n_fruits = parse_int("env.n_fruits", v); },
       [](const C& c) { return std::to_string(c.n_fruits); }},
      {"env.sight_radius",
       [](C& c, const std::string& v) { c.sight_radius = parse_int("env.sight_radius", v); },
       [](const C& c) { return std::to_string(c.sight_radius); }},
      {"env.n_landmarks",
       [](C& c, const std::string& v) { c.n_landmarks = parse_int("env.n_landmarks", v); },
       [](const C& c) { return std::to_string(c.n_landmarks); }},
      {"env.payoffs",
       [](C& c, const std::string& v) {
         c.payoffs.clear();
         for (const std::string& item : split_list(v))
           c.payoffs.push_back(parse_double("env.payoffs", item));
       },
       [](const C& c) {
         return join(c.payoffs, [](double p) { return fmt_double(p); });
       }},
      {"learn.hidden_dims",
       [](C& c, const std::string& v) {
         c.hidden_dims.clear();
         for (const std::string& item : split_list(v))
           c.hidden_dims.push_back(parse_int("learn.hidden_dims", item));
       },
       [](const C& c) {
         return join(c.hidden_dims, [](int h) { return std::to_string(h); });
       }},
      {"learn.lr",
       [](C& c, const std::string& v) { c.learning_rate = parse_double("learn.lr", v); },
       [](const C& c) { return fmt_double(c.learning_rate); }},
      {"learn.batch_size",
       [](C& c, const std::string& v) { c.batch_size = parse_int("learn.batch_size", v); },
       [](const C& c) { return std::to_string(c.batch_size); }},
      {"learn.buffer_capacity",
       [](C& c, const std::string& v) { c.buffer_capacity = parse_int("learn.buffer_capacity", v); },
       [](const C& c) { return std::to_string(c.buffer_capacity); }},
      {"learn.target_update",
       [](C& c, const std::string& v) {
         if (v == "soft")
           c.target.mode = TargetUpdateRule::Mode::soft;
         else if (v == "hard")
           c.target.mode = TargetUpdateRule::Mode::hard;
         else
           bad_value("learn.target_update", v, "soft or hard");
       },
       [](const C& c) {
         return c.target.mode == TargetUpdateRule::Mode::soft ? "soft" : "hard";
       }},
      {"learn.target_rate",
       [](C& c, const std::string& v) { c.target.rate = parse_double("learn.target_rate", v); },
       [](const C& c) { return fmt_double(c.target.rate); }},
      {"learn.target_period",
       [](C& c, const std::string& v) { c.target.period = parse_int("learn.target_period", v); },
       [](const C& c) { return std::to_string(c.target.period); }},
      {"learn.eps_start",
       [](C& c, const std::string& v) { c.epsilon.eps_start = parse_double("learn.eps_start", v); },
       [](const C& c) { return fmt_double(c.epsilon.eps_start); }},
      {"learn.eps_final",
       [](C& c, const std::string& v) { c.epsilon.eps_final = parse_double("learn.eps_final", v); },
       [](const C& c) { return fmt_double(c.epsilon.eps_final); }},
      {"learn.eps_anneal_steps",
       [](C& c, const std::string& v) { c.epsilon.anneal_steps = parse_long("learn.eps_anneal_steps", v); },
       [](const C& c) { return std::to_string(c.epsilon.anneal_steps); }},
      {"learn.eval_epsilon",
       [](C& c, const std::string& v) { c.epsilon.eval_epsilon = parse_double("learn.eval_epsilon", v); },
       [](const C& c) { return fmt_double(c.epsilon.eval_epsilon); }},
      {"learn.reward_standardization",
       [](C& c, const std::string& v) { c.reward_standardization = parse_bool("learn.reward_standardization", v); },
       [](const C& c) { return c.reward_standardization ? "true" : "false"; }},
      {"learn.grad_clip_enabled",
       [](C& c, const std::string& v) { c.grad_clip_enabled = parse_bool("learn.grad_clip_enabled", v); },
       [](const C& c) { return c.grad_clip_enabled ? "true" : "false"; }},
      {"learn.grad_clip_norm",
       [](C& c, const std::string& v) { c.grad_clip_norm = parse_double("learn.grad_clip_norm", v); },
       [](const C& c) { return fmt_double(c.grad_clip_norm); }},
      {"graph.p_extra",
       [](C& c, const std::string& v) { c.p_extra = parse_double("graph.p_extra", v); },
       [](const C& c) { return fmt_double(c.p_extra); }},
      {"graph.complete_override",
       [](C& c, const std::string& v) { c.complete_graph_override = parse_bool("graph.complete_override", v); },
       [](const C& c) { return c.complete_graph_override ? "true" : "false"; }},
      {"gt.jtd_enabled",
       [](C& c, const std::string& v) { c.gt_jtd_enabled = parse_bool("gt.jtd_enabled", v); },
       [](const C& c) { return c.gt_jtd_enabled ? "true" : "false"; }},
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const Field& f : fields())
    if (key == f.key) return &f;
  return nullptr;
}

void set_key(ExperimentConfig& config, const std::string& key,
             const std::string& value, const std::string& source) {
  const Field* f = find_field(key);
  if (!f)
    throw std::invalid_argument(source + ": unknown config key '" + key + "'");
  f->set(config, value);
}

}  // namespace

std::string ExperimentConfig::resolved_run_id() const {
  if (!run_id.empty()) return run_id;
  return to_string(algorithm) + "-" + env_id;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw std::invalid_argument("config key '" + key + "': " + why);
  };
  if (total_steps < 0) fail("run.total_steps", "must be >= 0");
  if (eval_interval < 1) fail("run.eval_interval", "must be >= 1");
  if (eval_episodes < 1) fail("run.eval_episodes", "must be >= 1");
  if (seeds.empty()) fail("run.seeds", "must list at least one seed");
  if (threads < 1) fail("run.threads", "must be >= 1");
  if (env_id != "climb" && env_id != "foraging" && env_id != "spread")
    fail("env.id", "must be climb, foraging or spread");
  if (gamma <= 0.0 || gamma >= 1.0) fail("env.gamma", "must be in (0, 1)");
  if (horizon < 1) fail("env.horizon", "must be >= 1");
  if (n_agents < 1) fail("env.n_agents", "must be >= 1");
  if (env_id == "climb" && n_agents != 2)
    fail("env.n_agents", "climb is a two-agent game");
  if (payoffs.size() != 9) fail("env.payoffs", "must list 9 values (3x3)");
  if (hidden_dims.empty()) fail("learn.hidden_dims", "must be nonempty");
  for (int h : hidden_dims)
    if (h < 1) fail("learn.hidden_dims", "entries must be >= 1");
  if (learning_rate <= 0.0) fail("learn.lr", "must be > 0");
  if (batch_size < 1) fail("learn.batch_size", "must be >= 1");
  if (buffer_capacity < batch_size)
    fail("learn.buffer_capacity", "must be >= learn.batch_size");
  if (target.period < 1) fail("learn.target_period", "must be >= 1");
  if (target.rate <= 0.0 || target.rate > 1.0)
    fail("learn.target_rate", "must be in (0, 1]");
  if (epsilon.eps_start < 0.0 || epsilon.eps_start > 1.0)
    fail("learn.eps_start", "must be in [0, 1]");
  if (epsilon.eps_final < 0.0 || epsilon.eps_final > 1.0)
    fail("learn.eps_final", "must be in [0, 1]");
  if (epsilon.anneal_steps < 1) fail("learn.eps_anneal_steps", "must be >= 1");
  if (epsilon.eval_epsilon < 0.0 || epsilon.eval_epsilon > 1.0)
    fail("learn.eval_epsilon", "must be in [0, 1]");
  if (grad_clip_norm <= 0.0) fail("learn.grad_clip_norm", "must be > 0");
  if (p_extra < 0.0 || p_extra > 1.0)
    fail("graph.p_extra", "must be in [0, 1]");
}

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& source) {
  ExperimentConfig config;
  std::istringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(source + ":" + std::to_string(line_no) +
                                  ": expected 'key = value'");
    set_key(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)),
            source + ":" + std::to_string(line_no));
  }
  return config;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str(), path);
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override '" + assignment +
                                "' is not key=value");
  set_key(config, trim(assignment.substr(0, eq)),
          trim(assignment.substr(eq + 1)), "override");
}

std::string serialize_config(const ExperimentConfig& config) {
  std::vector<std::pair<std::string, std::string>> rows;
  for (const Field& f : fields()) rows.emplace_back(f.key, f.get(config));
  std::sort(rows.begin(), rows.end());
  std::string out;
  for (const auto& [k, v] : rows) out += k + " = " + v + "\n";
  return out;
}

std::unique_ptr<Env> make_env(const ExperimentConfig& config) {
  config.validate();
  if (config.env_id == "climb") {
    Eigen::Matrix3d payoffs;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) payoffs(r, c) = config.payoffs[3 * r + c];
    return std::make_unique<ClimbGame>(payoffs, config.gamma);
  }
  if (config.env_id == "foraging") {
    ForagingEnv::Config cfg;
    cfg.grid_size = config.grid_size;
    cfg.n_agents = config.n_agents;
    cfg.n_fruits = config.n_fruits;
    cfg.sight_radius = config.sight_radius;
    cfg.horizon = config.horizon;
    cfg.gamma = config.gamma;
    return std::make_unique<ForagingEnv>(cfg);
  }
  SpreadEnv::Config cfg;
  cfg.n_agents = config.n_agents;
  cfg.n_landmarks = config.n_landmarks;
  cfg.horizon = config.horizon;
  cfg.gamma = config.gamma;
  return std::make_unique<SpreadEnv>(cfg);
}

}  // namespace dvdn
