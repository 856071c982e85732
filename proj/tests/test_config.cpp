#include <string>

#include "doctest.h"
#include "dvdn/config.hpp"

using namespace dvdn;

TEST_CASE("config: serialize/parse round trip") {
  ExperimentConfig config;
  config.algorithm = Algorithm::dvdn_gt;
  config.total_steps = 12345;
  config.seeds = {3, 14, 159};
  config.learning_rate = 0.0003;
  config.hidden_dims = {64, 32};
  config.env_id = "foraging";
  config.epsilon.anneal_steps = 777;
  const std::string text = serialize_config(config);
  const ExperimentConfig reparsed = parse_config_text(text);
  CHECK(serialize_config(reparsed) == text);
  CHECK(reparsed.seeds == config.seeds);
  CHECK(reparsed.hidden_dims == config.hidden_dims);
  CHECK(reparsed.learning_rate == config.learning_rate);
}

TEST_CASE("config: unknown keys are rejected with the key path") {
  try {
    (void)parse_config_text("learn.momentum = 0.9\n");
    FAIL("expected a parse error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("learn.momentum") != std::string::npos);
  }
}

TEST_CASE("config: bad values name the offending key") {
  try {
    (void)parse_config_text("run.total_steps = soon\n");
    FAIL("expected a parse error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("run.total_steps") != std::string::npos);
  }
}

TEST_CASE("config: comments, blanks and overrides") {
  ExperimentConfig config = parse_config_text(
      "# preset\n"
      "run.algorithm = vdn\n"
      "\n"
      "env.id = climb   # matrix game\n");
  CHECK(config.algorithm == Algorithm::vdn);
  CHECK(config.env_id == "climb");
  apply_override(config, "learn.lr=0.001");
  CHECK(config.learning_rate == 0.001);
  CHECK_THROWS_AS(apply_override(config, "learn.lr"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(config, "learn.nope=1"), std::invalid_argument);
}

TEST_CASE("config: validation points at the key") {
  ExperimentConfig config;
  config.gamma = 2.0;
  try {
    config.validate();
    FAIL("expected a validation error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("env.gamma") != std::string::npos);
  }
  config = ExperimentConfig{};
  config.payoffs = {1, 2, 3};
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = ExperimentConfig{};
  config.env_id = "chess";
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

TEST_CASE("config: run id derivation") {
  ExperimentConfig config;
  config.algorithm = Algorithm::iql;
  config.env_id = "spread";
  CHECK(config.resolved_run_id() == "iql-spread");
  config.run_id = "custom";
  CHECK(config.resolved_run_id() == "custom");
}

TEST_CASE("make_env: dispatch and spec shapes") {
  ExperimentConfig config;
  config.env_id = "climb";
  auto climb = make_env(config);
  CHECK(climb->spec().horizon == 1);
  CHECK(climb->spec().n_actions[0] == 3);

  config.env_id = "foraging";
  auto foraging = make_env(config);
  const int window = 2 * config.sight_radius + 1;
  CHECK(foraging->spec().obs_dims[0] == 2 * window * window + 2);
  CHECK(foraging->spec().n_actions[0] == 6);

  config.env_id = "spread";
  auto spread = make_env(config);
  CHECK(spread->spec().obs_dims[0] == 6);
  CHECK(spread->spec().n_actions[0] == 5);
}

TEST_CASE("make_env: custom payoffs reach the game") {
  ExperimentConfig config;
  config.env_id = "climb";
  config.payoffs = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto env = make_env(config);
  env->reset(0);
  CHECK(env->step({2, 1}).reward == 8.0);
}
