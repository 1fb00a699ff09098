// Copyright 2026 The mbmix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "mbmix/exp/runner.hpp"

namespace mbmix::expcli {
namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

// A fresh output directory under the build tree for each test.
class ExpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("mbmix_exp_test_" +
             std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    setenv(kOutputRootEnv, root_.c_str(), 1);
  }
  void TearDown() override {
    unsetenv(kOutputRootEnv);
    fs::remove_all(root_);
  }
  fs::path root_;
};

// Small enough for the unit suite: a few hundred env steps per run.
ExperimentConfig tiny(const std::string& kinds) {
  std::string text =
      "[experiment]\nkind = " + kinds +
      "\nseeds = 0,1\nbudget = 400\n"
      "[env]\nname = lqr\n"
      "[mix]\nh_max = 4\nbranch_len = 4\nn_branch = 4\n"
      "[model]\nhidden = 8\nepochs = 1\nmax_batches = 3\n"
      "[policy]\nhidden = 8\n"
      "[value]\nhidden = 8\niterations = 2\nminibatch = 32\n"
      "[train]\nn_envs = 2\nsteps_per_iter = 50\ninner_updates = 2\nrecord_interval = 100\n"
      "eval_episodes = 2\nheldout_steps = 10\n"
      "[tabular]\nn_states = 4\nn_actions = 2\nepisode_len = 5\ntrajectories_per_update = 2\n"
      "h_max = 3\n"
      "[variance]\nh_grid = 2,4\nn_estimates = 32\nn_branch = 2\nn_bootstrap = 50\n"
      "snapshot_budget = 200\n";
  return parse_config(text, "tiny.ini");
}

TEST(Config, MissingKindIsNamed) {
  try {
    parse_config("[experiment]\nseeds = 1\n", "x.ini");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("experiment.kind"), std::string::npos);
  }
}

TEST(Config, BadValueReportsLineAndField) {
  try {
    parse_config("[experiment]\nkind = mbmix\n\n[mix]\nh_max = lots\n", "x.ini");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("x.ini:5"), std::string::npos) << msg;
    EXPECT_NE(msg.find("mix.h_max"), std::string::npos) << msg;
  }
}

TEST(Config, UnknownFieldAndKindRejected) {
  EXPECT_THROW(parse_config("[experiment]\nkind = mbmix\n[mix]\nlambda = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[experiment]\nkind = nope\n"), ConfigError);
  EXPECT_THROW(parse_config("[experiment]\nkind = mbmix\n[mix]\nh_max = 8\ninterval = 3\n"),
               ConfigError);
}

TEST(Config, RoundTripIsLossless) {
  for (const auto& kind : experiment_kinds()) {
    ExperimentConfig c = default_config(kind);
    c.mix.lambda_mix = 0.1 + 0.2;  // not exactly representable in short decimal
    c.policy.hidden = {};
    c.seeds = {3, 4, 5};
    const std::string a = to_ini(c);
    const std::string b = to_ini(parse_config(a));
    EXPECT_EQ(a, b) << kind;
    EXPECT_EQ(parse_config(a).mix.lambda_mix, 0.1 + 0.2);
  }
}

TEST(Config, KindDefaults) {
  EXPECT_EQ(default_config("tabular").budget, 1000000u);
  EXPECT_EQ(parse_config("[experiment]\nkind = tabular\n").budget, 1000000u);
  EXPECT_EQ(parse_config("[experiment]\nkind = tabular\nbudget = 1e3\n").budget, 1000u);
  EXPECT_EQ(parse_config("[experiment]\nkind = variance-study\n").env.noise_std, 0.05);
}

TEST_F(ExpTest, SuiteOfThreeKindsTimesTwoSeedsMakesSixDirectories) {
  auto res = run_suite(tiny("tabular,mbmix,shac-baseline"));
  ASSERT_TRUE(res.ok()) << (res.runs.empty() ? "" : res.runs.front().error);
  std::set<std::string> dirs;
  for (const auto& kind : fs::directory_iterator(root_))
    for (const auto& seed : fs::directory_iterator(kind.path())) {
      dirs.insert(seed.path().string());
      EXPECT_TRUE(fs::exists(seed.path() / "resolved_config.ini"));
      EXPECT_TRUE(fs::exists(seed.path() / "summary.json"));
      EXPECT_TRUE(fs::exists(seed.path() / "curve.csv"));
    }
  EXPECT_EQ(dirs.size(), 6u);
  EXPECT_TRUE(fs::exists(root_ / "mbmix" / "1" / "policy.json"));
  EXPECT_TRUE(fs::exists(root_ / "mbmix" / "1" / "model.json"));
}

TEST_F(ExpTest, SameConfigAndSeedGiveIdenticalCsv) {
  auto cfg = tiny("mbmix,mix-real-env,tabular");
  cfg.seeds = {7};
  ASSERT_TRUE(run_suite(cfg).ok());
  std::map<std::string, std::string> first;
  for (const char* k : {"mbmix", "mix-real-env", "tabular"})
    first[k] = slurp(root_ / k / "7" / "curve.csv");
  fs::remove_all(root_);
  ASSERT_TRUE(run_suite(cfg).ok());
  for (const auto& [k, text] : first) {
    EXPECT_FALSE(text.empty());
    EXPECT_EQ(text, slurp(root_ / k / "7" / "curve.csv")) << k;
  }
}

TEST_F(ExpTest, ResolvedConfigRegeneratesRun) {
  auto cfg = tiny("mbmix");
  cfg.seeds = {2};
  ASSERT_TRUE(run_suite(cfg).ok());
  const fs::path dir = root_ / "mbmix" / "2";
  const std::string csv = slurp(dir / "curve.csv");
  auto again = load_config((dir / "resolved_config.ini").string());
  fs::remove_all(root_);
  ASSERT_TRUE(run_suite(again).ok());
  EXPECT_EQ(csv, slurp(dir / "curve.csv"));
}

TEST_F(ExpTest, SummaryMatchesCsvRows) {
  auto cfg = tiny("shac-baseline");
  cfg.seeds = {0};
  ASSERT_TRUE(run_suite(cfg).ok());
  const fs::path dir = root_ / "shac-baseline" / "0";
  const auto rows = read_csv(dir / "curve.csv");
  const auto s = nets::load_json((dir / "summary.json").string());
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(s["rows"].get<std::size_t>(), rows.size() - 1);
  EXPECT_EQ(std::to_string(s["final"]["env_steps"].get<std::uint64_t>()), rows.back()[1]);
  EXPECT_DOUBLE_EQ(s["final"]["eval_return_mean"].get<double>(), std::stod(rows.back()[2]));
  double best = -1e300;
  for (std::size_t i = 1; i < rows.size(); ++i) best = std::max(best, std::stod(rows[i][2]));
  EXPECT_DOUBLE_EQ(s["best_eval_return_mean"].get<double>(), best);
  EXPECT_TRUE(s.contains("lqr"));
}

TEST_F(ExpTest, FailedRunLeavesFailureRecordAndOthersContinue) {
  auto cfg = tiny("mbmix,tabular");
  cfg.seeds = {0};
  cfg.train.eval_episodes = 0;  // the initial evaluation throws
  auto res = run_suite(cfg);
  EXPECT_FALSE(res.ok());
  EXPECT_TRUE(fs::exists(root_ / "mbmix" / "0" / "failure.json"));
  EXPECT_FALSE(fs::exists(root_ / "mbmix" / "0" / "summary.json"));
  auto f = nets::load_json((root_ / "mbmix" / "0" / "failure.json").string());
  EXPECT_FALSE(f["error"].get<std::string>().empty());
  EXPECT_TRUE(fs::exists(root_ / "tabular" / "0" / "summary.json"));
}

TEST_F(ExpTest, BudgetZeroRecordsInitialPolicyOnly) {
  auto cfg = tiny("mbmix,shac-baseline");
  cfg.seeds = {0};
  cfg.budget = 0;
  ASSERT_TRUE(run_suite(cfg).ok());
  for (const char* k : {"mbmix", "shac-baseline"}) {
    const auto rows = read_csv(root_ / k / "0" / "curve.csv");
    ASSERT_EQ(rows.size(), 2u) << k;
    EXPECT_EQ(rows[1][1], "0");
  }
}

TEST_F(ExpTest, ModelAblationWritesPairedArtifacts) {
  auto cfg = tiny("model-ablation");
  cfg.seeds = {0};
  ASSERT_TRUE(run_suite(cfg).ok());
  const fs::path dir = root_ / "model-ablation" / "0";
  for (const char* f : {"curve_sobolev.csv", "curve_plain.csv", "heldout.csv", "predictions.csv",
                        "sobolev_policy.json", "plain_model.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(read_csv(dir / "heldout.csv").size(), 3u);
  EXPECT_GT(read_csv(dir / "predictions.csv").size(), 2u);
}

TEST(ModelAblation, ZeroAlphaSobolevArmEqualsPlainArm) {
  auto cfg = tiny("model-ablation");
  cfg.model.alpha = 0.0;
  auto rep = run_model_ablation(cfg, 0);
  std::ostringstream a, b;
  mix::write_curve_csv(rep.sobolev.result.curve, a);
  mix::write_curve_csv(rep.plain.result.curve, b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(rep.sobolev.result.heldout->jac_error, rep.plain.result.heldout->jac_error);
}

TEST_F(ExpTest, VarianceStudyWritesTable) {
  auto cfg = tiny("variance-study");
  cfg.seeds = {0};
  cfg.env_name = "pendulum";
  cfg.env.noise_std = 0.05;
  ASSERT_TRUE(run_suite(cfg).ok());
  const auto rows = read_csv(root_ / "variance-study" / "0" / "variance.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"method", "H_max", "lambda", "trace_variance",
                                               "ci_low", "ci_high"}));
  EXPECT_TRUE(fs::exists(root_ / "variance-study" / "0" / "snapshot_policy.json"));
}

TEST(Tabular, ConstantRewardMdpStaysFlat) {
  TabularRunConfig cfg;
  cfg.mdp.n_states = 6;
  cfg.mdp.n_actions = 3;
  cfg.mdp.reward_law = env::RewardLaw::kConstant;
  cfg.mdp.constant_reward = 0.3;
  cfg.budget = 5000;
  cfg.record_every = 1;
  for (TabularMethod m : {TabularMethod::kApgFull, TabularMethod::kMix}) {
    auto recs = run_tabular_method(m, cfg, 4);
    ASSERT_GT(recs.size(), 5u);
    for (const auto& r : recs) EXPECT_NEAR(r.reward_per_step, 0.3, 1e-12);
  }
}

TEST(Tabular, RecordsAreMonotoneAndFinite) {
  TabularRunConfig cfg;
  cfg.budget = 20000;
  for (TabularMethod m : {TabularMethod::kApgFull, TabularMethod::kMix}) {
    auto recs = run_tabular_method(m, cfg, 1);
    EXPECT_EQ(recs.front().env_steps, 0u);
    EXPECT_LE(recs.back().env_steps, cfg.budget);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      EXPECT_TRUE(std::isfinite(recs[i].reward_per_step));
      EXPECT_EQ(recs[i].method, m);
      if (i > 0) {
        EXPECT_GT(recs[i].env_steps, recs[i - 1].env_steps);
      }
    }
  }
}

TEST(Tabular, ExactGradientImprovesReward) {
  TabularRunConfig cfg;
  cfg.budget = 50000;
  cfg.exact_gradient = true;
  for (TabularMethod m : {TabularMethod::kApgFull, TabularMethod::kMix}) {
    auto recs = run_tabular_method(m, cfg, 2);
    EXPECT_GT(recs.back().reward_per_step, recs.front().reward_per_step + 0.01);
  }
}

TEST(Tabular, InvalidDimsThrow) {
  TabularRunConfig cfg;
  cfg.mdp.n_states = 0;
  EXPECT_THROW(run_tabular_method(TabularMethod::kMix, cfg, 0), Error);
}

}  // namespace
}  // namespace mbmix::expcli
