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


// Acceptance run: one PASS/FAIL line per criterion.
//   acceptance [--only 1,3,9] [--list] [--write-configs DIR] [--out DIR]

#include <Eigen/Dense>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "mbmix/env/riccati.hpp"
#include "mbmix/exp/runner.hpp"
#include "presets.hpp"
#include "random_graph.hpp"
#include "test_util.hpp"

namespace {

using namespace mbmix;
using ad::Tape;
using ad::Value;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int prec = 4) {
  std::ostringstream o;
  o.precision(prec);
  o << x;
  return o.str();
}

fs::path g_out = fs::temp_directory_path() / "mbmix_acceptance";

// ---- 1. reverse mode vs central differences -------------------------------

using ScalarFn = std::function<Value(Tape&, const std::vector<Value>&)>;

// Worst relative error over the parameter matrices.
double worst_param_error(const std::vector<Matrix>& params, const ScalarFn& f, double h = 1e-6) {
  Tape tape;
  std::vector<Value> vars;
  for (const auto& p : params) vars.push_back(tape.variable(p));
  auto grads = ad::backward(tape, f(tape, vars));
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto eval = [&](const Matrix& m) {
      Tape t;
      std::vector<Value> cs;
      for (std::size_t i = 0; i < params.size(); ++i) cs.push_back(t.constant(i == k ? m : params[i]));
      return f(t, cs).item();
    };
    const Matrix fd = testing::fd_gradient(eval, params[k], h);
    worst = std::max(worst, testing::relative_error(grads[vars[k]], fd, 1e-8));
  }
  return worst;
}

Value weighted_sum(Tape& t, Value y, const Matrix& w) { return ad::sum(ad::mul(y, t.constant(w))); }

Outcome criterion_autodiff() {
  double worst_graph = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const int depth = 1 + static_cast<int>(seed % 8);
    const auto in = testing::random_graph_inputs(seed);
    const double e = worst_param_error({in.x, in.w}, [&](Tape&, const std::vector<Value>& v) {
      return testing::random_graph(seed, depth, v[0], v[1]);
    }, 1e-5);
    worst_graph = std::max(worst_graph, e);
  }
  std::mt19937_64 gen(17);
  Rng rng(5);
  const auto spec = env::make_env("pendulum");

  // Policy: reparameterized squashed action.
  auto policy = nets::make_policy(spec.obs_dim, 1, spec.action_bound, {}, rng);
  for (auto& p : policy.net.params) p = testing::random_matrix(gen, p.rows, p.cols, 0.3);
  const Matrix obs = testing::random_matrix(gen, 4, spec.obs_dim), eps = testing::random_matrix(gen, 4, 1);
  const Matrix wa = testing::random_matrix(gen, 4, 1);
  std::vector<Matrix> pparams = policy.net.params;
  pparams.push_back(policy.log_std);
  const double e_policy = worst_param_error(pparams, [&](Tape& t, const std::vector<Value>& v) {
    nets::BoundPolicy bp;
    bp.policy = &policy;
    bp.net.assign(v.begin(), v.end() - 1);
    bp.log_std = v.back();
    return weighted_sum(t, nets::act(bp, t.constant(obs), eps), wa);
  });

  // Value net.
  nets::Mlp value = mix::make_value_net(spec.obs_dim, {64, 64}, rng);
  for (auto& p : value.params) p = testing::random_matrix(gen, p.rows, p.cols, 0.3);
  const Matrix wv = testing::random_matrix(gen, 4, 1);
  const double e_value = worst_param_error(value.params, [&](Tape& t, const std::vector<Value>& v) {
    return weighted_sum(t, nets::forward(value, v, t.constant(obs)), wv);
  });

  // Dynamics model.
  auto model = world::make_dynamics_model(2, 1, {64, 64}, rng);
  for (auto& p : model.net.params) p = testing::random_matrix(gen, p.rows, p.cols, 0.3);
  const Matrix s = testing::random_matrix(gen, 4, 2), a = testing::random_matrix(gen, 4, 1);
  const Matrix ws = testing::random_matrix(gen, 4, 2);
  const double e_model = worst_param_error(model.net.params, [&](Tape& t, const std::vector<Value>& v) {
    return weighted_sum(t, world::predict(model, v, t.constant(s), t.constant(a)), ws);
  });

  const double worst = std::max({worst_graph, e_policy, e_value, e_model});
  return {worst < 1e-5, "max rel err: graphs " + fmt(worst_graph) + ", policy " + fmt(e_policy) +
                            ", value " + fmt(e_value) + ", model " + fmt(e_model) + " (< 1e-5)"};
}

// ---- 2. gradient of the Jacobian-matching term ----------------------------

Outcome criterion_second_order() {
  const auto spec = env::make_env("pendulum");
  Rng rng(21);
  auto policy = nets::make_policy(spec.obs_dim, 1, spec.action_bound, {}, rng);
  env::EnvRunner runner(spec, 4, rng.split(1));
  auto data = runner.collect(policy, 4, false, true);
  std::vector<const env::Transition*> batch;
  for (const auto& t : data) batch.push_back(&t);
  auto model = world::make_dynamics_model(2, 1, {32, 32}, rng, true, 0.5);
  world::SobolevConfig cfg;
  const double e = worst_param_error(model.net.params, [&](Tape& t, const std::vector<Value>& v) {
    return world::sobolev_loss(model, v, batch, 1.0, cfg, t).jac;
  });
  return {e < 1e-4, "2x32 model, " + std::to_string(batch.size()) +
                        " transitions: max rel err " + fmt(e) + " (< 1e-4)"};
}

// ---- 3. objective identities ---------------------------------------------

Outcome criterion_identities() {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> mi(1, 4), ki(1, 40);
  int bad_sum = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t m = mi(gen), h = m * ki(gen);
    double lambda = u(gen);
    if (i % 10 == 0) lambda = i % 20 == 0 ? 0.0 : 1.0;
    double s = 0.0;
    for (const auto& w : mix::mix_weights(lambda, h, m)) {
      if (w.weight < 0.0) ++bad_sum;
      s += w.weight;
    }
    if (s != 1.0) ++bad_sum;
  }
  double form = 0.0, limits = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t H = 1 + rep % 25;
    const Matrix r = testing::random_matrix(gen, 6, H), v = testing::random_matrix(gen, 6, H + 1, 3.0);
    Tape tape;
    auto b = mix::bundle_from_values(tape, r, v);
    mix::MixConfig c;
    c.gamma = 0.9 + 0.1 * u(gen);
    c.h_max = H;
    c.lambda_mix = u(gen);
    form = std::max(form, std::abs(mix::mix_objective(b, c).item() -
                                   mix::single_pass_mix_objective(b, c).item()));
    c.lambda_mix = 0.0;
    limits = std::max(limits, std::abs(mix::mix_objective(b, c).item() -
                                       mix::fixed_horizon_objective(b, 1, c.gamma).item()));
    c.lambda_mix = 1.0;
    limits = std::max(limits, std::abs(mix::mix_objective(b, c).item() -
                                       mix::fixed_horizon_objective(b, H, c.gamma).item()));
  }
  const bool pass = bad_sum == 0 && form <= 1e-10 && limits <= 1e-10;
  return {pass, "(a) " + std::to_string(1000 - bad_sum) + "/1000 weight sets sum to 1; (b) max |two forms| " +
                    fmt(form) + "; (c) max |limit gap| " + fmt(limits) + " (<= 1e-10)"};
}

// ---- 4. two-step LQR chain rule -------------------------------------------

Outcome criterion_chain_rule() {
  auto spec = env::make_env("lqr");
  Rng rng(1);
  nets::PolicyOptions po;
  po.hidden = {};
  auto policy = nets::make_policy(spec.obs_dim, 1, spec.action_bound, po, rng);
  const Matrix W{{-0.4}, {-1.1}};
  policy.net.params[0] = W;
  policy.net.params[1] = Matrix{{0.2}};
  Rng vr(2);
  nets::Mlp value = mix::make_value_net(spec.obs_dim, {8}, vr);
  value.params[2] = Matrix(8, 1);
  value.params[3] = Matrix(1, 1);
  mix::RolloutContext ctx;
  ctx.spec = &spec;
  ctx.deterministic_policy = true;
  mix::MixConfig c;
  c.gamma = 0.9;
  c.h_max = 2;
  const Matrix starts{{0.6, -0.3}};
  const auto g = mix::policy_gradients({mix::Method::kShac}, ctx, c, policy, value, starts, 2, Rng(0))
                     .estimates[0]
                     .grad;
  // a_t = s_t w + b, s_{t+1} = A s_t + B a_t, cost s's + R a^2 per step.
  const Eigen::Matrix2d A = env::to_eigen(spec.lqr->A), Q = env::to_eigen(spec.lqr->Q);
  const Eigen::Vector2d B = env::to_eigen(spec.lqr->B);
  const double R = spec.lqr->R(0, 0), bias = 0.2;
  const Eigen::Vector2d w(W(0, 0), W(1, 0)), s0(0.6, -0.3);
  const double a0 = s0.dot(w) + bias;
  const Eigen::Vector2d s1 = A * s0 + B * a0;
  const double a1 = s1.dot(w) + bias;
  const Eigen::Matrix2d ds1 = B * s0.transpose();
  const Eigen::Vector2d da1 = s1 + ds1.transpose() * w;
  const Eigen::Vector2d dCw =
      2 * R * a0 * s0 + c.gamma * (2 * ds1.transpose() * (Q * s1) + 2 * R * a1 * da1);
  const double da1b = 1.0 + B.dot(w);
  const double dCb = 2 * R * a0 + c.gamma * (2 * B.dot(Q * s1) + 2 * R * a1 * da1b);
  const double err = std::max({std::abs(g[0] - dCw(0)), std::abs(g[1] - dCw(1)), std::abs(g[2] - dCb)});
  return {err <= 1e-10, "max |autodiff - hand| " + fmt(err) + " (<= 1e-10)"};
}

// ---- 5. value targets ----------------------------------------------------

Outcome criterion_value_targets() {
  std::mt19937_64 gen(19);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> hi(1, 30);
  std::normal_distribution<double> n(0.0, 2.0);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t h = hi(gen);
    const double g = 0.5 + 0.5 * u(gen), l = u(gen);
    std::vector<double> r(h), v(h + 1);
    for (auto& x : r) x = n(gen);
    for (auto& x : v) x = n(gen);
    const auto t = mix::value_targets(r, v, g, l, h);
    for (std::size_t s = 0; s < h; ++s) {
      auto G = [&](std::size_t k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < k; ++i) acc += std::pow(g, double(i)) * r[s + i];
        return acc + std::pow(g, double(k)) * v[s + k];
      };
      double head = 0.0;
      for (std::size_t k = 1; k + s < h; ++k) head += std::pow(l, double(k - 1)) * G(k);
      const double ref = (1.0 - l) * head + std::pow(l, double(h - s - 1)) * G(h - s);
      worst = std::max(worst, std::abs(t[s] - ref));
    }
  }
  return {worst <= 1e-12, "100 tuples, max |recursion - summation| " + fmt(worst) + " (<= 1e-12)"};
}

// ---- experiment helpers ----------------------------------------------------

expcli::SuiteResult run_preset(const expcli::ExperimentConfig& c, const std::string& tag) {
  expcli::ExperimentConfig cfg = c;
  cfg.outdir = (g_out / tag).string();
  unsetenv(expcli::kOutputRootEnv);
  auto res = expcli::run_suite(cfg);
  for (const auto& r : res.runs)
    if (!r.ok) std::cerr << "  run " << r.kind << "/" << r.seed << " failed: " << r.error << "\n";
  return res;
}

double final_return(const nlohmann::json& s) { return s["final"]["eval_return_mean"].get<double>(); }

// ---- 6. variance ----------------------------------------------------------

Outcome criterion_variance() {
  auto res = run_preset(presets::pendulum_variance(), "variance");
  if (!res.ok()) return {false, "a run failed"};
  int ok = 0, total = 0;
  std::string detail;
  for (const auto& r : res.runs) {
    const auto rows = [&] {
      std::ifstream in(r.dir / "comparison.csv");
      std::vector<std::string> out;
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) out.push_back(line);
      return out;
    }();
    for (const auto& line : rows) {
      ++total;
      std::stringstream ls(line);
      std::string h, diff, lo, hi, flag;
      std::getline(ls, h, ',');
      std::getline(ls, diff, ',');
      std::getline(ls, lo, ',');
      std::getline(ls, hi, ',');
      std::getline(ls, flag, ',');
      if (flag == "true") ++ok;
      else detail += " [seed " + std::to_string(r.seed) + " H=" + h + " diff " + fmt(std::stod(diff)) + "]";
    }
    // Per-H ratio for the log.
    std::ifstream in(r.dir / "variance.csv");
    std::string line;
    std::getline(in, line);
    std::vector<double> tv;
    while (std::getline(in, line)) tv.push_back(std::stod(line.substr(line.find(',', line.find(',', line.find(',') + 1) + 1) + 1)));
    std::cout << "    seed " << r.seed << " MIX/SHAC trace-variance:";
    for (std::size_t i = 0; i + 1 < tv.size(); i += 2) std::cout << " " << fmt(tv[i] / tv[i + 1], 3);
    std::cout << "\n";
  }
  return {total > 0 && ok == total, std::to_string(ok) + "/" + std::to_string(total) +
                                        " (seed, H_max) cells with MIX <= SHAC and CI not contradicting" + detail};
}

// ---- 7. tabular -----------------------------------------------------------

Outcome criterion_tabular() {
  const auto cfg = presets::tabular();
  std::map<std::string, std::map<std::uint64_t, double>> sum;
  std::map<std::string, std::map<std::uint64_t, int>> cnt;
  for (std::uint64_t seed : cfg.seeds)
    for (const auto& r : expcli::run_tabular(cfg, seed)) {
      sum[to_string(r.method)][r.env_steps] += r.reward_per_step;
      ++cnt[to_string(r.method)][r.env_steps];
    }
  const auto& mix = sum["MIX"];
  const auto& apg = sum["APG-full"];
  std::size_t checked = 0, dominated = 0;
  double final_mix = 0, final_apg = 0;
  for (const auto& [steps, m] : mix) {
    if (!apg.count(steps)) continue;
    const double mm = m / cnt["MIX"][steps], am = apg.at(steps) / cnt["APG-full"][steps];
    final_mix = mm;
    final_apg = am;
    if (2 * steps >= cfg.budget) {
      ++checked;
      if (mm >= am) ++dominated;
    }
  }
  const bool pass = final_mix >= final_apg && checked > 0 && dominated == checked;
  return {pass, "final reward/step MIX " + fmt(final_mix, 7) + " vs APG-full " + fmt(final_apg, 7) +
                    "; MIX >= APG at " + std::to_string(dominated) + "/" + std::to_string(checked) +
                    " checkpoints in the second half"};
}

// ---- 8. Sobolev ablation --------------------------------------------------

Outcome criterion_ablation() {
  auto res = run_preset(presets::pendulum_ablation(), "ablation");
  if (!res.ok()) return {false, "a run failed"};
  int jac_wins = 0;
  double ret_sob = 0, ret_plain = 0;
  std::string per;
  for (const auto& r : res.runs) {
    const auto& arms = r.summary["arms"];
    const double js = arms["sobolev"]["heldout"]["jac_error"].get<double>();
    const double jp = arms["plain"]["heldout"]["jac_error"].get<double>();
    if (js < jp) ++jac_wins;
    ret_sob += final_return(arms["sobolev"]) / res.runs.size();
    ret_plain += final_return(arms["plain"]) / res.runs.size();
    per += " " + fmt(js, 3) + "/" + fmt(jp, 3);
  }
  const bool pass = jac_wins >= 4 && ret_sob >= ret_plain;
  return {pass, "jac err sobolev<plain in " + std::to_string(jac_wins) + "/" +
                    std::to_string(res.runs.size()) + " seeds (" + per.substr(1) +
                    "); mean final return sobolev " + fmt(ret_sob, 6) + " vs plain " + fmt(ret_plain, 6)};
}

// ---- 9. LQR control quality -----------------------------------------------

Outcome criterion_lqr() {
  auto res = run_preset(presets::lqr_mbmix(), "lqr");
  if (!res.ok()) return {false, "a run failed"};
  int ok = 0;
  std::string per;
  for (const auto& r : res.runs) {
    const double ratio = r.summary["lqr"]["ratio"].get<double>();
    if (ratio <= 1.05) ++ok;
    per += " " + fmt(ratio, 5);
  }
  return {ok == static_cast<int>(res.runs.size()),
          "cost / Riccati-optimal per seed:" + per + " at " +
              std::to_string(presets::lqr_mbmix().budget) + " env steps (<= 1.05)"};
}

// ---- 10. stability across H_max -------------------------------------------

Outcome criterion_stability() {
  std::map<std::string, std::vector<double>> means;
  for (const std::string kind : {"mix-real-env", "shac-baseline"})
    for (std::size_t h : presets::softcontact_horizons()) {
      auto res = run_preset(presets::softcontact(kind, h), "stability_h" + std::to_string(h));
      if (!res.ok()) return {false, "a run failed"};
      double m = 0.0;
      for (const auto& r : res.runs) m += final_return(r.summary) / res.runs.size();
      means[kind].push_back(m);
    }
  auto spread = [](const std::vector<double>& v) {
    return *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
  };
  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += " " + fmt(x, 4);
    return s;
  };
  const double sm = spread(means["mix-real-env"]), ss = spread(means["shac-baseline"]);
  return {sm <= ss, "spread MIX " + fmt(sm) + " vs SHAC " + fmt(ss) + "; means by H_max MIX" +
                        list(means["mix-real-env"]) + ", SHAC" + list(means["shac-baseline"])};
}

// ---- 11. determinism ------------------------------------------------------

std::map<std::string, std::string> csv_files(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.path().extension() == ".csv") {
      std::ifstream in(e.path());
      std::stringstream ss;
      ss << in.rdbuf();
      out[fs::relative(e.path(), root).string()] = ss.str();
    }
  return out;
}

Outcome criterion_determinism() {
  const std::string text =
      "[experiment]\nkind = tabular,mbmix,shac-baseline,mix-real-env,model-ablation,variance-study\n"
      "seeds = 0,1\nbudget = 800\n"
      "[env]\nname = pendulum\nnoise_std = 0.05\n"
      "[mix]\nh_max = 4\nbranch_len = 4\nn_branch = 4\n"
      "[model]\nhidden = 16\nepochs = 1\nmax_batches = 4\n"
      "[policy]\nhidden = 16\n[value]\nhidden = 16\niterations = 2\nminibatch = 32\n"
      "[train]\nn_envs = 2\nsteps_per_iter = 100\ninner_updates = 3\nrecord_interval = 200\n"
      "eval_episodes = 2\nheldout_steps = 20\n"
      "[tabular]\nepisode_len = 20\ntrajectories_per_update = 4\n"
      "[variance]\nh_grid = 2,4\nn_estimates = 32\nn_branch = 2\nn_bootstrap = 100\n"
      "snapshot_budget = 400\n";
  auto cfg = expcli::parse_config(text, "determinism.ini");
  cfg.budget = 800;
  cfg.tabular.mdp = env::TabularOptions{};
  std::map<std::string, std::string> runs[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path root = g_out / ("determinism_" + std::to_string(i));
    fs::remove_all(root);
    auto c = cfg;
    c.outdir = root.string();
    unsetenv(expcli::kOutputRootEnv);
    if (!expcli::run_suite(c).ok()) return {false, "a run failed"};
    runs[i] = csv_files(root);
  }
  std::size_t same = 0;
  for (const auto& [name, text0] : runs[0])
    if (runs[1].count(name) && runs[1].at(name) == text0) ++same;
  const bool pass = !runs[0].empty() && same == runs[0].size() && runs[0].size() == runs[1].size();
  return {pass, std::to_string(same) + "/" + std::to_string(runs[0].size()) +
                    " CSV files bit-identical across two runs of 6 kinds x 2 seeds"};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "autodiff vs finite differences", criterion_autodiff},
      {2, "second-order Jacobian-loss gradient", criterion_second_order},
      {3, "objective identities", criterion_identities},
      {4, "BPTT chain rule on 2-step LQR", criterion_chain_rule},
      {5, "value-target formula", criterion_value_targets},
      {6, "MIX variance <= SHAC variance (pendulum)", criterion_variance},
      {7, "tabular MIX vs APG-full", criterion_tabular},
      {8, "Sobolev vs plain model (pendulum)", criterion_ablation},
      {9, "LQR within 5% of Riccati optimum", criterion_lqr},
      {10, "stability across H_max (soft contact)", criterion_stability},
      {11, "determinism", criterion_determinism},
  };
  return all;
}

constexpr const char* kConfigHeader =
    "; Copyright 2026 The mbmix Authors\n"
    ";\n"
    "; Licensed under the Apache License, Version 2.0 (the \"License\");\n"
    "; you may not use this file except in compliance with the License.\n"
    "; You may obtain a copy of the License at\n"
    ";\n"
    ";     http://www.apache.org/licenses/LICENSE-2.0\n"
    ";\n"
    "; Unless required by applicable law or agreed to in writing, software\n"
    "; distributed under the License is distributed on an \"AS IS\" BASIS,\n"
    "; WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.\n"
    "; See the License for the specific language governing permissions and\n"
    "; limitations under the License.\n";

void write_configs(const fs::path& dir) {
  fs::create_directories(dir);
  auto put = [&](const std::string& name, const expcli::ExperimentConfig& c) {
    std::ofstream(dir / name) << kConfigHeader << "\n" << expcli::to_ini(c);
  };
  put("lqr_mbmix.ini", presets::lqr_mbmix());
  put("pendulum_ablation.ini", presets::pendulum_ablation());
  put("pendulum_variance.ini", presets::pendulum_variance());
  put("tabular.ini", presets::tabular());
  for (const std::string kind : {"mix-real-env", "shac-baseline"})
    for (std::size_t h : presets::softcontact_horizons())
      put("softcontact_" + kind + "_h" + std::to_string(h) + ".ini", presets::softcontact(kind, h));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mbmix acceptance criteria"};
  std::string only, configs_dir, out_dir;
  bool list = false;
  app.add_option("--only", only, "comma-separated criterion numbers");
  app.add_flag("--list", list, "list criteria and exit");
  app.add_option("--write-configs", configs_dir, "write the experiment configs and exit");
  app.add_option("--out", out_dir, "artifact directory for experiment runs");
  CLI11_PARSE(app, argc, argv);

  if (list) {
    for (const auto& c : criteria()) std::cout << c.id << "  " << c.name << "\n";
    return 0;
  }
  if (!configs_dir.empty()) {
    write_configs(configs_dir);
    return 0;
  }
  if (!out_dir.empty()) g_out = out_dir;
  std::set<int> pick;
  for (const auto& s : expcli::detail::split_list(only)) pick.insert(std::stoi(s));

  int failed = 0;
  for (const auto& c : criteria()) {
    if (!pick.empty() && !pick.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << c.id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << c.name
              << " | " << o.detail << " | " << fmt(secs, 3) << " s" << std::endl;
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
