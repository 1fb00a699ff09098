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

// Runs experiments and writes the artifact tree
//   {root}/{kind}/{seed}/resolved_config.ini, *.csv, summary.json, checkpoints
// or failure.json when a run aborts.

#ifndef MBMIX_EXP_RUNNER_HPP_
#define MBMIX_EXP_RUNNER_HPP_

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "mbmix/exp/config.hpp"
#include "mbmix/nets/checkpoint.hpp"

namespace mbmix::expcli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kOutputRootEnv = "MBMIX_OUTPUT_ROOT";

inline fs::path output_root(const ExperimentConfig& c) {
  if (const char* env = std::getenv(kOutputRootEnv); env != nullptr && *env != '\0') return env;
  return c.outdir;
}

// ---- Tabular --------------------------------------------------------------

inline std::vector<TabularRunRecord> run_tabular(const ExperimentConfig& c, std::uint64_t seed) {
  std::vector<TabularRunRecord> all;
  for (TabularMethod m : c.tabular_methods) {
    auto recs = run_tabular_method(m, c.tabular_config(), seed);
    all.insert(all.end(), recs.begin(), recs.end());
  }
  return all;
}

inline void write_tabular_csv(const std::vector<TabularRunRecord>& recs, std::ostream& out) {
  out << "env_steps,reward_per_step,method\n";
  for (const auto& r : recs)
    out << r.env_steps << "," << mix::format_double(r.reward_per_step) << "," << to_string(r.method)
        << "\n";
}

// ---- Model ablation -------------------------------------------------------

struct PredictionRow {
  std::size_t t = 0;
  std::vector<double> actual, one_step, open_loop;
};

// One deterministic real episode with the model's one-step and open-loop
// predictions along it.
inline std::vector<PredictionRow> prediction_trace(const world::DynamicsModel& model,
                                                   const env::DiffEnvSpec& spec,
                                                   const nets::SquashedGaussianPolicy& policy,
                                                   std::size_t steps, const Rng& rng) {
  env::EnvRunner runner(spec, 1, rng);
  auto ts = runner.collect(policy, std::min(steps, spec.horizon), true, false);
  std::vector<PredictionRow> out;
  if (ts.empty()) return out;
  Matrix open = ts.front().s;
  for (std::size_t t = 0; t < ts.size(); ++t) {
    if (t > 0 && ts[t].episode != ts[t - 1].episode) break;
    PredictionRow row;
    row.t = t + 1;
    const Matrix one = world::predict_values(model, ts[t].s, ts[t].a);
    open = world::predict_values(model, open, ts[t].a);
    for (std::size_t j = 0; j < spec.state_dim; ++j) {
      row.actual.push_back(ts[t].s_next(0, j));
      row.one_step.push_back(one(0, j));
      row.open_loop.push_back(open(0, j));
    }
    out.push_back(std::move(row));
  }
  return out;
}

struct AblationArm {
  std::string name;  // sobolev | plain
  mix::TrainResult result;
  std::vector<PredictionRow> trace;
};

struct AblationReport {
  AblationArm sobolev, plain;
  bool jac_sobolev_below_plain() const {
    return sobolev.result.heldout && plain.result.heldout &&
           sobolev.result.heldout->jac_error < plain.result.heldout->jac_error;
  }
};

// MB-MIX twice on the same env and seed: Sobolev arm with the configured
// alpha, plain arm with alpha = 0.
inline AblationReport run_model_ablation(const ExperimentConfig& c, std::uint64_t seed) {
  const env::DiffEnvSpec spec = make_env(c, seed);
  AblationReport rep;
  auto run_arm = [&](world::ModelMode mode, const std::string& name) {
    world::SobolevConfig sc = c.model;
    sc.mode = mode;
    AblationArm arm;
    arm.name = name;
    arm.result = mix::train_mbmix(spec, c.mix, sc, c.agent(), c.train_config(), seed);
    if (arm.result.model)
      arm.trace = prediction_trace(*arm.result.model, spec, arm.result.policy, spec.horizon,
                                   Rng(seed).split(0xF16));
    return arm;
  };
  rep.sobolev = run_arm(world::ModelMode::kSobolev, "sobolev");
  rep.plain = run_arm(world::ModelMode::kPlain, "plain");
  return rep;
}

inline json metrics_json(const world::ModelMetrics& m) {
  json j{{"n", m.n},
         {"one_step_error", m.one_step_error},
         {"jac_s_error", m.jac_s_error},
         {"jac_a_error", m.jac_a_error},
         {"jac_error", m.jac_error}};
  for (const auto& [k, v] : m.rollout_error) j["rollout_error"][std::to_string(k)] = v;
  return j;
}

// ---- Shared summaries -----------------------------------------------------

// Totals here are recomputed from the same rows the CSV holds.
inline json curve_summary(const std::vector<mix::CurveRecord>& curve) {
  json j{{"rows", curve.size()}};
  if (curve.empty()) return j;
  const auto& last = curve.back();
  double best = curve.front().eval_return_mean;
  for (const auto& r : curve) best = std::max(best, r.eval_return_mean);
  j["final"] = {{"outer_iter", last.outer_iter},
                {"env_steps", last.env_steps},
                {"eval_return_mean", last.eval_return_mean},
                {"eval_return_std", last.eval_return_std}};
  j["best_eval_return_mean"] = best;
  return j;
}

inline json train_summary(const mix::TrainResult& r, const env::DiffEnvSpec& spec, double gamma) {
  json j = curve_summary(r.curve);
  j["env_steps"] = r.env_steps;
  j["updates"] = r.updates;
  j["skipped_updates"] = r.skipped_updates;
  j["failures"] = r.failures;
  if (r.heldout) j["heldout"] = metrics_json(*r.heldout);
  if (spec.lqr) {
    const auto s = mix::lqr_summary(r.policy, spec, gamma);
    j["lqr"] = {{"policy_cost", s.policy_cost}, {"optimal_cost", s.optimal_cost},
                {"ratio", s.ratio}};
  }
  return j;
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw Error("cannot open '" + p.string() + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + p.string() + "'");
}

template <typename F>
void write_stream(const fs::path& p, F&& f) {
  std::ofstream out(p);
  if (!out) throw Error("cannot open '" + p.string() + "' for writing");
  f(out);
  if (!out) throw Error("failed writing '" + p.string() + "'");
}

inline void write_checkpoints(const fs::path& dir, const mix::TrainResult& r,
                              const std::string& prefix = "") {
  nets::save_policy(r.policy, (dir / (prefix + "policy.json")).string());
  nets::save_json(nets::mlp_to_json(r.value), (dir / (prefix + "value.json")).string());
  if (r.model) nets::save_json(nets::mlp_to_json(r.model->net), (dir / (prefix + "model.json")).string());
}

// ---- One run --------------------------------------------------------------

struct RunOutcome {
  std::string kind;
  std::uint64_t seed = 0;
  fs::path dir;
  bool ok = false;
  std::string error;
  json summary;
};

// The resolved config of a single (kind, seed) run regenerates its directory.
inline ExperimentConfig single_run_config(const ExperimentConfig& c, const std::string& kind,
                                          std::uint64_t seed) {
  ExperimentConfig one = c;
  one.kinds = {kind};
  one.seeds = {seed};
  return one;
}

inline json run_kind(const ExperimentConfig& c, const std::string& kind, std::uint64_t seed,
                     const fs::path& dir) {
  json s{{"kind", kind}, {"seed", seed}};
  if (kind == "tabular") {
    const auto recs = run_tabular(c, seed);
    write_stream(dir / "curve.csv", [&](std::ostream& o) { write_tabular_csv(recs, o); });
    s["rows"] = recs.size();
    for (TabularMethod m : c.tabular_methods) {
      std::size_t n = 0;
      const TabularRunRecord* last = nullptr;
      for (const auto& r : recs)
        if (r.method == m) {
          ++n;
          last = &r;
        }
      s["methods"][to_string(m)] = {{"rows", n},
                                    {"final_env_steps", last ? last->env_steps : 0},
                                    {"final_reward_per_step", last ? last->reward_per_step : 0.0}};
    }
    return s;
  }
  const env::DiffEnvSpec spec = make_env(c, seed);
  s["env"] = spec.name;
  if (kind == "mbmix" || kind == "shac-baseline" || kind == "mix-real-env") {
    auto r = mix::train(mix::algorithm_from_string(kind), spec, c.mix, c.model, c.agent(),
                        c.train_config(), seed);
    write_stream(dir / "curve.csv", [&](std::ostream& o) { mix::write_curve_csv(r.curve, o); });
    write_checkpoints(dir, r);
    s.update(train_summary(r, spec, c.mix.gamma));
    return s;
  }
  if (kind == "model-ablation") {
    auto rep = run_model_ablation(c, seed);
    json heldout_rows = json::array();
    for (const AblationArm* arm : {&rep.sobolev, &rep.plain}) {
      write_stream(dir / ("curve_" + arm->name + ".csv"),
                   [&](std::ostream& o) { mix::write_curve_csv(arm->result.curve, o); });
      write_checkpoints(dir, arm->result, arm->name + "_");
      s["arms"][arm->name] = train_summary(arm->result, spec, c.mix.gamma);
    }
    write_stream(dir / "heldout.csv", [&](std::ostream& o) {
      o << "arm,n,one_step_error,jac_s_error,jac_a_error,jac_error\n";
      for (const AblationArm* arm : {&rep.sobolev, &rep.plain}) {
        if (!arm->result.heldout) continue;
        const auto& m = *arm->result.heldout;
        o << arm->name << "," << m.n << "," << mix::format_double(m.one_step_error) << ","
          << mix::format_double(m.jac_s_error) << "," << mix::format_double(m.jac_a_error) << ","
          << mix::format_double(m.jac_error) << "\n";
      }
    });
    write_stream(dir / "predictions.csv", [&](std::ostream& o) {
      o << "arm,t";
      for (const char* what : {"actual", "one_step", "open_loop"})
        for (std::size_t j = 0; j < spec.state_dim; ++j) o << "," << what << "_" << j;
      o << "\n";
      for (const AblationArm* arm : {&rep.sobolev, &rep.plain})
        for (const auto& row : arm->trace) {
          o << arm->name << "," << row.t;
          for (const auto* v : {&row.actual, &row.one_step, &row.open_loop})
            for (double x : *v) o << "," << mix::format_double(x);
          o << "\n";
        }
    });
    s["jac_sobolev_below_plain"] = rep.jac_sobolev_below_plain();
    return s;
  }
  if (kind == "variance-study") {
    mix::TrainConfig tc = c.train_config();
    tc.budget = c.variance.snapshot_budget;
    auto snap = mix::train(c.variance.snapshot_algorithm, spec, c.mix, c.model, c.agent(), tc,
                           seed);
    write_checkpoints(dir, snap, "snapshot_");
    auto rep = mix::variance_study(spec, c.mix, snap.policy, snap.value, c.variance.study, seed);
    write_stream(dir / "variance.csv", [&](std::ostream& o) { mix::write_variance_csv(rep, o); });
    write_stream(dir / "comparison.csv", [&](std::ostream& o) {
      o << "H_max,diff,diff_ci_low,diff_ci_high,mix_not_above\n";
      for (const auto& cmp : rep.comparisons)
        o << cmp.h_max << "," << mix::format_double(cmp.diff) << ","
          << mix::format_double(cmp.diff_ci_low) << "," << mix::format_double(cmp.diff_ci_high)
          << "," << (cmp.mix_not_above() ? "true" : "false") << "\n";
    });
    s["rows"] = rep.rows.size();
    s["n_estimates"] = rep.n_estimates;
    s["snapshot_env_steps"] = snap.env_steps;
    s["mix_not_above_everywhere"] = rep.mix_not_above_everywhere();
    return s;
  }
  throw ConfigError("unknown experiment '" + kind + "'");
}

inline RunOutcome run_one(const ExperimentConfig& c, const std::string& kind,
                          std::uint64_t seed) {
  RunOutcome out;
  out.kind = kind;
  out.seed = seed;
  out.dir = output_root(c) / kind / std::to_string(seed);
  fs::create_directories(out.dir);
  fs::remove(out.dir / "failure.json");
  const ExperimentConfig one = single_run_config(c, kind, seed);
  write_text(out.dir / "resolved_config.ini", to_ini(one));
  try {
    out.summary = run_kind(one, kind, seed, out.dir);
    nets::save_json(out.summary, (out.dir / "summary.json").string());
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
    nets::save_json(json{{"kind", kind}, {"seed", seed}, {"error", out.error}},
                    (out.dir / "failure.json").string());
  }
  return out;
}

struct SuiteResult {
  std::vector<RunOutcome> runs;
  bool ok() const {
    return std::all_of(runs.begin(), runs.end(), [](const RunOutcome& r) { return r.ok; });
  }
};

// Every kind for every seed; a failed run does not stop the rest.
inline SuiteResult run_suite(const ExperimentConfig& c) {
  validate(c);
  SuiteResult res;
  for (const auto& kind : c.kinds)
    for (std::uint64_t seed : c.seeds) res.runs.push_back(run_one(c, kind, seed));
  return res;
}

}  // namespace mbmix::expcli

#endif  // MBMIX_EXP_RUNNER_HPP_
