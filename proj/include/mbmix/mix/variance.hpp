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

// Empirical variance of MIX and SHAC gradient estimates for a frozen
// policy/value snapshot.

#ifndef MBMIX_MIX_VARIANCE_HPP_
#define MBMIX_MIX_VARIANCE_HPP_

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <vector>

#include "mbmix/mix/agent.hpp"

namespace mbmix::mix {

struct VarianceConfig {
  std::vector<std::size_t> h_grid = {4, 8, 16, 32};
  double lambda_mix = 0.95;
  std::size_t n_estimates = 64;
  std::size_t n_branch = 8;  // branches averaged inside one estimate
  std::size_t n_bootstrap = 1000;
  double ci_level = 0.95;
  bool deterministic_policy = false;
};

struct VarianceRow {
  Method method = Method::kMix;
  std::size_t h_max = 0;
  double lambda = 0.0;
  double trace_variance = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// Paired comparison at one horizon: MIX minus SHAC trace-variance.
struct VarianceComparison {
  std::size_t h_max = 0;
  double diff = 0.0;
  double diff_ci_low = 0.0;
  double diff_ci_high = 0.0;
  // Point estimate MIX <= SHAC and the interval does not exclude that.
  bool mix_not_above() const { return diff <= 0.0 && diff_ci_low <= 0.0; }
};

struct GradientStudyReport {
  std::vector<VarianceRow> rows;
  std::vector<VarianceComparison> comparisons;
  std::size_t n_estimates = 0;
  std::uint64_t seed = 0;

  bool mix_not_above_everywhere() const {
    return std::all_of(comparisons.begin(), comparisons.end(),
                       [](const VarianceComparison& c) { return c.mix_not_above(); });
  }
};

inline const char* variance_csv_header() {
  return "method,H_max,lambda,trace_variance,ci_low,ci_high";
}

inline void write_variance_csv(const GradientStudyReport& rep, std::ostream& out) {
  out << variance_csv_header() << "\n";
  auto fmt = [](double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
  };
  for (const auto& r : rep.rows)
    out << to_string(r.method) << "," << r.h_max << "," << fmt(r.lambda) << ","
        << fmt(r.trace_variance) << "," << fmt(r.ci_low) << "," << fmt(r.ci_high) << "\n";
}

// Sum over coordinates of the unbiased sample variance of the selected rows.
// Values are shifted by the first selected row, so identical estimates give
// exactly zero.
inline double trace_variance(const std::vector<std::vector<double>>& est,
                             const std::vector<std::size_t>& rows) {
  if (rows.size() < 2) return 0.0;
  const std::size_t d = est.front().size();
  const double n = static_cast<double>(rows.size());
  double total = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double shift = est[rows.front()][i];
    double mean = 0.0;
    for (std::size_t r : rows) mean += est[r][i] - shift;
    mean /= n;
    double ss = 0.0;
    for (std::size_t r : rows) ss += (est[r][i] - shift - mean) * (est[r][i] - shift - mean);
    total += ss / (n - 1.0);
  }
  return total;
}

inline double percentile(std::vector<double> xs, double q) {
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

// For each H_max, n_estimates estimates with fresh rollout noise from one
// fixed start set. MIX and SHAC share each rollout, so estimate k of both
// methods uses the same noise; bootstrap resamples the pairs.
inline GradientStudyReport variance_study(const env::DiffEnvSpec& spec, const MixConfig& base,
                                          const nets::SquashedGaussianPolicy& policy,
                                          const nets::Mlp& value, const VarianceConfig& vc,
                                          std::uint64_t seed) {
  if (vc.h_grid.empty()) throw Error("variance_study: empty H_max grid");
  if (vc.n_estimates < 32)
    throw Error("variance_study: n_estimates must be >= 32, got " +
                std::to_string(vc.n_estimates));
  for (std::size_t h : vc.h_grid)
    if (h == 0 || h > spec.horizon)
      throw Error("variance_study: H_max " + std::to_string(h) + " outside [1, horizon]");
  const Rng root(seed);
  Rng start_rng = root.split(1);
  Matrix starts(vc.n_branch, spec.state_dim);
  for (std::size_t b = 0; b < vc.n_branch; ++b) {
    Matrix s0 = spec.sample_initial(start_rng);
    for (std::size_t j = 0; j < spec.state_dim; ++j) starts(b, j) = s0(0, j);
  }
  RolloutContext ctx;
  ctx.spec = &spec;
  ctx.world = World::kRealEnv;
  ctx.deterministic_policy = vc.deterministic_policy;

  GradientStudyReport rep;
  rep.n_estimates = vc.n_estimates;
  rep.seed = seed;
  const double tail = (1.0 - vc.ci_level) / 2.0;
  for (std::size_t H : vc.h_grid) {
    MixConfig mc = base;
    mc.h_max = H;
    mc.branch_len = H;
    mc.interval = 1;
    mc.lambda_mix = vc.lambda_mix;
    mc.n_branch = vc.n_branch;
    const Rng noise_root = root.split(1000 + H);
    std::vector<std::vector<double>> mix_est, shac_est;
    for (std::size_t k = 0; k < vc.n_estimates; ++k) {
      GradientBatch b = policy_gradients({Method::kMix, Method::kShac}, ctx, mc, policy, value,
                                         starts, H, noise_root.split(k));
      mix_est.push_back(std::move(b.estimates[0].grad));
      shac_est.push_back(std::move(b.estimates[1].grad));
    }
    std::vector<std::size_t> all(vc.n_estimates);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const double tv_mix = trace_variance(mix_est, all), tv_shac = trace_variance(shac_est, all);
    Rng boot = root.split(2000 + H);
    std::vector<double> bm, bs, bd;
    std::vector<std::size_t> pick(vc.n_estimates);
    for (std::size_t r = 0; r < vc.n_bootstrap; ++r) {
      for (auto& p : pick) p = boot.index(vc.n_estimates);
      const double m = trace_variance(mix_est, pick), s = trace_variance(shac_est, pick);
      bm.push_back(m);
      bs.push_back(s);
      bd.push_back(m - s);
    }
    auto ci = [&](const std::vector<double>& xs) {
      if (xs.empty()) return std::pair<double, double>{0.0, 0.0};
      return std::pair<double, double>{percentile(xs, tail), percentile(xs, 1.0 - tail)};
    };
    auto [ml, mh] = ci(bm);
    auto [sl, sh] = ci(bs);
    auto [dl, dh] = ci(bd);
    rep.rows.push_back({Method::kMix, H, vc.lambda_mix, tv_mix, ml, mh});
    rep.rows.push_back({Method::kShac, H, vc.lambda_mix, tv_shac, sl, sh});
    rep.comparisons.push_back({H, tv_mix - tv_shac, dl, dh});
  }
  return rep;
}

}  // namespace mbmix::mix

#endif  // MBMIX_MIX_VARIANCE_HPP_
