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

// Learned dynamics with value and Jacobian supervision.

#ifndef MBMIX_WORLD_MODEL_HPP_
#define MBMIX_WORLD_MODEL_HPP_

#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mbmix/nets/mlp.hpp"
#include "mbmix/nets/optimizer.hpp"
#include "mbmix/world/buffer.hpp"

namespace mbmix::world {

using ad::Tape;
using ad::Value;

enum class ModelMode { kSobolev, kPlain };
enum class JacobianMode { kFull, kProbe };

struct SobolevConfig {
  double alpha = 0.1;
  std::size_t batch_size = 64;
  std::size_t epochs = 5;
  double learning_rate = 1e-3;
  double clip_norm = 10.0;
  ModelMode mode = ModelMode::kSobolev;
  bool warmup = true;  // linear alpha ramp over the model's first epoch
  JacobianMode jacobian_mode = JacobianMode::kFull;
  std::size_t probes = 1;  // random directions per sample in probe mode
  std::size_t max_batches = 0;  // per epoch; 0 means a full pass

  double effective_alpha() const { return mode == ModelMode::kPlain ? 0.0 : alpha; }
};

// s' = s + f((x - mu) / sd) * dsd + dmu with x = [s, a] when residual is on;
// without the residual the net output (de-standardized) is s' itself.
struct DynamicsModel {
  nets::Mlp net;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  bool residual = true;
  Matrix in_mean, in_std;    // 1 x (d_s + d_a)
  Matrix out_mean, out_std;  // 1 x d_s
  std::uint64_t epochs_trained = 0;
};

inline DynamicsModel make_dynamics_model(std::size_t ds, std::size_t da,
                                         const std::vector<std::size_t>& hidden, Rng& rng,
                                         bool residual = true, double output_gain = 0.01) {
  std::vector<std::size_t> widths{ds + da};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(ds);
  DynamicsModel m;
  m.net = nets::make_mlp(widths, nets::OutputTransform::kIdentity, rng, output_gain);
  m.state_dim = ds;
  m.action_dim = da;
  m.residual = residual;
  m.in_mean = Matrix(1, ds + da);
  m.in_std = Matrix(1, ds + da, 1.0);
  m.out_mean = Matrix(1, ds);
  m.out_std = Matrix(1, ds, 1.0);
  return m;
}

// Batched prediction, differentiable in s, a and the bound parameters.
inline Value predict(const DynamicsModel& m, const std::vector<Value>& params, Value s, Value a) {
  using namespace ad;
  Tape& tape = *s.tape();
  Matrix inv(1, m.state_dim + m.action_dim), neg_mean(1, m.state_dim + m.action_dim);
  for (std::size_t c = 0; c < inv.cols; ++c) {
    inv(0, c) = 1.0 / m.in_std(0, c);
    neg_mean(0, c) = -m.in_mean(0, c);
  }
  Value x = mul_broadcast(add_rowwise(concat_cols({s, a}), tape.constant(neg_mean)),
                          tape.constant(inv));
  Value y = nets::forward(m.net, params, x);
  Value out = add_rowwise(mul_broadcast(y, tape.constant(m.out_std)), tape.constant(m.out_mean));
  return m.residual ? add(s, out) : out;
}

inline Value predict(const DynamicsModel& m, Value s, Value a) {
  return predict(m, nets::bind(m.net.params, *s.tape(), false), s, a);
}

inline Matrix predict_values(const DynamicsModel& m, const Matrix& s, const Matrix& a) {
  Tape tape;
  return predict(m, tape.constant(s), tape.constant(a)).value();
}

// Recomputes the standardization from buffer contents and rewrites the
// first and last layers so the composed map is unchanged.
inline void refit_normalization(DynamicsModel& m, const EnvBuffer& buf, double min_std = 1e-6) {
  if (buf.empty()) return;
  const std::size_t ds = m.state_dim, d = m.state_dim + m.action_dim;
  std::vector<double> mi(d, 0.0), vi(d, 0.0), mo(ds, 0.0), vo(ds, 0.0);
  const double n = static_cast<double>(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const auto& t = buf.at(i);
    for (std::size_t c = 0; c < ds; ++c) mi[c] += t.s[c] / n;
    for (std::size_t c = 0; c < m.action_dim; ++c) mi[ds + c] += t.a[c] / n;
    for (std::size_t c = 0; c < ds; ++c)
      mo[c] += (m.residual ? t.s_next[c] - t.s[c] : t.s_next[c]) / n;
  }
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const auto& t = buf.at(i);
    for (std::size_t c = 0; c < ds; ++c) vi[c] += (t.s[c] - mi[c]) * (t.s[c] - mi[c]) / n;
    for (std::size_t c = 0; c < m.action_dim; ++c)
      vi[ds + c] += (t.a[c] - mi[ds + c]) * (t.a[c] - mi[ds + c]) / n;
    for (std::size_t c = 0; c < ds; ++c) {
      const double y = m.residual ? t.s_next[c] - t.s[c] : t.s_next[c];
      vo[c] += (y - mo[c]) * (y - mo[c]) / n;
    }
  }
  Matrix new_in_mean(1, d), new_in_std(1, d), new_out_mean(1, ds), new_out_std(1, ds);
  for (std::size_t c = 0; c < d; ++c) {
    new_in_mean(0, c) = mi[c];
    new_in_std(0, c) = std::max(std::sqrt(vi[c]), min_std);
  }
  for (std::size_t c = 0; c < ds; ++c) {
    new_out_mean(0, c) = mo[c];
    new_out_std(0, c) = std::max(std::sqrt(vo[c]), min_std);
  }
  // First layer: ((x - mu') / sd') W' + b' == ((x - mu) / sd) W + b.
  Matrix& W0 = m.net.weight(0);
  Matrix& b0 = m.net.bias(0);
  for (std::size_t j = 0; j < W0.cols; ++j) {
    double shift = 0.0;
    for (std::size_t i = 0; i < d; ++i) shift += (new_in_mean(0, i) - m.in_mean(0, i)) /
                                                 m.in_std(0, i) * W0(i, j);
    b0(0, j) += shift;
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < W0.cols; ++j) W0(i, j) *= new_in_std(0, i) / m.in_std(0, i);
  // Last layer: (h W' + b') sd' + mu' == (h W + b) sd + mu.
  const std::size_t L = m.net.num_layers() - 1;
  Matrix& WL = m.net.weight(L);
  Matrix& bL = m.net.bias(L);
  for (std::size_t j = 0; j < ds; ++j) {
    const double ratio = m.out_std(0, j) / new_out_std(0, j);
    for (std::size_t i = 0; i < WL.rows; ++i) WL(i, j) *= ratio;
    bL(0, j) = (bL(0, j) * m.out_std(0, j) + m.out_mean(0, j) - new_out_mean(0, j)) /
               new_out_std(0, j);
  }
  m.in_mean = new_in_mean;
  m.in_std = new_in_std;
  m.out_mean = new_out_mean;
  m.out_std = new_out_std;
}

struct SobolevLoss {
  Value total;  // mean over batch of pred + alpha * jac
  Value pred;   // mean ||s_hat' - s'||
  Value jac;    // mean Frobenius error (J_s term + J_a term), unweighted
};

namespace detail {

inline Matrix stack_rows(const std::vector<const Transition*>& batch, const Matrix Transition::*f) {
  const std::size_t cols = ((*batch.front()).*f).cols;
  Matrix out(batch.size(), cols);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const Matrix& m = (*batch[r]).*f;
    if (m.cols != cols || m.rows != 1) throw ShapeError("batch rows have inconsistent widths");
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = m(0, c);
  }
  return out;
}

// B x d_s matrix whose row b is column j of batch[b]'s Jacobian.
inline Matrix jacobian_column(const std::vector<const Transition*>& batch,
                              const Matrix Transition::*f, std::size_t j) {
  const std::size_t ds = ((*batch.front()).*f).rows;
  Matrix out(batch.size(), ds);
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (std::size_t i = 0; i < ds; ++i) out(b, i) = ((*batch[b]).*f)(i, j);
  return out;
}

}  // namespace detail

// probe_rng is only used in probe mode.
inline SobolevLoss sobolev_loss(const DynamicsModel& m, const std::vector<Value>& params,
                                const std::vector<const Transition*>& batch, double alpha,
                                const SobolevConfig& cfg, Tape& tape, Rng* probe_rng = nullptr) {
  using namespace ad;
  if (batch.empty()) throw Error("sobolev_loss: empty batch");
  if (alpha < 0.0) throw Error("sobolev_loss: alpha must be >= 0");
  Value S = tape.constant(detail::stack_rows(batch, &Transition::s));
  Value A = tape.constant(detail::stack_rows(batch, &Transition::a));
  Value Snext = tape.constant(detail::stack_rows(batch, &Transition::s_next));
  Value pred = predict(m, params, S, A);
  SobolevLoss out;
  Value pred_err = row_norm(sub(pred, Snext));  // B x 1
  out.pred = mean(pred_err);
  out.total = out.pred;
  bool have_jacobians = true;
  for (const Transition* t : batch)
    have_jacobians = have_jacobians && !t->J_s.empty() && !t->J_a.empty();
  if (!have_jacobians) {
    if (alpha > 0.0) throw Error("sobolev_loss: transition without Jacobians and alpha > 0");
    return out;
  }
  // The Jacobian error is always reported; it enters the objective only
  // when alpha > 0, so alpha = 0 is exactly the prediction-error loss.
  const std::size_t ds = m.state_dim, da = m.action_dim;
  Value jac_err;
  if (cfg.jacobian_mode == JacobianMode::kFull) {
    std::vector<Value> cols = batch_jacobian_columns(tape, pred, {S, A});
    std::vector<Value> ds_parts, da_parts;
    for (std::size_t j = 0; j < ds; ++j)
      ds_parts.push_back(
          sub(cols[j], tape.constant(detail::jacobian_column(batch, &Transition::J_s, j))));
    for (std::size_t j = 0; j < da; ++j)
      da_parts.push_back(
          sub(cols[ds + j], tape.constant(detail::jacobian_column(batch, &Transition::J_a, j))));
    jac_err = add(row_norm(concat_cols(ds_parts)), row_norm(concat_cols(da_parts)));
  } else {
    // E_v ||(J_hat - J) v||^2 = ||J_hat - J||_F^2 for v ~ N(0, I) over [s, a].
    if (probe_rng == nullptr) throw Error("sobolev_loss: probe mode needs an rng");
    const std::size_t k = std::max<std::size_t>(cfg.probes, 1);
    std::vector<Value> parts;
    for (std::size_t p = 0; p < k; ++p) {
      const Matrix vs = probe_rng->normal_matrix(batch.size(), ds);
      const Matrix va = probe_rng->normal_matrix(batch.size(), da);
      Value jv = jvp(tape, pred, {S, A},
                     std::vector<std::optional<Value>>{tape.constant(vs), tape.constant(va)});
      Matrix target(batch.size(), ds);
      for (std::size_t b = 0; b < batch.size(); ++b)
        for (std::size_t i = 0; i < ds; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < ds; ++j) acc += batch[b]->J_s(i, j) * vs(b, j);
          for (std::size_t j = 0; j < da; ++j) acc += batch[b]->J_a(i, j) * va(b, j);
          target(b, i) = acc;
        }
      parts.push_back(sub(jv, tape.constant(std::move(target))));
    }
    jac_err = scale(row_norm(concat_cols(parts)), 1.0 / std::sqrt(static_cast<double>(k)));
  }
  out.jac = mean(jac_err);
  if (alpha > 0.0) out.total = mean(add(pred_err, scale(jac_err, alpha)));
  return out;
}

inline SobolevLoss sobolev_loss(const DynamicsModel& m,
                                const std::vector<const Transition*>& batch,
                                const SobolevConfig& cfg, Tape& tape, Rng* probe_rng = nullptr) {
  return sobolev_loss(m, nets::bind(m.net.params, tape, true), batch, cfg.effective_alpha(), cfg,
                      tape, probe_rng);
}

struct EpochRecord {
  std::uint64_t epoch = 0;
  double pred_loss = 0.0;
  double jac_loss = 0.0;
  double total = 0.0;
  bool aborted = false;
  std::string message;
};

inline nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json j{{"epoch", r.epoch}, {"pred_loss", r.pred_loss}, {"jac_loss", r.jac_loss},
                   {"total", r.total}};
  if (r.aborted) {
    j["aborted"] = true;
    j["message"] = r.message;
  }
  return j;
}

struct ModelTrainReport {
  std::vector<EpochRecord> epochs;

  void write_jsonl(std::ostream& out) const {
    for (const auto& e : epochs) out << to_json(e).dump() << "\n";
  }
};

struct ModelTrainer {
  DynamicsModel model;
  nets::OptimizerState opt;
};

inline ModelTrainer make_model_trainer(DynamicsModel m, const SobolevConfig& cfg) {
  ModelTrainer t;
  t.opt = nets::make_optimizer(m.net.params,
                               {.learning_rate = cfg.learning_rate, .clip_norm = cfg.clip_norm});
  t.model = std::move(m);
  return t;
}

// cfg.epochs passes of shuffled minibatches over the buffer (at most
// cfg.max_batches each). A non-finite loss or gradient aborts the epoch and
// restores its starting parameters.
inline ModelTrainReport train_model(ModelTrainer& tr, const EnvBuffer& buf,
                                    const SobolevConfig& cfg, Rng& rng,
                                    bool refit_normalizer = true) {
  ModelTrainReport rep;
  if (cfg.epochs == 0) return rep;
  if (buf.size() < 1) throw Error("train_model: empty buffer");
  const std::size_t bs = std::min(cfg.batch_size, buf.size());
  if (refit_normalizer) refit_normalization(tr.model, buf);
  std::size_t batches = buf.size() / bs;
  if (cfg.max_batches > 0) batches = std::min(batches, cfg.max_batches);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    EpochRecord rec;
    rec.epoch = tr.model.epochs_trained;
    const bool ramp = cfg.warmup && tr.model.epochs_trained == 0;
    const auto saved_params = tr.model.net.params;
    const auto saved_opt = tr.opt;
    const auto order = rng.sample_without_replacement(buf.size(), buf.size());
    double pred_sum = 0.0, jac_sum = 0.0, total_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<const Transition*> batch;
      for (std::size_t k = 0; k < bs; ++k) batch.push_back(&buf.at(order[b * bs + k]));
      double alpha = cfg.effective_alpha();
      if (ramp) alpha *= static_cast<double>(b + 1) / static_cast<double>(batches);
      Tape tape;
      auto params = nets::bind(tr.model.net.params, tape, true);
      SobolevLoss l = sobolev_loss(tr.model, params, batch, alpha, cfg, tape, &rng);
      const double total = l.total.item();
      if (!std::isfinite(total)) {
        rec.aborted = true;
        rec.message = "non-finite loss at batch " + std::to_string(b);
        break;
      }
      auto grads = nets::collect_grads(ad::backward(tape, l.total), params);
      auto step = nets::apply_gradients(tr.model.net.params, grads, tr.opt);
      if (!step.applied) {
        rec.aborted = true;
        rec.message = step.skipped_reason + " at batch " + std::to_string(b);
        break;
      }
      pred_sum += l.pred.item();
      jac_sum += l.jac.valid() ? l.jac.item() : 0.0;
      total_sum += total;
    }
    if (rec.aborted) {
      tr.model.net.params = saved_params;
      tr.opt = saved_opt;
    }
    const double nb = static_cast<double>(std::max<std::size_t>(batches, 1));
    rec.pred_loss = pred_sum / nb;
    rec.jac_loss = jac_sum / nb;
    rec.total = total_sum / nb;
    ++tr.model.epochs_trained;
    rep.epochs.push_back(rec);
  }
  return rep;
}

struct ModelMetrics {
  std::size_t n = 0;
  double one_step_error = 0.0;  // mean ||s_hat' - s'||
  double jac_s_error = 0.0;     // mean ||J_hat_s - J_s||_F
  double jac_a_error = 0.0;
  double jac_error = 0.0;       // jac_s_error + jac_a_error
  std::map<std::size_t, double> rollout_error;  // k -> mean ||s_hat_{t+k} - s_{t+k}||
  std::map<std::size_t, std::size_t> rollout_count;
};

inline env::Jacobians model_jacobians(const DynamicsModel& m, const Matrix& s, const Matrix& a) {
  Tape tape;
  Value sv = tape.variable(s), av = tape.variable(a);
  Value next = predict(m, sv, av);
  return {ad::jacobian(tape, next, {sv}).value(), ad::jacobian(tape, next, {av}).value()};
}

// Held-out metrics. Open-loop k-step errors use every start whose next k
// transitions are consecutive steps of one episode, replaying the recorded
// actions through the model.
inline ModelMetrics evaluate_model(const DynamicsModel& m, const std::vector<Transition>& heldout,
                                   const std::vector<std::size_t>& horizons = {1, 5, 10}) {
  if (heldout.empty()) throw Error("evaluate_model: empty held-out set");
  ModelMetrics out;
  out.n = heldout.size();
  std::vector<const Transition*> all;
  for (const auto& t : heldout) all.push_back(&t);
  const Matrix S = detail::stack_rows(all, &Transition::s);
  const Matrix A = detail::stack_rows(all, &Transition::a);
  const Matrix pred = predict_values(m, S, A);
  const double n = static_cast<double>(heldout.size());
  for (std::size_t b = 0; b < heldout.size(); ++b) {
    double e = 0.0;
    for (std::size_t c = 0; c < m.state_dim; ++c) {
      const double d = pred(b, c) - heldout[b].s_next[c];
      e += d * d;
    }
    out.one_step_error += std::sqrt(e) / n;
    if (!heldout[b].J_s.empty()) {
      auto j = model_jacobians(m, heldout[b].s, heldout[b].a);
      out.jac_s_error += kernels::frobenius_norm(kernels::zip(
                             j.J_s, heldout[b].J_s, [](double x, double y) { return x - y; })) /
                         n;
      out.jac_a_error += kernels::frobenius_norm(kernels::zip(
                             j.J_a, heldout[b].J_a, [](double x, double y) { return x - y; })) /
                         n;
    }
  }
  out.jac_error = out.jac_s_error + out.jac_a_error;
  for (std::size_t k : horizons) {
    if (k == 0) continue;
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i + k <= heldout.size(); ++i) {
      bool ok = true;
      for (std::size_t j = 1; j < k && ok; ++j)
        ok = heldout[i + j].episode == heldout[i].episode &&
             heldout[i + j].step == heldout[i].step + j;
      if (ok) starts.push_back(i);
    }
    out.rollout_count[k] = starts.size();
    if (starts.empty()) continue;
    Matrix s(starts.size(), m.state_dim), a(starts.size(), m.action_dim);
    for (std::size_t r = 0; r < starts.size(); ++r)
      for (std::size_t c = 0; c < m.state_dim; ++c) s(r, c) = heldout[starts[r]].s[c];
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t r = 0; r < starts.size(); ++r)
        for (std::size_t c = 0; c < m.action_dim; ++c) a(r, c) = heldout[starts[r] + j].a[c];
      s = predict_values(m, s, a);
    }
    double total = 0.0;
    for (std::size_t r = 0; r < starts.size(); ++r) {
      double e = 0.0;
      for (std::size_t c = 0; c < m.state_dim; ++c) {
        const double d = s(r, c) - heldout[starts[r] + k - 1].s_next[c];
        e += d * d;
      }
      total += std::sqrt(e);
    }
    out.rollout_error[k] = total / static_cast<double>(starts.size());
  }
  return out;
}

}  // namespace mbmix::world

#endif  // MBMIX_WORLD_MODEL_HPP_
