#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "frg/batch.hpp"
#include "frg/extra_trees.hpp"
#include "frg/mdp.hpp"
#include "frg/pomdp.hpp"
#include "frg/rng.hpp"

namespace frg {

struct EmptyData : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonFiniteLikelihood : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One mission as a hidden-chain observation record: obs[t] is emitted by
/// the hidden state at step t, action[t] drives the transition to step
/// t+1. obs has one more entry than action; the last entry is the
/// terminal symbol g.
struct ObservationSequence {
  std::vector<Index> obs;
  std::vector<Index> action;
};

struct ObservationSequenceSet {
  std::vector<ObservationSequence> sequences;
};

/// Run the trained classifiers over the given missions: each step maps to
/// the observation (visible configuration, predicted performance); g is
/// appended at mission end.
inline ObservationSequenceSet classify_sequences(
    const PerformanceClassifier& classifier, const TrajectoryBatch& batch,
    const std::vector<Index>& mission_indices) {
  ObservationSequenceSet set;
  for (const Index mi : mission_indices) {
    const auto& m = batch.missions[mi];
    ObservationSequence seq;
    for (const auto& st : m.steps) {
      if (st.features.size() != classifier.per_config[st.config].n_features)
        throw DimensionMismatch(
            "feature vector length does not match the trained classifier");
      const int perf = classifier.predict(st.config, st.features);
      seq.obs.push_back(perf ? layout::perf_state(st.config)
                             : layout::nonperf_state(st.config));
      seq.action.push_back(st.action);
    }
    seq.obs.push_back(layout::kTerminal);
    set.sequences.push_back(std::move(seq));
  }
  return set;
}

/// Observation sequences copied straight from the batch's recorded states
/// (used when the batch already carries hardened observations, e.g. from
/// the synthetic generator's own relabeling).
inline ObservationSequenceSet sequences_from_state_seq(
    const std::vector<std::vector<Index>>& state_seqs,
    const std::vector<std::vector<Index>>& action_seqs) {
  ObservationSequenceSet set;
  for (std::size_t i = 0; i < state_seqs.size(); ++i) {
    ObservationSequence seq;
    seq.obs = state_seqs[i];
    seq.obs.push_back(layout::kTerminal);
    seq.action = action_seqs[i];
    set.sequences.push_back(std::move(seq));
  }
  return set;
}

/// Observation/action sequences drawn from a model under the uniform
/// random collection policy, each run to natural absorption so the
/// terminal symbol records the model's own gameover event and the fitted
/// hazard stays unbiased. max_len caps runaway missions.
inline ObservationSequenceSet sample_absorbing_sequences(
    const DiscretePomdp<double>& model, Index n_missions, std::uint64_t seed,
    int max_len = 600) {
  ObservationSequenceSet set;
  for (Index mi = 0; mi < n_missions; ++mi) {
    Rng rng(derive_seed(seed, 0xab5ULL, static_cast<std::uint64_t>(mi)));
    ObservationSequence seq;
    Index s = sample_categorical(rng, model.initial_belief);
    for (int t = 0; t < max_len && s != model.terminal; ++t) {
      seq.obs.push_back(sample_categorical(rng, model.observation.row(s)));
      const Index a = static_cast<Index>(uniform_below(rng, model.num_actions()));
      seq.action.push_back(a);
      s = sample_categorical(rng, model.transition[a].row(s));
    }
    seq.obs.push_back(layout::kTerminal);
    set.sequences.push_back(std::move(seq));
  }
  return set;
}

struct EmConfig {
  double tol = 1e-6;
  int max_iter = 500;
  int restarts = 5;
  std::uint64_t seed = 1;
  // Optional warm start: restart 0 begins at these tables instead of the
  // uniform-plus-jitter draw. Zero entries must cover the data's structure.
  std::vector<MatrixX<double>> init;
};

struct EmFitResult {
  std::vector<MatrixX<double>> transition;  // per action, row-stochastic
  std::vector<double> loglik_trace;
  int iterations{};
  bool converged{};
};

namespace detail {

/// Per-action successor configuration, read off the data: every
/// non-terminal observation following action a must share one visible
/// configuration (actions set the visible components deterministically).
/// Actions absent from the data fall back to their own configuration.
inline std::array<Index, layout::kNumActions> successor_configs(
    const ObservationSequenceSet& seqs) {
  std::array<Index, layout::kNumActions> map{};
  for (Index a = 0; a < layout::kNumActions; ++a) map[a] = -1;
  for (const auto& seq : seqs.sequences)
    for (std::size_t t = 0; t + 1 < seq.obs.size(); ++t) {
      if (seq.obs[t + 1] == layout::kTerminal) continue;
      const Index c = layout::config_of_state(seq.obs[t + 1]);
      Index& slot = map[seq.action[t]];
      if (slot < 0)
        slot = c;
      else if (slot != c)
        throw std::invalid_argument(
            "sequences place one action in two visible configurations");
    }
  for (Index a = 0; a < layout::kNumActions; ++a)
    if (map[a] < 0) map[a] = layout::config_of_action(a);
  return map;
}

/// Structurally allowed successors of a non-terminal state under action a:
/// the two performance states of the action's successor configuration,
/// plus g.
inline std::array<Index, 3> allowed_successors(Index config) {
  return {layout::nonperf_state(config), layout::perf_state(config),
          layout::kTerminal};
}

inline std::vector<MatrixX<double>> init_transition(
    const std::array<Index, layout::kNumActions>& succ_config, Rng& rng) {
  using namespace layout;
  std::vector<MatrixX<double>> T(kNumActions,
                                 MatrixX<double>::Zero(kNumStates, kNumStates));
  for (Index a = 0; a < kNumActions; ++a) {
    const auto allowed = allowed_successors(succ_config[a]);
    for (Index s = 0; s < kNumStates; ++s) {
      if (s == kTerminal) continue;
      VectorX<double> alpha = VectorX<double>::Ones(3);
      const VectorX<double> jitter = sample_dirichlet(rng, alpha);
      for (int k = 0; k < 3; ++k)
        T[a](s, allowed[k]) = 0.5 * (1.0 / 3.0) + 0.5 * jitter[k];
    }
    T[a](kTerminal, kTerminal) = 1.0;
  }
  return T;
}

struct EmPass {
  double loglik;
  std::vector<MatrixX<double>> xi_sum;  // per action: expected transitions
};

/// One scaled forward-backward E-step over all sequences. The inner loops
/// exploit the transition tables' zero pattern (three allowed successors
/// per action) and reuse buffers across sequences.
inline EmPass forward_backward(const ObservationSequenceSet& seqs,
                               const MatrixX<double>& B,
                               const std::vector<MatrixX<double>>& T) {
  using namespace layout;
  EmPass pass;
  pass.loglik = 0.0;
  pass.xi_sum.assign(kNumActions, MatrixX<double>::Zero(kNumStates, kNumStates));
  MatrixX<double> alpha;
  VectorX<double> scale, emitted(kNumStates), beta(kNumStates),
      next_beta(kNumStates);
  for (const auto& seq : seqs.sequences) {
    const auto n = static_cast<Index>(seq.obs.size());
    alpha.resize(n, kNumStates);
    scale.resize(n);
    // initial distribution: uniform over the performance pair of the first
    // observed configuration (the visible part is exact)
    const Index c0 = config_of_state(seq.obs[0]);
    alpha.row(0).setZero();
    alpha(0, nonperf_state(c0)) = 0.5 * B(nonperf_state(c0), seq.obs[0]);
    alpha(0, perf_state(c0)) = 0.5 * B(perf_state(c0), seq.obs[0]);
    scale[0] = alpha.row(0).sum();
    if (!(scale[0] > 0.0))
      throw NonFiniteLikelihood("zero-likelihood observation at sequence start");
    alpha.row(0) /= scale[0];
    for (Index t = 1; t < n; ++t) {
      alpha.row(t).noalias() = alpha.row(t - 1) * T[seq.action[t - 1]];
      alpha.row(t).array() *= B.col(seq.obs[t]).transpose().array();
      scale[t] = alpha.row(t).sum();
      if (!(scale[t] > 0.0))
        throw NonFiniteLikelihood(
            "zero-likelihood observation inside a sequence");
      alpha.row(t) /= scale[t];
      pass.loglik += std::log(scale[t]);
    }
    pass.loglik += std::log(scale[0]);
    beta.setOnes();
    for (Index t = n - 2; t >= 0; --t) {
      const Index a = seq.action[t];
      const auto& Ta = T[a];
      auto& xi = pass.xi_sum[a];
      const double inv_scale = 1.0 / scale[t + 1];
      const Index o_next = seq.obs[t + 1];
      for (Index sp = 0; sp < kNumStates; ++sp)
        emitted[sp] = B(sp, o_next) * beta[sp] * inv_scale;
      // xi_t(s, s') = alpha_t(s) T_a(s, s') B(s', o_{t+1}) beta_{t+1}(s')
      for (Index s = 0; s < kNumStates; ++s) {
        const double as = alpha(t, s);
        double acc = 0.0;
        for (Index sp = 0; sp < kNumStates; ++sp) {
          const double tv = Ta(s, sp);
          if (tv == 0.0) continue;
          const double contrib = tv * emitted[sp];
          acc += contrib;
          if (as != 0.0) xi(s, sp) += as * contrib;
        }
        next_beta[s] = acc;
      }
      beta.swap(next_beta);
    }
  }
  return pass;
}

}  // namespace detail

/// Baum-Welch over action-indexed transition parameters with the emission
/// table held fixed. Structural zeros are enforced through the
/// initialization: entries starting at zero stay zero under the updates.
/// Runs `restarts` independently initialized fits and keeps the best final
/// log-likelihood.
inline EmFitResult em_fit(const ObservationSequenceSet& seqs,
                          const MatrixX<double>& emission,
                          const EmConfig& cfg = {}) {
  using namespace layout;
  if (seqs.sequences.empty()) throw EmptyData("no observation sequences");
  for (const auto& seq : seqs.sequences) {
    if (seq.obs.empty() || seq.obs.back() != kTerminal)
      throw std::invalid_argument("sequence must end with the terminal symbol");
    if (seq.obs.size() != seq.action.size() + 1)
      throw std::invalid_argument("sequence has mismatched action count");
  }

  const auto succ_config = detail::successor_configs(seqs);
  EmFitResult best;
  double best_loglik = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng(derive_seed(cfg.seed, 0xe3, static_cast<std::uint64_t>(r)));
    auto T = (r == 0 && !cfg.init.empty())
                 ? cfg.init
                 : detail::init_transition(succ_config, rng);
    EmFitResult fit;
    double prev = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < cfg.max_iter; ++it) {
      const auto pass = detail::forward_backward(seqs, emission, T);
      fit.loglik_trace.push_back(pass.loglik);
      fit.iterations = it + 1;
      // M-step: normalize expected transition counts per (state, action);
      // rows with no data keep their current value for now.
      for (Index a = 0; a < kNumActions; ++a)
        for (Index s = 0; s < kNumStates; ++s) {
          if (s == kTerminal) continue;
          const double total = pass.xi_sum[a].row(s).sum();
          if (total > 0.0) T[a].row(s) = pass.xi_sum[a].row(s) / total;
        }
      if (std::abs(pass.loglik - prev) < cfg.tol) {
        fit.converged = true;
        break;
      }
      prev = pass.loglik;
    }
    // final E-step so the reported likelihood matches the returned tables
    const auto final_pass = detail::forward_backward(seqs, emission, T);
    // unvisited rows are unidentified: pin them to uniform-over-allowed
    for (Index a = 0; a < kNumActions; ++a) {
      const auto allowed = detail::allowed_successors(succ_config[a]);
      for (Index s = 0; s < kNumStates; ++s) {
        if (s == kTerminal) continue;
        if (final_pass.xi_sum[a].row(s).sum() == 0.0) {
          T[a].row(s).setZero();
          for (const Index t : allowed) T[a](s, t) = 1.0 / 3.0;
        }
      }
    }
    fit.transition = T;
    if (final_pass.loglik > best_loglik) {
      best_loglik = final_pass.loglik;
      best = std::move(fit);
    }
  }
  return best;
}

/// Write the per-iteration log-likelihood table (one row per iteration).
inline void write_em_trace(std::ostream& os, const EmFitResult& fit,
                           const std::string& header = {}) {
  if (!header.empty()) os << header;
  os << "iteration\tloglik\n";
  for (std::size_t i = 0; i < fit.loglik_trace.size(); ++i)
    os << i + 1 << '\t' << format_double(fit.loglik_trace[i]) << '\n';
}

struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Put the pieces together into a validated model.
inline DiscretePomdp<double> assemble_pomdp(const EmFitResult& fit,
                                            const MatrixX<double>& obs_table,
                                            const VectorX<double>& rewards,
                                            double gamma, int horizon) {
  DiscretePomdp<double> m;
  m.states = layout::state_labels();
  m.actions = layout::action_labels();
  m.observations = layout::state_labels();
  m.transition = fit.transition;
  m.observation = obs_table;
  m.reward = rewards;
  m.discount = gamma;
  m.horizon = horizon;
  m.initial_belief = VectorX<double>::Zero(layout::kNumStates);
  m.initial_belief[layout::nonperf_state(0)] = 0.5;
  m.initial_belief[layout::perf_state(0)] = 0.5;
  m.terminal = layout::kTerminal;
  const auto violations = validate(m);
  if (!violations.empty()) {
    std::string msg = "assembled model failed validation:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw ValidationFailure(msg);
  }
  return m;
}

/// Count-based MDP over classifier-hardened state sequences. Transition =
/// row-normalized counts with additive smoothing alpha0 on the
/// structurally allowed entries.
inline DiscreteMdp<double> mdp_from_sequences(const ObservationSequenceSet& seqs,
                                              const VectorX<double>& rewards,
                                              double gamma, int horizon,
                                              double alpha0 = 1.0) {
  using namespace layout;
  DiscreteMdp<double> m;
  m.states = state_labels();
  m.actions = action_labels();
  m.reward = rewards;
  m.discount = gamma;
  m.horizon = horizon;
  m.terminal = kTerminal;
  m.initial_dist = VectorX<double>::Zero(kNumStates);
  m.initial_dist[nonperf_state(0)] = 0.5;
  m.initial_dist[perf_state(0)] = 0.5;
  m.counts.assign(kNumActions, Eigen::MatrixX<long>::Zero(kNumStates, kNumStates));
  for (const auto& seq : seqs.sequences)
    for (std::size_t t = 0; t + 1 < seq.obs.size(); ++t)
      m.counts[seq.action[t]](seq.obs[t], seq.obs[t + 1]) += 1;
  const auto succ_config = detail::successor_configs(seqs);
  m.transition.assign(kNumActions, MatrixX<double>::Zero(kNumStates, kNumStates));
  for (Index a = 0; a < kNumActions; ++a) {
    const auto allowed = detail::allowed_successors(succ_config[a]);
    for (Index s = 0; s < kNumStates; ++s) {
      if (s == kTerminal) continue;
      double total = 0.0;
      for (const Index t : allowed)
        total += static_cast<double>(m.counts[a](s, t)) + alpha0;
      for (const Index t : allowed)
        m.transition[a](s, t) =
            (static_cast<double>(m.counts[a](s, t)) + alpha0) / total;
    }
    m.transition[a](kTerminal, kTerminal) = 1.0;
  }
  return m;
}

}  // namespace frg
