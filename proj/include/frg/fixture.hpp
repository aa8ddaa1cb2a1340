#pragma once

#include <vector>

#include "frg/observation.hpp"
#include "frg/pomdp.hpp"

namespace frg {

/// Built-in Firefighter Robot Game model: transcribed transition, reward
/// and confusion tables for the 9-state, 4-action domain.
///
/// The transcribed transition rows carry three-decimal rounding, so a few
/// row sums drift by +-0.001; the assembled model divides each row by its
/// sum. frg_transition_tables() returns the untouched values.
namespace fixture {

/// Transition tables exactly as transcribed, one 9x9 matrix per action
/// (manual_on, manual_off, auto_on, auto_off). Rows are current states.
inline std::vector<MatrixX<double>> frg_transition_tables() {
  using M = MatrixX<double>;
  std::vector<M> T(layout::kNumActions, M::Zero(9, 9));
  // clang-format off
  T[0] << 0, 0.917, 0, 0.067, 0, 0, 0, 0, 0.017,
          0, 0.917, 0, 0.065, 0, 0, 0, 0, 0.019,
          0, 0.027, 0, 0.956, 0, 0, 0, 0, 0.017,
          0, 0.032, 0, 0.956, 0, 0, 0, 0, 0.012,
          0, 0.945, 0, 0.051, 0, 0, 0, 0, 0.005,
          0, 0.931, 0, 0.063, 0, 0, 0, 0, 0.006,
          0, 0.018, 0, 0.973, 0, 0, 0, 0, 0.009,
          0, 0.016, 0, 0.965, 0, 0, 0, 0, 0.020,
          0, 0,     0, 0,     0, 0, 0, 0, 1;
  T[1] << 0.914, 0, 0.069, 0, 0, 0, 0, 0, 0.017,
          0.914, 0, 0.067, 0, 0, 0, 0, 0, 0.018,
          0.020, 0, 0.963, 0, 0, 0, 0, 0, 0.017,
          0.024, 0, 0.964, 0, 0, 0, 0, 0, 0.012,
          0.940, 0, 0.055, 0, 0, 0, 0, 0, 0.005,
          0.923, 0, 0.071, 0, 0, 0, 0, 0, 0.006,
          0.015, 0, 0.976, 0, 0, 0, 0, 0, 0.009,
          0.013, 0, 0.967, 0, 0, 0, 0, 0, 0.020,
          0,     0, 0,     0, 0, 0, 0, 0, 1;
  T[2] << 0, 0, 0, 0, 0.941, 0, 0.042, 0, 0.017,
          0, 0, 0, 0, 0.940, 0, 0.042, 0, 0.018,
          0, 0, 0, 0, 0.020, 0, 0.963, 0, 0.017,
          0, 0, 0, 0, 0.025, 0, 0.963, 0, 0.012,
          0, 0, 0, 0, 0.921, 0, 0.074, 0, 0.005,
          0, 0, 0, 0, 0.916, 0, 0.079, 0, 0.006,
          0, 0, 0, 0, 0.023, 0, 0.968, 0, 0.009,
          0, 0, 0, 0, 0.019, 0, 0.961, 0, 0.020,
          0, 0, 0, 0, 0,     0, 0,     0, 1;
  T[3] << 0, 0, 0, 0, 0.944, 0, 0.039, 0, 0.017,
          0, 0, 0, 0, 0.943, 0, 0.038, 0, 0.018,
          0, 0, 0, 0, 0.021, 0, 0.963, 0, 0.017,
          0, 0, 0, 0, 0.025, 0, 0.962, 0, 0.012,
          0, 0, 0, 0, 0.932, 0, 0.064, 0, 0.005,
          0, 0, 0, 0, 0.929, 0, 0.066, 0, 0.006,
          0, 0, 0, 0, 0.031, 0, 0.961, 0, 0.009,
          0, 0, 0, 0, 0.026, 0, 0.954, 0, 0.020,
          0, 0, 0, 0, 0,     0, 0,     0, 1;
  // clang-format on
  return T;
}

/// Average fires extinguished per 10 s step, by hidden state.
inline VectorX<double> frg_reward_table() {
  VectorX<double> r(9);
  r << 0.257, 0.289, 0.603, 0.741, 0.257, 0.333, 0.432, 0.493, 0.0;
  return r;
}

/// Classifier confusion counts on the held-out test partition, per visible
/// configuration (manual_on, manual_off, auto_on, auto_off).
inline ConfusionCounts frg_confusion_counts() {
  ConfusionCounts cc;
  cc.counts[0] << 113, 43, 71, 105;
  cc.counts[1] << 105, 51, 51, 125;
  cc.counts[2] << 99, 70, 46, 140;
  cc.counts[3] << 91, 39, 55, 97;
  return cc;
}

/// Row-normalized confusion values at table precision (two decimals);
/// these, not the exact count ratios, define the fixture observation
/// function.
inline std::array<Eigen::Matrix2d, layout::kNumConfigs> frg_observation_rows() {
  std::array<Eigen::Matrix2d, layout::kNumConfigs> rows;
  rows[0] << 0.72, 0.28, 0.40, 0.60;
  rows[1] << 0.67, 0.33, 0.29, 0.71;
  rows[2] << 0.59, 0.41, 0.25, 0.75;
  rows[3] << 0.70, 0.30, 0.36, 0.64;
  return rows;
}

inline VectorX<double> frg_initial_belief() {
  VectorX<double> b = VectorX<double>::Zero(layout::kNumStates);
  // Missions start in manual mode with alarms on; performance is unknown.
  b[layout::nonperf_state(0)] = 0.5;
  b[layout::perf_state(0)] = 0.5;
  return b;
}

}  // namespace fixture

struct FrgFixture {
  DiscretePomdp<double> model;
  ConfusionCounts counts;
  ObservationPosterior posterior;
};

/// Assemble the built-in model: row-normalized transcribed transitions,
/// two-decimal observation rows, reward table, gamma = 0.98, horizon 60,
/// and the Dirichlet posterior from the confusion counts with prior
/// alpha0.
/// Interface-level semantics for data collection: every action's successor
/// mass is relocated to the states of the action's own configuration (the
/// np/p/g split is preserved). The transcribed auto-alarms-on table keeps
/// its successors in the alarms-off columns, so a batch generated straight
/// from it could never visit the auto-alarms-on configuration; this
/// transform restores visits to all four configurations for the classifier
/// and EM path while keeping the fixture itself verbatim.
inline DiscretePomdp<double> collection_model(const DiscretePomdp<double>& m) {
  using namespace layout;
  auto out = m;
  for (Index a = 0; a < kNumActions; ++a) {
    const Index c = config_of_action(a);
    for (Index s = 0; s < kNumStates; ++s) {
      if (s == kTerminal) continue;
      double np = 0, p = 0, g = 0;
      for (Index t = 0; t < kNumStates; ++t) {
        const double v = m.transition[a](s, t);
        if (t == kTerminal)
          g += v;
        else if (is_performant(t))
          p += v;
        else
          np += v;
      }
      out.transition[a].row(s).setZero();
      out.transition[a](s, nonperf_state(c)) = np;
      out.transition[a](s, perf_state(c)) = p;
      out.transition[a](s, kTerminal) = g;
    }
  }
  return out;
}

inline FrgFixture build_frg_fixture(double gamma = 0.98, int horizon = 60,
                                    double alpha0 = 1.0) {
  FrgFixture fx;
  fx.model.states = layout::state_labels();
  fx.model.actions = layout::action_labels();
  fx.model.observations = layout::state_labels();
  fx.model.transition = fixture::frg_transition_tables();
  for (auto& T : fx.model.transition)
    for (Index s = 0; s < T.rows(); ++s) T.row(s) /= T.row(s).sum();
  fx.model.observation = embed_observation_rows(fixture::frg_observation_rows());
  fx.model.reward = fixture::frg_reward_table();
  fx.model.discount = gamma;
  fx.model.horizon = horizon;
  fx.model.initial_belief = fixture::frg_initial_belief();
  fx.model.terminal = layout::kTerminal;
  fx.counts = fixture::frg_confusion_counts();
  fx.posterior = dirichlet_posterior(fx.counts, alpha0);
  return fx;
}

}  // namespace frg
