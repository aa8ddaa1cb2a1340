#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "frg/core.hpp"
#include "frg/rng.hpp"

namespace frg {

/// Finite POMDP with dense tables. Immutable after construction by
/// convention; all solvers and simulators take it by const reference.
///
/// transition[a](s, s') is the probability of moving to s' when taking
/// action a in state s. observation(s', o) is the probability of observing
/// o after entering s'. Reward is attached to the state being entered.
template <typename Scalar = double>
struct DiscretePomdp {
  std::vector<std::string> states;
  std::vector<std::string> actions;
  std::vector<std::string> observations;
  std::vector<MatrixX<Scalar>> transition;  // one S x S matrix per action
  MatrixX<Scalar> observation;              // S x O, row = entered state
  VectorX<Scalar> reward;                   // per state, collected on entry
  Scalar discount{};
  int horizon{};
  VectorX<Scalar> initial_belief;
  Index terminal{-1};  // absorbing gameover index, -1 if none

  Index num_states() const { return static_cast<Index>(states.size()); }
  Index num_actions() const { return static_cast<Index>(actions.size()); }
  Index num_observations() const {
    return static_cast<Index>(observations.size());
  }
};

template <typename Scalar>
bool is_distribution(const VectorX<Scalar>& v, Scalar tol = Scalar(1e-9)) {
  if (v.size() == 0 || (v.array() < Scalar(0)).any()) return false;
  return std::abs(static_cast<double>(v.sum() - Scalar(1))) <=
         static_cast<double>(tol);
}

/// Model sanity report. Empty result means the model is usable.
template <typename Scalar>
std::vector<std::string> validate(const DiscretePomdp<Scalar>& m,
                                  Scalar row_tol = Scalar(1e-6)) {
  std::vector<std::string> out;
  auto complain = [&out](const std::string& msg) { out.push_back(msg); };

  const Index S = m.num_states();
  if (m.transition.size() != static_cast<std::size_t>(m.num_actions()))
    complain("transition table count does not match action count");
  for (std::size_t a = 0; a < m.transition.size(); ++a) {
    const auto& T = m.transition[a];
    if (T.rows() != S || T.cols() != S) {
      complain("transition[" + std::to_string(a) + "] has wrong shape");
      continue;
    }
    for (Index s = 0; s < S; ++s) {
      if ((T.row(s).array() < Scalar(0)).any())
        complain("negative entry in transition row (" + m.actions[a] + ", " +
                 m.states[s] + ")");
      const double drift = std::abs(static_cast<double>(T.row(s).sum()) - 1.0);
      if (drift > static_cast<double>(row_tol)) {
        std::ostringstream os;
        os << "transition row (" << m.actions[a] << ", " << m.states[s]
           << ") sums to 1" << std::showpos << (T.row(s).sum() - 1.0);
        complain(os.str());
      }
    }
  }

  if (m.observation.rows() != S || m.observation.cols() != m.num_observations())
    complain("observation table has wrong shape");
  else
    for (Index s = 0; s < S; ++s) {
      if ((m.observation.row(s).array() < Scalar(0)).any())
        complain("negative entry in observation row " + m.states[s]);
      const double drift =
          std::abs(static_cast<double>(m.observation.row(s).sum()) - 1.0);
      if (drift > static_cast<double>(row_tol))
        complain("observation row " + m.states[s] + " does not sum to 1");
    }

  if (m.reward.size() != S) complain("reward vector has wrong length");
  if (!(m.discount > Scalar(0) && m.discount < Scalar(1)))
    complain("discount must lie strictly inside (0, 1)");
  if (m.horizon < 1) complain("horizon must be at least 1");
  if (m.initial_belief.size() != S ||
      !is_distribution(m.initial_belief, Scalar(1e-6)))
    complain("initial belief is not a distribution over states");

  if (m.terminal >= 0 && m.terminal < S) {
    for (std::size_t a = 0; a < m.transition.size(); ++a) {
      const auto& T = m.transition[a];
      if (T.rows() == S && T.cols() == S &&
          std::abs(static_cast<double>(T(m.terminal, m.terminal)) - 1.0) >
              static_cast<double>(row_tol))
        complain("terminal state is not absorbing under action " + m.actions[a]);
    }
    if (m.reward.size() == S &&
        m.reward[m.terminal] != Scalar(0))
      complain("terminal state has nonzero reward");
  }
  return out;
}

/// One-step belief prediction: b'(s') = sum_s T(s'|s,a) b(s).
template <typename Scalar>
VectorX<Scalar> predict_belief(const DiscretePomdp<Scalar>& m,
                               const VectorX<Scalar>& b, Index a) {
  return m.transition[a].transpose() * b;
}

/// Bayes filter update. Returns nullopt when the observation has zero
/// likelihood under the model (the caller decides whether that is fatal).
template <typename Scalar>
std::optional<VectorX<Scalar>> belief_update(const DiscretePomdp<Scalar>& m,
                                             const VectorX<Scalar>& b, Index a,
                                             Index o) {
  VectorX<Scalar> next =
      m.observation.col(o).cwiseProduct(predict_belief(m, b, a));
  const Scalar norm = next.sum();
  if (!(norm > Scalar(0))) return std::nullopt;
  next /= norm;
  return next;
}

/// Total belief mass on the performant states (beta_t). Defined on the
/// 9-state FRG layout.
template <typename Scalar>
Scalar marginal_performance(const VectorX<Scalar>& b) {
  if (b.size() != layout::kNumStates)
    throw std::invalid_argument("marginal_performance expects the 9-state layout");
  Scalar beta = Scalar(0);
  for (Index s = 0; s < layout::kNumStates; ++s)
    if (layout::is_performant(s)) beta += b[s];
  return beta;
}

template <typename Scalar>
struct StepResult {
  Index state;
  Index observation;
  Scalar reward;
};

/// Simulation kernel: draw s' ~ T(.|s,a), o ~ O(.|s'), collect R(s').
template <typename Scalar>
StepResult<Scalar> step(const DiscretePomdp<Scalar>& m, Index s, Index a,
                        Rng& rng) {
  const Index next = sample_categorical(rng, m.transition[a].row(s));
  const Index obs = sample_categorical(rng, m.observation.row(next));
  return {next, obs, m.reward[next]};
}

/// Expected immediate reward of (s, a) under reward-on-entry:
/// R(s,a) = sum_s' T(s'|s,a) R(s'). Returned as an A x S matrix.
template <typename Scalar>
MatrixX<Scalar> expected_action_rewards(const DiscretePomdp<Scalar>& m) {
  MatrixX<Scalar> out(m.num_actions(), m.num_states());
  for (Index a = 0; a < m.num_actions(); ++a)
    out.row(a) = (m.transition[a] * m.reward).transpose();
  return out;
}

}  // namespace frg
