#pragma once

#include <string>
#include <vector>

#include "frg/core.hpp"
#include "frg/rng.hpp"

namespace frg {

/// Fully observed companion model. Visit counts back the Dirichlet
/// posterior used by the candidate-selection baseline.
template <typename Scalar = double>
struct DiscreteMdp {
  std::vector<std::string> states;
  std::vector<std::string> actions;
  std::vector<MatrixX<Scalar>> transition;       // per action, S x S
  std::vector<Eigen::MatrixX<long>> counts;      // per action, visit counts
  VectorX<Scalar> reward;                        // per state, on entry
  Scalar discount{};
  int horizon{};
  VectorX<Scalar> initial_dist;
  Index terminal{-1};

  Index num_states() const { return static_cast<Index>(states.size()); }
  Index num_actions() const { return static_cast<Index>(actions.size()); }
};

template <typename Scalar = double>
struct StatePolicy {
  std::vector<Index> action;  // greedy action per state
  VectorX<Scalar> value;
  Scalar residual{};
  int iterations{};
};

/// Value iteration with reward-on-entry Bellman operator:
///   V(s) = max_a sum_s' T(s'|s,a) (R(s') + gamma V(s'))
/// Runs until the sup-norm update falls below tol.
template <typename Scalar>
StatePolicy<Scalar> solve_mdp_vi(const DiscreteMdp<Scalar>& m, Scalar gamma,
                                 Scalar tol = Scalar(1e-10),
                                 int max_iter = 200000) {
  const Index S = m.num_states();
  const Index A = m.num_actions();
  StatePolicy<Scalar> out;
  out.value = VectorX<Scalar>::Zero(S);
  out.action.assign(S, 0);
  MatrixX<Scalar> q(S, A);
  for (out.iterations = 0; out.iterations < max_iter; ++out.iterations) {
    for (Index a = 0; a < A; ++a)
      q.col(a) = m.transition[a] * (m.reward + gamma * out.value);
    VectorX<Scalar> next(S);
    for (Index s = 0; s < S; ++s) {
      Index best = 0;
      for (Index a = 1; a < A; ++a)
        if (q(s, a) > q(s, best)) best = a;
      next[s] = q(s, best);
      out.action[s] = best;
    }
    out.residual = (next - out.value).template lpNorm<Eigen::Infinity>();
    out.value = next;
    if (out.residual <= tol) break;
  }
  return out;
}

/// Draw one MDP from the Dirichlet posterior over transition rows.
/// Rows with no structurally allowed mass (all-zero in the base model and
/// zero counts) stay as in the base model.
template <typename Scalar>
DiscreteMdp<Scalar> sample_mdp_model(const DiscreteMdp<Scalar>& base,
                                     Scalar alpha0, Rng& rng) {
  DiscreteMdp<Scalar> out = base;
  for (Index a = 0; a < base.num_actions(); ++a) {
    for (Index s = 0; s < base.num_states(); ++s) {
      if (s == base.terminal) continue;
      std::vector<Index> allowed;
      for (Index t = 0; t < base.num_states(); ++t)
        if (base.transition[a](s, t) > Scalar(0)) allowed.push_back(t);
      if (allowed.empty()) continue;
      VectorX<Scalar> alpha(static_cast<Index>(allowed.size()));
      for (std::size_t i = 0; i < allowed.size(); ++i)
        alpha[static_cast<Index>(i)] =
            alpha0 + static_cast<Scalar>(base.counts[a](s, allowed[i]));
      const VectorX<Scalar> draw = sample_dirichlet(rng, alpha);
      out.transition[a].row(s).setZero();
      for (std::size_t i = 0; i < allowed.size(); ++i)
        out.transition[a](s, allowed[i]) = draw[static_cast<Index>(i)];
    }
  }
  return out;
}

}  // namespace frg
