#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "frg/model_io.hpp"
#include "frg/pomdp.hpp"
#include "frg/rng.hpp"

namespace frg {

template <typename Scalar = double>
struct AlphaVector {
  VectorX<Scalar> value;
  Index action;
};

/// Piecewise-linear convex value function: value(b) = max_i dot(value_i, b).
template <typename Scalar = double>
struct AlphaVectorPolicy {
  std::vector<AlphaVector<Scalar>> vectors;
  Scalar discount{};
  int iterations{};
  Index belief_count{};
  Scalar residual{};
  bool converged{false};
};

struct SolveConfig {
  Index belief_count = 500;   // total belief-set budget
  Index grid_points = 101;    // per-configuration beta grid (9-state layout)
  int max_iter = 200;         // backup stages
  double epsilon = 1e-4;      // stop when the largest stage improvement drops below
  std::uint64_t seed = 1;
};

template <typename Scalar>
Scalar policy_value(const AlphaVectorPolicy<Scalar>& policy,
                    const VectorX<Scalar>& b) {
  Scalar best = -std::numeric_limits<Scalar>::infinity();
  for (const auto& v : policy.vectors) best = std::max(best, v.value.dot(b));
  return best;
}

/// Greedy action at b; exact ties go to the lowest action index.
template <typename Scalar>
Index policy_action(const AlphaVectorPolicy<Scalar>& policy,
                    const VectorX<Scalar>& b) {
  Scalar best = -std::numeric_limits<Scalar>::infinity();
  Index action = 0;
  for (const auto& v : policy.vectors) {
    const Scalar val = v.value.dot(b);
    if (val > best || (val == best && v.action < action)) {
      best = val;
      action = v.action;
    }
  }
  return action;
}

/// Drop pointwise-dominated vectors. Exact duplicates keep the lowest
/// action index so greedy tie-breaking is unaffected.
template <typename Scalar>
void prune_dominated(std::vector<AlphaVector<Scalar>>& vecs) {
  std::vector<bool> dead(vecs.size(), false);
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    if (dead[i]) continue;
    for (std::size_t j = 0; j < vecs.size(); ++j) {
      if (i == j || dead[j]) continue;
      const auto diff = vecs[j].value - vecs[i].value;
      if ((diff.array() >= Scalar(0)).all()) {
        const bool equal = (diff.array() == Scalar(0)).all();
        if (!equal || vecs[j].action < vecs[i].action ||
            (vecs[j].action == vecs[i].action && j < i)) {
          dead[i] = true;
          break;
        }
      }
    }
  }
  std::vector<AlphaVector<Scalar>> kept;
  for (std::size_t i = 0; i < vecs.size(); ++i)
    if (!dead[i]) kept.push_back(std::move(vecs[i]));
  vecs = std::move(kept);
}

namespace detail {

/// Belief set for point-based backups, within the belief_count budget:
/// the initial belief and all corners first, then per-configuration beta
/// grids when the model has the 9-state layout, then beliefs reached by
/// random-action exploration from the start until the budget is filled.
template <typename Scalar>
std::vector<VectorX<Scalar>> collect_beliefs(const DiscretePomdp<Scalar>& m,
                                             const SolveConfig& cfg, Rng& rng) {
  const Index S = m.num_states();
  std::vector<VectorX<Scalar>> beliefs;
  beliefs.push_back(m.initial_belief);
  for (Index s = 0; s < S; ++s) {
    VectorX<Scalar> b = VectorX<Scalar>::Zero(S);
    b[s] = Scalar(1);
    beliefs.push_back(b);
  }
  if (S == layout::kNumStates && m.terminal == layout::kTerminal &&
      cfg.grid_points >= 2) {
    for (Index c = 0; c < layout::kNumConfigs; ++c) {
      const Index snp = layout::nonperf_state(c);
      const Index sp = layout::perf_state(c);
      for (Index g = 0; g < cfg.grid_points; ++g) {
        const Scalar beta = Scalar(g) / Scalar(cfg.grid_points - 1);
        VectorX<Scalar> b = VectorX<Scalar>::Zero(S);
        b[sp] = beta;
        b[snp] = Scalar(1) - beta;
        beliefs.push_back(b);
      }
    }
  }
  VectorX<Scalar> b = m.initial_belief;
  const Index structured = static_cast<Index>(beliefs.size());
  for (Index i = structured; i < cfg.belief_count; ++i) {
    const Index a = static_cast<Index>(uniform_below(rng, m.num_actions()));
    const VectorX<Scalar> pred = predict_belief(m, b, a);
    const VectorX<Scalar> obs_probs = m.observation.transpose() * pred;
    const Index o = sample_categorical(rng, obs_probs);
    auto next = belief_update(m, b, a, o);
    if (!next) {
      b = m.initial_belief;
      continue;
    }
    b = *next;
    beliefs.push_back(b);
    if (m.terminal >= 0 && b[m.terminal] > Scalar(0.999)) b = m.initial_belief;
  }
  // dedupe (exact duplicates only; the grids generate many)
  std::vector<VectorX<Scalar>> unique;
  for (const auto& cand : beliefs) {
    bool dup = false;
    for (const auto& u : unique)
      if ((u - cand).template lpNorm<Eigen::Infinity>() < Scalar(1e-12)) {
        dup = true;
        break;
      }
    if (!dup) unique.push_back(cand);
  }
  return unique;
}

}  // namespace detail

/// Point-based value iteration for the discounted infinite-horizon
/// problem: every stage backs up every belief in the set against the
/// previous stage's vectors, so the value at each set member converges
/// monotonically like value iteration restricted to the set. Backups that
/// agree on the (action, per-observation successor) signature share one
/// vector, which keeps the set compact.
template <typename Scalar>
AlphaVectorPolicy<Scalar> solve_pomdp(const DiscretePomdp<Scalar>& m,
                                      Scalar gamma,
                                      const SolveConfig& cfg = {}) {
  const Index S = m.num_states();
  const Index A = m.num_actions();
  const Index O = m.num_observations();
  Rng rng(derive_seed(cfg.seed, 0x50115eULL));

  const auto beliefs = detail::collect_beliefs(m, cfg, rng);
  const Index nb = static_cast<Index>(beliefs.size());
  MatrixX<Scalar> B(S, nb);  // one belief per column
  for (Index i = 0; i < nb; ++i) B.col(i) = beliefs[i];

  // M[a][o](s, s') = T_a(s, s') O(s', o); backup works on these products.
  // Pairs with an all-zero product (observation unreachable under the
  // action) contribute nothing to any backup and are skipped outright.
  std::vector<std::vector<MatrixX<Scalar>>> M(A);
  std::vector<std::vector<char>> live(A, std::vector<char>(O, 0));
  for (Index a = 0; a < A; ++a) {
    M[a].reserve(O);
    for (Index o = 0; o < O; ++o) {
      M[a].push_back(m.transition[a] * m.observation.col(o).asDiagonal());
      live[a][o] = (M[a][o].array() != Scalar(0)).any();
    }
  }
  const MatrixX<Scalar> Ra = expected_action_rewards(m);  // A x S

  AlphaVectorPolicy<Scalar> policy;
  policy.discount = gamma;
  policy.belief_count = nb;
  const Scalar rmin = m.reward.minCoeff();
  policy.vectors.push_back(
      {VectorX<Scalar>::Constant(S, rmin / (Scalar(1) - gamma)), 0});

  std::vector<std::vector<MatrixX<Scalar>>> G(A);        // per (a,o): n x S
  std::vector<std::vector<MatrixX<Scalar>>> proj(A);     // per (a,o): n x nb
  for (int stage = 0; stage < cfg.max_iter; ++stage) {
    const Index nv = static_cast<Index>(policy.vectors.size());
    MatrixX<Scalar> Vmat(nv, S);
    for (Index i = 0; i < nv; ++i) Vmat.row(i) = policy.vectors[i].value;
    for (Index a = 0; a < A; ++a) {
      G[a].assign(O, MatrixX<Scalar>());
      proj[a].assign(O, MatrixX<Scalar>());
      for (Index o = 0; o < O; ++o) {
        if (!live[a][o]) continue;
        G[a][o] = Vmat * M[a][o].transpose();
        proj[a][o].noalias() = G[a][o] * B;
      }
    }
    const VectorX<Scalar> vals_old =
        (Vmat * B).colwise().maxCoeff().transpose();

    // Backup each belief; identical signatures collapse to one vector.
    std::map<std::vector<Index>, Index> signature_slot;
    std::vector<AlphaVector<Scalar>> fresh;
    std::vector<Index> kept_old;  // previous vectors carried over
    std::vector<Index> choose(O);
    for (Index i = 0; i < nb; ++i) {
      Scalar best_val = -std::numeric_limits<Scalar>::infinity();
      std::vector<Index> best_sig;
      for (Index a = 0; a < A; ++a) {
        Scalar val = Ra.row(a) * B.col(i);
        for (Index o = 0; o < O; ++o) {
          if (!live[a][o]) {
            choose[o] = -1;
            continue;
          }
          Index k;
          const Scalar contrib = proj[a][o].col(i).maxCoeff(&k);
          val += gamma * contrib;
          choose[o] = k;
        }
        if (val > best_val) {
          best_val = val;
          best_sig.clear();
          best_sig.push_back(a);
          best_sig.insert(best_sig.end(), choose.begin(), choose.end());
        }
      }
      if (best_val >= vals_old[i] - Scalar(1e-12)) {
        if (signature_slot.emplace(best_sig, fresh.size()).second) {
          const Index a = best_sig[0];
          VectorX<Scalar> alpha = Ra.row(a).transpose();
          for (Index o = 0; o < O; ++o)
            if (best_sig[1 + o] >= 0)
              alpha += gamma * G[a][o].row(best_sig[1 + o]).transpose();
          fresh.push_back({std::move(alpha), a});
        }
      } else {
        Index k;
        (Vmat * B.col(i)).maxCoeff(&k);
        if (std::find(kept_old.begin(), kept_old.end(), k) == kept_old.end())
          kept_old.push_back(k);
      }
    }
    for (const Index k : kept_old) fresh.push_back(policy.vectors[k]);

    prune_dominated(fresh);
    policy.vectors = std::move(fresh);
    policy.iterations = stage + 1;
    MatrixX<Scalar> Vnew(static_cast<Index>(policy.vectors.size()), S);
    for (Index i = 0; i < Vnew.rows(); ++i)
      Vnew.row(i) = policy.vectors[i].value;
    const VectorX<Scalar> vals_new =
        (Vnew * B).colwise().maxCoeff().transpose();
    policy.residual = (vals_new - vals_old).maxCoeff();
    if (policy.residual < Scalar(cfg.epsilon)) {
      policy.converged = true;
      break;
    }
  }
  return policy;
}

// --- policy file ---------------------------------------------------------
//
//   # comment header
//   GAMMA: <gamma>
//   META: iterations=<n> beliefs=<n> residual=<r> converged=<0|1>
//   <action-label> v1 ... vS
//
// Values are printed so parse(serialize(p)) reproduces p bit-exactly.

template <typename Scalar>
void write_policy(std::ostream& os, const AlphaVectorPolicy<Scalar>& p,
                  const std::vector<std::string>& action_labels,
                  const std::string& header = {}) {
  if (!header.empty()) os << header;
  os << "GAMMA: " << format_double(p.discount) << '\n';
  os << "META: iterations=" << p.iterations << " beliefs=" << p.belief_count
     << " residual=" << format_double(p.residual)
     << " converged=" << (p.converged ? 1 : 0) << '\n';
  for (const auto& v : p.vectors) {
    os << action_labels[v.action];
    for (Index s = 0; s < v.value.size(); ++s)
      os << ' ' << format_double(v.value[s]);
    os << '\n';
  }
}

template <typename Scalar = double>
AlphaVectorPolicy<Scalar> read_policy(std::istream& is,
                                      const std::vector<std::string>& action_labels) {
  AlphaVectorPolicy<Scalar> p;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (line.rfind("GAMMA:", 0) == 0) {
      std::string key;
      ls >> key >> p.discount;
    } else if (line.rfind("META:", 0) == 0) {
      std::string key, field;
      ls >> key;
      while (ls >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        const std::string name = field.substr(0, eq);
        const std::string val = field.substr(eq + 1);
        if (name == "iterations") p.iterations = std::stoi(val);
        if (name == "beliefs") p.belief_count = std::stol(val);
        if (name == "residual") p.residual = std::strtod(val.c_str(), nullptr);
        if (name == "converged") p.converged = val == "1";
      }
    } else {
      std::string action;
      ls >> action;
      Index ai = -1;
      for (std::size_t a = 0; a < action_labels.size(); ++a)
        if (action_labels[a] == action) ai = static_cast<Index>(a);
      if (ai < 0)
        throw std::runtime_error("policy file: unknown action '" + action + "'");
      std::vector<Scalar> vals;
      Scalar x;
      while (ls >> x) vals.push_back(x);
      AlphaVector<Scalar> v;
      v.value = Eigen::Map<VectorX<Scalar>>(vals.data(), vals.size());
      v.action = ai;
      p.vectors.push_back(std::move(v));
    }
  }
  if (p.vectors.empty()) throw std::runtime_error("policy file: no alpha vectors");
  return p;
}

template <typename Scalar = double>
AlphaVectorPolicy<Scalar> read_policy_file(const std::string& path,
                                           const std::vector<std::string>& action_labels) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_policy<Scalar>(is, action_labels);
}

}  // namespace frg
