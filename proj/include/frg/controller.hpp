#pragma once

#include <array>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "frg/model_io.hpp"
#include "frg/pomdp.hpp"
#include "frg/solver.hpp"

namespace frg {

struct Terminated : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TraceRecord {
  int step{};
  Index observation{};
  Index action{};
  VectorX<double> belief;
  double beta{};
};

/// Online belief-tracking controller. The caller feeds observations at its
/// own cadence; the controller keeps the belief under the learned model
/// and emits the policy's greedy action.
struct ControllerState {
  const DiscretePomdp<double>* model{};
  const AlphaVectorPolicy<double>* policy{};
  VectorX<double> belief;
  Index last_action{};
  int step{};
  bool terminated{false};
  std::vector<TraceRecord> trace;
};

inline ControllerState controller_init(const DiscretePomdp<double>& model,
                                       const AlphaVectorPolicy<double>& policy) {
  if (policy.vectors.empty())
    throw std::invalid_argument("controller needs a non-empty policy");
  if (model.terminal >= 0 && model.initial_belief[model.terminal] >= 1.0)
    throw std::invalid_argument("initial belief is the terminal state");
  ControllerState st;
  st.model = &model;
  st.policy = &policy;
  st.belief = model.initial_belief;
  st.last_action = policy_action(policy, st.belief);
  st.step = 0;
  return st;
}

struct ControlDecision {
  Index action{};
  double beta{};
};

/// Incorporate one observation, emit the next action. A zero-likelihood
/// observation falls back to the prediction-only update (the observation
/// is discarded) so a deployed controller never halts mid-mission.
inline ControlDecision controller_step(ControllerState& st, Index observation,
                                       bool* discarded_observation = nullptr) {
  if (st.terminated) throw Terminated("controller already saw the terminal state");
  if (discarded_observation) *discarded_observation = false;
  auto next = belief_update(*st.model, st.belief, st.last_action, observation);
  if (next) {
    st.belief = *next;
  } else {
    st.belief = predict_belief(*st.model, st.belief, st.last_action);
    if (discarded_observation) *discarded_observation = true;
  }
  const double beta = marginal_performance(st.belief);
  const Index action = policy_action(*st.policy, st.belief);
  st.trace.push_back({st.step, observation, action, st.belief, beta});
  st.step += 1;
  st.last_action = action;
  if (st.model->terminal >= 0 && observation == st.model->terminal)
    st.terminated = true;
  return {action, beta};
}

struct ThresholdInterval {
  double lo{}, hi{};
  Index action{};
};

/// Per visible configuration: the policy restricted to the two-point
/// sub-simplex, compiled to beta intervals.
struct ThresholdTable {
  std::array<std::vector<ThresholdInterval>, layout::kNumConfigs> per_config;

  std::vector<double> boundaries(Index config) const {
    std::vector<double> out;
    for (std::size_t i = 1; i < per_config[config].size(); ++i)
      out.push_back(per_config[config][i].lo);
    return out;
  }
};

namespace detail {

inline VectorX<double> beta_belief(Index config, double beta) {
  VectorX<double> b = VectorX<double>::Zero(layout::kNumStates);
  b[layout::perf_state(config)] = beta;
  b[layout::nonperf_state(config)] = 1.0 - beta;
  return b;
}

/// The two-point reduction is exact only when observations pin the visible
/// components: every observation row must concentrate on the matching
/// configuration (or on g for g).
inline void require_config_exact_structure(const DiscretePomdp<double>& m) {
  if (m.num_states() != layout::kNumStates ||
      m.terminal != layout::kTerminal ||
      m.num_observations() != layout::kNumStates)
    throw std::invalid_argument(
        "threshold extraction expects the 9-state layout with terminal g");
  for (Index s = 0; s < layout::kNumStates; ++s)
    for (Index o = 0; o < layout::kNumStates; ++o) {
      if (m.observation(s, o) == 0.0) continue;
      const bool both_terminal = s == layout::kTerminal && o == layout::kTerminal;
      const bool same_config =
          s != layout::kTerminal && o != layout::kTerminal &&
          layout::config_of_state(s) == layout::config_of_state(o);
      if (!both_terminal && !same_config)
        throw std::invalid_argument(
            "threshold extraction requires exactly observed visible "
            "components; observation table violates that structure");
    }
}

}  // namespace detail

/// Sweep beta over a uniform grid per configuration and record action
/// changes; each boundary is then sharpened by bisection to 1e-4.
inline ThresholdTable extract_thresholds(const DiscretePomdp<double>& model,
                                         const AlphaVectorPolicy<double>& policy,
                                         Index grid_resolution = 1000) {
  if (grid_resolution < 1000)
    throw std::invalid_argument("grid resolution below 1000 is too coarse");
  detail::require_config_exact_structure(model);
  ThresholdTable table;
  for (Index c = 0; c < layout::kNumConfigs; ++c) {
    auto action_at = [&](double beta) {
      return policy_action(policy, detail::beta_belief(c, beta));
    };
    std::vector<ThresholdInterval>& intervals = table.per_config[c];
    double lo = 0.0;
    Index current = action_at(0.0);
    for (Index g = 1; g <= grid_resolution; ++g) {
      const double beta = static_cast<double>(g) / static_cast<double>(grid_resolution);
      const Index a = action_at(beta);
      if (a == current) continue;
      // bisect the change point inside (beta - 1/grid, beta]
      double left = beta - 1.0 / static_cast<double>(grid_resolution);
      double right = beta;
      while (right - left > 1e-4) {
        const double mid = 0.5 * (left + right);
        if (action_at(mid) == current)
          left = mid;
        else
          right = mid;
      }
      intervals.push_back({lo, right, current});
      lo = right;
      current = a;
    }
    intervals.push_back({lo, 1.0, current});
  }
  return table;
}

// --- trace file --------------------------------------------------------
//
//   step\ttime_seconds\tobservation\taction\tbeta\tb(s_1)\t...\tb(s_S)

inline void write_trace(std::ostream& os, const ControllerState& st,
                        const std::string& header = {}) {
  if (!header.empty()) os << header;
  os << "step\ttime_seconds\tobservation\taction\tbeta";
  for (const auto& label : st.model->states) os << "\tb_" << label;
  os << '\n';
  for (const auto& rec : st.trace) {
    os << rec.step << '\t' << rec.step * 10 << '\t'
       << st.model->observations[rec.observation] << '\t'
       << st.model->actions[rec.action] << '\t' << format_double(rec.beta);
    for (Index s = 0; s < rec.belief.size(); ++s)
      os << '\t' << format_double(rec.belief[s]);
    os << '\n';
  }
}

struct ParsedTraceRecord {
  int step{};
  int time_seconds{};
  std::string observation;
  std::string action;
  double beta{};
  std::vector<double> belief;
};

inline std::vector<ParsedTraceRecord> read_trace(std::istream& is) {
  std::vector<ParsedTraceRecord> out;
  std::string line;
  bool saw_header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      saw_header = true;
      continue;
    }
    std::istringstream ls(line);
    ParsedTraceRecord rec;
    std::string cell;
    std::getline(ls, cell, '\t');
    rec.step = std::stoi(cell);
    std::getline(ls, cell, '\t');
    rec.time_seconds = std::stoi(cell);
    std::getline(ls, rec.observation, '\t');
    std::getline(ls, rec.action, '\t');
    std::getline(ls, cell, '\t');
    rec.beta = std::strtod(cell.c_str(), nullptr);
    while (std::getline(ls, cell, '\t'))
      rec.belief.push_back(std::strtod(cell.c_str(), nullptr));
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace frg
