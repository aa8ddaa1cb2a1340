#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace frg {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Vector<Scalar, Eigen::Dynamic>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Fixed state/action layout of the Firefighter Robot Game domain.
///
/// Nine states: the cross product of robot mode (manual/auto), team
/// performance (non-performant/performant) and alarm status (off/on),
/// plus an absorbing gameover state `g`. Four actions, one per visible
/// configuration (mode, alarm). The visible components of the state are
/// set deterministically by the last action; only performance is hidden.
namespace layout {

inline constexpr Index kNumStates = 9;
inline constexpr Index kNumActions = 4;
inline constexpr Index kNumConfigs = 4;
inline constexpr Index kTerminal = 8;

// State index = mode*4 + performant*2 + alarm_on, gameover = 8.
inline constexpr std::array<const char*, kNumStates> kStateLabels = {
    "m_np_off", "m_np_on", "m_p_off", "m_p_on",
    "a_np_off", "a_np_on", "a_p_off", "a_p_on", "g"};

// Action index = mode*2 + (alarms deactivated ? 1 : 0).
inline constexpr std::array<const char*, kNumActions> kActionLabels = {
    "manual_on", "manual_off", "auto_on", "auto_off"};

// Visible configuration index coincides with the action that installs it.
inline constexpr std::array<const char*, kNumConfigs> kConfigLabels = {
    "manual_on", "manual_off", "auto_on", "auto_off"};

constexpr bool is_terminal(Index s) { return s == kTerminal; }
constexpr bool is_performant(Index s) { return s != kTerminal && (s % 4) >= 2; }
constexpr bool is_auto(Index s) { return s != kTerminal && s >= 4; }
constexpr bool alarm_on(Index s) { return s != kTerminal && (s % 2) == 1; }

/// Visible configuration of a non-terminal state.
constexpr Index config_of_state(Index s) {
  return (s / 4) * 2 + (alarm_on(s) ? 0 : 1);
}

/// The action that installs configuration `c` (identity by construction).
constexpr Index action_of_config(Index c) { return c; }
constexpr Index config_of_action(Index a) { return a; }

/// Non-performant / performant state of a visible configuration.
constexpr Index nonperf_state(Index c) {
  return (c / 2) * 4 + ((c % 2) == 0 ? 1 : 0);
}
constexpr Index perf_state(Index c) { return nonperf_state(c) + 2; }

inline Index state_from_label(const std::string& label) {
  for (Index s = 0; s < kNumStates; ++s)
    if (label == kStateLabels[s]) return s;
  throw std::invalid_argument("unknown state label: " + label);
}

inline Index action_from_label(const std::string& label) {
  for (Index a = 0; a < kNumActions; ++a)
    if (label == kActionLabels[a]) return a;
  throw std::invalid_argument("unknown action label: " + label);
}

inline std::vector<std::string> state_labels() {
  return {kStateLabels.begin(), kStateLabels.end()};
}
inline std::vector<std::string> action_labels() {
  return {kActionLabels.begin(), kActionLabels.end()};
}

}  // namespace layout

/// Run fn(i) for i in [0, total). With jobs > 1 the range is split into
/// contiguous blocks, one thread each; fn must only write to slot i so
/// parallel and serial execution produce identical results.
template <typename Fn>
void parallel_for(Index total, int jobs, Fn&& fn) {
  if (jobs <= 1 || total <= 1) {
    for (Index i = 0; i < total; ++i) fn(i);
    return;
  }
  const int workers = static_cast<int>(std::min<Index>(jobs, total));
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const Index block = (total + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const Index lo = w * block;
    const Index hi = std::min(total, lo + block);
    if (lo >= hi) break;
    threads.emplace_back([lo, hi, &fn] {
      for (Index i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace frg
