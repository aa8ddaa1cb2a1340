#pragma once

// Shared generators for tests: FRG-structured models with known parameters
// and observation/action sequences sampled from them.

#include "frg/fixture.hpp"
#include "frg/hmm.hpp"
#include "frg/pomdp.hpp"

namespace testutil {

using namespace frg;

/// A known FRG-structured model: identity action semantics, fixture-like
/// persistence, slightly perturbed per seed, sharp emissions. Suitable for
/// EM recovery checks where the ground truth must be identifiable from
/// 1e4 steps.
inline DiscretePomdp<double> known_frg_model(std::uint64_t seed) {
  auto m = collection_model(build_frg_fixture().model);
  Rng rng(derive_seed(seed, 0x7e57));
  for (Index a = 0; a < layout::kNumActions; ++a) {
    const Index c = layout::config_of_action(a);
    for (Index s = 0; s < layout::kNumStates; ++s) {
      if (s == layout::kTerminal) continue;
      const bool from_p = layout::is_performant(s);
      const double flip = 0.03 + 0.05 * uniform01(rng);
      const double hazard = 0.008 + 0.012 * uniform01(rng);
      m.transition[a].row(s).setZero();
      m.transition[a](s, from_p ? layout::perf_state(c)
                                : layout::nonperf_state(c)) =
          1.0 - flip - hazard;
      m.transition[a](s, from_p ? layout::nonperf_state(c)
                                : layout::perf_state(c)) = flip;
      m.transition[a](s, layout::kTerminal) = hazard;
    }
  }
  std::array<Eigen::Matrix2d, layout::kNumConfigs> rows;
  for (Index c = 0; c < layout::kNumConfigs; ++c) {
    const double acc0 = 0.93 + 0.04 * uniform01(rng);
    const double acc1 = 0.93 + 0.04 * uniform01(rng);
    rows[c] << acc0, 1 - acc0, 1 - acc1, acc1;
  }
  m.observation = embed_observation_rows(rows);
  m.horizon = 150;
  return m;
}

/// Sample sequences under the uniform-random action policy until the
/// requested number of transitions is reached.
inline ObservationSequenceSet sample_sequences(const DiscretePomdp<double>& model,
                                               std::size_t min_steps,
                                               std::uint64_t seed) {
  ObservationSequenceSet seqs;
  std::size_t steps = 0;
  Rng rng(derive_seed(seed, 0xda7a));
  while (steps < min_steps) {
    ObservationSequence seq;
    Index s = sample_categorical(rng, model.initial_belief);
    for (int t = 0; t < model.horizon; ++t) {
      seq.obs.push_back(sample_categorical(rng, model.observation.row(s)));
      const Index a = static_cast<Index>(uniform_below(rng, layout::kNumActions));
      seq.action.push_back(a);
      s = sample_categorical(rng, model.transition[a].row(s));
      if (s == layout::kTerminal) break;
    }
    steps += seq.action.size();
    seq.obs.push_back(layout::kTerminal);
    seqs.sequences.push_back(std::move(seq));
  }
  return seqs;
}

inline double transition_linf(const std::vector<MatrixX<double>>& a,
                              const std::vector<MatrixX<double>>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, (a[i] - b[i]).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace testutil
