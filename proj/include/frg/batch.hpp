#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "frg/model_io.hpp"
#include "frg/pomdp.hpp"
#include "frg/rng.hpp"

namespace frg {

struct StepRecord {
  int step{};
  Index config{};   // visible configuration during the 10 s window
  Index action{};   // action applied at this step
  VectorX<double> features;
  double fires{};   // fires extinguished during this window
};

struct Mission {
  std::string mission_id;
  std::string participant_id;  // group key for participant-wise splits
  double score{};
  std::vector<StepRecord> steps;
};

struct TrajectoryBatch {
  std::vector<Mission> missions;

  Index feature_dim() const {
    return missions.empty() || missions[0].steps.empty()
               ? 0
               : missions[0].steps[0].features.size();
  }
};

struct TooFewMissions : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Quantile of a sample by linear interpolation between order statistics.
inline double linear_quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + frac * (xs[hi] - xs[lo]);
}

struct QuartileSplit {
  std::vector<Index> low, mid, high;  // mission indices
  double q1_threshold{}, q3_threshold{};
};

/// Mission-score quartile split. Missions strictly below Q1 are low,
/// strictly above Q3 high; scores tied with a threshold go to mid, so an
/// all-equal batch degenerates to mid only.
inline QuartileSplit split_by_quartiles(const TrajectoryBatch& batch) {
  if (batch.missions.size() < 4)
    throw TooFewMissions("quartile split needs at least 4 missions, got " +
                         std::to_string(batch.missions.size()));
  std::vector<double> scores;
  scores.reserve(batch.missions.size());
  for (const auto& m : batch.missions) scores.push_back(m.score);
  QuartileSplit split;
  split.q1_threshold = linear_quantile(scores, 0.25);
  split.q3_threshold = linear_quantile(scores, 0.75);
  for (Index i = 0; i < static_cast<Index>(batch.missions.size()); ++i) {
    const double s = batch.missions[i].score;
    if (s < split.q1_threshold)
      split.low.push_back(i);
    else if (s > split.q3_threshold)
      split.high.push_back(i);
    else
      split.mid.push_back(i);
  }
  return split;
}

/// One labeled step: low-mission steps are non-performant (0), high-mission
/// steps performant (1). Mid-quartile steps are not emitted.
struct LabeledStep {
  Index mission;
  Index step;
  Index config;
  int label;
};

inline std::vector<LabeledStep> label_steps(const TrajectoryBatch& batch,
                                            const QuartileSplit& split) {
  std::vector<LabeledStep> out;
  auto emit = [&](const std::vector<Index>& missions, int label) {
    for (const Index mi : missions) {
      const auto& m = batch.missions[mi];
      for (Index si = 0; si < static_cast<Index>(m.steps.size()); ++si)
        out.push_back({mi, si, m.steps[si].config, label});
    }
  };
  emit(split.low, 0);
  emit(split.high, 1);
  return out;
}

/// Mean fires per step for each assigned state; unvisited non-terminal
/// states get reward 0 and are reported back through `unvisited`.
inline VectorX<double> estimate_rewards(
    const TrajectoryBatch& batch,
    const std::vector<std::vector<Index>>& assigned_states,
    std::vector<Index>* unvisited = nullptr) {
  VectorX<double> sum = VectorX<double>::Zero(layout::kNumStates);
  VectorX<double> count = VectorX<double>::Zero(layout::kNumStates);
  for (std::size_t mi = 0; mi < batch.missions.size(); ++mi) {
    const auto& m = batch.missions[mi];
    if (assigned_states[mi].size() != m.steps.size())
      throw std::invalid_argument("state assignment does not match batch shape");
    for (std::size_t si = 0; si < m.steps.size(); ++si) {
      const Index s = assigned_states[mi][si];
      sum[s] += m.steps[si].fires;
      count[s] += 1.0;
    }
  }
  VectorX<double> reward = VectorX<double>::Zero(layout::kNumStates);
  for (Index s = 0; s < layout::kNumStates; ++s) {
    if (s == layout::kTerminal) continue;
    if (count[s] > 0)
      reward[s] = sum[s] / count[s];
    else if (unvisited)
      unvisited->push_back(s);
  }
  return reward;
}

// --- batch file ----------------------------------------------------------
//
// Delimiter-separated text, one row per step:
//   mission_id,participant_id,step,mode,alarm,action,fires,score,f1,...,fD
// mode is `manual`/`auto`, alarm `on`/`off`, action an action label.
// Rows of one mission must be contiguous and ordered by step.

inline void write_batch(std::ostream& os, const TrajectoryBatch& batch,
                        const std::string& header = {}) {
  if (!header.empty()) os << header;
  os << "mission_id,participant_id,step,mode,alarm,action,fires,score";
  for (Index f = 0; f < batch.feature_dim(); ++f) os << ",f" << (f + 1);
  os << '\n';
  for (const auto& m : batch.missions)
    for (const auto& st : m.steps) {
      os << m.mission_id << ',' << m.participant_id << ',' << st.step << ','
         << (st.config < 2 ? "manual" : "auto") << ','
         << (st.config % 2 == 0 ? "on" : "off") << ','
         << layout::kActionLabels[st.action] << ',' << format_double(st.fires)
         << ',' << format_double(m.score);
      for (Index f = 0; f < st.features.size(); ++f)
        os << ',' << format_double(st.features[f]);
      os << '\n';
    }
}

inline TrajectoryBatch read_batch(std::istream& is) {
  TrajectoryBatch batch;
  std::string line;
  int lineno = 0;
  bool saw_header = false;
  Index feature_dim = -1;
  auto fail = [&lineno](const std::string& why) {
    throw std::runtime_error("batch file line " + std::to_string(lineno) +
                             ": " + why);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!saw_header) {
      if (cells.size() < 8 || cells[0] != "mission_id")
        fail("expected header starting with mission_id");
      feature_dim = static_cast<Index>(cells.size()) - 8;
      saw_header = true;
      continue;
    }
    if (static_cast<Index>(cells.size()) != feature_dim + 8)
      fail("expected " + std::to_string(feature_dim + 8) + " columns, got " +
           std::to_string(cells.size()));
    StepRecord rec;
    char* end = nullptr;
    rec.step = static_cast<int>(std::strtol(cells[2].c_str(), &end, 10));
    if (end == cells[2].c_str()) fail("bad step index '" + cells[2] + "'");
    Index mode;
    if (cells[3] == "manual")
      mode = 0;
    else if (cells[3] == "auto")
      mode = 1;
    else
      fail("bad mode '" + cells[3] + "'");
    Index alarm_on;
    if (cells[4] == "on")
      alarm_on = 1;
    else if (cells[4] == "off")
      alarm_on = 0;
    else
      fail("bad alarm '" + cells[4] + "'");
    rec.config = mode * 2 + (alarm_on ? 0 : 1);
    try {
      rec.action = layout::action_from_label(cells[5]);
    } catch (const std::exception& e) {
      fail(e.what());
    }
    rec.fires = std::strtod(cells[6].c_str(), &end);
    if (end == cells[6].c_str()) fail("bad fires value '" + cells[6] + "'");
    const double score = std::strtod(cells[7].c_str(), &end);
    if (end == cells[7].c_str()) fail("bad score value '" + cells[7] + "'");
    rec.features.resize(feature_dim);
    for (Index f = 0; f < feature_dim; ++f) {
      rec.features[f] = std::strtod(cells[8 + f].c_str(), &end);
      if (end == cells[8 + f].c_str())
        fail("bad feature value '" + cells[8 + f] + "'");
    }
    if (batch.missions.empty() || batch.missions.back().mission_id != cells[0]) {
      Mission m;
      m.mission_id = cells[0];
      m.participant_id = cells[1];
      m.score = score;
      batch.missions.push_back(std::move(m));
    }
    batch.missions.back().steps.push_back(std::move(rec));
  }
  if (!saw_header) throw std::runtime_error("batch file: missing header");
  for (const auto& m : batch.missions)
    if (m.steps.empty())
      throw std::runtime_error("batch file: mission " + m.mission_id +
                               " has no steps");
  return batch;
}

inline TrajectoryBatch read_batch_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_batch(is);
}

inline void write_batch_file(const std::string& path,
                             const TrajectoryBatch& batch,
                             const std::string& header = {}) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_batch(os, batch, header);
}

/// Knuth sampler; step-level fire counts have small means.
inline int sample_poisson(Rng& rng, double lambda) {
  const double limit = std::exp(-lambda);
  double p = 1.0;
  int k = 0;
  do {
    ++k;
    p *= uniform01(rng);
  } while (p > limit);
  return k - 1;
}

struct SyntheticBatchConfig {
  Index n_missions = 72;
  Index n_participants = 18;
  Index n_noise_features = 13;  // appended after the four informative ones
  double feature_shift = 1.5;   // class separation of informative features
  std::uint64_t seed = 1;
};

/// Sample a batch from a model under the uniform-random collection policy.
/// Each step's observed state (visible configuration plus noisy performance
/// label drawn from the observation function) drives the recorded features
/// and fire counts, so the learning pipeline sees a self-consistent world.
inline TrajectoryBatch make_synthetic_batch(const DiscretePomdp<double>& model,
                                            const SyntheticBatchConfig& cfg) {
  TrajectoryBatch batch;
  const Index d = 4 + cfg.n_noise_features;
  for (Index mi = 0; mi < cfg.n_missions; ++mi) {
    Rng rng(derive_seed(cfg.seed, 0xba7c4, static_cast<std::uint64_t>(mi)));
    Mission m;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "m%03d", static_cast<int>(mi));
    m.mission_id = buf;
    std::snprintf(buf, sizeof(buf), "p%02d",
                  static_cast<int>(mi % cfg.n_participants));
    m.participant_id = buf;
    Index s = sample_categorical(rng, model.initial_belief);
    double score = 0.0;
    for (int t = 0; t < model.horizon; ++t) {
      const Index obs = sample_categorical(rng, model.observation.row(s));
      StepRecord rec;
      rec.step = t;
      rec.config = layout::config_of_state(s);
      rec.fires = sample_poisson(rng, model.reward[obs]);
      score += rec.fires;
      rec.features.resize(d);
      const double mu = layout::is_performant(obs) ? cfg.feature_shift
                                                   : -cfg.feature_shift;
      for (Index f = 0; f < 4; ++f)
        rec.features[f] = mu * (1.0 - 0.15 * static_cast<double>(f)) +
                          sample_normal(rng);
      for (Index f = 4; f < d; ++f) rec.features[f] = sample_normal(rng);
      const Index a = static_cast<Index>(uniform_below(rng, layout::kNumActions));
      rec.action = a;
      m.steps.push_back(std::move(rec));
      s = sample_categorical(rng, model.transition[a].row(s));
      if (s == model.terminal) break;
    }
    m.score = score;
    batch.missions.push_back(std::move(m));
  }
  return batch;
}

}  // namespace frg
