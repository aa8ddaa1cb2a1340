#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "frg/hmm.hpp"
#include "frg/mdp.hpp"
#include "frg/observation.hpp"
#include "frg/pomdp.hpp"
#include "frg/solver.hpp"

namespace frg {

struct EmptySample : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ZeroLikelihood : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateRanks : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SelectionConfig {
  std::vector<double> gammas{0.7, 0.8, 0.9, 0.97, 0.98, 0.99};
  Index n_models = 200;
  Index n_episodes = 200;
  double quantile = 0.5;
  int horizon = 60;
  std::uint64_t seed = 1;
  int jobs = 1;
  double alpha0 = 1.0;
  Index em_missions = 36;  // absorbing runs fed to each per-model EM refit
  EmConfig em{1e-5, 300, 1, 1};  // lighter than the em_fit defaults: the
                                 // refits warm-start at the trivial tables
  SolveConfig solver;
};

/// q-order quantile, lower-interpolation convention: the smallest sample
/// value whose empirical CDF reaches q. VaR_0.5 is the sample median under
/// this convention.
inline double value_at_risk(std::vector<double> sample, double q) {
  if (sample.empty()) throw EmptySample("value_at_risk of empty sample");
  std::sort(sample.begin(), sample.end());
  auto k = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(sample.size())));
  if (k < 1) k = 1;
  if (k > sample.size()) k = sample.size();
  return sample[k - 1];
}

/// Candidate policy as seen by the evaluator: a solved alpha-vector
/// policy, a fixed action, or the uniform-random collection policy.
struct EvalPolicy {
  enum class Kind { alpha, fixed, uniform_random };
  Kind kind{Kind::uniform_random};
  const AlphaVectorPolicy<double>* alpha{nullptr};
  Index fixed_action{0};
  double gamma{0.0};  // informational, for report rows and tie-breaking
  std::string name;

  static EvalPolicy solved(const AlphaVectorPolicy<double>* p, double g,
                           std::string name) {
    return {Kind::alpha, p, 0, g, std::move(name)};
  }
  static EvalPolicy fixed(Index action, std::string name) {
    return {Kind::fixed, nullptr, action, 0.0, std::move(name)};
  }
  static EvalPolicy random(std::string name = "random") {
    return {Kind::uniform_random, nullptr, 0, 0.0, std::move(name)};
  }
};

inline Index eval_policy_action(const EvalPolicy& p, const VectorX<double>& belief,
                                Index num_actions, Rng& rng) {
  switch (p.kind) {
    case EvalPolicy::Kind::alpha:
      return policy_action(*p.alpha, belief);
    case EvalPolicy::Kind::fixed:
      return p.fixed_action;
    case EvalPolicy::Kind::uniform_random:
    default:
      return static_cast<Index>(uniform_below(rng, static_cast<std::uint64_t>(num_actions)));
  }
}

struct RolloutTrace {
  std::vector<double> beta;  // marginal performance after each update
};

/// One episode: the state evolves under eval_model while the belief is
/// tracked under belief_model (the deployed controller holds the learned
/// model even when reality differs). Returns the undiscounted reward sum;
/// entering the terminal state stops accrual. Zero-likelihood observations
/// are a hard error here (batch evaluation contract).
inline double rollout(const DiscretePomdp<double>& eval_model,
                      const DiscretePomdp<double>& belief_model,
                      const EvalPolicy& policy, int horizon, Rng& rng,
                      RolloutTrace* trace = nullptr) {
  if (eval_model.num_states() != belief_model.num_states() ||
      eval_model.num_actions() != belief_model.num_actions() ||
      eval_model.num_observations() != belief_model.num_observations())
    throw std::invalid_argument("rollout: model dimensions do not match");
  Index s = sample_categorical(rng, eval_model.initial_belief);
  VectorX<double> b = belief_model.initial_belief;
  double total = 0.0;
  for (int t = 0; t < horizon; ++t) {
    const Index a =
        eval_policy_action(policy, b, eval_model.num_actions(), rng);
    const auto res = step(eval_model, s, a, rng);
    s = res.state;
    total += res.reward;
    if (s == eval_model.terminal) break;
    auto next = belief_update(belief_model, b, a, res.observation);
    if (!next)
      throw ZeroLikelihood("observation impossible under the belief model");
    b = *next;
    if (trace) trace->beta.push_back(marginal_performance(b));
  }
  return total;
}

/// Pooled return sample of one policy across all models and episodes.
struct ReturnSample {
  std::vector<double> returns;
  std::vector<Index> model_index;
  std::vector<Index> episode_index;
};

/// N_E rollouts per model; the (policy, model, episode) triple fully
/// determines each episode's seed, so any parallel schedule reproduces the
/// serial sample bit for bit.
inline ReturnSample return_distribution(
    const std::vector<DiscretePomdp<double>>& models,
    const DiscretePomdp<double>& belief_model, const EvalPolicy& policy,
    Index policy_index, Index n_episodes, int horizon, std::uint64_t base_seed,
    int jobs = 1) {
  if (models.empty()) throw std::invalid_argument("no models to evaluate on");
  const Index total = static_cast<Index>(models.size()) * n_episodes;
  ReturnSample sample;
  sample.returns.resize(total);
  sample.model_index.resize(total);
  sample.episode_index.resize(total);
  parallel_for(total, jobs, [&](Index cell) {
    const Index mi = cell / n_episodes;
    const Index ei = cell % n_episodes;
    Rng rng(derive_seed(base_seed, 0x9011ULL,
                        static_cast<std::uint64_t>(policy_index),
                        static_cast<std::uint64_t>(mi),
                        static_cast<std::uint64_t>(ei)));
    sample.returns[cell] = rollout(models[mi], belief_model, policy, horizon, rng);
    sample.model_index[cell] = mi;
    sample.episode_index[cell] = ei;
  });
  return sample;
}

struct SampledModels {
  std::vector<DiscretePomdp<double>> models;
  Index dropped{};
};

/// Alg.-style posterior sampling: each model pairs an observation function
/// drawn from the Dirichlet posterior with transitions re-fitted by EM
/// under that emission. Rewards, horizon and start belief copy the trivial
/// model. Models whose EM fit fails are dropped and counted.
inline SampledModels sample_models(const DiscretePomdp<double>& trivial,
                                   const ObservationPosterior& posterior,
                                   const ObservationSequenceSet& seqs,
                                   Index n_models, const EmConfig& em_cfg,
                                   std::uint64_t base_seed, int jobs = 1) {
  SampledModels out;
  std::vector<DiscretePomdp<double>> slots(n_models);
  std::vector<char> ok(n_models, 0);
  parallel_for(n_models, jobs, [&](Index i) {
    Rng rng(derive_seed(base_seed, 0x0b5ULL, static_cast<std::uint64_t>(i)));
    const MatrixX<double> obs = sample_observation_function(posterior, rng);
    EmConfig cfg = em_cfg;
    cfg.seed = derive_seed(base_seed, 0xe3fULL, static_cast<std::uint64_t>(i));
    if (cfg.init.empty()) cfg.init = trivial.transition;
    try {
      const EmFitResult fit = em_fit(seqs, obs, cfg);
      DiscretePomdp<double> m = trivial;
      m.transition = fit.transition;
      m.observation = obs;
      slots[i] = std::move(m);
      ok[i] = 1;
    } catch (const NonFiniteLikelihood&) {
      ok[i] = 0;
    }
  });
  for (Index i = 0; i < n_models; ++i) {
    if (ok[i])
      out.models.push_back(std::move(slots[i]));
    else
      ++out.dropped;
  }
  return out;
}

struct PolicyStats {
  std::string name;
  double gamma{};
  double mean{}, stddev{}, min{}, q25{}, median{}, q75{}, max{}, var_q{};
  Index n{};
  bool selected{false};
};

inline PolicyStats summarize_returns(const ReturnSample& sample,
                                     const EvalPolicy& policy, double q) {
  if (sample.returns.empty()) throw EmptySample("no returns to summarize");
  PolicyStats st;
  st.name = policy.name;
  st.gamma = policy.gamma;
  st.n = static_cast<Index>(sample.returns.size());
  const double n = static_cast<double>(st.n);
  double sum = 0.0;
  for (const double r : sample.returns) sum += r;
  st.mean = sum / n;
  double ss = 0.0;
  for (const double r : sample.returns) ss += (r - st.mean) * (r - st.mean);
  st.stddev = st.n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::vector<double> sorted = sample.returns;
  std::sort(sorted.begin(), sorted.end());
  st.min = sorted.front();
  st.max = sorted.back();
  st.q25 = value_at_risk(sorted, 0.25);
  st.median = value_at_risk(sorted, 0.5);
  st.q75 = value_at_risk(sorted, 0.75);
  st.var_q = value_at_risk(sorted, q);
  return st;
}

struct SelectionResult {
  Index best{};
  std::vector<PolicyStats> stats;
};

/// Risk-sensitive selection: evaluate every candidate on every model and
/// pick the best VaR_q. Exact ties go to the later candidate, so with
/// candidates ordered by increasing discount the larger gamma wins.
inline SelectionResult select_policy(const std::vector<EvalPolicy>& candidates,
                                     const std::vector<DiscretePomdp<double>>& models,
                                     const DiscretePomdp<double>& belief_model,
                                     const SelectionConfig& cfg) {
  if (candidates.empty()) throw std::invalid_argument("no candidate policies");
  SelectionResult result;
  for (Index p = 0; p < static_cast<Index>(candidates.size()); ++p) {
    const auto sample =
        return_distribution(models, belief_model, candidates[p], p,
                            cfg.n_episodes, cfg.horizon, cfg.seed, cfg.jobs);
    result.stats.push_back(summarize_returns(sample, candidates[p], cfg.quantile));
  }
  result.best = 0;
  for (Index p = 1; p < static_cast<Index>(result.stats.size()); ++p)
    if (result.stats[p].var_q >= result.stats[result.best].var_q)
      result.best = p;
  result.stats[result.best].selected = true;
  return result;
}

/// Spearman rank correlation (average ranks on ties).
inline double spearman(const std::vector<double>& xs,
                       const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("spearman needs two equal-length samples");
  auto rank = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = rank(xs), ry = rank(ys);
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw DegenerateRanks("rank correlation of a constant series");
  return sxy / std::sqrt(sxx * syy);
}

struct CorrelationResult {
  double rho{};
  Index n{};
};

/// Correlation between the per-episode mean performance belief and the
/// episode return, over simulated missions.
inline CorrelationResult belief_score_correlation(
    const std::vector<RolloutTrace>& traces, const std::vector<double>& returns) {
  if (traces.size() != returns.size() || traces.size() < 10)
    throw std::invalid_argument("need at least 10 episodes with belief traces");
  std::vector<double> mean_beta;
  std::vector<double> rets;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (traces[i].beta.empty()) continue;
    double sum = 0.0;
    for (const double b : traces[i].beta) sum += b;
    mean_beta.push_back(sum / static_cast<double>(traces[i].beta.size()));
    rets.push_back(returns[i]);
  }
  return {spearman(mean_beta, rets), static_cast<Index>(mean_beta.size())};
}

// --- report files ----------------------------------------------------------

/// Human-readable report: one block per policy.
inline void write_report(std::ostream& os, const std::vector<PolicyStats>& stats,
                         double q, const std::string& header = {}) {
  if (!header.empty()) os << header;
  for (const auto& st : stats) {
    os << "policy: " << st.name << (st.selected ? "  [selected]" : "") << '\n';
    os << "  n:       " << st.n << '\n';
    os << "  mean:    " << format_double(st.mean) << '\n';
    os << "  std:     " << format_double(st.stddev) << '\n';
    os << "  min:     " << format_double(st.min) << '\n';
    os << "  25%:     " << format_double(st.q25) << '\n';
    os << "  median:  " << format_double(st.median) << '\n';
    os << "  75%:     " << format_double(st.q75) << '\n';
    os << "  max:     " << format_double(st.max) << '\n';
    os << "  VaR_" << q << ": " << format_double(st.var_q) << '\n';
  }
}

/// Machine-readable table, tab-separated.
inline void write_report_table(std::ostream& os,
                               const std::vector<PolicyStats>& stats,
                               const std::string& header = {}) {
  if (!header.empty()) os << header;
  os << "policy\tn\tmean\tstd\tmin\tq25\tmedian\tq75\tmax\tvar_q\tselected\n";
  for (const auto& st : stats) {
    os << st.name << '\t' << st.n << '\t' << format_double(st.mean) << '\t'
       << format_double(st.stddev) << '\t' << format_double(st.min) << '\t'
       << format_double(st.q25) << '\t' << format_double(st.median) << '\t'
       << format_double(st.q75) << '\t' << format_double(st.max) << '\t'
       << format_double(st.var_q) << '\t' << (st.selected ? 1 : 0) << '\n';
  }
}

inline void write_return_samples(std::ostream& os, const ReturnSample& sample) {
  for (const double r : sample.returns) os << format_double(r) << '\n';
}

}  // namespace frg
