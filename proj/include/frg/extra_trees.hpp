#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "frg/batch.hpp"
#include "frg/core.hpp"
#include "frg/observation.hpp"
#include "frg/rng.hpp"

namespace frg {

struct MissingClass : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingleGroup : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TreeNode {
  int feature{-1};  // -1 marks a leaf
  double threshold{};
  int left{-1}, right{-1};
  int label{-1};
};

struct ExtraTree {
  std::vector<TreeNode> nodes;

  int predict(const VectorX<double>& x) const {
    int n = 0;
    while (nodes[n].feature >= 0)
      n = x[nodes[n].feature] < nodes[n].threshold ? nodes[n].left
                                                   : nodes[n].right;
    return nodes[n].label;
  }
};

struct ExtraTreesParams {
  int n_trees = 300;
  int max_depth = 0;  // 0 = unlimited
  int min_samples_leaf = 1;
};

/// Binary ensemble in the extremely-randomized construction: per node, a
/// sqrt(d)-sized random feature subset, one uniform threshold per candidate
/// feature, best Gini reduction among those candidates. No bootstrap.
struct ExtraTreesClassifier {
  ExtraTreesParams params;
  std::uint64_t seed{};
  Index n_features{};
  std::vector<ExtraTree> trees;

  int predict(const VectorX<double>& x) const {
    int votes = 0;
    for (const auto& t : trees) votes += t.predict(x);
    // exact vote ties resolve to non-performant
    return 2 * votes > static_cast<int>(trees.size()) ? 1 : 0;
  }
};

namespace detail {

inline double gini(double n0, double n1) {
  const double n = n0 + n1;
  if (n == 0.0) return 0.0;
  const double p0 = n0 / n, p1 = n1 / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

inline int grow_node(ExtraTree& tree, const std::vector<VectorX<double>>& X,
                     const std::vector<int>& y, std::vector<int>& idx, int lo,
                     int hi, int depth, const ExtraTreesParams& params,
                     Rng& rng) {
  const int node = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  int n1 = 0;
  for (int i = lo; i < hi; ++i) n1 += y[idx[i]];
  const int n = hi - lo;
  const int n0 = n - n1;
  auto make_leaf = [&](int at) {
    tree.nodes[at].feature = -1;
    tree.nodes[at].label = n1 * 2 > n ? 1 : 0;
  };
  if (n0 == 0 || n1 == 0 || n < 2 * params.min_samples_leaf ||
      (params.max_depth > 0 && depth >= params.max_depth)) {
    make_leaf(node);
    return node;
  }

  const Index d = X[0].size();
  const int k = std::max(1, static_cast<int>(std::lround(std::sqrt(
                                static_cast<double>(d)))));
  // draw k distinct candidate features
  std::vector<Index> feats(d);
  for (Index f = 0; f < d; ++f) feats[f] = f;
  for (int j = 0; j < k; ++j) {
    const auto swap_with =
        j + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(d - j)));
    std::swap(feats[j], feats[swap_with]);
  }

  int best_feature = -1;
  double best_threshold = 0.0, best_score = -1.0;
  const double parent_gini = detail::gini(n0, n1);
  for (int j = 0; j < k; ++j) {
    const Index f = feats[j];
    double fmin = X[idx[lo]][f], fmax = fmin;
    for (int i = lo + 1; i < hi; ++i) {
      fmin = std::min(fmin, X[idx[i]][f]);
      fmax = std::max(fmax, X[idx[i]][f]);
    }
    if (fmin == fmax) continue;
    const double thr = fmin + uniform01(rng) * (fmax - fmin);
    double l0 = 0, l1 = 0;
    for (int i = lo; i < hi; ++i) {
      if (X[idx[i]][f] < thr)
        y[idx[i]] ? ++l1 : ++l0;
    }
    const double nl = l0 + l1, nr = n - nl;
    if (nl < params.min_samples_leaf || nr < params.min_samples_leaf) continue;
    const double score = parent_gini -
                         (nl / n) * detail::gini(l0, l1) -
                         (nr / n) * detail::gini(n0 - l0, n1 - l1);
    if (score > best_score) {
      best_score = score;
      best_feature = static_cast<int>(f);
      best_threshold = thr;
    }
  }
  if (best_feature < 0) {
    make_leaf(node);
    return node;
  }
  const auto mid_it = std::stable_partition(
      idx.begin() + lo, idx.begin() + hi, [&](int i) {
        return X[i][best_feature] < best_threshold;
      });
  const int mid = static_cast<int>(mid_it - idx.begin());
  tree.nodes[node].feature = best_feature;
  tree.nodes[node].threshold = best_threshold;
  const int left = grow_node(tree, X, y, idx, lo, mid, depth + 1, params, rng);
  const int right = grow_node(tree, X, y, idx, mid, hi, depth + 1, params, rng);
  tree.nodes[node].left = left;
  tree.nodes[node].right = right;
  return node;
}

}  // namespace detail

inline ExtraTreesClassifier train_extra_trees(
    const std::vector<VectorX<double>>& X, const std::vector<int>& y,
    const ExtraTreesParams& params, std::uint64_t seed, int jobs = 1) {
  if (X.empty() || X.size() != y.size())
    throw std::invalid_argument("training set is empty or mismatched");
  ExtraTreesClassifier clf;
  clf.params = params;
  clf.seed = seed;
  clf.n_features = X[0].size();
  clf.trees.resize(params.n_trees);
  parallel_for(params.n_trees, jobs, [&](Index t) {
    Rng rng(mix64(seed + static_cast<std::uint64_t>(t)));
    std::vector<int> idx(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) idx[i] = static_cast<int>(i);
    std::vector<int> labels = y;
    detail::grow_node(clf.trees[t], X, labels, idx, 0,
                      static_cast<int>(X.size()), 0, params, rng);
  });
  return clf;
}

inline double balanced_accuracy(const std::vector<int>& truth,
                                const std::vector<int>& predicted) {
  double tp = 0, tn = 0, p = 0, n = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) {
      ++p;
      tp += predicted[i] == 1;
    } else {
      ++n;
      tn += predicted[i] == 0;
    }
  }
  if (p == 0 || n == 0)
    throw MissingClass("balanced accuracy needs both classes");
  return 0.5 * (tp / p + tn / n);
}

/// One pick of validation groups (participants), the rest train-side.
inline std::set<std::string> pick_validation_groups(
    const std::vector<std::string>& groups, double fraction, Rng& rng) {
  std::vector<std::string> unique(groups.begin(), groups.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  if (unique.size() < 2) throw SingleGroup("need at least two participant groups");
  const auto take = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(fraction * unique.size())));
  for (std::size_t j = 0; j + 1 < unique.size(); ++j) {
    const auto swap_with =
        j + uniform_below(rng, static_cast<std::uint64_t>(unique.size() - j));
    std::swap(unique[j], unique[swap_with]);
  }
  return {unique.begin(), unique.begin() + static_cast<long>(take)};
}

struct ClassifierGrid {
  std::vector<int> n_trees{100, 300};
  std::vector<int> max_depth{0, 8};
  std::vector<int> min_samples_leaf{1, 5};
};

struct ConfigTrainingSet {
  std::vector<VectorX<double>> X;
  std::vector<int> y;
  std::vector<std::string> group;
};

struct CvCell {
  ExtraTreesParams params;
  double mean_balanced_accuracy{};
};

struct PerformanceClassifier {
  std::array<ExtraTreesClassifier, layout::kNumConfigs> per_config;
  std::array<ExtraTreesParams, layout::kNumConfigs> chosen;
  std::array<std::vector<CvCell>, layout::kNumConfigs> cv_table;

  int predict(Index config, const VectorX<double>& features) const {
    return per_config[config].predict(features);
  }
};

struct TrainOutcome {
  PerformanceClassifier classifier;
  std::set<std::string> heldout_groups;  // never seen in training or CV
};

/// Group-wise shuffle-split cross-validated training of the four
/// per-configuration ensembles. A group-disjoint 20% test partition is
/// carved out first and returned untouched for confusion counting.
inline TrainOutcome train_classifiers(const TrajectoryBatch& batch,
                                      const std::vector<LabeledStep>& labeled,
                                      const ClassifierGrid& grid,
                                      std::uint64_t seed, int folds = 10,
                                      double validation_fraction = 0.2,
                                      int jobs = 1) {
  std::vector<std::string> all_groups;
  for (const auto& ls : labeled)
    all_groups.push_back(batch.missions[ls.mission].participant_id);
  Rng holdout_rng(derive_seed(seed, 0x4e1d));
  TrainOutcome out;
  out.heldout_groups = pick_validation_groups(all_groups, 0.2, holdout_rng);

  std::array<ConfigTrainingSet, layout::kNumConfigs> train_sets;
  for (const auto& ls : labeled) {
    const auto& m = batch.missions[ls.mission];
    if (out.heldout_groups.count(m.participant_id)) continue;
    auto& set = train_sets[ls.config];
    set.X.push_back(m.steps[ls.step].features);
    set.y.push_back(ls.label);
    set.group.push_back(m.participant_id);
  }

  for (Index c = 0; c < layout::kNumConfigs; ++c) {
    const auto& set = train_sets[c];
    const bool has0 = std::count(set.y.begin(), set.y.end(), 0) > 0;
    const bool has1 = std::count(set.y.begin(), set.y.end(), 1) > 0;
    if (!has0 || !has1)
      throw MissingClass(std::string("configuration ") +
                         layout::kConfigLabels[c] +
                         " lacks one of the two labels");

    std::vector<ExtraTreesParams> combos;
    for (const int nt : grid.n_trees)
      for (const int md : grid.max_depth)
        for (const int ml : grid.min_samples_leaf)
          combos.push_back({nt, md, ml});

    std::vector<double> score(combos.size(), 0.0);
    std::vector<int> usable(combos.size(), 0);
    for (int fold = 0; fold < folds; ++fold) {
      Rng fold_rng(derive_seed(seed, 0xf01d, static_cast<std::uint64_t>(c),
                               static_cast<std::uint64_t>(fold)));
      const auto val_groups =
          pick_validation_groups(set.group, validation_fraction, fold_rng);
      std::vector<VectorX<double>> Xtr;
      std::vector<int> ytr, yval;
      std::vector<Index> val_idx;
      for (std::size_t i = 0; i < set.X.size(); ++i) {
        if (val_groups.count(set.group[i])) {
          val_idx.push_back(static_cast<Index>(i));
          yval.push_back(set.y[i]);
        } else {
          Xtr.push_back(set.X[i]);
          ytr.push_back(set.y[i]);
        }
      }
      const bool fold_ok =
          std::count(ytr.begin(), ytr.end(), 0) > 0 &&
          std::count(ytr.begin(), ytr.end(), 1) > 0 &&
          std::count(yval.begin(), yval.end(), 0) > 0 &&
          std::count(yval.begin(), yval.end(), 1) > 0;
      if (!fold_ok) continue;  // degenerate fold, skip for every combo
      for (std::size_t k = 0; k < combos.size(); ++k) {
        const auto clf = train_extra_trees(
            Xtr, ytr, combos[k],
            derive_seed(seed, 0x7255, static_cast<std::uint64_t>(c),
                        static_cast<std::uint64_t>(fold),
                        static_cast<std::uint64_t>(k)),
            jobs);
        std::vector<int> pred;
        pred.reserve(val_idx.size());
        for (const Index i : val_idx) pred.push_back(clf.predict(set.X[i]));
        score[k] += balanced_accuracy(yval, pred);
        usable[k] += 1;
      }
    }
    auto& cv = out.classifier.cv_table[c];
    std::size_t best = 0;
    for (std::size_t k = 0; k < combos.size(); ++k) {
      const double mean = usable[k] ? score[k] / usable[k] : 0.0;
      cv.push_back({combos[k], mean});
      if (mean > cv[best].mean_balanced_accuracy) best = k;
    }
    out.classifier.chosen[c] = combos[best];
    out.classifier.per_config[c] = train_extra_trees(
        set.X, set.y, combos[best],
        derive_seed(seed, 0xf17, static_cast<std::uint64_t>(c)), jobs);
  }
  return out;
}

/// Confusion counts of the trained classifiers on the held-out labeled
/// steps (group-disjoint from all training and validation data).
inline ConfusionCounts confusion_on_heldout(const TrajectoryBatch& batch,
                                            const std::vector<LabeledStep>& labeled,
                                            const TrainOutcome& trained) {
  ConfusionCounts cc;
  for (const auto& ls : labeled) {
    const auto& m = batch.missions[ls.mission];
    if (!trained.heldout_groups.count(m.participant_id)) continue;
    const int pred =
        trained.classifier.predict(ls.config, m.steps[ls.step].features);
    cc.counts[ls.config](ls.label, pred) += 1;
  }
  for (Index c = 0; c < layout::kNumConfigs; ++c)
    for (int r = 0; r < 2; ++r)
      if (cc.counts[c](r, 0) + cc.counts[c](r, 1) == 0)
        throw MissingClass("held-out set lacks class " + std::to_string(r) +
                           " for configuration " +
                           std::string(layout::kConfigLabels[c]));
  return cc;
}

// --- classifier file -------------------------------------------------------
//
//   ENSEMBLE <config-label> trees=<n> max_depth=<n> min_leaf=<n> seed=<n> features=<d>
//   TREE <node-count>
//   <feature> <threshold> <left> <right> <label>     (one line per node;
//                                                     feature -1 marks a leaf)

inline void write_classifier(std::ostream& os, const PerformanceClassifier& pc,
                             const std::string& header = {}) {
  if (!header.empty()) os << header;
  for (Index c = 0; c < layout::kNumConfigs; ++c) {
    const auto& clf = pc.per_config[c];
    os << "ENSEMBLE " << layout::kConfigLabels[c]
       << " trees=" << clf.params.n_trees << " max_depth=" << clf.params.max_depth
       << " min_leaf=" << clf.params.min_samples_leaf << " seed=" << clf.seed
       << " features=" << clf.n_features << '\n';
    for (const auto& tree : clf.trees) {
      os << "TREE " << tree.nodes.size() << '\n';
      for (const auto& n : tree.nodes)
        os << n.feature << ' ' << format_double(n.threshold) << ' ' << n.left
           << ' ' << n.right << ' ' << n.label << '\n';
    }
  }
}

inline PerformanceClassifier read_classifier(std::istream& is) {
  PerformanceClassifier pc;
  std::string line;
  Index config = -1;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "ENSEMBLE") {
      std::string label, field;
      ls >> label;
      config = -1;
      for (Index c = 0; c < layout::kNumConfigs; ++c)
        if (label == layout::kConfigLabels[c]) config = c;
      if (config < 0)
        throw std::runtime_error("classifier file: unknown configuration " + label);
      auto& clf = pc.per_config[config];
      while (ls >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        const std::string name = field.substr(0, eq);
        const auto val = std::stoull(field.substr(eq + 1));
        if (name == "trees") clf.params.n_trees = static_cast<int>(val);
        if (name == "max_depth") clf.params.max_depth = static_cast<int>(val);
        if (name == "min_leaf") clf.params.min_samples_leaf = static_cast<int>(val);
        if (name == "seed") clf.seed = val;
        if (name == "features") clf.n_features = static_cast<Index>(val);
      }
      pc.chosen[config] = clf.params;
    } else if (key == "TREE") {
      if (config < 0) throw std::runtime_error("classifier file: TREE before ENSEMBLE");
      std::size_t count;
      ls >> count;
      ExtraTree tree;
      tree.nodes.resize(count);
      for (auto& n : tree.nodes) {
        if (!(is >> n.feature >> n.threshold >> n.left >> n.right >> n.label))
          throw std::runtime_error("classifier file: truncated tree");
      }
      is.ignore();  // consume the trailing newline
      pc.per_config[config].trees.push_back(std::move(tree));
    } else {
      throw std::runtime_error("classifier file: unknown line: " + line);
    }
  }
  return pc;
}

}  // namespace frg
