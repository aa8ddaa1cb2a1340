#pragma once

#include <array>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "frg/core.hpp"
#include "frg/rng.hpp"

namespace frg {

/// 2x2 classification counts per visible configuration.
/// Rows: true label (non-performant, performant); columns: predicted.
struct ConfusionCounts {
  std::array<Eigen::Matrix<long, 2, 2>, layout::kNumConfigs> counts;

  ConfusionCounts() {
    for (auto& c : counts) c.setZero();
  }

  bool has_empty_row() const {
    for (const auto& c : counts)
      for (int r = 0; r < 2; ++r)
        if (c(r, 0) + c(r, 1) == 0) return true;
    return false;
  }
};

/// Dirichlet parameters over each confusion row: alpha = prior + counts.
struct ObservationPosterior {
  std::array<Eigen::Matrix2d, layout::kNumConfigs> alpha;

  ObservationPosterior() {
    for (auto& a : alpha) a.setOnes();
  }
};

inline ObservationPosterior dirichlet_posterior(const ConfusionCounts& counts,
                                                double alpha0 = 1.0) {
  if (!(alpha0 > 0.0)) throw std::invalid_argument("alpha0 must be positive");
  ObservationPosterior post;
  for (Index c = 0; c < layout::kNumConfigs; ++c)
    post.alpha[c] = counts.counts[c].cast<double>().array() + alpha0;
  return post;
}

/// Embed per-configuration 2x2 performance rows into the full 9x9
/// observation table. Visible components and the gameover state are
/// observed exactly; only the performance component is noisy.
inline MatrixX<double> embed_observation_rows(
    const std::array<Eigen::Matrix2d, layout::kNumConfigs>& rows) {
  using namespace layout;
  MatrixX<double> O = MatrixX<double>::Zero(kNumStates, kNumStates);
  O(kTerminal, kTerminal) = 1.0;
  for (Index c = 0; c < kNumConfigs; ++c) {
    const Index snp = nonperf_state(c);
    const Index sp = perf_state(c);
    O(snp, snp) = rows[c](0, 0);
    O(snp, sp) = rows[c](0, 1);
    O(sp, snp) = rows[c](1, 0);
    O(sp, sp) = rows[c](1, 1);
  }
  return O;
}

/// Row-normalized confusion matrices as the point-estimate observation
/// function of the trivial POMDP.
inline MatrixX<double> trivial_observation_function(const ConfusionCounts& counts) {
  if (counts.has_empty_row())
    throw std::runtime_error("confusion counts contain an empty row");
  std::array<Eigen::Matrix2d, layout::kNumConfigs> rows;
  for (Index c = 0; c < layout::kNumConfigs; ++c) {
    const Eigen::Matrix2d m = counts.counts[c].cast<double>();
    for (int r = 0; r < 2; ++r) rows[c].row(r) = m.row(r) / m.row(r).sum();
  }
  return embed_observation_rows(rows);
}

/// Draw one observation function from the posterior: each performance row
/// is an independent Dirichlet draw, embedded as above.
inline MatrixX<double> sample_observation_function(
    const ObservationPosterior& post, Rng& rng) {
  std::array<Eigen::Matrix2d, layout::kNumConfigs> rows;
  for (Index c = 0; c < layout::kNumConfigs; ++c)
    for (int r = 0; r < 2; ++r) {
      VectorX<double> a(2);
      a << post.alpha[c](r, 0), post.alpha[c](r, 1);
      const VectorX<double> draw = sample_dirichlet(rng, a);
      rows[c](r, 0) = draw[0];
      rows[c](r, 1) = draw[1];
    }
  return embed_observation_rows(rows);
}

inline Eigen::Matrix2d posterior_row_means(const ObservationPosterior& post,
                                           Index config) {
  Eigen::Matrix2d m;
  for (int r = 0; r < 2; ++r)
    m.row(r) = post.alpha[config].row(r) / post.alpha[config].row(r).sum();
  return m;
}

// --- confusion-counts file -------------------------------------------------
//
// One line per configuration:
//   CONFIG <mode> <alarm>: <tn> <fp> / <fn> <tp>
// where row 1 is the true non-performant row and row 2 the performant row.
// Lines starting with '#' are comments.

inline void write_confusion_counts(std::ostream& os, const ConfusionCounts& cc,
                                   const std::string& header = {}) {
  if (!header.empty()) os << header;
  static constexpr std::array<const char*, 4> kNames = {
      "manual on", "manual off", "auto on", "auto off"};
  for (Index c = 0; c < layout::kNumConfigs; ++c) {
    const auto& m = cc.counts[c];
    os << "CONFIG " << kNames[c] << ": " << m(0, 0) << ' ' << m(0, 1) << " / "
       << m(1, 0) << ' ' << m(1, 1) << '\n';
  }
}

inline ConfusionCounts read_confusion_counts(std::istream& is) {
  ConfusionCounts cc;
  std::array<bool, layout::kNumConfigs> seen{};
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag, mode, alarm;
    ls >> tag >> mode >> alarm;
    if (tag != "CONFIG")
      throw std::runtime_error("confusion file: expected CONFIG, got: " + line);
    if (!alarm.empty() && alarm.back() == ':') alarm.pop_back();
    Index c;
    if (mode == "manual")
      c = (alarm == "on") ? 0 : 1;
    else if (mode == "auto")
      c = (alarm == "on") ? 2 : 3;
    else
      throw std::runtime_error("confusion file: bad mode: " + mode);
    long tn, fp, fn, tp;
    std::string slash;
    if (!(ls >> tn >> fp >> slash >> fn >> tp) || slash != "/")
      throw std::runtime_error("confusion file: bad counts line: " + line);
    cc.counts[c] << tn, fp, fn, tp;
    seen[c] = true;
  }
  for (Index c = 0; c < layout::kNumConfigs; ++c)
    if (!seen[c])
      throw std::runtime_error("confusion file: missing configuration " +
                               std::string(layout::kConfigLabels[c]));
  return cc;
}

inline ConfusionCounts read_confusion_counts_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_confusion_counts(is);
}

}  // namespace frg
