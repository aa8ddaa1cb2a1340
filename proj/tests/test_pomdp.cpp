#include "doctest.h"

#include <vector>

#include "frg/fixture.hpp"
#include "frg/pomdp.hpp"
#include "oracles.hpp"

using namespace frg;

namespace {

std::vector<std::vector<double>> to_nested(const MatrixX<double>& m) {
  std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

}  // namespace

TEST_CASE("fixture model validates cleanly") {
  const auto fx = build_frg_fixture();
  CHECK(validate(fx.model).empty());
}

TEST_CASE("validate flags constructed defects") {
  auto fx = build_frg_fixture();
  auto broken = fx.model;
  broken.transition[0].row(3) *= 0.9;
  const auto violations = validate(broken);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].find("sums to 1") != std::string::npos);

  auto bad_gamma = fx.model;
  bad_gamma.discount = 1.0;
  const auto v2 = validate(bad_gamma);
  REQUIRE(v2.size() == 1);
  CHECK(v2[0].find("discount") != std::string::npos);

  auto nonabsorbing = fx.model;
  nonabsorbing.transition[1](layout::kTerminal, layout::kTerminal) = 0.5;
  nonabsorbing.transition[1](layout::kTerminal, 0) = 0.5;
  bool found = false;
  for (const auto& msg : validate(nonabsorbing))
    if (msg.find("absorbing") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("belief update matches the scripted Bayes oracle") {
  const auto fx = build_frg_fixture();
  const Index m_p_on = layout::state_from_label("m_p_on");
  VectorX<double> b = VectorX<double>::Zero(9);
  b[m_p_on] = 1.0;

  const auto next = belief_update(fx.model, b, 0, m_p_on);
  REQUIRE(next.has_value());

  std::vector<double> b_raw(9, 0.0);
  b_raw[m_p_on] = 1.0;
  const auto ref = oracle::bayes_update(to_nested(fx.model.transition[0]),
                                        to_nested(fx.model.observation), b_raw,
                                        m_p_on);
  for (Index s = 0; s < 9; ++s) CHECK((*next)[s] == doctest::Approx(ref[s]).epsilon(1e-12));
  CHECK(std::abs((*next)[m_p_on] - 0.98462) < 5e-6);
  CHECK(std::abs((*next)[layout::state_from_label("m_np_on")] - 0.01538) < 5e-6);
  CHECK(is_distribution(*next));
}

TEST_CASE("identity observation collapses the belief to the observed state") {
  auto fx = build_frg_fixture();
  fx.model.observation = MatrixX<double>::Identity(9, 9);
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    VectorX<double> b(9);
    for (Index s = 0; s < 9; ++s) b[s] = uniform01(rng);
    b /= b.sum();
    const Index a = static_cast<Index>(uniform_below(rng, 4));
    const VectorX<double> pred = predict_belief(fx.model, b, a);
    // pick an observation with positive predicted mass
    Index o = 0;
    while (pred[o] <= 0.0) ++o;
    const auto next = belief_update(fx.model, b, a, o);
    REQUIRE(next.has_value());
    CHECK((*next)[o] == doctest::Approx(1.0));
  }
}

TEST_CASE("terminal observation is exact") {
  const auto fx = build_frg_fixture();
  VectorX<double> b = VectorX<double>::Zero(9);
  b[layout::state_from_label("m_p_on")] = 1.0;
  const auto next = belief_update(fx.model, b, 0, layout::kTerminal);
  REQUIRE(next.has_value());
  CHECK((*next)[layout::kTerminal] == doctest::Approx(1.0));
}

TEST_CASE("zero-likelihood observations are reported") {
  const auto fx = build_frg_fixture();
  VectorX<double> b = VectorX<double>::Zero(9);
  b[layout::state_from_label("m_p_on")] = 1.0;
  // action manual_on cannot land in an automatic-mode configuration
  CHECK_FALSE(belief_update(fx.model, b, 0, layout::state_from_label("a_p_on")));
}

TEST_CASE("marginal performance") {
  VectorX<double> b = VectorX<double>::Zero(9);
  b[layout::state_from_label("m_p_on")] = 1.0;
  CHECK(marginal_performance(b) == doctest::Approx(1.0));

  b.setConstant(1.0 / 9.0);
  CHECK(marginal_performance(b) == doctest::Approx(4.0 / 9.0));

  b.setZero();
  b[layout::state_from_label("m_p_on")] = 0.98462;
  b[layout::state_from_label("m_np_on")] = 0.01538;
  CHECK(marginal_performance(b) == doctest::Approx(0.98462));
}

TEST_CASE("step: absorbing terminal") {
  const auto fx = build_frg_fixture();
  Rng rng(3);
  for (Index a = 0; a < 4; ++a) {
    const auto r = step(fx.model, layout::kTerminal, a, rng);
    CHECK(r.state == layout::kTerminal);
    CHECK(r.observation == layout::kTerminal);
    CHECK(r.reward == 0.0);
  }
}

TEST_CASE("step: empirical frequencies match the transition row") {
  const auto fx = build_frg_fixture();
  const Index s = layout::state_from_label("m_p_on");
  Rng rng(11);
  const int n = 100000;
  VectorX<double> freq = VectorX<double>::Zero(9);
  VectorX<double> obs_freq = VectorX<double>::Zero(9);
  for (int i = 0; i < n; ++i) {
    const auto r = step(fx.model, s, 0, rng);
    freq[r.state] += 1.0;
    obs_freq[r.observation] += 1.0;
  }
  freq /= n;
  obs_freq /= n;
  CHECK(std::abs(freq[layout::state_from_label("m_np_on")] - 0.032) < 0.01);
  CHECK(std::abs(freq[layout::state_from_label("m_p_on")] - 0.956) < 0.01);
  CHECK(std::abs(freq[layout::kTerminal] - 0.012) < 0.01);
  // observation frequencies converge to O^T applied to the transition row
  const VectorX<double> expected_obs =
      fx.model.observation.transpose() * fx.model.transition[0].row(s).transpose();
  CHECK((obs_freq - expected_obs).lpNorm<Eigen::Infinity>() < 0.01);
}

TEST_CASE("step: deterministic model gives identical outcomes for any seed") {
  auto fx = build_frg_fixture();
  for (auto& T : fx.model.transition) {
    T.setZero();
    for (Index s = 0; s < 9; ++s) T(s, layout::kTerminal) = 1.0;
  }
  fx.model.observation = MatrixX<double>::Identity(9, 9);
  for (std::uint64_t seed : {1ULL, 99ULL, 123456ULL}) {
    Rng rng(seed);
    const auto r = step(fx.model, 2, 1, rng);
    CHECK(r.state == layout::kTerminal);
    CHECK(r.observation == layout::kTerminal);
  }
}

TEST_CASE("belief support stays inside the observed configuration") {
  const auto fx = build_frg_fixture();
  Rng rng(5);
  VectorX<double> b = fx.model.initial_belief;
  Index s = layout::state_from_label("m_np_on");
  for (int t = 0; t < 2000; ++t) {
    const Index a = static_cast<Index>(uniform_below(rng, 4));
    const auto res = step(fx.model, s, a, rng);
    s = res.state;
    if (s == layout::kTerminal) {
      b = fx.model.initial_belief;
      s = uniform01(rng) < 0.5 ? layout::state_from_label("m_np_on")
                               : layout::state_from_label("m_p_on");
      continue;
    }
    const auto next = belief_update(fx.model, b, a, res.observation);
    REQUIRE(next.has_value());
    b = *next;
    CHECK(is_distribution(b));
    const Index c = layout::config_of_state(res.observation);
    for (Index st = 0; st < 9; ++st) {
      if (st == layout::nonperf_state(c) || st == layout::perf_state(c)) continue;
      CHECK(b[st] == 0.0);
    }
  }
}

TEST_CASE("undiscounted 60-step return never exceeds horizon times max reward") {
  const auto fx = build_frg_fixture();
  const double bound = 60 * 0.741;
  Rng rng(17);
  for (int ep = 0; ep < 500; ++ep) {
    Index s = uniform01(rng) < 0.5 ? 1 : 3;
    double total = 0.0;
    for (int t = 0; t < 60; ++t) {
      const auto r = step(fx.model, s, static_cast<Index>(uniform_below(rng, 4)), rng);
      total += r.reward;
      s = r.state;
      if (s == layout::kTerminal) break;
    }
    CHECK(total <= bound + 1e-9);
  }
}
