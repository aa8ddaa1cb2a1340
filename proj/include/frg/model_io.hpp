#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "frg/mdp.hpp"
#include "frg/pomdp.hpp"

namespace frg {

/// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double x) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

// --- native model format -----------------------------------------------
//
//   # comment lines (ignored)
//   STATES: <label> ...
//   ACTIONS: <label> ...
//   OBSERVATIONS: <label> ...
//   START: <p_1> ... <p_S>
//   T: <action> <src> <dst> <prob>        (unlisted entries are 0)
//   O: <state> <obs> <prob>
//   R: <state> <reward>                    (unlisted rewards are 0)
//   C: <action> <src> <dst> <count>        (optional MDP visit counts)
//   DISCOUNT: <gamma>
//   HORIZON: <steps>
//
// The terminal state is inferred: the highest-indexed state that is
// absorbing under every action with zero reward, if any.

template <typename Scalar>
void write_model(std::ostream& os, const DiscretePomdp<Scalar>& m,
                 const std::string& header = {}) {
  if (!header.empty()) os << header;
  os << "STATES:";
  for (const auto& s : m.states) os << ' ' << s;
  os << "\nACTIONS:";
  for (const auto& a : m.actions) os << ' ' << a;
  os << "\nOBSERVATIONS:";
  for (const auto& o : m.observations) os << ' ' << o;
  os << "\nSTART:";
  for (Index s = 0; s < m.num_states(); ++s)
    os << ' ' << format_double(m.initial_belief[s]);
  os << '\n';
  for (Index a = 0; a < m.num_actions(); ++a)
    for (Index s = 0; s < m.num_states(); ++s)
      for (Index t = 0; t < m.num_states(); ++t)
        if (m.transition[a](s, t) != Scalar(0))
          os << "T: " << m.actions[a] << ' ' << m.states[s] << ' '
             << m.states[t] << ' ' << format_double(m.transition[a](s, t))
             << '\n';
  for (Index s = 0; s < m.num_states(); ++s)
    for (Index o = 0; o < m.num_observations(); ++o)
      if (m.observation(s, o) != Scalar(0))
        os << "O: " << m.states[s] << ' ' << m.observations[o] << ' '
           << format_double(m.observation(s, o)) << '\n';
  for (Index s = 0; s < m.num_states(); ++s)
    if (m.reward[s] != Scalar(0))
      os << "R: " << m.states[s] << ' ' << format_double(m.reward[s]) << '\n';
  os << "DISCOUNT: " << format_double(m.discount) << '\n';
  os << "HORIZON: " << m.horizon << '\n';
}

namespace detail {

inline Index index_of(const std::vector<std::string>& labels,
                      const std::string& label, const char* what) {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<Index>(i);
  throw std::runtime_error(std::string("model file: unknown ") + what + " '" +
                           label + "'");
}

inline std::vector<std::string> read_labels(std::istringstream& ls) {
  std::vector<std::string> out;
  std::string tok;
  while (ls >> tok) out.push_back(tok);
  return out;
}

template <typename Scalar>
void infer_terminal(DiscretePomdp<Scalar>& m) {
  m.terminal = -1;
  for (Index s = m.num_states() - 1; s >= 0; --s) {
    if (m.reward[s] != Scalar(0)) continue;
    bool absorbing = true;
    for (const auto& T : m.transition)
      if (T(s, s) != Scalar(1)) absorbing = false;
    if (absorbing) {
      m.terminal = s;
      return;
    }
  }
}

}  // namespace detail

template <typename Scalar = double>
DiscretePomdp<Scalar> read_model(std::istream& is) {
  DiscretePomdp<Scalar> m;
  std::vector<std::array<std::string, 3>> t_lines, o_lines;  // deferred
  std::vector<std::pair<std::string, std::string>> r_lines;
  std::vector<std::array<std::string, 4>> c_lines;
  std::vector<Scalar> t_vals, o_vals;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    auto fail = [&](const std::string& why) {
      throw std::runtime_error("model file line " + std::to_string(lineno) +
                               ": " + why);
    };
    if (key == "STATES:") {
      m.states = detail::read_labels(ls);
    } else if (key == "ACTIONS:") {
      m.actions = detail::read_labels(ls);
    } else if (key == "OBSERVATIONS:") {
      m.observations = detail::read_labels(ls);
    } else if (key == "START:") {
      std::vector<Scalar> v;
      Scalar x;
      while (ls >> x) v.push_back(x);
      m.initial_belief = Eigen::Map<VectorX<Scalar>>(v.data(), v.size());
    } else if (key == "T:") {
      std::array<std::string, 3> ids;
      Scalar p;
      if (!(ls >> ids[0] >> ids[1] >> ids[2] >> p)) fail("malformed T line");
      t_lines.push_back(ids);
      t_vals.push_back(p);
    } else if (key == "O:") {
      std::array<std::string, 3> ids;
      Scalar p;
      if (!(ls >> ids[0] >> ids[1] >> p)) fail("malformed O line");
      ids[2] = {};
      o_lines.push_back(ids);
      o_vals.push_back(p);
    } else if (key == "R:") {
      std::string s, v;
      if (!(ls >> s >> v)) fail("malformed R line");
      r_lines.emplace_back(s, v);
    } else if (key == "C:") {
      std::array<std::string, 4> f;
      if (!(ls >> f[0] >> f[1] >> f[2] >> f[3])) fail("malformed C line");
      c_lines.push_back(f);
    } else if (key == "DISCOUNT:") {
      if (!(ls >> m.discount)) fail("malformed DISCOUNT line");
    } else if (key == "HORIZON:") {
      if (!(ls >> m.horizon)) fail("malformed HORIZON line");
    } else {
      fail("unknown section '" + key + "'");
    }
  }
  if (m.states.empty()) throw std::runtime_error("model file: no STATES section");
  if (m.actions.empty())
    throw std::runtime_error("model file: no ACTIONS section");
  if (m.observations.empty()) m.observations = m.states;
  const Index S = m.num_states();
  if (m.initial_belief.size() != S)
    throw std::runtime_error("model file: START length mismatch");
  m.transition.assign(m.actions.size(), MatrixX<Scalar>::Zero(S, S));
  m.observation = MatrixX<Scalar>::Zero(S, m.num_observations());
  m.reward = VectorX<Scalar>::Zero(S);
  for (std::size_t i = 0; i < t_lines.size(); ++i) {
    const auto& ids = t_lines[i];
    m.transition[detail::index_of(m.actions, ids[0], "action")](
        detail::index_of(m.states, ids[1], "state"),
        detail::index_of(m.states, ids[2], "state")) = t_vals[i];
  }
  for (std::size_t i = 0; i < o_lines.size(); ++i) {
    const auto& ids = o_lines[i];
    m.observation(detail::index_of(m.states, ids[0], "state"),
                  detail::index_of(m.observations, ids[1], "observation")) =
        o_vals[i];
  }
  for (const auto& [s, v] : r_lines)
    m.reward[detail::index_of(m.states, s, "state")] =
        static_cast<Scalar>(std::strtod(v.c_str(), nullptr));
  detail::infer_terminal(m);
  return m;
}

template <typename Scalar = double>
DiscretePomdp<Scalar> read_model_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_model<Scalar>(is);
}

template <typename Scalar>
void write_model_file(const std::string& path, const DiscretePomdp<Scalar>& m,
                      const std::string& header = {}) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_model(os, m, header);
}

/// Cassandra .pomdp export for interop with external solvers. Observation
/// and reward tables do not depend on the action, hence the wildcards.
template <typename Scalar>
void write_cassandra(std::ostream& os, const DiscretePomdp<Scalar>& m,
                     const std::string& header = {}) {
  if (!header.empty()) os << header;
  os << "discount: " << format_double(m.discount) << "\nvalues: reward\nstates:";
  for (const auto& s : m.states) os << ' ' << s;
  os << "\nactions:";
  for (const auto& a : m.actions) os << ' ' << a;
  os << "\nobservations:";
  for (const auto& o : m.observations) os << ' ' << o;
  os << "\n\nstart:";
  for (Index s = 0; s < m.num_states(); ++s)
    os << ' ' << format_double(m.initial_belief[s]);
  os << "\n\n";
  for (Index a = 0; a < m.num_actions(); ++a)
    for (Index s = 0; s < m.num_states(); ++s)
      for (Index t = 0; t < m.num_states(); ++t)
        if (m.transition[a](s, t) != Scalar(0))
          os << "T: " << m.actions[a] << " : " << m.states[s] << " : "
             << m.states[t] << ' ' << format_double(m.transition[a](s, t))
             << '\n';
  os << '\n';
  for (Index s = 0; s < m.num_states(); ++s)
    for (Index o = 0; o < m.num_observations(); ++o)
      if (m.observation(s, o) != Scalar(0))
        os << "O: * : " << m.states[s] << " : " << m.observations[o] << ' '
           << format_double(m.observation(s, o)) << '\n';
  os << '\n';
  for (Index s = 0; s < m.num_states(); ++s)
    if (m.reward[s] != Scalar(0))
      os << "R: * : * : " << m.states[s] << " : * "
         << format_double(m.reward[s]) << '\n';
}

/// MDP variant of the native format: observation section omitted, visit
/// counts carried in C: lines.
template <typename Scalar>
void write_mdp(std::ostream& os, const DiscreteMdp<Scalar>& m,
               const std::string& header = {}) {
  if (!header.empty()) os << header;
  os << "STATES:";
  for (const auto& s : m.states) os << ' ' << s;
  os << "\nACTIONS:";
  for (const auto& a : m.actions) os << ' ' << a;
  os << "\nSTART:";
  for (Index s = 0; s < m.num_states(); ++s)
    os << ' ' << format_double(m.initial_dist[s]);
  os << '\n';
  for (Index a = 0; a < m.num_actions(); ++a)
    for (Index s = 0; s < m.num_states(); ++s)
      for (Index t = 0; t < m.num_states(); ++t) {
        if (m.transition[a](s, t) != Scalar(0))
          os << "T: " << m.actions[a] << ' ' << m.states[s] << ' '
             << m.states[t] << ' ' << format_double(m.transition[a](s, t))
             << '\n';
        if (!m.counts.empty() && m.counts[a](s, t) != 0)
          os << "C: " << m.actions[a] << ' ' << m.states[s] << ' '
             << m.states[t] << ' ' << m.counts[a](s, t) << '\n';
      }
  for (Index s = 0; s < m.num_states(); ++s)
    if (m.reward[s] != Scalar(0))
      os << "R: " << m.states[s] << ' ' << format_double(m.reward[s]) << '\n';
  os << "DISCOUNT: " << format_double(m.discount) << '\n';
  os << "HORIZON: " << m.horizon << '\n';
}

template <typename Scalar = double>
DiscreteMdp<Scalar> read_mdp(std::istream& is) {
  // Reuse the POMDP reader; O lines are absent, C lines parsed here.
  std::stringstream pomdp_part, counts_part;
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("C:", 0) == 0)
      counts_part << line << '\n';
    else
      pomdp_part << line << '\n';
  }
  DiscretePomdp<Scalar> p = read_model<Scalar>(pomdp_part);
  DiscreteMdp<Scalar> m;
  m.states = p.states;
  m.actions = p.actions;
  m.transition = p.transition;
  m.reward = p.reward;
  m.discount = p.discount;
  m.horizon = p.horizon;
  m.initial_dist = p.initial_belief;
  m.terminal = p.terminal;
  m.counts.assign(m.actions.size(),
                  Eigen::MatrixX<long>::Zero(m.num_states(), m.num_states()));
  std::string key, al, sl, tl;
  long c;
  while (counts_part >> key >> al >> sl >> tl >> c)
    m.counts[detail::index_of(m.actions, al, "action")](
        detail::index_of(m.states, sl, "state"),
        detail::index_of(m.states, tl, "state")) = c;
  return m;
}

}  // namespace frg
