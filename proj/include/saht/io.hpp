#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "saht/core.hpp"

namespace saht {

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw Error("format_double: conversion failed");
  return {buf, end};
}

/// Fixed number of decimals, for human-facing CSV columns.
inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::vector<std::string> split_fields(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

template <class T>
T parse_number(std::string_view text, const std::string& where) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) throw ConfigError(where + ": cannot parse '" + std::string(text) + "'");
  return value;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------- policies

/// `state action probability` lines; zero entries are omitted.
inline std::string policy_to_text(const TabularPolicy& pol) {
  std::string out = "# policy " + pol.name() + "\n# states " + std::to_string(pol.num_states()) + " actions " +
                    std::to_string(pol.num_actions()) + "\n";
  for (StateId s = 0; s < pol.num_states(); ++s)
    for (ActionId a = 0; a < pol.num_actions(); ++a) {
      const double v = pol(s, a);
      if (v == 0.0) continue;
      out += std::to_string(s);
      out += ' ';
      out += std::to_string(a);
      out += ' ';
      out += format_double(v);
      out += '\n';
    }
  return out;
}

/// Missing entries are zero; each state must end up with a full distribution.
inline TabularPolicy policy_from_text(const std::string& text, const std::string& name, std::size_t num_states,
                                      std::size_t num_actions, const std::string& origin = "policy") {
  std::vector<double> probs(num_states * num_actions, 0.0);
  std::vector<bool> seen(probs.size(), false);
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (tok.size() != 3) throw ConfigError(where + ": expected 'state action probability'");
    const auto s = parse_number<std::size_t>(tok[0], where);
    const auto a = parse_number<std::size_t>(tok[1], where);
    const auto v = parse_number<double>(tok[2], where);
    if (s >= num_states || a >= num_actions) throw ConfigError(where + ": state or action out of range");
    const std::size_t k = s * num_actions + a;
    if (seen[k]) throw ConfigError(where + ": duplicate entry");
    seen[k] = true;
    probs[k] = v;
  }
  return TabularPolicy(name, num_states, num_actions, std::move(probs));
}

inline void write_policy(const std::string& path, const TabularPolicy& pol) { write_text_file(path, policy_to_text(pol)); }

inline TabularPolicy read_policy(const std::string& path, const std::string& name, const EnvSignature& sig) {
  return policy_from_text(read_text_file(path), name, sig.num_states, sig.num_actions, path);
}

// ---------------------------------------------------------------- datasets

inline constexpr std::string_view kDatasetMagic = "saht-dataset";
inline constexpr int kDatasetVersion = 1;

/// Header lines `saht-dataset 1`, `env <name> <S> <A> <p> <L> <rmax>`, `m <count>`,
/// then per trajectory `traj <behavior_id>` followed by L lines
/// `state ego teammate... next_state reward`.
inline std::string dataset_to_text(const Dataset& d) {
  const auto& sig = d.signature;
  std::string out;
  out += std::string(kDatasetMagic) + " " + std::to_string(kDatasetVersion) + "\n";
  out += "env " + sig.name + " " + std::to_string(sig.num_states) + " " + std::to_string(sig.num_actions) + " " +
         std::to_string(sig.p) + " " + std::to_string(sig.L) + " " + format_double(sig.rmax) + "\n";
  out += "m " + std::to_string(d.size()) + "\n";
  for (const auto& e : d.entries) {
    out += "traj " + e.behavior_id + "\n";
    for (const auto& st : e.trajectory.steps) {
      out += std::to_string(st.state);
      out += ' ';
      out += std::to_string(st.actions.ego);
      for (auto a : st.actions.teammates) {
        out += ' ';
        out += std::to_string(a);
      }
      out += ' ';
      out += std::to_string(st.next_state);
      out += ' ';
      out += format_double(st.reward);
      out += '\n';
    }
  }
  return out;
}

/// Parses the text form. Behavior policies are not stored in the file; the
/// caller registers them by id afterwards.
inline Dataset dataset_from_text(const std::string& text, const std::string& origin = "dataset") {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> std::vector<std::string> {
    while (std::getline(in, line)) {
      ++lineno;
      auto tok = split_ws(line);
      if (!tok.empty()) return tok;
    }
    return {};
  };
  auto where = [&] { return origin + ":" + std::to_string(lineno); };

  auto tok = next();
  if (tok.size() != 2 || tok[0] != kDatasetMagic) throw ConfigError(where() + ": not a dataset file");
  if (parse_number<int>(tok[1], where()) != kDatasetVersion)
    throw ConfigError(where() + ": unsupported dataset version " + tok[1]);

  Dataset d;
  tok = next();
  if (tok.size() != 7 || tok[0] != "env") throw ConfigError(where() + ": expected env signature line");
  auto& sig = d.signature;
  sig.name = tok[1];
  sig.num_states = parse_number<std::size_t>(tok[2], where());
  sig.num_actions = parse_number<std::size_t>(tok[3], where());
  sig.p = parse_number<std::size_t>(tok[4], where());
  sig.L = parse_number<std::size_t>(tok[5], where());
  sig.rmax = parse_number<double>(tok[6], where());

  tok = next();
  if (tok.size() != 2 || tok[0] != "m") throw ConfigError(where() + ": expected trajectory count");
  const auto m = parse_number<std::size_t>(tok[1], where());
  d.entries.reserve(m);
  const std::size_t fields = 4 + sig.p;
  for (std::size_t k = 0; k < m; ++k) {
    tok = next();
    if (tok.size() != 2 || tok[0] != "traj") throw ConfigError(where() + ": expected 'traj <behavior_id>'");
    DatasetEntry e;
    e.behavior_id = tok[1];
    e.trajectory.steps.reserve(sig.L);
    for (std::size_t t = 0; t < sig.L; ++t) {
      tok = next();
      if (tok.size() != fields) throw ConfigError(where() + ": expected " + std::to_string(fields) + " fields");
      Step st;
      st.state = parse_number<StateId>(tok[0], where());
      st.actions.ego = parse_number<ActionId>(tok[1], where());
      for (std::size_t u = 0; u < sig.p; ++u) st.actions.teammates.push_back(parse_number<ActionId>(tok[2 + u], where()));
      st.next_state = parse_number<StateId>(tok[2 + sig.p], where());
      st.reward = parse_number<double>(tok[3 + sig.p], where());
      e.trajectory.steps.push_back(std::move(st));
    }
    d.entries.push_back(std::move(e));
  }
  if (!next().empty()) throw ConfigError(where() + ": trailing content after " + std::to_string(m) + " trajectories");
  return d;
}

inline void write_dataset(const std::string& path, const Dataset& d) { write_text_file(path, dataset_to_text(d)); }

inline Dataset read_dataset(const std::string& path) { return dataset_from_text(read_text_file(path), path); }

}  // namespace saht
