#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmdp/experiment.hpp"
#include "cmdp/model.hpp"

namespace cmdp {

/// Seventeen significant digits: enough to round-trip any double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& j, const char* name) {
  require(j.contains(name), ErrorCode::kParseError, std::string("missing field '") + name + "'");
  return j.at(name);
}

inline Matrix read_matrix(const nlohmann::json& j, int rows, int cols, const char* name) {
  require(j.is_array() && static_cast<int>(j.size()) == rows, ErrorCode::kParseError,
          std::string(name) + " must have " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (int s = 0; s < rows; ++s) {
    const auto& row = j[static_cast<std::size_t>(s)];
    require(row.is_array() && static_cast<int>(row.size()) == cols, ErrorCode::kParseError,
            std::string(name) + " row " + std::to_string(s) + " must have " + std::to_string(cols) + " entries");
    for (int a = 0; a < cols; ++a) {
      const auto& v = row[static_cast<std::size_t>(a)];
      require(v.is_number(), ErrorCode::kParseError, std::string(name) + " entries must be numbers");
      m(s, a) = v.get<double>();
    }
  }
  return m;
}

inline nlohmann::json write_matrix(const Matrix& m) {
  auto out = nlohmann::json::array();
  for (int s = 0; s < m.rows(); ++s) {
    auto row = nlohmann::json::array();
    for (int a = 0; a < m.cols(); ++a) row.push_back(m(s, a));
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace detail

/// Builds a model from its JSON form and checks every invariant.
inline CmdpModel model_from_json(const nlohmann::json& j) {
  CmdpModel m;
  try {
    require(j.is_object(), ErrorCode::kParseError, "model must be a JSON object");
    m.num_states = detail::field(j, "num_states").get<int>();
    m.num_actions = detail::field(j, "num_actions").get<int>();
    require(m.num_states >= 1 && m.num_actions >= 1, ErrorCode::kParseError, "sizes must be positive");
    const int S = m.num_states;
    const int A = m.num_actions;
    m.reward = detail::read_matrix(detail::field(j, "reward"), S, A, "reward");
    m.cost = detail::read_matrix(detail::field(j, "cost"), S, A, "cost");
    m.threshold = detail::field(j, "threshold").get<double>();
    const auto& P = detail::field(j, "transition");
    require(P.is_array() && static_cast<int>(P.size()) == S, ErrorCode::kParseError, "transition must have S blocks");
    m.transition = TransitionTensor(S, A);
    for (int s = 0; s < S; ++s) {
      const Matrix block = detail::read_matrix(P[static_cast<std::size_t>(s)], A, S, "transition block");
      for (int a = 0; a < A; ++a)
        for (int n = 0; n < S; ++n) m.transition(s, a, n) = block(a, n);
    }
    m.ergodic = j.value("ergodic", false);
    if (j.contains("t_mix")) m.t_mix = j.at("t_mix").get<int>();
    if (j.contains("t_hit")) m.t_hit = j.at("t_hit").get<double>();
    if (j.contains("c0")) m.c0 = j.at("c0").get<double>();
    if (j.contains("safe_policy")) m.safe_policy = detail::read_matrix(j.at("safe_policy"), S, A, "safe_policy");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, e.what());
  }
  validate(m);
  return m;
}

inline nlohmann::json model_to_json(const CmdpModel& m) {
  nlohmann::json j;
  j["num_states"] = m.num_states;
  j["num_actions"] = m.num_actions;
  j["reward"] = detail::write_matrix(m.reward);
  j["cost"] = detail::write_matrix(m.cost);
  j["threshold"] = m.threshold;
  auto P = nlohmann::json::array();
  for (int s = 0; s < m.num_states; ++s) {
    auto block = nlohmann::json::array();
    for (int a = 0; a < m.num_actions; ++a) {
      const auto row = m.transition.row(s, a);
      block.push_back(std::vector<double>(row.begin(), row.end()));
    }
    P.push_back(std::move(block));
  }
  j["transition"] = std::move(P);
  j["ergodic"] = m.ergodic;
  if (m.t_mix) j["t_mix"] = *m.t_mix;
  if (m.t_hit) j["t_hit"] = *m.t_hit;
  if (m.c0) j["c0"] = *m.c0;
  if (m.safe_policy) j["safe_policy"] = detail::write_matrix(*m.safe_policy);
  return j;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kParseError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::kInvalidArgument, "cannot write " + path.string());
  out << text;
}

inline CmdpModel load_model(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

inline void save_model(const CmdpModel& m, const std::filesystem::path& path) {
  write_text(path, model_to_json(m).dump(2) + "\n");
}

inline std::string step_log_csv(const ExperimentLog& log) {
  std::string out = "t,state,action,reward,cost\n";
  out.reserve(out.size() + log.steps.size() * 48);
  for (std::size_t t = 0; t < log.steps.size(); ++t) {
    const auto& s = log.steps[t];
    out += std::to_string(t + 1) + ',' + std::to_string(s.state) + ',' + std::to_string(s.action) + ',' +
           format_double(s.reward) + ',' + format_double(s.cost) + '\n';
  }
  return out;
}

inline std::string episodes_csv(const ExperimentLog& log) {
  std::string out;
  if (!log.po_episodes.empty() || log.fh_episodes.empty()) {
    out = "k,lambda,lambda_after,J_hat,evi_iterations,evi_gain,evi_gain_spread,bonus_max,policy_delta,score_max,"
          "stability_premise,stability_bound,cumulative_reward,cumulative_cost\n";
    for (const auto& e : log.po_episodes)
      out += std::to_string(e.k) + ',' + format_double(e.lambda_before) + ',' + format_double(e.lambda_after) + ',' +
             format_double(e.j_hat) + ',' + std::to_string(e.evi_iterations) + ',' + format_double(e.evi_gain) +
             ',' + format_double(e.evi_gain_spread) + ',' + format_double(e.bonus_max) + ',' +
             format_double(e.policy_delta) + ',' + format_double(e.score_max) + ',' +
             (e.stability_premise ? "1" : "0") + ',' + (e.stability_bound ? "1" : "0") + ',' +
             format_double(e.cumulative_reward) + ',' + format_double(e.cumulative_cost) + '\n';
    return out;
  }
  out = "k,start_state,lp_objective,cost_lhs,cost_rhs,span_r_max,span_c_max,feasible_flag\n";
  for (const auto& e : log.fh_episodes)
    out += std::to_string(e.k) + ',' + std::to_string(e.start_state) + ',' + format_double(e.lp_objective) + ',' +
           format_double(e.cost_lhs) + ',' + format_double(e.cost_rhs) + ',' + format_double(e.span_r_max) + ',' +
           format_double(e.span_c_max) + ',' + (e.feasible ? "1" : "0") + '\n';
  return out;
}

inline std::string metrics_csv(const MetricCurves& m) {
  std::string out = "t,regret,violation\n";
  for (std::size_t i = 0; i < m.checkpoints.size(); ++i)
    out += std::to_string(m.checkpoints[i]) + ',' + format_double(m.regret[i]) + ',' +
           format_double(m.violation[i]) + '\n';
  return out;
}

inline MetricCurves read_metrics_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line.rfind("t,regret,violation", 0) == 0,
          ErrorCode::kParseError, path.string() + ": missing metrics header");
  MetricCurves m;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string t, r, v;
    require(std::getline(row, t, ',') && std::getline(row, r, ',') && std::getline(row, v, ','),
            ErrorCode::kParseError, path.string() + ": malformed row '" + line + "'");
    try {
      m.checkpoints.push_back(std::stoll(t));
      m.regret.push_back(std::stod(r));
      m.violation.push_back(std::stod(v));
    } catch (const std::exception&) {
      fail(ErrorCode::kParseError, path.string() + ": malformed row '" + line + "'");
    }
  }
  return m;
}

}  // namespace cmdp
