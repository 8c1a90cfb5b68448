#pragma once

#include "tdmpc/model.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace testing {

inline std::filesystem::path source_dir() { return TDMPC_SOURCE_DIR; }
inline std::filesystem::path scenario_path(const std::string& name) { return source_dir() / "scenarios" / name; }

/// Four identical double-integrator-like agents with the benchmark data.
/// `box` is the disturbance half width, `scale` multiplies the benchmark initial states.
inline nlohmann::json four_agent_doc(double box = 0.3, double scale = 1.0)
{
  using nlohmann::json;
  const std::vector<std::vector<double>> x0 = {{-19, -4}, {-18, -3}, {-10, 4}, {-18, 3}};
  json agents = json::array();
  for (const auto& x : x0) {
    agents.push_back({{"A", {{1.1, 0.12}, {0.35, 0.0075}}},
                      {"B", {{1.5}, {0.5}}},
                      {"Q", {{1.0, 0.0}, {0.0, 1.0}}},
                      {"R", 0.1},
                      {"state_set", {{"box", {20.0, 5.0}}}},
                      {"input_set", {{"box", {2.0}}}},
                      {"disturbance", {{"box", {box, box}}}},
                      {"x0", {scale * x[0], scale * x[1]}}});
  }
  json row = {{"psi_x", json::array()}, {"psi_u", json::array()}, {"rhs", 10.0}, {"two_sided", true}};
  for (int i = 1; i <= 4; ++i) {
    row["psi_x"].push_back({0.08, 0.02});
    row["psi_u"].push_back({0.01 * i});
  }
  return {{"horizon", 5}, {"steps", 30}, {"seed", 0}, {"agents", agents}, {"coupling", {{"rows", {row}}}}};
}

inline tdmpc::Scenario four_agent(double box = 0.3, double scale = 1.0)
{
  return tdmpc::validate_scenario(four_agent_doc(box, scale));
}

/// Feasible variant scaled further so that a tight coupling row binds.
/// `two_sided` selects |sum (Psi_x x + u)| <= rhs, otherwise sum u <= rhs.
inline tdmpc::Scenario binding_coupling(bool two_sided, double rhs)
{
  using nlohmann::json;
  auto doc = four_agent_doc(0.2, 0.5 * 0.3);
  json row = {{"psi_x", json::array()}, {"psi_u", json::array()}, {"rhs", rhs}, {"two_sided", two_sided}};
  for (int i = 0; i < 4; ++i) {
    row["psi_x"].push_back(two_sided ? json{0.08, 0.02} : json{0.0, 0.0});
    row["psi_u"].push_back({1.0});
  }
  doc["coupling"] = {{"rows", {row}}};
  return tdmpc::validate_scenario(doc);
}

inline Eigen::MatrixXd benchmark_A()
{
  Eigen::MatrixXd A(2, 2);
  A << 1.1, 0.12, 0.35, 0.0075;
  return A;
}

inline Eigen::MatrixXd benchmark_B()
{
  Eigen::MatrixXd B(2, 1);
  B << 1.5, 0.5;
  return B;
}

/// Scalar agent x+ = a x + b u + w with box constraints.
inline tdmpc::AgentModel scalar_agent(double a, double b, double xmax, double umax, double w, double q = 1.0,
                                      double r = 1.0)
{
  tdmpc::AgentModel ag;
  ag.A = Eigen::MatrixXd::Constant(1, 1, a);
  ag.B = Eigen::MatrixXd::Constant(1, 1, b);
  ag.Q = Eigen::MatrixXd::Constant(1, 1, q);
  ag.R = Eigen::MatrixXd::Constant(1, 1, r);
  ag.X = tdmpc::HPolytope::box(Eigen::VectorXd::Constant(1, xmax));
  ag.U = tdmpc::HPolytope::box(Eigen::VectorXd::Constant(1, umax));
  ag.disturbance.shape = tdmpc::DisturbanceShape::Box;
  ag.disturbance.half_widths = Eigen::VectorXd::Constant(1, w);
  return ag;
}

}  // namespace testing
