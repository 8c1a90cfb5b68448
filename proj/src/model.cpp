#include "tdmpc/model.hpp"

#include "tdmpc/linalg.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace tdmpc {

namespace {

using nlohmann::json;

bool same(const MatrixXd& a, const MatrixXd& b)
{
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool same(const VectorXd& a, const VectorXd& b)
{
  return a.size() == b.size() && (a.size() == 0 || a == b);
}

std::string describe(int agent, const std::string& field, const std::string& what)
{
  std::ostringstream os;
  if (agent >= 0) { os << "agent " << agent << ": "; }
  os << "field '" << field << "': " << what;
  return os.str();
}

const json& require(const json& obj, const char* key, int agent, const std::string& ctx = {})
{
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(describe(agent, ctx.empty() ? key : ctx + "." + key, "missing"));
  }
  return obj.at(key);
}

double read_number(const json& j, int agent, const std::string& field)
{
  if (!j.is_number()) { throw ParseError(describe(agent, field, "expected a number")); }
  return j.get<double>();
}

VectorXd read_vector(const json& j, int agent, const std::string& field)
{
  if (j.is_number()) { return VectorXd::Constant(1, j.get<double>()); }
  if (!j.is_array()) { throw ParseError(describe(agent, field, "expected a numeric array")); }
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) { v(static_cast<Eigen::Index>(k)) = read_number(j[k], agent, field); }
  return v;
}

/// Row-major nested arrays; a bare number is a 1x1 matrix.
MatrixXd read_matrix(const json& j, int agent, const std::string& field)
{
  if (j.is_number()) { return MatrixXd::Constant(1, 1, j.get<double>()); }
  if (!j.is_array() || j.empty()) { throw ParseError(describe(agent, field, "expected a nested numeric array")); }
  const auto rows = j.size();
  if (!j[0].is_array()) { throw ParseError(describe(agent, field, "expected rows as arrays")); }
  const auto cols = j[0].size();
  MatrixXd M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw ScenarioError(agent, field, describe(agent, field, "dimension mismatch: ragged rows"));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = read_number(j[r][c], agent, field);
    }
  }
  return M;
}

json matrix_to_json(const MatrixXd& M)
{
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) { row.push_back(M(r, c)); }
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const VectorXd& v)
{
  json arr = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) { arr.push_back(v(k)); }
  return arr;
}

HPolytope read_polytope(const json& j, int agent, const std::string& field)
{
  if (!j.is_object()) { throw ParseError(describe(agent, field, "expected an object with 'box' or 'G'/'h'")); }
  if (j.contains("box")) { return HPolytope::box(read_vector(j.at("box"), agent, field + ".box")); }
  HPolytope poly{read_matrix(require(j, "G", agent, field), agent, field + ".G"),
                 read_vector(require(j, "h", agent, field), agent, field + ".h")};
  if (poly.G.rows() != poly.h.size()) {
    throw ScenarioError(agent, field, describe(agent, field, "dimension mismatch: G rows vs h length"));
  }
  return poly;
}

Disturbance read_disturbance(const json& j, int agent)
{
  const std::string field = "disturbance";
  Disturbance d;
  if (j.is_object() && j.contains("box")) {
    d.shape = DisturbanceShape::Box;
    d.half_widths = read_vector(j.at("box"), agent, field + ".box");
    if ((d.half_widths.array() < 0.0).any()) {
      throw ScenarioError(agent, field, describe(agent, field, "negative box half width"));
    }
  } else if (j.is_object() && j.contains("ball")) {
    d.shape = DisturbanceShape::Ball;
    d.radius = read_number(j.at("ball"), agent, field + ".ball");
    if (d.radius < 0.0) { throw ScenarioError(agent, field, describe(agent, field, "negative radius")); }
  } else {
    throw ParseError(describe(agent, field, "expected {\"box\": [...]} or {\"ball\": r}"));
  }
  return d;
}

MatrixXd symmetrize(const MatrixXd& M) { return 0.5 * (M + M.transpose()); }

void check_agent(const AgentModel& a, const VectorXd& x0, int i)
{
  const auto n = a.A.rows();
  if (a.A.cols() != n || n == 0) { throw ScenarioError(i, "A", describe(i, "A", "dimension mismatch: A must be square")); }
  if (a.B.rows() != n || a.B.cols() == 0) { throw ScenarioError(i, "B", describe(i, "B", "dimension mismatch: B rows must equal n")); }
  const auto m = a.B.cols();
  if (a.Q.rows() != n || a.Q.cols() != n) { throw ScenarioError(i, "Q", describe(i, "Q", "dimension mismatch")); }
  if (a.R.rows() != m || a.R.cols() != m) { throw ScenarioError(i, "R", describe(i, "R", "dimension mismatch")); }
  if (a.X.dim() != n) { throw ScenarioError(i, "state_set", describe(i, "state_set", "dimension mismatch")); }
  if (a.U.dim() != m) { throw ScenarioError(i, "input_set", describe(i, "input_set", "dimension mismatch")); }
  if (a.disturbance.shape == DisturbanceShape::Box && a.disturbance.half_widths.size() != n) {
    throw ScenarioError(i, "disturbance", describe(i, "disturbance", "dimension mismatch"));
  }
  if (x0.size() != n) { throw ScenarioError(i, "x0", describe(i, "x0", "dimension mismatch")); }

  if (!is_positive_definite(a.Q)) { throw ScenarioError(i, "Q", describe(i, "Q", "non-PD weight")); }
  if (!is_positive_definite(a.R)) { throw ScenarioError(i, "R", describe(i, "R", "non-PD weight")); }

  for (const auto& [poly, name] : {std::pair{&a.X, "state_set"}, std::pair{&a.U, "input_set"}}) {
    for (Eigen::Index r = 0; r < poly->faces(); ++r) {
      if (poly->G.row(r).norm() == 0.0) { throw ScenarioError(i, name, describe(i, name, "zero face normal")); }
    }
    if (!contains_origin_interior(*poly)) {
      throw ScenarioError(i, name, describe(i, name, "origin not interior"));
    }
    if (!is_bounded(*poly)) { throw ScenarioError(i, name, describe(i, name, "unbounded polytope")); }
  }

  if (!is_reachable(a.A, a.B)) { throw ScenarioError(i, "A", describe(i, "A,B", "unreachable (A,B)")); }

  if (!membership(a.X, x0)) { throw ScenarioError(i, "x0", describe(i, "x0", "initial state outside state set")); }
}

}  // namespace

ScenarioError::ScenarioError(int agent, std::string field, const std::string& what)
    : std::runtime_error(what), agent_(agent), field_(std::move(field))
{}

bool operator==(const HPolytope& a, const HPolytope& b) { return same(a.G, b.G) && same(a.h, b.h); }

bool operator==(const Disturbance& a, const Disturbance& b)
{
  return a.shape == b.shape && a.radius == b.radius && same(a.half_widths, b.half_widths);
}

bool operator==(const AgentModel& a, const AgentModel& b)
{
  return same(a.A, b.A) && same(a.B, b.B) && a.disturbance == b.disturbance && a.X == b.X && a.U == b.U
         && same(a.Q, b.Q) && same(a.R, b.R);
}

bool operator==(const CouplingSpec& a, const CouplingSpec& b)
{
  if (a.p != b.p || a.psi_x.size() != b.psi_x.size() || a.psi_u.size() != b.psi_u.size()) { return false; }
  for (std::size_t i = 0; i < a.psi_x.size(); ++i) {
    if (!same(a.psi_x[i], b.psi_x[i])) { return false; }
  }
  for (std::size_t i = 0; i < a.psi_u.size(); ++i) {
    if (!same(a.psi_u[i], b.psi_u[i])) { return false; }
  }
  return true;
}

bool operator==(const Scenario& a, const Scenario& b)
{
  if (!(a.agents == b.agents && a.coupling == b.coupling && a.horizon == b.horizon && a.steps == b.steps
        && a.seed == b.seed && a.solver == b.solver && a.trigger == b.trigger && a.x0.size() == b.x0.size())) {
    return false;
  }
  for (std::size_t i = 0; i < a.x0.size(); ++i) {
    if (!same(a.x0[i], b.x0[i])) { return false; }
  }
  return true;
}

HPolytope HPolytope::box(const VectorXd& half_widths)
{
  const auto d = half_widths.size();
  HPolytope poly{MatrixXd::Zero(2 * d, d), VectorXd::Zero(2 * d)};
  for (Eigen::Index j = 0; j < d; ++j) {
    poly.G(2 * j, j) = 1.0;
    poly.G(2 * j + 1, j) = -1.0;
    poly.h(2 * j) = half_widths(j);
    poly.h(2 * j + 1) = half_widths(j);
  }
  return poly;
}

bool membership(const HPolytope& poly, const VectorXd& y, double tol)
{
  if (y.size() != poly.dim()) { throw std::invalid_argument("membership: dimension mismatch"); }
  return ((poly.G * y - poly.h).array() <= tol).all();
}

bool contains_origin_interior(const HPolytope& poly, double tol) { return (poly.h.array() > tol).all(); }

bool is_bounded(const HPolytope& poly)
{
  const auto d = poly.dim();
  if (poly.faces() == 0) { return d == 0; }
  const MatrixXd Gt = poly.G.transpose();
  for (Eigen::Index j = 0; j < d; ++j) {
    for (const double sign : {1.0, -1.0}) {
      const VectorXd e = sign * VectorXd::Unit(d, j);
      const VectorXd mu = nnls(Gt, e);
      if ((Gt * mu - e).norm() > 1e-9) { return false; }
    }
  }
  return true;
}

double Disturbance::w_bar() const
{
  return shape == DisturbanceShape::Ball ? radius : half_widths.norm();
}

bool Disturbance::contains(const VectorXd& w, double tol) const
{
  if (shape == DisturbanceShape::Ball) { return w.norm() <= radius + tol; }
  return (w.cwiseAbs() - half_widths).maxCoeff() <= tol;
}

Disturbance Disturbance::scaled(double factor) const
{
  Disturbance d = *this;
  d.radius *= factor;
  d.half_widths *= factor;
  return d;
}

CouplingSpec normalize_coupling(std::vector<MatrixXd> psi_x, std::vector<MatrixXd> psi_u, const VectorXd& rhs)
{
  if (psi_x.size() != psi_u.size()) {
    throw ScenarioError(-1, "coupling", describe(-1, "coupling", "dimension mismatch: psi_x vs psi_u agent count"));
  }
  if ((rhs.array() <= 0.0).any()) {
    throw ScenarioError(-1, "coupling.rhs", describe(-1, "coupling.rhs", "right-hand side must be positive"));
  }
  for (std::size_t i = 0; i < psi_x.size(); ++i) {
    if (psi_x[i].rows() != rhs.size() || psi_u[i].rows() != rhs.size()) {
      throw ScenarioError(static_cast<int>(i), "coupling", describe(static_cast<int>(i), "coupling", "row count differs"));
    }
    for (Eigen::Index r = 0; r < rhs.size(); ++r) {
      psi_x[i].row(r) /= rhs(r);
      psi_u[i].row(r) /= rhs(r);
    }
  }
  return CouplingSpec{std::move(psi_x), std::move(psi_u), rhs.size()};
}

std::string_view to_string(TriggerMode mode)
{
  return mode == TriggerMode::Periodic ? "periodic" : "self-triggered";
}

std::optional<TriggerMode> parse_trigger_mode(std::string_view s)
{
  if (s == "self-triggered") { return TriggerMode::SelfTriggered; }
  if (s == "periodic") { return TriggerMode::Periodic; }
  return std::nullopt;
}

void check_scenario(const Scenario& s)
{
  if (s.agents.empty()) { throw ScenarioError(-1, "agents", describe(-1, "agents", "at least one agent required")); }
  if (s.horizon < 1) { throw ScenarioError(-1, "horizon", describe(-1, "horizon", "must be >= 1")); }
  if (s.steps < 1) { throw ScenarioError(-1, "steps", describe(-1, "steps", "must be >= 1")); }
  if (s.x0.size() != s.agents.size()) { throw ScenarioError(-1, "x0", describe(-1, "x0", "one initial state per agent")); }
  for (std::size_t i = 0; i < s.agents.size(); ++i) { check_agent(s.agents[i], s.x0[i], static_cast<int>(i)); }

  const auto& c = s.coupling;
  if (c.psi_x.size() != s.agents.size() || c.psi_u.size() != s.agents.size()) {
    throw ScenarioError(-1, "coupling", describe(-1, "coupling", "dimension mismatch: one block per agent"));
  }
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const int ai = static_cast<int>(i);
    if (c.psi_x[i].rows() != c.p || c.psi_u[i].rows() != c.p) {
      throw ScenarioError(ai, "coupling", describe(ai, "coupling", "row count differs across agents"));
    }
    if (c.psi_x[i].cols() != s.agents[i].n() || c.psi_u[i].cols() != s.agents[i].m()) {
      throw ScenarioError(ai, "coupling", describe(ai, "coupling", "dimension mismatch"));
    }
  }

  const auto& sv = s.solver;
  if (!(sv.rho > 0.0)) { throw ScenarioError(-1, "solver.rho", describe(-1, "solver.rho", "must be > 0")); }
  if (!(sv.gamma > 0.0 && sv.gamma <= 1.0)) {
    throw ScenarioError(-1, "solver.gamma", describe(-1, "solver.gamma", "must lie in (0, 1]"));
  }
  if (sv.tau && !(*sv.tau > 0.0)) { throw ScenarioError(-1, "solver.tau", describe(-1, "solver.tau", "must be > 0")); }
  if (sv.max_iter < 1 || sv.qp_max_iter < 1) {
    throw ScenarioError(-1, "solver.max_iter", describe(-1, "solver.max_iter", "must be >= 1"));
  }
  if (!(sv.tol_primal > 0.0 && sv.tol_dual > 0.0 && sv.qp_tol > 0.0)) {
    throw ScenarioError(-1, "solver.tol", describe(-1, "solver.tol", "tolerances must be > 0"));
  }
}

Scenario validate_scenario(const json& doc)
{
  if (!doc.is_object()) { throw ParseError("scenario document must be an object"); }
  Scenario s;

  const json& agents = require(doc, "agents", -1);
  if (!agents.is_array() || agents.empty()) { throw ParseError("field 'agents': expected a non-empty array"); }
  for (std::size_t k = 0; k < agents.size(); ++k) {
    const int i = static_cast<int>(k);
    const json& a = agents[k];
    AgentModel model;
    model.A = read_matrix(require(a, "A", i), i, "A");
    model.B = read_matrix(require(a, "B", i), i, "B");
    model.Q = read_matrix(require(a, "Q", i), i, "Q");
    model.R = read_matrix(require(a, "R", i), i, "R");
    if (model.Q.rows() == model.Q.cols()) { model.Q = symmetrize(model.Q); }
    if (model.R.rows() == model.R.cols()) { model.R = symmetrize(model.R); }
    model.X = read_polytope(require(a, "state_set", i), i, "state_set");
    model.U = read_polytope(require(a, "input_set", i), i, "input_set");
    model.disturbance = read_disturbance(require(a, "disturbance", i), i);
    s.agents.push_back(std::move(model));
    s.x0.push_back(read_vector(require(a, "x0", i), i, "x0"));
  }

  const json& horizon = require(doc, "horizon", -1);
  const json& steps = require(doc, "steps", -1);
  if (!horizon.is_number_integer() || !steps.is_number_integer()) {
    throw ParseError("fields 'horizon' and 'steps' must be integers");
  }
  s.horizon = horizon.get<int>();
  s.steps = steps.get<int>();
  if (doc.contains("seed")) {
    const auto& seed = doc.at("seed");
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) { throw ParseError("field 'seed': expected a nonnegative integer"); }
    s.seed = doc.at("seed").get<std::uint64_t>();
  }
  if (doc.contains("trigger")) {
    const auto mode = doc.at("trigger").is_string() ? parse_trigger_mode(doc.at("trigger").get<std::string>()) : std::nullopt;
    if (!mode) { throw ParseError("field 'trigger': expected \"self-triggered\" or \"periodic\""); }
    s.trigger = *mode;
  }

  // Coupling rows; a two-sided row |a'v| <= b becomes a'v <= b and -a'v <= b.
  const auto M = s.agents.size();
  std::vector<MatrixXd> psi_x(M), psi_u(M);
  std::vector<double> rhs;
  std::vector<std::vector<Eigen::RowVectorXd>> rows_x(M), rows_u(M);
  if (doc.contains("coupling")) {
    const json& rows = require(doc.at("coupling"), "rows", -1, "coupling");
    if (!rows.is_array()) { throw ParseError("field 'coupling.rows': expected an array"); }
    for (const json& row : rows) {
      const json& jx = require(row, "psi_x", -1, "coupling.rows");
      const json& ju = require(row, "psi_u", -1, "coupling.rows");
      if (!jx.is_array() || !ju.is_array() || jx.size() != M || ju.size() != M) {
        throw ScenarioError(-1, "coupling", describe(-1, "coupling", "dimension mismatch: one psi entry per agent"));
      }
      const double b = read_number(require(row, "rhs", -1, "coupling.rows"), -1, "coupling.rhs");
      const bool two_sided = row.contains("two_sided") && row.at("two_sided").get<bool>();
      for (const double sign : two_sided ? std::vector<double>{1.0, -1.0} : std::vector<double>{1.0}) {
        for (std::size_t i = 0; i < M; ++i) {
          rows_x[i].push_back(sign * read_vector(jx[i], static_cast<int>(i), "coupling.psi_x").transpose());
          rows_u[i].push_back(sign * read_vector(ju[i], static_cast<int>(i), "coupling.psi_u").transpose());
        }
        rhs.push_back(b);
      }
    }
  }
  const auto p = static_cast<Eigen::Index>(rhs.size());
  for (std::size_t i = 0; i < M; ++i) {
    const auto n = s.agents[i].n();
    const auto m = s.agents[i].m();
    psi_x[i] = MatrixXd::Zero(p, n);
    psi_u[i] = MatrixXd::Zero(p, m);
    for (Eigen::Index r = 0; r < p; ++r) {
      const auto& rx = rows_x[i][static_cast<std::size_t>(r)];
      const auto& ru = rows_u[i][static_cast<std::size_t>(r)];
      if (rx.size() != n || ru.size() != m) {
        throw ScenarioError(static_cast<int>(i), "coupling", describe(static_cast<int>(i), "coupling", "dimension mismatch"));
      }
      psi_x[i].row(r) = rx;
      psi_u[i].row(r) = ru;
    }
  }
  s.coupling = normalize_coupling(std::move(psi_x), std::move(psi_u),
                                  Eigen::Map<const VectorXd>(rhs.data(), p));

  if (doc.contains("solver")) {
    const json& sv = doc.at("solver");
    if (!sv.is_object()) { throw ParseError("field 'solver': expected an object"); }
    auto num = [&](const char* key, double& out) {
      if (sv.contains(key)) { out = read_number(sv.at(key), -1, std::string("solver.") + key); }
    };
    auto integer = [&](const char* key, int& out) {
      if (sv.contains(key)) {
        if (!sv.at(key).is_number_integer()) { throw ParseError(std::string("field 'solver.") + key + "': expected an integer"); }
        out = sv.at(key).get<int>();
      }
    };
    num("rho", s.solver.rho);
    num("gamma", s.solver.gamma);
    if (sv.contains("tau") && !sv.at("tau").is_null()) { s.solver.tau = read_number(sv.at("tau"), -1, "solver.tau"); }
    num("tol_primal", s.solver.tol_primal);
    num("tol_dual", s.solver.tol_dual);
    integer("max_iter", s.solver.max_iter);
    integer("qp_max_iter", s.solver.qp_max_iter);
    num("qp_tol", s.solver.qp_tol);
  }

  check_scenario(s);
  return s;
}

Scenario validate_scenario(std::string_view text)
{
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed scenario document: ") + e.what());
  }
  try {
    return validate_scenario(doc);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed scenario document: ") + e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) { throw ParseError("cannot open scenario file " + path.string()); }
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  return validate_scenario(std::string_view(text));
}

json to_json(const Scenario& s)
{
  json doc;
  doc["horizon"] = s.horizon;
  doc["steps"] = s.steps;
  doc["seed"] = s.seed;
  doc["trigger"] = std::string(to_string(s.trigger));

  json agents = json::array();
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const auto& a = s.agents[i];
    json ja;
    ja["A"] = matrix_to_json(a.A);
    ja["B"] = matrix_to_json(a.B);
    ja["Q"] = matrix_to_json(a.Q);
    ja["R"] = matrix_to_json(a.R);
    ja["state_set"] = {{"G", matrix_to_json(a.X.G)}, {"h", vector_to_json(a.X.h)}};
    ja["input_set"] = {{"G", matrix_to_json(a.U.G)}, {"h", vector_to_json(a.U.h)}};
    if (a.disturbance.shape == DisturbanceShape::Box) {
      ja["disturbance"] = {{"box", vector_to_json(a.disturbance.half_widths)}};
    } else {
      ja["disturbance"] = {{"ball", a.disturbance.radius}};
    }
    ja["x0"] = vector_to_json(s.x0[i]);
    agents.push_back(std::move(ja));
  }
  doc["agents"] = std::move(agents);

  json rows = json::array();
  for (Eigen::Index r = 0; r < s.coupling.p; ++r) {
    json jx = json::array();
    json ju = json::array();
    for (std::size_t i = 0; i < s.agents.size(); ++i) {
      jx.push_back(vector_to_json(s.coupling.psi_x[i].row(r).transpose()));
      ju.push_back(vector_to_json(s.coupling.psi_u[i].row(r).transpose()));
    }
    rows.push_back({{"psi_x", jx}, {"psi_u", ju}, {"rhs", 1.0}});
  }
  doc["coupling"] = {{"rows", rows}};

  json sv;
  sv["rho"] = s.solver.rho;
  sv["gamma"] = s.solver.gamma;
  sv["tau"] = s.solver.tau ? json(*s.solver.tau) : json(nullptr);
  sv["tol_primal"] = s.solver.tol_primal;
  sv["tol_dual"] = s.solver.tol_dual;
  sv["max_iter"] = s.solver.max_iter;
  sv["qp_max_iter"] = s.solver.qp_max_iter;
  sv["qp_tol"] = s.solver.qp_tol;
  doc["solver"] = std::move(sv);
  return doc;
}

}  // namespace tdmpc
