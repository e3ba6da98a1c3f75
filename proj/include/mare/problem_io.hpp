#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mare/lmi.hpp"
#include "mare/riccati.hpp"
#include "mare/sim.hpp"

namespace mare {

/// Malformed problem document; the message carries the offending field path.
class ProblemFormatError : public Error {
 public:
  using Error::Error;
};

/// A parsed problem document: the plant plus optional solver and
/// simulation sections (defaults apply when absent).
struct ProblemFile {
  PlantModel plant;
  SolverConfig solver;
  SimConfig sim;
};

namespace io_detail {

using nlohmann::json;

inline double number_at(const json& j, const std::string& path) {
  if (!j.is_number())
    throw ProblemFormatError(path + ": expected a number");
  return j.get<double>();
}

/// Checked non-negative integer; json's unsigned get would wrap negatives.
inline std::size_t count_at(const json& j, const std::string& path) {
  if (!j.is_number_integer())
    throw ProblemFormatError(path + ": expected an integer");
  if (j.is_number_unsigned()) return j.get<std::size_t>();
  const auto v = j.get<long long>();
  if (v < 0) throw ProblemFormatError(path + ": must be non-negative");
  return static_cast<std::size_t>(v);
}

inline Matrix parse_matrix(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty())
    throw ProblemFormatError(field + ": expected a non-empty array of rows");
  if (!j[0].is_array() || j[0].empty())
    throw ProblemFormatError(field + ": row 1 must be a non-empty array");
  const std::size_t cols = j[0].size();
  Matrix m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& row = j[i];
    if (!row.is_array())
      throw ProblemFormatError(field + ": row " + std::to_string(i + 1) +
                               " is not an array");
    if (row.size() != cols)
      throw ProblemFormatError(field + ": row " + std::to_string(i + 1) + " has " +
                               std::to_string(row.size()) + " entries, expected " +
                               std::to_string(cols));
    for (std::size_t c = 0; c < cols; ++c)
      m(i, c) = number_at(row[c], field + "[" + std::to_string(i + 1) + "][" +
                                      std::to_string(c + 1) + "]");
  }
  return m;
}

inline std::vector<double> parse_vector(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty())
    throw ProblemFormatError(field + ": expected a non-empty numeric array");
  std::vector<double> v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v[i] = number_at(j[i], field + "[" + std::to_string(i + 1) + "]");
  return v;
}

inline const json& require(const json& j, const std::string& key) {
  if (!j.contains(key))
    throw ProblemFormatError(key + ": missing required field");
  return j.at(key);
}

/// A number is shorthand for value * I; an array is a full matrix.
inline SymMatrix parse_sym_or_scaled_identity(const json& j, const std::string& field,
                                              std::size_t dim) {
  if (j.is_number())
    return j.get<double>() * SymMatrix::identity(dim);
  const Matrix m = parse_matrix(j, field);
  if (m.rows() != dim || m.cols() != dim)
    throw ProblemFormatError(field + ": expected a " + std::to_string(dim) + "x" +
                             std::to_string(dim) + " matrix");
  return SymMatrix(m);
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace io_detail

inline ProblemFile parse_problem(const nlohmann::json& doc) {
  using io_detail::parse_matrix;
  using io_detail::parse_vector;
  using io_detail::require;
  if (!doc.is_object())
    throw ProblemFormatError("document root must be an object");

  ProblemFile pf;
  pf.plant.A = parse_matrix(require(doc, "A"), "A");
  pf.plant.B = parse_matrix(require(doc, "B"), "B");
  const std::size_t n = pf.plant.A.rows();
  const std::size_t m = pf.plant.B.cols();

  const Matrix u = parse_matrix(require(doc, "U"), "U");
  if (u.rows() != m || u.cols() != m)
    throw ProblemFormatError("U: expected a " + std::to_string(m) + "x" +
                             std::to_string(m) + " matrix (one row per channel)");
  pf.plant.U = SymMatrix(u);
  const Matrix w = parse_matrix(require(doc, "W"), "W");
  if (w.rows() != n || w.cols() != n)
    throw ProblemFormatError("W: expected a " + std::to_string(n) + "x" +
                             std::to_string(n) + " matrix");
  pf.plant.W = SymMatrix(w);

  pf.plant.channels.nu_bar = parse_vector(require(doc, "nu_bar"), "nu_bar");
  pf.plant.channels.m = pf.plant.channels.nu_bar.size();
  if (pf.plant.channels.m != m)
    throw ProblemFormatError("nu_bar: has " + std::to_string(pf.plant.channels.m) +
                             " entries but B has " + std::to_string(m) + " columns");

  try {
    pf.plant.validate();
  } catch (const Error& e) {
    throw ProblemFormatError(std::string("plant: ") + e.what());
  }

  if (doc.contains("solver")) {
    const auto& s = doc.at("solver");
    if (!s.is_object()) throw ProblemFormatError("solver: expected an object");
    if (s.contains("tol"))
      pf.solver.tol = io_detail::number_at(s.at("tol"), "solver.tol");
    if (s.contains("max_iter"))
      pf.solver.max_iter = io_detail::count_at(s.at("max_iter"), "solver.max_iter");
    if (s.contains("divergence_threshold"))
      pf.solver.divergence_threshold = io_detail::number_at(
          s.at("divergence_threshold"), "solver.divergence_threshold");
    if (s.contains("s0"))
      pf.solver.initial =
          io_detail::parse_sym_or_scaled_identity(s.at("s0"), "solver.s0", n);
  }

  if (doc.contains("sim")) {
    const auto& s = doc.at("sim");
    if (!s.is_object()) throw ProblemFormatError("sim: expected an object");
    if (s.contains("steps"))
      pf.sim.steps = io_detail::count_at(s.at("steps"), "sim.steps");
    if (s.contains("trials"))
      pf.sim.trials = io_detail::count_at(s.at("trials"), "sim.trials");
    if (s.contains("seed"))
      pf.sim.master_seed = io_detail::count_at(s.at("seed"), "sim.seed");
    if (s.contains("burn_in"))
      pf.sim.burn_in = io_detail::count_at(s.at("burn_in"), "sim.burn_in");
    if (s.contains("qnoise"))
      pf.sim.process_noise =
          io_detail::parse_sym_or_scaled_identity(s.at("qnoise"), "sim.qnoise", n);
  }
  return pf;
}

inline ProblemFile load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ProblemFormatError("cannot open problem file: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProblemFormatError(path + ": " + e.what());
  }
  return parse_problem(doc);
}

inline nlohmann::json to_json(const Matrix& m) { return io_detail::matrix_to_json(m); }
inline nlohmann::json to_json(const SymMatrix& m) {
  return io_detail::matrix_to_json(m.mat());
}

inline nlohmann::json solution_to_json(const MareSolution& sol) {
  nlohmann::json j;
  j["verdict"] = to_string(sol.verdict);
  j["iterations"] = sol.iterations;
  j["final_residual"] = sol.final_residual;
  j["S"] = to_json(sol.fixed_point);
  if (sol.gain) j["K"] = to_json(sol.gain->K);
  return j;
}

inline nlohmann::json certificate_to_json(const LmiCertificate& cert) {
  nlohmann::json j;
  j["Y"] = to_json(cert.Y);
  j["Z"] = to_json(cert.Z);
  j["delta"] = cert.delta;
  j["min_pivot"] = cert.min_pivot;
  j["feasible"] = cert.feasible;
  j["w_regularization"] = cert.w_regularization;
  return j;
}

inline LmiCertificate certificate_from_json(const nlohmann::json& j) {
  LmiCertificate cert;
  cert.Y = SymMatrix(io_detail::parse_matrix(io_detail::require(j, "Y"), "Y"));
  cert.Z = io_detail::parse_matrix(io_detail::require(j, "Z"), "Z");
  cert.delta = io_detail::number_at(io_detail::require(j, "delta"), "delta");
  cert.min_pivot =
      io_detail::number_at(io_detail::require(j, "min_pivot"), "min_pivot");
  cert.feasible = io_detail::require(j, "feasible").get<bool>();
  if (j.contains("w_regularization"))
    cert.w_regularization = j.at("w_regularization").get<double>();
  return cert;
}

inline Matrix gain_from_json(const nlohmann::json& j) {
  return io_detail::parse_matrix(io_detail::require(j, "K"), "K");
}

/// Locale-independent shortest-round-trip formatting for CSV output.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace mare
