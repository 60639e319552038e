// Copyright 2026 The sdemd Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sdemd/io.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace sdemd {

using nlohmann::json;

namespace {

Matrix<double> matrix_from_rows(const json& rows, const std::string& what) {
  if (!rows.is_array() || rows.empty()) throw ParseError(what + " must be a nonempty array of rows");
  const auto cols = rows[0].is_array() ? rows[0].size() : 0;
  if (cols == 0) throw ParseError(what + " rows must be nonempty arrays");
  Matrix<double> out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!rows[r].is_array() || rows[r].size() != cols)
      throw DimensionMismatch(what + " row " + std::to_string(r) + " has " +
                              std::to_string(rows[r].is_array() ? rows[r].size() : 0) +
                              " entries, expected " + std::to_string(cols));
    for (std::size_t c = 0; c < cols; ++c) {
      if (!rows[r][c].is_number()) throw ParseError(what + " entries must be numbers");
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
    }
  }
  return out;
}

Vector<double> vector_from_json(const json& arr, const std::string& what) {
  if (!arr.is_array() || arr.empty()) throw ParseError(what + " must be a nonempty array");
  Vector<double> out(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ParseError(what + " entries must be numbers");
    out(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  return out;
}

json rows_to_json(const Matrix<double>& column_major_items) {
  json rows = json::array();
  for (Eigen::Index c = 0; c < column_major_items.cols(); ++c) {
    json row = json::array();
    for (Eigen::Index r = 0; r < column_major_items.rows(); ++r) row.push_back(column_major_items(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

LabeledDataset read_bags(std::istream& in, const std::string& source) {
  std::vector<Bag> bags;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    try {
      const json obj = json::parse(line);
      if (!obj.is_object()) throw ParseError("expected a JSON object");
      Bag bag;
      bag.id = obj.at("id").get<std::string>();
      const auto& label = obj.at("label");
      bag.label = label.is_string() ? label.get<std::string>() : label.dump();
      const auto& inst = obj.at("instances");
      if (!inst.is_array() || inst.empty()) throw ParseError("bag has an empty instance list");
      // One instance per JSON row; stored column-wise.
      bag.instances = matrix_from_rows(inst, "instances").transpose();
      validate_bag(bag);
      if (!bags.empty() && bag.dim() != bags.front().dim())
        throw DimensionMismatch("instance dimension " + std::to_string(bag.dim()) +
                                " differs from earlier bags (" + std::to_string(bags.front().dim()) + ")");
      bags.push_back(std::move(bag));
    } catch (const DimensionMismatch& e) {
      throw DimensionMismatch(where + ": " + e.what());
    } catch (const std::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return LabeledDataset(std::move(bags));
}

LabeledDataset load_bags(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_bags(in, path);
}

void write_bags(std::ostream& out, const LabeledDataset& data) {
  for (const auto& bag : data.bags) {
    json obj;
    obj["id"] = bag.id;
    obj["label"] = bag.label;
    obj["instances"] = rows_to_json(bag.instances);
    out << obj.dump() << '\n';
  }
}

void save_bags(const std::string& path, const LabeledDataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_bags(out, data);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

DictionaryFile load_dictionary(const std::string& path) {
  const std::string text = read_file(path);
  try {
    const json obj = json::parse(text);
    DictionaryFile f;
    f.sigma = obj.at("sigma").get<double>();
    f.dictionary.atoms = matrix_from_rows(obj.at("atoms"), "atoms").transpose();
    validate_dictionary(f.dictionary);
    if (!(f.sigma > 0)) throw ParseError("sigma must be > 0");
    return f;
  } catch (const std::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_dictionary(const std::string& path, const Dictionary& dict, double sigma) {
  json obj;
  obj["sigma"] = sigma;
  obj["atoms"] = rows_to_json(dict.atoms);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << obj.dump(2) << '\n';
}

void write_report_csv(std::ostream& out, const TrainReport& report) {
  out << "iteration,loss,xi,Z,Gamma,mean_atom_norm\n";
  for (const auto& r : report.records)
    out << r.iteration << ',' << format_number(r.loss) << ',' << r.xi << ',' << format_number(r.z_pos)
        << ',' << format_number(r.gamma) << ',' << format_number(r.mean_atom_norm) << '\n';
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& pts) {
  out << "x,y,cutoff\n";
  for (const auto& p : pts) out << format_number(p.x) << ',' << format_number(p.y) << ',' << p.cutoff << '\n';
}

TransportProblem parse_transport_json(const std::string& text) {
  try {
    const json obj = json::parse(text);
    TransportProblem p;
    p.h = vector_from_json(obj.at("h"), "h");
    p.g = vector_from_json(obj.at("g"), "g");
    p.d = matrix_from_rows(obj.at("d"), "d");
    return p;
  } catch (const DimensionMismatch&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string("transport JSON: ") + e.what());
  }
}

TransportProblem parse_transport_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError("transport CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 3) throw ParseError("transport CSV needs h, g and at least one cost row");
  const std::size_t m = rows[0].size();
  if (rows.size() != m + 2) throw ParseError("transport CSV must have m + 2 lines for m bins");
  TransportProblem p;
  p.h = Eigen::Map<const Vector<double>>(rows[0].data(), static_cast<Eigen::Index>(m));
  if (rows[1].size() != m) throw DimensionMismatch("g has a different length than h");
  p.g = Eigen::Map<const Vector<double>>(rows[1].data(), static_cast<Eigen::Index>(m));
  p.d.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t r = 0; r < m; ++r) {
    if (rows[r + 2].size() != m) throw DimensionMismatch("cost row " + std::to_string(r) + " is not length m");
    for (std::size_t c = 0; c < m; ++c)
      p.d(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r + 2][c];
  }
  return p;
}

TransportProblem load_transport(const std::string& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return parse_transport_json(text);
  return parse_transport_csv(text);
}

}  // namespace sdemd
