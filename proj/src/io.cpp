// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "hmfm/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace hmfm {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_real(const std::string& cell, const std::string& where) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  const auto res = std::from_chars(first, last, v);
  if (cell.empty() || res.ec != std::errc() || res.ptr != last) {
    throw DataError(where + ": cannot parse number '" + cell + "'");
  }
  return v;
}

}  // namespace

GroupedDataset parse_csv(std::istream& in, const std::string& source) {
  std::string line;
  int line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!trim(line).empty()) {
      header = split(line);
      break;
    }
  }
  if (header.empty()) throw DataError(source + ": missing header");
  int col_group = -1, col_obs = -1, col_y = -1;
  std::vector<int> col_x;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    const std::string& h = header[c];
    if (h == "group") col_group = c;
    else if (h == "obs") col_obs = c;
    else if (h == "y") col_y = c;
    else if (h.size() > 1 && h[0] == 'x' && h.find_first_not_of("0123456789", 1) == std::string::npos) {
      const int idx = std::stoi(h.substr(1));
      if (idx != static_cast<int>(col_x.size()) + 1) {
        throw DataError(source + ": covariate columns must be x1..xr in order");
      }
      col_x.push_back(c);
    } else {
      throw DataError(source + ": unknown column '" + h + "'");
    }
  }
  if (col_group < 0 || col_obs < 0 || col_y < 0) {
    throw DataError(source + ": header must contain group, obs and y");
  }

  GroupedDataset data;
  std::vector<std::map<std::string, int>> index;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto cells = split(line);
    if (cells.size() != header.size()) throw DataError(where + ": expected " + std::to_string(header.size()) + " fields");
    const double g = parse_real(cells[col_group], where);
    if (g < 1 || g != std::floor(g)) throw DataError(where + ": group must be a positive integer");
    const int j = static_cast<int>(g) - 1;
    if (j >= data.d()) {
      data.groups.resize(j + 1);
      index.resize(j + 1);
    }
    const std::string& obs_id = cells[col_obs];
    if (obs_id.empty()) throw DataError(where + ": empty obs id");
    const double y = parse_real(cells[col_y], where);
    VectorXd x(static_cast<Eigen::Index>(col_x.size()));
    for (std::size_t k = 0; k < col_x.size(); ++k) {
      if (cells[col_x[k]].empty()) throw DataError(where + ": missing covariate x" + std::to_string(k + 1));
      x(k) = parse_real(cells[col_x[k]], where);
    }
    auto it = index[j].find(obs_id);
    if (it == index[j].end()) {
      index[j].emplace(obs_id, data.n(j));
      data.groups[j].push_back(Observation{{y}, x});
    } else {
      Observation& o = data.groups[j][it->second];
      if (o.x != x) throw DataError(where + ": covariates differ between marks of one observation");
      o.y.push_back(y);
    }
  }
  for (int j = 0; j < data.d(); ++j) {
    if (data.groups[j].empty()) throw DataError(source + ": group " + std::to_string(j + 1) + " has no rows");
  }
  if (data.d() == 0) throw DataError(source + ": no data rows");
  return data;
}

GroupedDataset ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return parse_csv(in, path);
}

void write_dataset_csv(std::ostream& out, const GroupedDataset& data) {
  const int r = data.covariate_dim();
  out << "group,obs,y";
  for (int k = 0; k < r; ++k) out << ",x" << k + 1;
  out << '\n';
  for (int j = 0; j < data.d(); ++j) {
    for (int i = 0; i < data.n(j); ++i) {
      const Observation& o = data.groups[j][i];
      for (double v : o.y) {
        out << j + 1 << ',' << i + 1 << ',' << format_double(v);
        for (int k = 0; k < r; ++k) out << ',' << format_double(o.x(k));
        out << '\n';
      }
    }
  }
}

void write_scalars_csv(std::ostream& out, const ChainOutput& chain) {
  out << "iter,K,M,lambda";
  for (int j = 0; j < chain.d; ++j) out << ",gamma_" << j + 1;
  for (int j = 0; j < chain.d; ++j) out << ",u_" << j + 1;
  out << '\n';
  for (const auto& r : chain.records) {
    out << r.iter << ',' << r.k << ',' << r.m << ',' << format_double(r.lambda);
    for (int j = 0; j < chain.d; ++j) out << ',' << format_double(r.gamma(j));
    for (int j = 0; j < chain.d; ++j) out << ',' << format_double(r.u(j));
    out << '\n';
  }
}

void write_allocations_csv(std::ostream& out, const ChainOutput& chain, const GroupedDataset& data) {
  const std::vector<int> off = data.offsets();
  out << "iter,group,obs,cluster\n";
  for (const auto& r : chain.records) {
    for (int j = 0; j < data.d(); ++j) {
      for (int i = 0; i < data.n(j); ++i) {
        out << r.iter << ',' << j + 1 << ',' << i + 1 << ',' << r.allocations[off[j] + i] + 1 << '\n';
      }
    }
  }
}

void write_components_csv(std::ostream& out, const ChainOutput& chain) {
  out << "iter,component,mu,sigma2";
  for (int j = 0; j < chain.d; ++j) out << ",S_" << j + 1;
  out << '\n';
  for (const auto& r : chain.records) {
    for (int h = 0; h < r.m; ++h) {
      out << r.iter << ',' << h + 1 << ',' << format_double(r.mu(h)) << ',' << format_double(r.sigma_sq(h));
      for (int j = 0; j < chain.d; ++j) out << ',' << format_double(r.s(j, h));
      out << '\n';
    }
  }
}

void write_matrix_csv(std::ostream& out, const MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      if (k > 0) out << ',';
      out << format_double(m(i, k));
    }
    out << '\n';
  }
}

void write_partition_csv(std::ostream& out, const PartitionEstimate& est, const GroupedDataset& data) {
  const std::vector<int> off = data.offsets();
  out << "group,obs,cluster\n";
  for (int j = 0; j < data.d(); ++j) {
    for (int i = 0; i < data.n(j); ++i) out << j + 1 << ',' << i + 1 << ',' << est.labels[off[j] + i] + 1 << '\n';
  }
}

void write_density_csv(std::ostream& out, const std::vector<double>& grid, const std::vector<double>& density) {
  out << "y,density\n";
  for (std::size_t i = 0; i < grid.size(); ++i) out << format_double(grid[i]) << ',' << format_double(density[i]) << '\n';
}

Partition read_labels_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || split(line) != std::vector<std::string>{"group", "obs", "cluster"}) {
    throw DataError(path + ": expected header group,obs,cluster");
  }
  std::map<std::pair<int, int>, int> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const auto cells = split(line);
    if (cells.size() != 3) throw DataError(where + ": expected 3 fields");
    const int g = static_cast<int>(parse_real(cells[0], where));
    const int o = static_cast<int>(parse_real(cells[1], where));
    const int c = static_cast<int>(parse_real(cells[2], where));
    if (!rows.emplace(std::make_pair(g, o), c - 1).second) throw DataError(where + ": duplicate (group, obs)");
  }
  Partition out;
  out.reserve(rows.size());
  for (const auto& [key, c] : rows) out.push_back(c);
  return out;
}

MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(line)) row.push_back(parse_real(cell, path + ":" + std::to_string(line_no)));
    if (!rows.empty() && row.size() != rows.front().size()) throw DataError(path + ": ragged matrix");
    rows.push_back(std::move(row));
  }
  MatrixXd m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
  }
  return m;
}

std::vector<double> parse_number_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& cell : split(s)) out.push_back(parse_real(cell, "list '" + s + "'"));
  return out;
}

}  // namespace hmfm
