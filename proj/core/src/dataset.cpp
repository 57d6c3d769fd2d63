// Copyright 2026 The qbreak Authors
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

#include "qbreak/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "qbreak/error.hpp"

namespace qbreak {
namespace {

constexpr const char* kModule = "dataset";

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& cell) {
  std::string lower;
  for (char ch : cell) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return lower.empty() || lower == "na" || lower == "nan" || lower == "null" || lower == ".";
}

double parse_cell(const std::string& cell, std::size_t line, const std::string& column) {
  if (is_missing(cell)) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  if (*begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
    throw_data(kModule, "line " + std::to_string(line) + ", column '" + column +
                            "': cannot parse '" + cell + "' as a number");
  }
  return v;
}

std::string format(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

LoadedDataset parse_csv(std::istream& in, const DatasetSpec& spec) {
  if (spec.lag < 1) throw_invalid(kModule, "lag must be >= 1");
  if (spec.predictor_columns.empty()) throw_invalid(kModule, "at least one predictor is required");
  std::string line;
  if (!std::getline(in, line)) throw_data(kModule, "empty CSV input");
  std::vector<std::string> header = split_line(line);
  for (std::string& h : header) h = trim(h);
  auto column_index = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw_data(kModule, "column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t y_col = column_index(spec.response_column);
  std::vector<std::size_t> x_cols;
  for (const std::string& name : spec.predictor_columns) x_cols.push_back(column_index(name));
  std::optional<std::size_t> date_col;
  if (spec.date_column) date_col = column_index(*spec.date_column);

  std::vector<double> ys;
  std::vector<std::vector<double>> xs;
  std::vector<std::string> dates;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_line(line);
    if (fields.size() != header.size()) {
      throw_data(kModule, "line " + std::to_string(line_no) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(header.size()));
    }
    ys.push_back(parse_cell(trim(fields[y_col]), line_no, spec.response_column));
    std::vector<double> row;
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      row.push_back(parse_cell(trim(fields[x_cols[j]]), line_no, spec.predictor_columns[j]));
    }
    xs.push_back(std::move(row));
    dates.push_back(date_col ? trim(fields[*date_col]) : std::string());
  }

  const std::size_t p = x_cols.size();
  LoadedDataset out;
  std::vector<std::size_t> keep;
  for (std::size_t r = spec.lag; r < ys.size(); ++r) {
    bool ok = !std::isnan(ys[r]);
    for (double v : xs[r - spec.lag]) ok = ok && !std::isnan(v);
    if (ok) {
      keep.push_back(r);
    } else {
      ++out.dropped_rows;
    }
  }
  const std::size_t minimum = spec.min_observations.value_or(p + 12);
  if (keep.size() < minimum) {
    throw_data(kModule, "only " + std::to_string(keep.size()) +
                            " complete aligned rows; at least " + std::to_string(minimum) +
                            " are required");
  }
  out.sample.y.resize(static_cast<Eigen::Index>(keep.size()));
  out.sample.x_lagged.resize(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(p));
  out.sample.has_intercept = true;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out.sample.y[ii] = ys[keep[i]];
    for (std::size_t j = 0; j < p; ++j) {
      out.sample.x_lagged(ii, static_cast<Eigen::Index>(j)) = xs[keep[i] - spec.lag][j];
    }
    if (date_col) out.dates.push_back(dates[keep[i]]);
  }
  return out;
}

LoadedDataset load_csv(const DatasetSpec& spec) {
  std::ifstream in(spec.path);
  if (!in) throw_data(kModule, "cannot open '" + spec.path + "'");
  return parse_csv(in, spec);
}

void write_sample_csv(const Sample& sample, std::ostream& out) {
  const auto n = static_cast<Eigen::Index>(sample.n());
  const auto p = static_cast<Eigen::Index>(sample.p());
  out << "t,y";
  for (Eigen::Index j = 0; j < p; ++j) out << ",x" << (j + 1);
  out << '\n';
  for (Eigen::Index t = 0; t <= n; ++t) {
    out << t << ',' << (t == 0 ? std::string("NA") : format(sample.y[t - 1]));
    for (Eigen::Index j = 0; j < p; ++j) {
      out << ',' << (t == n ? std::string("NA") : format(sample.x_lagged(t, j)));
    }
    out << '\n';
  }
}

}  // namespace qbreak
