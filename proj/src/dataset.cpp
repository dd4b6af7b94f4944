#include "mdma/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "mdma/errors.hpp"

namespace mdma {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  if (line.empty()) cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

bool Dataset::has_missing() const {
  for (auto v : missing)
    if (v) return true;
  return false;
}

std::vector<std::size_t> Dataset::complete_rows() const {
  std::vector<std::size_t> out;
  const int d = cols();
  for (std::size_t r = 0; r < rows(); ++r) {
    bool complete = true;
    for (int j = 0; j < d && complete; ++j) complete = !missing[r * d + j];
    if (complete) out.push_back(r);
  }
  return out;
}

Dataset Dataset::from_matrix(RowMatrix values) {
  Dataset data;
  data.names = default_column_names(static_cast<int>(values.cols()));
  data.missing.assign(static_cast<std::size_t>(values.size()), 0);
  data.values = std::move(values);
  return data;
}

void Dataset::validate() const {
  const int d = cols();
  if (missing.size() != rows() * d) throw InvalidArgument("mask must be rows x d");
  for (std::size_t r = 0; r < rows(); ++r) {
    bool any = false;
    for (int j = 0; j < d && !any; ++j) any = !missing[r * d + j];
    if (!any) throw InvalidArgument("row " + std::to_string(r) + " fully missing");
  }
}

std::vector<std::string> default_column_names(int d) {
  std::vector<std::string> names;
  for (int j = 0; j < d; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

Dataset parse_csv(std::istream& in, const std::string& missing_token) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("empty CSV: missing header line");
  Dataset data;
  for (auto& name : split_line(line)) data.names.push_back(trim(name));
  const std::size_t d = data.names.size();

  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != d)
      throw InvalidArgument("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(d));
    bool any_observed = false;
    for (std::size_t j = 0; j < d; ++j) {
      const std::string cell = trim(cells[j]);
      if (cell.empty() || (!missing_token.empty() && cell == missing_token)) {
        values.push_back(std::numeric_limits<double>::quiet_NaN());
        data.missing.push_back(1);
        continue;
      }
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
        throw InvalidArgument("row " + std::to_string(row) + " column " + std::to_string(j) +
                              ": cannot parse '" + cell + "'");
      values.push_back(v);
      data.missing.push_back(0);
      any_observed = true;
    }
    if (!any_observed) throw InvalidArgument("row " + std::to_string(row) + " fully missing");
    ++row;
  }
  data.values = Eigen::Map<RowMatrix>(values.data(), static_cast<Eigen::Index>(row),
                                      static_cast<Eigen::Index>(d));
  return data;
}

Dataset load_csv(const std::string& path, const std::string& missing_token) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return parse_csv(in, missing_token);
}

void write_csv(std::ostream& out, const Dataset& data, const std::string& missing_token) {
  const int d = data.cols();
  for (int j = 0; j < d; ++j) out << (j ? "," : "") << data.names[j];
  out << '\n';
  char buf[64];
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (int j = 0; j < d; ++j) {
      if (j) out << ',';
      if (data.is_missing(r, j)) {
        out << missing_token;
      } else {
        const auto res = std::to_chars(buf, buf + sizeof(buf), data.values(r, j),
                                       std::chars_format::general, 17);
        out.write(buf, res.ptr - buf);
      }
    }
    out << '\n';
  }
}

void write_csv(std::ostream& out, const RowMatrix& values, const std::vector<std::string>& names) {
  Dataset data;
  data.values = values;
  data.missing.assign(static_cast<std::size_t>(values.size()), 0);
  data.names = names;
  write_csv(out, data);
}

}  // namespace mdma
