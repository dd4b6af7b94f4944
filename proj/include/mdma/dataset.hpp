#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mdma/query.hpp"

namespace mdma {

/// Row-major n x d matrix with a parallel missingness mask (nonzero = missing).
/// Values under the mask are ignored and stored as NaN.
struct Dataset {
  RowMatrix values;
  std::vector<std::uint8_t> missing;  // n * d, row-major
  std::vector<std::string> names;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
  bool is_missing(std::size_t row, int col) const { return missing[row * cols() + col] != 0; }
  bool has_missing() const;
  /// Rows without any missing coordinate.
  std::vector<std::size_t> complete_rows() const;

  /// Fully observed dataset with default column names x1..xd.
  static Dataset from_matrix(RowMatrix values);
  /// Rejects masks that hide every coordinate of a row.
  void validate() const;
};

/// Reads a CSV with a header line. Cells equal to `missing_token` (and empty cells) are
/// marked missing; an empty token means only empty cells are missing.
Dataset load_csv(const std::string& path, const std::string& missing_token = "NA");
Dataset parse_csv(std::istream& in, const std::string& missing_token = "NA");

/// Writes a header and rows with 17 significant digits; missing cells become `missing_token`.
void write_csv(std::ostream& out, const Dataset& data, const std::string& missing_token = "NA");
void write_csv(std::ostream& out, const RowMatrix& values, const std::vector<std::string>& names);
std::vector<std::string> default_column_names(int d);

}  // namespace mdma
