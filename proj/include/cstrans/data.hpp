#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cstrans/errors.hpp"

namespace cstrans {

// Current status sample, always kept sorted by censoring time v
// (stable for ties, so the input order of tied rows is preserved).
struct Dataset {
  Eigen::VectorXd v;       // censoring times, nondecreasing
  Eigen::VectorXi delta;   // 1 if the event happened by v
  Eigen::MatrixXd z;       // n x d covariates entering linearly
  Eigen::VectorXd w;       // covariate entering through the smooth term

  int n() const { return static_cast<int>(v.size()); }
  int d() const { return static_cast<int>(z.cols()); }

  // Validates shapes and values, then sorts by v.
  static Dataset from_columns(Eigen::VectorXd v, Eigen::VectorXi delta,
                              Eigen::MatrixXd z, Eigen::VectorXd w);

  // Row selection (indices into the sorted sample); result is re-sorted.
  Dataset subset(const std::vector<int>& rows) const;
};

// Reads "v,delta,z1,...,zd,w" with a mandatory header; one linear covariate
// column minimum. Malformed cells raise DataError naming the 1-based row.
Dataset read_csv(const std::string& path);

void write_csv(const Dataset& data, const std::string& path);

// Writes a plain numeric CSV: header from `columns`, cells at full precision
// (%.17g). rows.cols() must equal columns.size().
void write_table(const std::string& path, const std::vector<std::string>& columns,
                 const Eigen::MatrixXd& rows);

// FNV-1a 64-bit digest of a file's bytes, as fixed-width hex.
std::string file_digest(const std::string& path);

}  // namespace cstrans
