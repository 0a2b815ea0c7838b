#include "cstrans/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace cstrans {

namespace {

void validate(const Dataset& data) {
  const int n = data.n();
  if (n == 0) throw DataError("dataset is empty");
  if (data.delta.size() != n || data.w.size() != n || data.z.rows() != n)
    throw DataError("dataset columns have inconsistent lengths");
  if (data.z.cols() < 1) throw DataError("dataset needs at least one z column");
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(data.v[i]) || !std::isfinite(data.w[i]))
      throw DataError("non-finite v or w at row " + std::to_string(i + 1));
    if (data.delta[i] != 0 && data.delta[i] != 1)
      throw DataError("delta must be 0 or 1 at row " + std::to_string(i + 1));
    for (int j = 0; j < data.z.cols(); ++j)
      if (!std::isfinite(data.z(i, j)))
        throw DataError("non-finite z at row " + std::to_string(i + 1));
  }
}

Dataset reorder(const Dataset& data, const std::vector<int>& order) {
  const int n = static_cast<int>(order.size());
  Dataset out;
  out.v.resize(n);
  out.delta.resize(n);
  out.z.resize(n, data.z.cols());
  out.w.resize(n);
  for (int i = 0; i < n; ++i) {
    out.v[i] = data.v[order[i]];
    out.delta[i] = data.delta[order[i]];
    out.z.row(i) = data.z.row(order[i]);
    out.w[i] = data.w[order[i]];
  }
  return out;
}

}  // namespace

Dataset Dataset::from_columns(Eigen::VectorXd v, Eigen::VectorXi delta,
                              Eigen::MatrixXd z, Eigen::VectorXd w) {
  Dataset data{std::move(v), std::move(delta), std::move(z), std::move(w)};
  validate(data);
  std::vector<int> order(data.n());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return data.v[a] < data.v[b]; });
  return reorder(data, order);
}

Dataset Dataset::subset(const std::vector<int>& rows) const {
  for (int r : rows)
    if (r < 0 || r >= n()) throw DataError("subset row index out of range");
  std::vector<int> order = rows;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return v[a] < v[b]; });
  Dataset out = reorder(*this, order);
  if (out.n() == 0) throw DataError("subset is empty");
  return out;
}

Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const int ncol = static_cast<int>(header.size());
  const int d = ncol - 3;
  if (d < 1 || header[0] != "v" || header[1] != "delta" ||
      header[ncol - 1] != "w")
    throw DataError("'" + path + "': header must be v,delta,z1,...,zd,w");
  for (int j = 0; j < d; ++j)
    if (header[2 + j] != "z" + std::to_string(j + 1))
      throw DataError("'" + path + "': header must be v,delta,z1,...,zd,w");

  std::vector<double> vs, ws;
  std::vector<int> deltas;
  std::vector<double> zs;
  int row = 1;  // header was row 1
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double x = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        vals.push_back(x);
      } catch (const std::logic_error&) {
        throw DataError("'" + path + "': bad numeric cell at row " +
                        std::to_string(row));
      }
    }
    if (static_cast<int>(vals.size()) != ncol)
      throw DataError("'" + path + "': wrong column count at row " +
                      std::to_string(row));
    const double dl = vals[1];
    if (dl != 0.0 && dl != 1.0)
      throw DataError("'" + path + "': delta must be 0 or 1 at row " +
                      std::to_string(row));
    vs.push_back(vals[0]);
    deltas.push_back(static_cast<int>(dl));
    for (int j = 0; j < d; ++j) zs.push_back(vals[2 + j]);
    ws.push_back(vals[ncol - 1]);
  }
  const int n = static_cast<int>(vs.size());
  if (n == 0) throw DataError("'" + path + "' has no data rows");

  Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(vs.data(), n);
  Eigen::VectorXd w = Eigen::Map<Eigen::VectorXd>(ws.data(), n);
  Eigen::VectorXi delta(n);
  for (int i = 0; i < n; ++i) delta[i] = deltas[i];
  Eigen::MatrixXd z(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) z(i, j) = zs[static_cast<std::size_t>(i) * d + j];
  try {
    return Dataset::from_columns(std::move(v), std::move(delta), std::move(z),
                                 std::move(w));
  } catch (const DataError& err) {
    throw DataError("'" + path + "': " + err.what());
  }
}

void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "v,delta";
  for (int j = 0; j < data.d(); ++j) out << ",z" << j + 1;
  out << ",w\n";
  char buf[64];
  auto put = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out << buf;
  };
  for (int i = 0; i < data.n(); ++i) {
    put(data.v[i]);
    out << ',' << data.delta[i];
    for (int j = 0; j < data.d(); ++j) {
      out << ',';
      put(data.z(i, j));
    }
    out << ',';
    put(data.w[i]);
    out << '\n';
  }
}

void write_table(const std::string& path,
                 const std::vector<std::string>& columns,
                 const Eigen::MatrixXd& rows) {
  if (rows.cols() != static_cast<Eigen::Index>(columns.size()))
    throw DataError("write_table: header width does not match the data");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (j) out << ',';
    out << columns[j];
  }
  out << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      if (j) out << ',';
      std::snprintf(buf, sizeof buf, "%.17g", rows(i, j));
      out << buf;
    }
    out << '\n';
  }
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for digest");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return std::string(hex);
}

}  // namespace cstrans
