#pragma once

#include <krein/error.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace krein {

namespace csv {

inline std::vector<std::vector<double>> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t,") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      cell = b == std::string::npos ? "" : cell.substr(b, e - b + 1);
      std::size_t used = 0;
      try {
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
      if (used != cell.size()) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header row
      }
      throw DomainError("non-numeric entry in " + path + ": " + line);
    }
    first = false;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd read_matrix(const std::string& path) {
  auto rows = read_rows(path);
  if (rows.empty()) throw DomainError("empty matrix file " + path);
  const auto n = rows.front().size();
  Eigen::MatrixXd A(rows.size(), n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != n) throw DomainError("ragged matrix rows in " + path);
    for (std::size_t j = 0; j < n; ++j) A(i, j) = rows[i][j];
  }
  return A;
}

// one value per line, or a single row; an index,value pair per line is also accepted
inline Eigen::VectorXd read_vector(const std::string& path) {
  auto rows = read_rows(path);
  if (rows.empty()) throw DomainError("empty vector file " + path);
  std::vector<double> v;
  if (rows.size() == 1) {
    v = rows.front();
  } else {
    for (const auto& r : rows) {
      if (r.size() == 1) v.push_back(r[0]);
      else if (r.size() >= 2) v.push_back(r[1]);
    }
  }
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace csv

// Symmetric positive-semidefinite matrix with cached eigenpairs.
class OperatorHandle {
public:
  explicit OperatorHandle(Eigen::MatrixXd A, double accretive_tol = 1e-10) : A_(std::move(A)) {
    if (A_.rows() != A_.cols() || A_.rows() == 0) throw DomainError("operator matrix must be square and non-empty");
    if (!A_.allFinite()) throw DomainError("operator matrix has non-finite entries");
    const double scale = std::max(1.0, A_.norm());
    if ((A_ - A_.transpose()).norm() > 1e-12 * scale) throw DomainError("operator matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A_);
    if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
    lambda_ = es.eigenvalues();
    V_ = es.eigenvectors();
    if (lambda_.minCoeff() < -accretive_tol)
      throw AccretivityError("operator has eigenvalue " + std::to_string(lambda_.minCoeff()) + " < 0");
    lambda_ = lambda_.cwiseMax(0.0);
  }

  // tridiag(-1, 2, -1) / h^2
  static OperatorHandle laplacian1d(int n, double h) {
    if (n < 1 || !(h > 0.0)) throw DomainError("laplacian1d needs n >= 1 and h > 0");
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    const double s = 1.0 / (h * h);
    for (int i = 0; i < n; ++i) {
      A(i, i) = 2.0 * s;
      if (i + 1 < n) A(i, i + 1) = A(i + 1, i) = -s;
    }
    return OperatorHandle(A);
  }

  static OperatorHandle diagonal(const Eigen::VectorXd& d) { return OperatorHandle(Eigen::MatrixXd(d.asDiagonal())); }
  static OperatorHandle from_csv(const std::string& path) { return OperatorHandle(csv::read_matrix(path)); }

  Eigen::Index size() const { return A_.rows(); }
  const Eigen::MatrixXd& matrix() const { return A_; }
  const Eigen::VectorXd& eigenvalues() const { return lambda_; }
  const Eigen::MatrixXd& eigenvectors() const { return V_; }

  Eigen::VectorXd to_eigenbasis(const Eigen::VectorXd& f) const {
    check(f);
    return V_.transpose() * f;
  }
  Eigen::VectorXd from_eigenbasis(const Eigen::VectorXd& c) const { return V_ * c; }

  Eigen::VectorXd apply(const Eigen::VectorXd& f) const {
    check(f);
    return A_ * f;
  }

  // g(A) f
  template <class G>
  Eigen::VectorXd apply_function(G&& g, const Eigen::VectorXd& f) const {
    Eigen::VectorXd c = to_eigenbasis(f);
    for (Eigen::Index k = 0; k < c.size(); ++k) c[k] *= g(lambda_[k]);
    return V_ * c;
  }

  void check(const Eigen::VectorXd& f) const {
    if (f.size() != size())
      throw DomainError("vector of length " + std::to_string(f.size()) + " does not match operator size " +
                        std::to_string(size()));
  }

private:
  Eigen::MatrixXd A_;
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd V_;
};

}  // namespace krein
