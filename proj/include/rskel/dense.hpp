#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <stdexcept>
#include <vector>

namespace rskel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A[:, redundant] ~= A[:, skeleton] * T. Both index lists are sorted.
struct IDResult {
  std::vector<int> skeleton;
  std::vector<int> redundant;
  Matrix T;                     // |S| x |R|
  double achieved_error = 0.0;  // Frobenius norm of the discarded QR block
};

/// Column-pivoted QR interpolative decomposition. The rank is the smallest k
/// for which both |R_{k+1,k+1}| <= tol |R_11| and the trailing block satisfies
/// ||R_22||_F <= tol ||A||_F. Pivots go to the largest remaining column norm,
/// ties to the lowest index.
IDResult interpolative_decomposition(const Matrix& A, double tol);

/// One ID serving two directions: runs interpolative_decomposition on
/// [A_in; A_out]. Both blocks must have the same column count.
IDResult two_sided_id(const Matrix& A_in, const Matrix& A_out, double tol);

/// Least-squares interpolation matrix for a prescribed skeleton.
IDResult id_with_skeleton(const Matrix& A, std::vector<int> skeleton);

class SingularPivotError : public std::runtime_error {
 public:
  SingularPivotError(int index, const std::string& what)
      : std::runtime_error(what), index_(index) {}
  /// 0-based elimination step whose pivot vanished.
  int index() const { return index_; }

 private:
  int index_;
};

/// Partial-pivoting LU (PA = LU). Exact zero pivots throw SingularPivotError.
class PivotedLu {
 public:
  PivotedLu() = default;
  explicit PivotedLu(const Matrix& a);

  Eigen::Index size() const { return lu_.rows(); }
  Matrix solve(const Matrix& b) const;
  Matrix solve_transpose(const Matrix& b) const;
  /// min |U_kk| / max |U_kk|; 1 for an empty matrix.
  double pivot_ratio() const { return pivot_ratio_; }
  /// Index (0-based) of the smallest pivot, -1 for an empty matrix.
  int weakest_pivot() const { return weakest_; }
  /// Original row moved into elimination position k.
  int pivot_row(int k) const { return lu_.permutationP().indices()[k]; }

 private:
  Eigen::PartialPivLU<Matrix> lu_;
  double pivot_ratio_ = 1.0;
  int weakest_ = -1;
};

}  // namespace rskel
