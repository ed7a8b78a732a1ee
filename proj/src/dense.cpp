#include "rskel/dense.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace rskel {

namespace {

// Column-pivoted Householder QR, truncated by the rank rule. Returns the
// permutation and the leading k x n block of R (in pivoted column order).
struct TruncatedQr {
  std::vector<int> perm;
  Matrix R;
  int rank = 0;
  double tail = 0.0;
};

TruncatedQr pivoted_qr(Matrix a, double tol) {
  const Eigen::Index m = a.rows(), n = a.cols();
  TruncatedQr out;
  out.perm.resize(n);
  std::iota(out.perm.begin(), out.perm.end(), 0);

  Vector norms2 = a.colwise().squaredNorm().transpose();
  const double total = std::sqrt(norms2.sum());
  double r11 = 0.0;
  const Eigen::Index kmax = std::min(m, n);
  Eigen::Index k = 0;
  for (; k < kmax; ++k) {
    const auto trailing = norms2.segment(k, n - k);
    Eigen::Index p = 0;
    const double best2 = trailing.maxCoeff(&p);  // first max: lowest index
    const double tail = std::sqrt(trailing.sum());
    const double best = std::sqrt(best2);
    if (total == 0.0 || (k > 0 && best <= tol * r11 && tail <= tol * total)) break;
    p += k;
    if (p != k) {
      a.col(k).swap(a.col(p));
      std::swap(norms2[k], norms2[p]);
      std::swap(out.perm[k], out.perm[p]);
    }
    // Householder reflector for a(k:m, k).
    auto x = a.col(k).tail(m - k);
    double beta = 0.0, tau = 0.0;
    Vector essential(m - k > 0 ? m - k - 1 : 0);
    x.makeHouseholder(essential, tau, beta);
    if (k + 1 < n) {
      Vector work(n - k - 1);
      a.bottomRightCorner(m - k, n - k - 1)
          .applyHouseholderOnTheLeft(essential, tau, work.data());
    }
    a(k, k) = beta;
    a.col(k).tail(m - k - 1).setZero();
    if (k == 0) r11 = std::abs(beta);
    // Exact trailing norms: cheap relative to the update and immune to the
    // cancellation of norm downdating.
    for (Eigen::Index j = k + 1; j < n; ++j) {
      norms2[j] = a.col(j).tail(m - k - 1).squaredNorm();
    }
  }
  out.rank = static_cast<int>(k);
  out.tail = std::sqrt(k < n ? norms2.tail(n - k).sum() : 0.0);
  out.R = a.topRows(k);  // [R11 R12]; sub-diagonal entries were zeroed
  return out;
}

IDResult finish(const TruncatedQr& qr, Eigen::Index n) {
  const int k = qr.rank;
  const int r = static_cast<int>(n) - k;
  Matrix t_piv = qr.R.leftCols(k).triangularView<Eigen::Upper>().solve(qr.R.rightCols(r));

  IDResult id;
  id.achieved_error = qr.tail;
  std::vector<int> s_order(k), r_order(r);
  std::iota(s_order.begin(), s_order.end(), 0);
  std::iota(r_order.begin(), r_order.end(), 0);
  std::sort(s_order.begin(), s_order.end(),
            [&](int a, int b) { return qr.perm[a] < qr.perm[b]; });
  std::sort(r_order.begin(), r_order.end(),
            [&](int a, int b) { return qr.perm[k + a] < qr.perm[k + b]; });
  id.skeleton.resize(k);
  id.redundant.resize(r);
  id.T.resize(k, r);
  for (int i = 0; i < k; ++i) id.skeleton[i] = qr.perm[s_order[i]];
  for (int j = 0; j < r; ++j) id.redundant[j] = qr.perm[k + r_order[j]];
  for (int j = 0; j < r; ++j) {
    for (int i = 0; i < k; ++i) id.T(i, j) = t_piv(s_order[i], r_order[j]);
  }
  return id;
}

}  // namespace

IDResult interpolative_decomposition(const Matrix& A, double tol) {
  const Eigen::Index m = A.rows(), n = A.cols();
  if (m > 2 * n) {
    // Tall blocks: an unpivoted QR first leaves column norms and column
    // relationships intact, so the pivoted pass runs on the n x n factor.
    Eigen::HouseholderQR<Matrix> pre(A);
    Matrix r0 = pre.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    return finish(pivoted_qr(std::move(r0), tol), n);
  }
  return finish(pivoted_qr(A, tol), n);
}

IDResult two_sided_id(const Matrix& A_in, const Matrix& A_out, double tol) {
  if (A_in.cols() != A_out.cols()) {
    throw std::invalid_argument("two_sided_id: column counts differ");
  }
  Matrix stacked(A_in.rows() + A_out.rows(), A_in.cols());
  stacked << A_in, A_out;
  return interpolative_decomposition(stacked, tol);
}

IDResult id_with_skeleton(const Matrix& A, std::vector<int> skeleton) {
  std::sort(skeleton.begin(), skeleton.end());
  IDResult id;
  id.skeleton = skeleton;
  std::vector<char> in_s(A.cols(), 0);
  for (int s : skeleton) in_s[s] = 1;
  for (int j = 0; j < A.cols(); ++j) {
    if (!in_s[j]) id.redundant.push_back(j);
  }
  Matrix as(A.rows(), skeleton.size()), ar(A.rows(), id.redundant.size());
  for (std::size_t i = 0; i < skeleton.size(); ++i) as.col(i) = A.col(skeleton[i]);
  for (std::size_t j = 0; j < id.redundant.size(); ++j) ar.col(j) = A.col(id.redundant[j]);
  if (skeleton.empty()) {
    id.T.resize(0, ar.cols());
    id.achieved_error = ar.norm();
    return id;
  }
  id.T = as.colPivHouseholderQr().solve(ar);
  id.achieved_error = (ar - as * id.T).norm();
  return id;
}

PivotedLu::PivotedLu(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("PivotedLu: matrix not square");
  if (a.rows() == 0) return;
  lu_.compute(a);
  const auto diag = lu_.matrixLU().diagonal().cwiseAbs();
  for (Eigen::Index k = 0; k < diag.size(); ++k) {
    if (diag[k] == 0.0 || !std::isfinite(diag[k])) {
      throw SingularPivotError(static_cast<int>(k),
                               "zero pivot at elimination step " + std::to_string(k + 1));
    }
  }
  Eigen::Index kmin = 0;
  const double lo = diag.minCoeff(&kmin);
  pivot_ratio_ = lo / diag.maxCoeff();
  weakest_ = static_cast<int>(kmin);
}

Matrix PivotedLu::solve(const Matrix& b) const {
  if (size() == 0) return Matrix(0, b.cols());
  return lu_.solve(b);
}

Matrix PivotedLu::solve_transpose(const Matrix& b) const {
  if (size() == 0) return Matrix(0, b.cols());
  return lu_.transpose().solve(b);
}

}  // namespace rskel
