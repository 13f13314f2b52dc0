#include "resp/kronlinalg.hpp"

#include "resp/errors.hpp"

#include <cmath>
#include <limits>

namespace resp {

namespace {
thread_local std::uint64_t tl_kron_flops = 0;
}

std::uint64_t kron_flop_count() { return tl_kron_flops; }
void reset_kron_flop_count() { tl_kron_flops = 0; }

BlockedMatrix::BlockedMatrix(Matrix values, Index block_rows)
    : values_(std::move(values)), block_rows_(block_rows) {
  if (block_rows_ <= 0) throw DimensionError("BlockedMatrix block rows", 1, block_rows_);
  if (values_.rows() % block_rows_ != 0)
    throw DimensionError("BlockedMatrix rows divisible by block rows",
                         (values_.rows() / block_rows_ + 1) * block_rows_, values_.rows());
  if (!values_.allFinite()) throw NumericalError("BlockedMatrix: non-finite entries");
}

Matrix kron_apply(const Matrix& A, const Matrix& B, const BlockedMatrix& C) {
  const Index m = A.rows(), n = A.cols();
  const Index p = B.rows(), q = B.cols();
  if (C.block_rows() != q) throw DimensionError("kron_apply: block rows of C vs cols of B", q, C.block_rows());
  if (C.block_count() != n) throw DimensionError("kron_apply: block count of C vs cols of A", n, C.block_count());
  const Index r = C.cols();

  Matrix out(m * p, r);
  Matrix acc(q, r);
  std::uint64_t flops = 0;
  for (Index i = 0; i < m; ++i) {
    acc.setZero();
    for (Index j = 0; j < n; ++j) {
      const double a = A(i, j);
      if (a == 0.0) continue;
      acc.noalias() += a * C.block(j);
      flops += static_cast<std::uint64_t>(q * r);
    }
    out.middleRows(i * p, p).noalias() = B * acc;
    flops += static_cast<std::uint64_t>(p * q * r);
  }
  tl_kron_flops += flops;
  return out;
}

Matrix kron_apply(const Matrix& A, const Matrix& B, const Matrix& C) {
  const Index nq = A.cols() * B.cols();
  if (C.rows() != nq) throw DimensionError("kron_apply: rows of C vs cols(A)*cols(B)", nq, C.rows());
  if (B.cols() == 0) return Matrix::Zero(A.rows() * B.rows(), C.cols());
  return kron_apply(A, B, BlockedMatrix(C, B.cols()));
}

Matrix kron_vec_right(const Matrix& A, const Vector& c, const Matrix& B) {
  if (A.cols() != B.rows()) throw DimensionError("kron_vec_right: cols of A vs rows of B", A.cols(), B.rows());
  const Matrix AB = A * B;
  const Index p = c.size();
  Matrix out(AB.rows() * p, AB.cols());
  for (Index i = 0; i < AB.rows(); ++i)
    for (Index l = 0; l < p; ++l) out.row(i * p + l) = AB.row(i) * c[l];
  return out;
}

void require_symmetric(const Matrix& M, const char* what) {
  if (M.rows() != M.cols()) throw DimensionError(std::string(what) + ": square matrix", M.rows(), M.cols());
  if (M.size() == 0) return;
  const double scale = std::max(M.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= kSymmetryTolerance * scale))
    throw NumericalError(std::string(what) + ": matrix is not symmetric (max asymmetry " +
                         std::to_string(asym) + ")");
}

SpdFactor::SpdFactor(const Matrix& M) {
  require_symmetric(M, "SpdFactor");
  const Index n = M.rows();
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() == Eigen::Success) {
    lower_ = llt.matrixL();
    if (lower_.diagonal().allFinite()) return;
  }
  const double mean_diag = n > 0 ? M.diagonal().mean() : 0.0;
  jitter_ = kJitterFraction * std::abs(mean_diag);
  Matrix jittered = M;
  jittered.diagonal().array() += jitter_;
  Eigen::LLT<Matrix> retry(jittered);
  if (retry.info() == Eigen::Success) {
    lower_ = retry.matrixL();
    return;
  }
  Eigen::LDLT<Matrix> ldlt(M);
  const double pivot = n > 0 ? ldlt.vectorD().minCoeff() : 0.0;
  throw SingularMatrixError("Cholesky factorization failed after jitter", pivot);
}

double SpdFactor::log_det() const { return 2.0 * lower_.diagonal().array().log().sum(); }

Matrix SpdFactor::solve(const Matrix& rhs) const {
  if (rhs.rows() != dim()) throw DimensionError("SpdFactor::solve: rows of rhs", dim(), rhs.rows());
  Matrix x = lower_.triangularView<Eigen::Lower>().solve(rhs);
  lower_.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

Vector SpdFactor::solve(const Vector& rhs) const {
  if (rhs.size() != dim()) throw DimensionError("SpdFactor::solve: length of rhs", dim(), rhs.size());
  Vector x = lower_.triangularView<Eigen::Lower>().solve(rhs);
  lower_.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

Vector SpdFactor::solve_upper(const Vector& x) const {
  if (x.size() != dim()) throw DimensionError("SpdFactor::solve_upper", dim(), x.size());
  return lower_.transpose().triangularView<Eigen::Upper>().solve(x);
}

Matrix SpdFactor::solve_lower(const Matrix& x) const {
  if (x.rows() != dim()) throw DimensionError("SpdFactor::solve_lower", dim(), x.rows());
  return lower_.triangularView<Eigen::Lower>().solve(x);
}

Matrix SpdFactor::inverse() const {
  Matrix inv = solve(Matrix(Matrix::Identity(dim(), dim())));
  // Symmetrize away rounding so downstream symmetry checks hold.
  return 0.5 * (inv + inv.transpose());
}

Matrix spd_solve(const Matrix& M, const Matrix& rhs) {
  if (rhs.rows() != M.rows()) throw DimensionError("spd_solve: rows of rhs vs M", M.rows(), rhs.rows());
  return SpdFactor(M).solve(rhs);
}

}  // namespace resp
