#pragma once

#include "resp/types.hpp"

#include <cstdint>

namespace resp {

/// A matrix read as n vertically stacked blocks C_1..C_n, each block_rows x cols.
class BlockedMatrix {
 public:
  BlockedMatrix(Matrix values, Index block_rows);

  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }
  Index block_rows() const { return block_rows_; }
  Index block_count() const { return values_.rows() / block_rows_; }
  auto block(Index j) const { return values_.middleRows(j * block_rows_, block_rows_); }
  const Matrix& values() const { return values_; }

 private:
  Matrix values_;
  Index block_rows_;
};

/// (A ⊗ B) C without forming A ⊗ B.
///
/// A is m x n, B is p x q and C is nq x r, read as n stacked q x r blocks C_j.
/// Output block i is B (sum_j a_ij C_j), so the cost is O(mnqr + mpqr)
/// multiply-adds. Exact zeros in A are skipped, which keeps identity and
/// selection factors cheap.
Matrix kron_apply(const Matrix& A, const Matrix& B, const Matrix& C);
Matrix kron_apply(const Matrix& A, const Matrix& B, const BlockedMatrix& C);

/// (A ⊗ c) B computed as (AB) ⊗ c.
Matrix kron_vec_right(const Matrix& A, const Vector& c, const Matrix& B);

/// Multiply-adds performed by kron_apply on the calling thread since the last reset.
std::uint64_t kron_flop_count();
void reset_kron_flop_count();

/// Cholesky factor of a symmetric positive-definite matrix.
///
/// If the plain factorization fails, a single retry is made after adding
/// 1e-8 * mean(diag(M)) to the diagonal. A second failure throws
/// SingularMatrixError carrying the smallest LDLT pivot of the input.
class SpdFactor {
 public:
  SpdFactor() = default;
  explicit SpdFactor(const Matrix& M);

  Index dim() const { return lower_.rows(); }
  const Matrix& lower() const { return lower_; }
  double jitter() const { return jitter_; }
  double log_det() const;

  Matrix solve(const Matrix& rhs) const;
  Vector solve(const Vector& rhs) const;
  /// L^{-T} x, used to draw from N(0, M^{-1}).
  Vector solve_upper(const Vector& x) const;
  /// L^{-1} x.
  Matrix solve_lower(const Matrix& x) const;
  Matrix inverse() const;

 private:
  Matrix lower_;
  double jitter_ = 0.0;
};

inline constexpr double kJitterFraction = 1e-8;
inline constexpr double kSymmetryTolerance = 1e-10;

/// M^{-1} rhs through SpdFactor. M must be symmetric within 1e-10 relative.
Matrix spd_solve(const Matrix& M, const Matrix& rhs);

/// Throws NumericalError if M is not symmetric within kSymmetryTolerance relative.
void require_symmetric(const Matrix& M, const char* what);

}  // namespace resp
