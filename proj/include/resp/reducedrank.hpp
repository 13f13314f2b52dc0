#pragma once

#include "resp/covkernels.hpp"
#include "resp/kronlinalg.hpp"
#include "resp/types.hpp"

#include <functional>
#include <vector>

namespace resp {

/// Longitude/latitude rectangle in degrees. lon_max < lon_min denotes a box
/// crossing the antimeridian (e.g. 120E..70W is {120, -70, ...}).
struct BoundingBox {
  double lon_min = 0.0;
  double lon_max = 0.0;
  double lat_min = 0.0;
  double lat_max = 0.0;

  double lon_width() const;
};

using LocationMask = std::function<bool(const Location&)>;

/// Regular cell-centred lon/lat grid with at most target_k points inside bbox.
///
/// Columns and rows are chosen so that cells are roughly square in km at the
/// box's mid-latitude. Points rejected by mask are dropped; if every point is
/// rejected a DataError is thrown.
std::vector<Location> place_knot_grid(const BoundingBox& bbox, int target_k, const LocationMask& mask = {});

/// Induced covariates Z* = R*^{-1} c*^T z; z is n_r x n_t, result k x n_t.
Matrix induce_covariates(const Matrix& z, const Matrix& Rstar, const Matrix& cstar);
Matrix induce_covariates(const Matrix& z, const SpdFactor& Rstar, const Matrix& cstar);

struct ReducedRankBasis {
  std::vector<Location> knots;
  Matrix Rstar;  // k x k
  Matrix cstar;  // n_r x k
  Matrix Zstar;  // k x n_t
};

/// Builds R*, c* under theta_alpha and the induced covariates of z.
ReducedRankBasis build_basis(std::span<const Location> remote_locs, std::vector<Location> knots,
                             const MaternParams& theta_alpha, const Matrix& z);

struct EofBasis {
  Matrix W;          // n_r x K, orthonormal columns
  Matrix A;          // K x n_t scores, A = W^T Z
  Vector explained;  // K variance fractions, non-increasing
};

/// Leading K empirical orthogonal functions of a centred n_r x n_t field.
///
/// Uses the thin SVD of the data matrix. Each column of W is signed so that
/// its entry of largest magnitude is non-negative. Rows must have time mean
/// within 1e-8 (relative to the field's scale) of zero.
EofBasis compute_eofs(const Matrix& z, int K);

struct ReparamMap {
  Matrix T;  // K x k, T = W^T c* R*^{-1}
};

ReparamMap reparam_map(const Matrix& W, const Matrix& Rstar, const Matrix& cstar);

}  // namespace resp
