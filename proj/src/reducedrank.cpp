#include "resp/reducedrank.hpp"

#include "resp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace resp {

double BoundingBox::lon_width() const {
  return lon_max >= lon_min ? lon_max - lon_min : lon_max - lon_min + 360.0;
}

std::vector<Location> place_knot_grid(const BoundingBox& bbox, int target_k, const LocationMask& mask) {
  if (target_k < 1) throw ConfigError("place_knot_grid: target_k must be at least 1");
  const double width = bbox.lon_width();
  const double height = bbox.lat_max - bbox.lat_min;
  if (!(width > 0.0) || !(height > 0.0) || width > 360.0)
    throw ConfigError("place_knot_grid: degenerate bounding box");

  // Columns per row follow the km aspect ratio at mid-latitude.
  const double mid_lat = 0.5 * (bbox.lat_min + bbox.lat_max);
  const double aspect = width * std::cos(mid_lat * std::numbers::pi / 180.0) / height;
  int cols = static_cast<int>(std::lround(std::sqrt(target_k * std::max(aspect, 1e-12))));
  cols = std::clamp(cols, 1, target_k);
  const int rows = std::max(1, target_k / cols);

  std::vector<Location> out;
  out.reserve(static_cast<std::size_t>(rows * cols));
  for (int r = 0; r < rows; ++r) {
    const double lat = bbox.lat_min + (r + 0.5) * height / rows;
    for (int c = 0; c < cols; ++c) {
      const Location loc(bbox.lon_min + (c + 0.5) * width / cols, lat);
      if (!mask || mask(loc)) out.push_back(loc);
    }
  }
  if (out.empty()) throw DataError("place_knot_grid: mask rejected every candidate knot");
  return out;
}

Matrix induce_covariates(const Matrix& z, const SpdFactor& Rstar, const Matrix& cstar) {
  if (z.rows() != cstar.rows())
    throw DimensionError("induce_covariates: remote rows of z vs rows of c*", cstar.rows(), z.rows());
  if (Rstar.dim() != cstar.cols())
    throw DimensionError("induce_covariates: knots in R* vs cols of c*", cstar.cols(), Rstar.dim());
  return Rstar.solve(Matrix(cstar.transpose() * z));
}

Matrix induce_covariates(const Matrix& z, const Matrix& Rstar, const Matrix& cstar) {
  return induce_covariates(z, SpdFactor(Rstar), cstar);
}

ReducedRankBasis build_basis(std::span<const Location> remote_locs, std::vector<Location> knots,
                             const MaternParams& theta_alpha, const Matrix& z) {
  RemoteMatrices m = build_remote_matrices(remote_locs, knots, theta_alpha);
  ReducedRankBasis basis;
  basis.Zstar = induce_covariates(z, m.Rstar, m.cstar);
  basis.knots = std::move(knots);
  basis.Rstar = std::move(m.Rstar);
  basis.cstar = std::move(m.cstar);
  return basis;
}

EofBasis compute_eofs(const Matrix& z, int K) {
  const Index n_r = z.rows(), n_t = z.cols();
  if (K < 1) throw ConfigError("compute_eofs: K must be at least 1");
  if (K > std::min(n_r, n_t))
    throw DimensionError("compute_eofs: K must not exceed min(n_r, n_t)", std::min(n_r, n_t), K);

  const double scale = std::max(z.cwiseAbs().maxCoeff(), 1e-300);
  const double worst_mean = z.rowwise().mean().cwiseAbs().maxCoeff();
  if (worst_mean > 1e-8 * scale)
    throw DataError("compute_eofs: remote series is not centred (largest location mean " +
                    std::to_string(worst_mean) + ")");

  Eigen::MatrixXd zc = z;  // column-major copy for the SVD
  Eigen::BDCSVD<Eigen::MatrixXd> svd(zc, Eigen::ComputeThinU);
  const Eigen::VectorXd& s = svd.singularValues();
  const double tol = std::max(n_r, n_t) * std::numeric_limits<double>::epsilon() * (s.size() ? s[0] : 0.0);
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s[i] > tol) ++rank;
  if (K > rank)
    throw DimensionError("compute_eofs: K exceeds the numerical rank of the field", rank, K);

  EofBasis out;
  out.W = svd.matrixU().leftCols(K);
  for (Index l = 0; l < K; ++l) {
    Index arg = 0;
    out.W.col(l).cwiseAbs().maxCoeff(&arg);
    if (out.W(arg, l) < 0.0) out.W.col(l) *= -1.0;
  }
  out.A = out.W.transpose() * z;
  const double total = s.squaredNorm();
  out.explained = s.head(K).array().square() / total;
  return out;
}

ReparamMap reparam_map(const Matrix& W, const Matrix& Rstar, const Matrix& cstar) {
  if (W.rows() != cstar.rows())
    throw DimensionError("reparam_map: rows of W vs rows of c*", cstar.rows(), W.rows());
  if (Rstar.rows() != cstar.cols())
    throw DimensionError("reparam_map: size of R* vs cols of c*", cstar.cols(), Rstar.rows());
  // T^T = R*^{-1} c*^T W since R* is symmetric.
  const Matrix Tt = spd_solve(Rstar, Matrix(cstar.transpose() * W));
  return {Tt.transpose()};
}

}  // namespace resp
