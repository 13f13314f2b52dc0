#pragma once

#include "resp/types.hpp"

#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace resp {

inline constexpr double kEarthRadiusKm = 6371.0;

/// Point on the sphere in degrees. Longitude is wrapped into [-180, 180);
/// latitude must lie in [-90, 90]. Both must be finite.
struct Location {
  double lon = 0.0;
  double lat = 0.0;

  Location() = default;
  Location(double lon_deg, double lat_deg);

  friend bool operator==(const Location&, const Location&) = default;
};

/// Matérn parameters: variance sigma2, range rho (km), smoothness nu.
struct MaternParams {
  double sigma2 = 1.0;
  double rho = 1.0;
  double nu = 0.5;

  void validate() const;
};

/// Covariance of w + epsilon: Matérn theta_w plus an independent nugget.
struct LocalCovParams {
  MaternParams matern;
  double nugget_sigma2 = 0.0;
};

/// Haversine distance on a sphere of radius kEarthRadiusKm.
double great_circle_km(const Location& u, const Location& v);

/// sigma2 / (2^(nu-1) Gamma(nu)) (d/rho)^nu K_nu(d/rho); sigma2 at d = 0.
/// Values whose Bessel factor underflows are flushed to 0.
double matern(double d, const MaternParams& p);

/// Pairwise great-circle distances, a.size() x b.size().
Matrix distance_matrix(std::span<const Location> a, std::span<const Location> b);
Matrix distance_matrix(std::span<const Location> a);

/// Entrywise matern() over a distance matrix. Symmetric input gives symmetric output.
Matrix matern_matrix(const Matrix& distances, const MaternParams& p);

/// Sigma_ij = kappa(s_i, s_j; theta_w) + nugget * 1(i = j).
Matrix build_local_cov(std::span<const Location> locs, const LocalCovParams& p);

struct RemoteMatrices {
  Matrix Rstar;  // k x k knot Gram matrix
  Matrix cstar;  // n_r x k remote-to-knot covariances
};

/// Gram matrices of the remote kernel kappa(.,.; theta_alpha) alone.
/// Throws DataError on duplicate knots or when k exceeds n_r.
RemoteMatrices build_remote_matrices(std::span<const Location> remote_locs,
                                     std::span<const Location> knots, const MaternParams& p);

/// Returns true if any two locations coincide.
bool has_duplicates(std::span<const Location> locs);

using WarningHandler = std::function<void(std::string_view)>;
/// Replaces the process-wide warning sink (default writes to stderr).
/// Returns the previous handler.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(std::string_view message);

}  // namespace resp
