#include "resp/covkernels.hpp"

#include "resp/errors.hpp"

#include <cmath>
#include <iostream>
#include <mutex>
#include <numbers>
#include <string>

namespace resp {

namespace {

std::mutex g_warn_mutex;
WarningHandler g_warn_handler = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(g_warn_mutex);
  auto previous = std::move(g_warn_handler);
  g_warn_handler = std::move(handler);
  return previous;
}

void warn(std::string_view message) {
  std::lock_guard lock(g_warn_mutex);
  if (g_warn_handler) g_warn_handler(message);
}

Location::Location(double lon_deg, double lat_deg) {
  if (!std::isfinite(lon_deg) || !std::isfinite(lat_deg))
    throw DataError("Location: non-finite coordinate");
  if (lat_deg < -90.0 || lat_deg > 90.0)
    throw DataError("Location: latitude " + std::to_string(lat_deg) + " outside [-90, 90]");
  double wrapped = std::fmod(lon_deg + 180.0, 360.0);
  if (wrapped < 0.0) wrapped += 360.0;
  lon = wrapped - 180.0;
  lat = lat_deg;
}

void MaternParams::validate() const {
  if (!(sigma2 > 0.0) || !(rho > 0.0) || !(nu > 0.0) || !std::isfinite(sigma2) ||
      !std::isfinite(rho) || !std::isfinite(nu))
    throw ConfigError("MaternParams: sigma2, rho and nu must be finite and positive");
}

double great_circle_km(const Location& u, const Location& v) {
  const double phi1 = deg2rad(u.lat), phi2 = deg2rad(v.lat);
  const double dphi = phi2 - phi1;
  const double dlambda = deg2rad(v.lon - u.lon);
  const double s1 = std::sin(dphi / 2.0), s2 = std::sin(dlambda / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::min(1.0, std::max(0.0, h));
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

double matern(double d, const MaternParams& p) {
  p.validate();
  if (d <= 0.0) return p.sigma2;
  const double x = d / p.rho;
  if (p.nu == 0.5) return p.sigma2 * std::exp(-x);
  if (p.nu == 1.5) return p.sigma2 * (1.0 + x) * std::exp(-x);
  if (p.nu == 2.5) return p.sigma2 * (1.0 + x + x * x / 3.0) * std::exp(-x);
  const double bessel = std::cyl_bessel_k(p.nu, x);
  if (!(bessel > 0.0) || !std::isfinite(bessel)) return 0.0;
  const double norm = std::pow(2.0, p.nu - 1.0) * std::tgamma(p.nu);
  double value = p.sigma2 / norm * std::pow(x, p.nu) * bessel;
  if (!std::isfinite(value) || !std::isfinite(norm)) {
    // Large smoothness: evaluate in log space.
    value = std::exp(std::log(p.sigma2) - (p.nu - 1.0) * std::numbers::ln2 - std::lgamma(p.nu) +
                     p.nu * std::log(x) + std::log(bessel));
  }
  return std::isfinite(value) ? value : 0.0;
}

Matrix distance_matrix(std::span<const Location> a, std::span<const Location> b) {
  Matrix d(static_cast<Index>(a.size()), static_cast<Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      d(static_cast<Index>(i), static_cast<Index>(j)) = great_circle_km(a[i], b[j]);
  return d;
}

Matrix distance_matrix(std::span<const Location> a) {
  const Index n = static_cast<Index>(a.size());
  Matrix d = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = great_circle_km(a[i], a[j]);
  return d;
}

Matrix matern_matrix(const Matrix& distances, const MaternParams& p) {
  p.validate();
  Matrix out(distances.rows(), distances.cols());
  const bool symmetric = distances.rows() == distances.cols() && distances == distances.transpose();
  for (Index i = 0; i < distances.rows(); ++i) {
    if (symmetric) {
      for (Index j = i; j < distances.cols(); ++j) out(i, j) = out(j, i) = matern(distances(i, j), p);
    } else {
      for (Index j = 0; j < distances.cols(); ++j) out(i, j) = matern(distances(i, j), p);
    }
  }
  return out;
}

Matrix build_local_cov(std::span<const Location> locs, const LocalCovParams& p) {
  if (locs.empty()) throw DataError("build_local_cov: no locations");
  if (p.nugget_sigma2 < 0.0) throw ConfigError("build_local_cov: negative nugget variance");
  if (p.nugget_sigma2 == 0.0 && has_duplicates(locs))
    warn("build_local_cov: duplicate locations with zero nugget give a near-singular covariance");
  Matrix sigma = matern_matrix(distance_matrix(locs), p.matern);
  sigma.diagonal().array() += p.nugget_sigma2;
  return sigma;
}

bool has_duplicates(std::span<const Location> locs) {
  for (std::size_t i = 0; i < locs.size(); ++i)
    for (std::size_t j = i + 1; j < locs.size(); ++j)
      if (great_circle_km(locs[i], locs[j]) == 0.0) return true;
  return false;
}

RemoteMatrices build_remote_matrices(std::span<const Location> remote_locs,
                                     std::span<const Location> knots, const MaternParams& p) {
  if (knots.empty()) throw DataError("build_remote_matrices: no knots");
  if (knots.size() > remote_locs.size())
    throw DimensionError("build_remote_matrices: knot count must not exceed remote count",
                         static_cast<long long>(remote_locs.size()), static_cast<long long>(knots.size()));
  if (has_duplicates(knots)) throw DataError("build_remote_matrices: duplicate knots make R* singular");
  return {matern_matrix(distance_matrix(knots), p),
          matern_matrix(distance_matrix(remote_locs, knots), p)};
}

}  // namespace resp
