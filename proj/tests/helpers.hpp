#pragma once

#include "oracles.hpp"

#include "resp/resplike.hpp"

#include <string>
#include <vector>

namespace testing_support {

inline std::vector<resp::Location> to_locations(const std::vector<oracle::Point>& pts) {
  std::vector<resp::Location> out;
  for (const auto& p : pts) out.emplace_back(p.lon, p.lat);
  return out;
}

inline resp::Dataset to_dataset(const oracle::Problem& pr) {
  resp::Dataset d;
  d.response.locations = to_locations(pr.sites);
  d.remote.locations = to_locations(pr.remote);
  for (std::size_t i = 0; i < pr.sites.size(); ++i) d.response.ids.push_back("s" + std::to_string(i + 1));
  for (std::size_t i = 0; i < pr.remote.size(); ++i) d.remote.ids.push_back("r" + std::to_string(i + 1));
  d.response.values = pr.Y;
  d.remote.values = pr.z;
  for (const auto& X : pr.X) d.design.emplace_back(X);
  for (Eigen::Index j = 0; j < pr.X.front().cols(); ++j) d.covariate_names.push_back("x" + std::to_string(j));
  for (Eigen::Index t = 0; t < pr.nt(); ++t) d.time_index.push_back(std::to_string(2000 + t));
  return d;
}

inline resp::ModelState to_state(const oracle::Problem& pr) {
  resp::ModelState s;
  s.beta = pr.beta;
  s.sigma2_w = pr.sigma2_w;
  s.nugget_ratio = pr.nugget_ratio;
  s.sigma2_alpha = pr.sigma2_alpha;
  s.rho_w = pr.rho_w;
  s.rho_alpha = pr.rho_alpha;
  s.nu_w = pr.nu_w;
  s.nu_alpha = pr.nu_alpha;
  return s;
}

}  // namespace testing_support
