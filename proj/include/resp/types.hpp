#pragma once

#include <Eigen/Dense>

#include <random>
#include <cstdint>

namespace resp {

// Dense storage is row-major throughout; vectors are plain column vectors.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

using Rng = std::mt19937_64;

// Independent substream for (seed, stream). Used for per-chain, per-draw and
// per-fold generators so that results never depend on worker counts.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x5e5bu};
  return Rng(seq);
}

inline Vector standard_normal(Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(n);
  for (Index i = 0; i < n; ++i) out[i] = normal(rng);
  return out;
}

}  // namespace resp
