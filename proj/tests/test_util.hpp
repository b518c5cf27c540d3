// Shared helpers for unit and acceptance tests: seeded data generators and
// small independent oracles.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "repmetric/rng.hpp"
#include "repmetric/types.hpp"

namespace testutil {

using repmetric::Matrix;
using repmetric::Vector;
using repmetric::Xoshiro256StarStar;

// Box-Muller on the project PRNG; deterministic per seed.
class Gaussian {
 public:
  explicit Gaussian(uint64_t seed) : rng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = rng_.next_double();
    while (u1 <= 0.0) u1 = rng_.next_double();
    const double u2 = rng_.next_double();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    spare_ = radius * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return radius * std::cos(2.0 * M_PI * u2);
  }

  uint64_t next_int(uint64_t bound) { return rng_.next_below(bound); }
  double next_uniform() { return rng_.next_double(); }

 private:
  Xoshiro256StarStar rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

inline Matrix random_matrix(Eigen::Index n, Eigen::Index d, uint64_t seed) {
  Gaussian gaussian(seed);
  Matrix out(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) out(i, j) = gaussian.next();
  return out;
}

inline Matrix random_orthogonal(Eigen::Index d, uint64_t seed) {
  const Matrix base = random_matrix(d, d, seed);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(base);
  Eigen::MatrixXd q = qr.householderQ();
  return q;
}

// Rows drawn on the unit sphere.
inline Matrix random_unit_rows(Eigen::Index n, Eigen::Index d, uint64_t seed) {
  Matrix out = random_matrix(n, d, seed);
  for (Eigen::Index i = 0; i < n; ++i) out.row(i) /= out.row(i).norm();
  return out;
}

struct Blobs {
  Matrix points;
  std::vector<int> labels;
};

// `centers` rows are blob means; `per_blob` points each with isotropic
// noise of the given sigma.
inline Blobs make_blobs(const Matrix& centers, Eigen::Index per_blob, double sigma,
                        uint64_t seed) {
  Gaussian gaussian(seed);
  Blobs blobs;
  blobs.points.resize(centers.rows() * per_blob, centers.cols());
  blobs.labels.reserve(static_cast<std::size_t>(centers.rows() * per_blob));
  Eigen::Index row = 0;
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    for (Eigen::Index i = 0; i < per_blob; ++i, ++row) {
      for (Eigen::Index j = 0; j < centers.cols(); ++j) {
        blobs.points(row, j) = centers(c, j) + sigma * gaussian.next();
      }
      blobs.labels.push_back(static_cast<int>(c));
    }
  }
  return blobs;
}

// Independent uniformity oracle: literal O(N^2) enumeration over ordered
// pairs, no Gram shortcut.
inline double uniformity_oracle(const Matrix& unit_rows, double t, bool include_self_pairs) {
  const Eigen::Index n = unit_rows.rows();
  double total = 0.0;
  long long pairs = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j && !include_self_pairs) continue;
      total += std::exp(-t * (unit_rows.row(i) - unit_rows.row(j)).squaredNorm());
      ++pairs;
    }
  }
  return std::log(total / static_cast<double>(pairs));
}

// Independent CKA oracle: the Gram/centering-matrix HSIC ratio with an
// explicit H = I - 11^T / n.
inline double cka_oracle(const Matrix& x, const Matrix& y) {
  const Eigen::Index n = x.rows();
  const Eigen::MatrixXd h =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  const Eigen::MatrixXd k = x * x.transpose();
  const Eigen::MatrixXd l = y * y.transpose();
  const double hsic_kl = (k * h * l * h).trace();
  const double hsic_kk = (k * h * k * h).trace();
  const double hsic_ll = (l * h * l * h).trace();
  return hsic_kl / std::sqrt(hsic_kk * hsic_ll);
}

}  // namespace testutil
