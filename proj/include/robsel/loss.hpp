#pragma once

#include <algorithm>
#include <cmath>

#include "robsel/errors.hpp"

namespace robsel {

/// Bounded quadratic loss rho(z) = min(z^2, b^2) used by the selection
/// criterion, with its derivative psi = rho' and psi' where they exist.
/// psi is defined as 0 at and beyond the clipping points |z| = b, so
/// psi(+-b) = 0 and psi'(+-b) = 0 (one-sided conventions at the kinks).
class BoundedQuadraticLoss {
 public:
  explicit BoundedQuadraticLoss(double b = 2.0) : b_(b) {
    if (!(b > 0.0) || !std::isfinite(b))
      throw ContractError("loss: clipping bound b must be positive and finite");
  }

  double b() const { return b_; }

  double rho(double z) const {
    // min() keeps the value well defined even for infinite z
    return std::min(z * z, b_ * b_);
  }
  double psi(double z) const { return std::abs(z) < b_ ? 2.0 * z : 0.0; }
  double psi_prime(double z) const { return std::abs(z) < b_ ? 2.0 : 0.0; }

 private:
  double b_;
};

/// Huber score psi_c(r) = max(-c, min(r, c)) used inside the
/// Cantoni-Ronchetti estimating equations. psi_c'(r) = 1 on |r| < c.
class HuberScore {
 public:
  explicit HuberScore(double c = 1.345) : c_(c) {
    if (!(c > 0.0) || !std::isfinite(c))
      throw ContractError("huber: tuning constant c must be positive and finite");
  }

  double c() const { return c_; }

  double psi(double r) const { return std::clamp(r, -c_, c_); }
  double psi_prime(double r) const { return std::abs(r) < c_ ? 1.0 : 0.0; }

 private:
  double c_;
};

}  // namespace robsel
