#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "mbgl/error.hpp"

namespace mbgl {

/// Exact solver for the weighted fused lasso signal approximator on a chain,
///
///   min_x  sum_l a_l/2 (x_l - z_l)^2 + lambda sum_l |x_l| + rho sum_l |x_l - x_{l+1}|,
///
/// by dynamic programming over derivatives of the forward messages. Each
/// message derivative is a nondecreasing piecewise-linear function with jumps
/// (from the lambda kink at zero), stored as two tail lines and a sorted knot
/// list. Minimizing over the previous variable clips the derivative to
/// [-rho, rho], which only ever removes knots from the two ends.
class FusedChainSolver {
 public:
  std::vector<double> solve(std::span<const double> weights, std::span<const double> targets,
                            double lambda, double rho) {
    const std::size_t levels = weights.size();
    require(targets.size() == levels && levels >= 1, ErrorCode::DimensionMismatch,
            "chain weights and targets must have the same nonzero length");
    std::vector<double> x(levels);
    if (rho == 0.0 || levels == 1) {
      for (std::size_t l = 0; l < levels; ++l)
        x[l] = soft(targets[l], lambda / weights[l]);
      return x;
    }

    lower_.assign(levels, 0.0);
    upper_.assign(levels, 0.0);
    reset();
    for (std::size_t l = 0; l < levels; ++l) {
      add_node(weights[l], targets[l], lambda);
      if (l + 1 < levels) {
        lower_[l] = clip_left(-rho);
        upper_[l] = clip_right(rho);
      }
    }
    x[levels - 1] = root();
    for (std::size_t l = levels - 1; l-- > 0;) x[l] = std::clamp(x[l + 1], lower_[l], upper_[l]);
    return x;
  }

 private:
  struct Knot {
    double at;
    double dslope;
    double djump;
  };

  static double soft(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
  }

  void reset() {
    knots_.clear();
    cl_ = sl_ = cr_ = sr_ = 0.0;
  }

  void add_node(double a, double z, double lambda) {
    cl_ += -a * z - lambda;
    sl_ += a;
    cr_ += -a * z + lambda;
    sr_ += a;
    if (lambda > 0.0) {
      auto pos = std::upper_bound(knots_.begin(), knots_.end(), 0.0,
                                  [](double v, const Knot& k) { return v < k.at; });
      knots_.insert(pos, Knot{0.0, 0.0, 2.0 * lambda});
    }
  }

  // Leftmost point where the derivative reaches t; afterwards the derivative
  // is the constant t to the left of that point.
  double clip_left(double t) {
    double at;
    for (;;) {
      if (knots_.empty()) {
        at = (t - cl_) / sl_;
        break;
      }
      const Knot k = knots_.front();
      if (cl_ + sl_ * k.at >= t) {
        at = (t - cl_) / sl_;
        break;
      }
      knots_.pop_front();
      cl_ += k.djump - k.dslope * k.at;
      sl_ += k.dslope;
      if (cl_ + sl_ * k.at >= t) {
        at = k.at;
        break;
      }
    }
    knots_.push_front(Knot{at, sl_, cl_ + sl_ * at - t});
    cl_ = t;
    sl_ = 0.0;
    return at;
  }

  double clip_right(double t) {
    double at;
    for (;;) {
      if (knots_.empty()) {
        at = (t - cr_) / sr_;
        break;
      }
      const Knot k = knots_.back();
      if (cr_ + sr_ * k.at <= t) {
        at = (t - cr_) / sr_;
        break;
      }
      knots_.pop_back();
      cr_ -= k.djump - k.dslope * k.at;
      sr_ -= k.dslope;
      if (cr_ + sr_ * k.at <= t) {
        at = k.at;
        break;
      }
    }
    knots_.push_back(Knot{at, -sr_, t - (cr_ + sr_ * at)});
    cr_ = t;
    sr_ = 0.0;
    return at;
  }

  // Zero crossing of the final message derivative.
  double root() const {
    double c = cl_, s = sl_;
    for (const Knot& k : knots_) {
      if (c + s * k.at >= 0.0) return -c / s;
      c += k.djump - k.dslope * k.at;
      s += k.dslope;
      if (c + s * k.at >= 0.0) return k.at;
    }
    return -c / s;
  }

  std::deque<Knot> knots_;
  double cl_ = 0.0, sl_ = 0.0, cr_ = 0.0, sr_ = 0.0;
  std::vector<double> lower_, upper_;
};

/// Smallest eps such that some subgradient of the chain penalty at x brings
/// every coordinate of  g + subgradient  within [-eps, eps]. Zero exactly
/// when x is stationary for a chain with linear term g.
inline double fused_chain_residual(std::span<const double> gradient, std::span<const double> x,
                                   double lambda, double rho) {
  const std::size_t levels = x.size();
  auto sign_range = [](double v, double& lo, double& hi) {
    if (v > 0.0) lo = hi = 1.0;
    else if (v < 0.0) lo = hi = -1.0;
    else { lo = -1.0; hi = 1.0; }
  };
  auto feasible = [&](double eps) {
    double prev_lo = 0.0, prev_hi = 0.0;
    for (std::size_t l = 0; l < levels; ++l) {
      double s_lo, s_hi;
      sign_range(x[l], s_lo, s_hi);
      double lo = -eps - gradient[l] - lambda * s_hi + prev_lo;
      double hi = eps - gradient[l] - lambda * s_lo + prev_hi;
      double u_lo = 0.0, u_hi = 0.0;
      if (l + 1 < levels) {
        sign_range(x[l] - x[l + 1], u_lo, u_hi);
        u_lo *= rho;
        u_hi *= rho;
      }
      lo = std::max(lo, u_lo);
      hi = std::min(hi, u_hi);
      if (lo > hi) return false;
      prev_lo = lo;
      prev_hi = hi;
    }
    return true;
  };
  if (feasible(0.0)) return 0.0;
  double lo = 0.0, hi = lambda + 2.0 * rho;
  for (double g : gradient) hi = std::max(hi, std::abs(g) + lambda + 2.0 * rho);
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace mbgl
