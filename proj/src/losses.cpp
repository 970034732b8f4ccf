#include "ncl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ncl/errors.hpp"

namespace ncl {

LossKind LossKind::smooth_l1(double t) {
  if (!(t > 0.0)) throw std::invalid_argument("smooth_l1 threshold must be > 0");
  LossKind k;
  k.tag = Tag::smooth_l1;
  k.threshold = t;
  return k;
}

LossKind LossKind::tukey(double c) {
  if (!(c > 0.0)) throw std::invalid_argument("tukey cutoff must be > 0");
  LossKind k;
  k.tag = Tag::tukey;
  k.c = c;
  return k;
}

std::string LossKind::name() const {
  switch (tag) {
    case Tag::l2: return "l2";
    case Tag::smooth_l1: return "smoothl1";
    case Tag::tukey: return "tukey";
  }
  return "?";
}

PointwiseLoss pointwise_loss(const LossKind& kind, double residual) {
  if (std::isnan(residual)) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan};
  }
  switch (kind.tag) {
    case LossKind::Tag::l2:
      return {0.5 * residual * residual, residual};
    case LossKind::Tag::smooth_l1: {
      const double t = kind.threshold;
      if (std::abs(residual) < t) {
        return {0.5 * residual * residual / t, residual / t};
      }
      return {std::abs(residual) - 0.5 * t, residual > 0.0 ? 1.0 : -1.0};
    }
    case LossKind::Tag::tukey: {
      const double c = kind.c;
      if (std::abs(residual) <= c) {
        const double u = residual / c;
        const double w = 1.0 - u * u;
        return {c * c / 6.0 * (1.0 - w * w * w), residual * w * w};
      }
      return {c * c / 6.0, 0.0};
    }
  }
  throw std::logic_error("unreachable loss tag");
}

double median(Vector values) {
  const Index n = values.size();
  if (n == 0) throw DimensionError("median of empty vector");
  double* begin = values.data();
  double* end = begin + n;
  double* mid = begin + n / 2;
  std::nth_element(begin, mid, end);
  if (n % 2 == 1) return *mid;
  // Even length: the lower central order statistic is the max below mid.
  const double hi = *mid;
  const double lo = *std::max_element(begin, mid);
  return 0.5 * (lo + hi);
}

double ScaledResiduals::scale_factor() const {
  return degenerate ? 1.0 : 1.0 / (kMadConsistency * mad);
}

ScaledResiduals mad_scale(const Vector& residuals) {
  if (residuals.size() == 0) throw DimensionError("mad_scale: empty residual vector");
  ScaledResiduals out;
  out.raw = residuals;
  const double med = median(residuals);
  out.mad = median((residuals.array() - med).abs().matrix());
  out.degenerate = out.mad < 1e-12;
  out.scaled = out.degenerate ? out.raw : Vector(out.raw * out.scale_factor());
  return out;
}

}  // namespace ncl
