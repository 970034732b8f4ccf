#pragma once

#include <string>

#include "ncl/types.hpp"

namespace ncl {

/// Pointwise regression loss selector. SmoothL1 keeps a free threshold t
/// (t = 1 is the textbook form); Tukey's biweight uses the usual cutoff
/// c = 4.6851, the value giving ~95% asymptotic efficiency under normal
/// residuals.
struct LossKind {
  enum class Tag { l2, smooth_l1, tukey };

  Tag tag = Tag::l2;
  double threshold = 1.0;  // SmoothL1 branch point, > 0
  double c = 4.6851;       // Tukey cutoff, > 0

  static LossKind l2() { return {Tag::l2, 1.0, 4.6851}; }
  static LossKind smooth_l1(double t = 1.0);
  static LossKind tukey(double c = 4.6851);

  std::string name() const;
};

struct PointwiseLoss {
  double value = 0.0;
  double derivative = 0.0;  // d value / d residual
};

/// Loss value and derivative at a single residual.
///
/// L2:       (xi^2 / 2, xi)
/// SmoothL1: (xi^2 / (2t), xi / t)        for |xi| <  t
///           (|xi| - t/2,  sign(xi))      otherwise
/// Tukey:    both branches of the biweight; for Tukey the argument must
///           already be the MAD-scaled residual. The derivative is
///           identically zero beyond the cutoff (outlier rejection) and the
///           value saturates at c^2/6.
///
/// NaN residuals propagate to NaN value and derivative for every kind.
PointwiseLoss pointwise_loss(const LossKind& kind, double residual);

/// Residuals together with their robust rescaling (Eq. 3 of the biweight
/// setup): scaled = raw / (1.4826 * MAD). A MAD below 1e-12 marks the batch
/// degenerate; scaling then passes raw residuals through unchanged so
/// constant-residual batches stay trainable.
struct ScaledResiduals {
  Vector raw;
  Vector scaled;
  double mad = 0.0;
  bool degenerate = false;

  /// Multiplier applied to raw residuals (1 when degenerate). The same
  /// factor chains into loss gradients taken w.r.t. the raw residual.
  double scale_factor() const;
};

inline constexpr double kMadConsistency = 1.4826;

/// Median absolute deviation scaling of a residual vector. Median of an
/// even-length array is the mean of the two central order statistics.
/// Throws DimensionError on empty input. Multi-output callers apply this
/// per output dimension.
ScaledResiduals mad_scale(const Vector& residuals);

/// Median with the same convention as mad_scale (by value; the input is
/// copied and partially sorted).
double median(Vector values);

}  // namespace ncl
