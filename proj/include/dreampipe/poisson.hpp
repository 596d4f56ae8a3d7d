#pragma once

#include "dreampipe/image.hpp"

namespace dreampipe {

struct PoissonOptions {
  double tolerance = 1e-4;  // max-norm residual, [0,1] intensity units
  int max_iterations = 10000;
  bool mixed_gradients = false;
  bool wrap_x = true;
  bool throw_on_failure = true;
};

struct PoissonResult {
  ImageF solution;  // [0,1] units, unclamped; exterior equals target
  int iterations = 0;  // summed over channels
  double residual = 0.0;  // worst channel
  bool converged = true;
};

// Seamless cloning. Pixels with mask >= 0.5 are unknowns; for each one
//   sum_q (f_p - f_q) = sum_q v_pq
// over its 4-neighbourhood, with v_pq = s_p - s_q from the source and f_q =
// target_q outside the mask. A vertical neighbour past the top or bottom row
// is taken as the target value at p with zero guidance.
PoissonResult poisson_solve(const Image8& target, const Image8& source, const MaskImage& mask,
                            const PoissonOptions& options = {});

// Rounded and clamped to 8 bits; pixels outside the mask are copied from target.
// `info`, when given, receives the solver statistics.
Image8 poisson_blend(const Image8& target, const Image8& source, const MaskImage& mask,
                     const PoissonOptions& options = {}, PoissonResult* info = nullptr);

}  // namespace dreampipe
