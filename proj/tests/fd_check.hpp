#pragma once

#include <algorithm>
#include <cmath>

#include "skelfuse/bilstm.hpp"
#include "skelfuse/rng.hpp"

namespace testsupport {

// Central finite differences against the analytic gradients. Returns the
// worst relative error over all parameters; absolute differences below 1e-9
// sit at the finite-difference noise floor (loss rounding of ~1e-16 divided
// by 2*eps) and are ignored, since a real backprop defect surfaces at the
// scale of the gradient itself.
inline double fd_max_rel_error(const skelfuse::Action& action, int target,
                               const skelfuse::BiLstmParams& params,
                               double eps = 1e-5) {
  using skelfuse::BiLstmParams;
  BiLstmParams grads = skelfuse::backward(action, target, params);
  BiLstmParams work = params;
  double worst = 0.0;
  skelfuse::visit_tensors2(work, grads, [&](auto& t, auto& g) {
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        const double orig = t(r, c);
        t(r, c) = orig + eps;
        const double up =
            skelfuse::cross_entropy_loss(skelfuse::forward(action, work), target);
        t(r, c) = orig - eps;
        const double down =
            skelfuse::cross_entropy_loss(skelfuse::forward(action, work), target);
        t(r, c) = orig;
        const double fd = (up - down) / (2.0 * eps);
        const double analytic = g(r, c);
        const double diff = std::abs(analytic - fd);
        if (diff < 1e-9) continue;
        const double denom = std::max(std::abs(analytic), std::abs(fd));
        worst = std::max(worst, diff / denom);
      }
    }
  });
  return worst;
}

// Seeded parameters for gradient tests; same fill order as training init.
inline skelfuse::BiLstmParams random_params(const skelfuse::Dims& dims,
                                            std::uint64_t seed,
                                            double scale = 0.4) {
  skelfuse::BiLstmParams params = skelfuse::BiLstmParams::zeros(dims);
  skelfuse::Rng rng(seed);
  skelfuse::visit_tensors(params, [&](auto& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        t(r, c) = rng.uniform(-scale, scale);
      }
    }
  });
  return params;
}

}  // namespace testsupport
