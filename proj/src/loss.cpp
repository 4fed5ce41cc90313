#include "adasiam/loss.hpp"

#include <algorithm>
#include <cmath>

#include "adasiam/errors.hpp"

namespace adasiam {

LossAndGrad weighted_softmax_loss(const Tensor& logits, std::span<const std::size_t> labels,
                                  std::span<const double> class_weights) {
  if (logits.rank() != 2) throw ConfigError("weighted_softmax_loss: logits must be [classes, N]");
  const std::size_t classes = logits.dim(0);
  const std::size_t n = logits.dim(1);
  if (labels.size() != n) throw ConfigError("weighted_softmax_loss: label count mismatch");
  if (class_weights.size() != classes) throw ConfigError("weighted_softmax_loss: weight count mismatch");

  LossAndGrad out{0.0, Tensor(logits.shape())};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t label = labels[j];
    if (label >= classes) throw ConfigError("weighted_softmax_loss: label out of range");
    double peak = logits[j];
    for (std::size_t c = 1; c < classes; ++c) peak = std::max(peak, logits[c * n + j]);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(logits[c * n + j] - peak);
    const double log_denom = std::log(denom) + peak;
    const double w = class_weights[label];
    out.loss += w * (log_denom - logits[label * n + j]);
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(logits[c * n + j] - log_denom);
      out.grad[c * n + j] = w * inv_n * (p - (c == label ? 1.0 : 0.0));
    }
  }
  out.loss *= inv_n;
  return out;
}

ContrastiveResult contrastive_loss(const Tensor& a, const Tensor& b, bool same, double margin) {
  if (a.size() != b.size()) throw ConfigError("contrastive_loss: embedding length mismatch");
  ContrastiveResult r{0.0, Tensor(a.shape()), Tensor(b.shape())};
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  double coeff = 0.0;  // dL/d(D^2)
  if (same) {
    r.loss = 0.5 * d2;
    coeff = 0.5;
  } else if (margin - d2 > 0.0) {
    r.loss = 0.5 * (margin - d2);
    coeff = -0.5;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double g = 2.0 * coeff * (a[i] - b[i]);
    r.grad_a[i] = g;
    r.grad_b[i] = -g;
  }
  return r;
}

}  // namespace adasiam
