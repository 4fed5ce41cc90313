#include "adasiam/head.hpp"

#include "adasiam/errors.hpp"

namespace adasiam {

PointwiseHead make_pointwise_head(const std::string& prefix, std::size_t in, std::size_t hidden,
                                  std::size_t out, double stddev, std::mt19937_64& rng) {
  PointwiseHead h{make_conv_params(prefix + "1", hidden, in, 1, 1), make_conv_params(prefix + "2", out, hidden, 1, 1)};
  init_gaussian(h.first, stddev, rng);
  init_gaussian(h.second, stddev, rng);
  return h;
}

HeadTrace head_forward(const PointwiseHead& head, const Tensor& input) {
  HeadTrace t;
  t.hidden_pre = conv2d(input, head.first, ConvGeometry{});
  t.logits = conv2d(relu(t.hidden_pre), head.second, ConvGeometry{});
  return t;
}

Tensor head_logits(const PointwiseHead& head, const Tensor& input) {
  return head_forward(head, input).logits;
}

std::array<ParamGrads, 2> head_backward(const PointwiseHead& head, const Tensor& input,
                                        const HeadTrace& trace, const Tensor& logit_grad) {
  const Tensor hidden = relu(trace.hidden_pre);
  ConvGradients g2 = conv2d_backward(hidden, head.second, ConvGeometry{}, logit_grad, true);
  const Tensor g_pre = relu_backward(trace.hidden_pre, g2.input);
  ConvGradients g1 = conv2d_backward(input, head.first, ConvGeometry{}, g_pre, false);
  return {std::move(g1.params), std::move(g2.params)};
}

Tensor stack_columns(std::span<const Tensor> vectors) {
  if (vectors.empty()) throw ConfigError("stack_columns: no vectors");
  const std::size_t dim = vectors.front().size(), n = vectors.size();
  Tensor out({dim, n, 1});
  for (std::size_t j = 0; j < n; ++j) {
    if (vectors[j].size() != dim) throw ConfigError("stack_columns: length mismatch at column " + std::to_string(j));
    for (std::size_t i = 0; i < dim; ++i) out[i * n + j] = vectors[j][i];
  }
  return out;
}

}  // namespace adasiam
