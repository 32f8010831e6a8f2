#include "ctlp/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ctlp {

Adam::Adam(AdamOptions options, std::span<const std::size_t> block_sizes) : options_(options) {
  for (auto n : block_sizes) {
    m_.emplace_back(n, 0.0);
    v_.emplace_back(n, 0.0);
  }
}

void Adam::step(std::span<const std::span<double>> params,
                std::span<const std::span<const double>> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("Adam::step: block count mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t b = 0; b < m_.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    if (p.size() != m_[b].size() || g.size() != m_[b].size()) {
      throw std::invalid_argument("Adam::step: block size mismatch");
    }
    auto& m = m_[b];
    auto& v = v_[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g[i];
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

}  // namespace ctlp
