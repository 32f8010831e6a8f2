#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ctlp {

struct AdamOptions {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias-corrected moments over a fixed list of parameter blocks.
class Adam {
 public:
  Adam(AdamOptions options, std::span<const std::size_t> block_sizes);

  // One update: params[b] -= lr * m̂ / (sqrt(v̂) + eps), blockwise.
  void step(std::span<const std::span<double>> params,
            std::span<const std::span<const double>> grads);

  std::size_t steps() const noexcept { return t_; }
  const std::vector<std::vector<double>>& first_moments() const noexcept { return m_; }
  const std::vector<std::vector<double>>& second_moments() const noexcept { return v_; }
  const AdamOptions& options() const noexcept { return options_; }

 private:
  AdamOptions options_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace ctlp
