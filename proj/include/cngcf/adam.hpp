#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "cngcf/tensor.hpp"

namespace cngcf {

struct AdamConfig {
    double learning_rate{0.001};
    double beta1{0.9};
    double beta2{0.999};
    double epsilon{1e-8};
};

/// First/second moment estimates for a fixed, ordered parameter list, plus
/// the step counter. Moments shape-match their parameters; the step counter
/// strictly increases.
class AdamState {
  public:
    AdamState(const std::vector<Tensor>& params, AdamConfig config);

    const AdamConfig& config() const { return config_; }
    std::uint64_t step_count() const { return step_; }

    void save(std::ostream& out) const;
    /// Restores moments and step counter; parameter count must match.
    void load(std::istream& in);

  private:
    friend void adam_step(std::vector<Tensor>& params, const GradientMap& grads, AdamState& state);

    AdamConfig config_;
    std::uint64_t step_{0};
    std::vector<std::vector<double>> first_moment_;
    std::vector<std::vector<double>> second_moment_;
};

/// Standard Adam update with bias correction, applied in place to the leaf
/// parameter tensors. Deterministic given inputs.
void adam_step(std::vector<Tensor>& params, const GradientMap& grads, AdamState& state);

}  // namespace cngcf
