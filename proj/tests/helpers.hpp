#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "cngcf/rng.hpp"
#include "cngcf/tensor.hpp"

namespace cngcf::testing {

/// Max relative error between analytic gradients and central finite
/// differences of a scalar-valued function of leaf parameters. The relative
/// error of a pair (a, n) is |a - n| / max(|a|, |n|, 0.01), so tiny gradients
/// degrade to an absolute comparison instead of blowing up.
inline double max_grad_rel_error(const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                                 std::vector<Tensor>& params, double step = 1e-5) {
    const Tensor loss = fn(params);
    const GradientMap grads = backward(loss);
    double worst = 0.0;
    for (Tensor& p : params) {
        const Tensor analytic = grads.grad_of(p);
        auto values = p.mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + step;
            const double up = fn(params).item();
            values[i] = saved - step;
            const double down = fn(params).item();
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic.at(i);
            const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 0.01});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

inline std::vector<double> random_values(std::size_t n, RngStream& rng, double lo, double hi) {
    std::vector<double> out(n);
    for (double& v : out) v = rng.uniform(lo, hi);
    return out;
}

/// Values bounded away from zero on both sides; keeps finite differences off
/// the ReLU kink.
inline std::vector<double> random_values_off_kink(std::size_t n, RngStream& rng, double margin,
                                                  double magnitude) {
    std::vector<double> out(n);
    for (double& v : out) {
        const double mag = margin + (magnitude - margin) * rng.uniform01();
        v = rng.bernoulli(0.5) ? mag : -mag;
    }
    return out;
}

}  // namespace cngcf::testing
