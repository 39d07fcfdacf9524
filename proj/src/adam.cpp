#include "cngcf/adam.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "cngcf/error.hpp"

namespace cngcf {

AdamState::AdamState(const std::vector<Tensor>& params, AdamConfig config) : config_(config) {
    first_moment_.reserve(params.size());
    second_moment_.reserve(params.size());
    for (const Tensor& p : params) {
        first_moment_.emplace_back(p.size(), 0.0);
        second_moment_.emplace_back(p.size(), 0.0);
    }
}

void adam_step(std::vector<Tensor>& params, const GradientMap& grads, AdamState& state) {
    if (params.size() != state.first_moment_.size()) {
        throw DimensionError("adam_step: state tracks " +
                             std::to_string(state.first_moment_.size()) + " parameters, got " +
                             std::to_string(params.size()));
    }
    state.step_ += 1;
    const AdamConfig& cfg = state.config_;
    const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step_));
    const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor grad = grads.grad_of(params[i]);
        if (grad.shape() != params[i].shape()) {
            throw DimensionError("adam_step: gradient shape " + shape_str(grad.shape()) +
                                 " does not match parameter shape " +
                                 shape_str(params[i].shape()));
        }
        auto& m = state.first_moment_[i];
        auto& v = state.second_moment_[i];
        const auto g = grad.data();
        auto p = params[i].mutable_data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bias1;
            const double v_hat = v[j] / bias2;
            p[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

void AdamState::save(std::ostream& out) const {
    const std::uint64_t count = first_moment_.size();
    out.write(reinterpret_cast<const char*>(&step_), sizeof(step_));
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (std::size_t i = 0; i < first_moment_.size(); ++i) {
        const std::uint64_t n = first_moment_[i].size();
        out.write(reinterpret_cast<const char*>(&n), sizeof(n));
        out.write(reinterpret_cast<const char*>(first_moment_[i].data()),
                  static_cast<std::streamsize>(n * sizeof(double)));
        out.write(reinterpret_cast<const char*>(second_moment_[i].data()),
                  static_cast<std::streamsize>(n * sizeof(double)));
    }
    if (!out) throw IoError("adam: failed to write optimizer state");
}

void AdamState::load(std::istream& in) {
    std::uint64_t step = 0;
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&step), sizeof(step));
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!in || count != first_moment_.size()) {
        throw IoError("adam: optimizer state does not match parameter list");
    }
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t n = 0;
        in.read(reinterpret_cast<char*>(&n), sizeof(n));
        if (!in || n != first_moment_[i].size()) {
            throw IoError("adam: optimizer state entry " + std::to_string(i) + " has wrong size");
        }
        in.read(reinterpret_cast<char*>(first_moment_[i].data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        in.read(reinterpret_cast<char*>(second_moment_[i].data()),
                static_cast<std::streamsize>(n * sizeof(double)));
    }
    if (!in) throw IoError("adam: truncated optimizer state");
    step_ = step;
}

}  // namespace cngcf
