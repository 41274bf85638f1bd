#pragma once

#include "tad/tape.hpp"

#include <cmath>

namespace detours::tad {

// Decoupled weight-decay Adam with bias correction. Moments stay aligned
// with the parameter list order, which must not change between steps.
template <class S>
class AdamW {
public:
    double lr = 3e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;

    AdamW() = default;
    explicit AdamW(double learning_rate, double wd = 0.0) : lr(learning_rate), weight_decay(wd) {}

    void step(const std::vector<Var<S>>& params) {
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.emplace_back(Tensor<S>::zeros(p->value.shape));
                v_.emplace_back(Tensor<S>::zeros(p->value.shape));
            }
        }
        if (m_.size() != params.size())
            throw ShapeMismatch("adamw: parameter list size changed");
        ++step_count_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count_));
        for (size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i];
            p->ensure_grad();
            check_same_shape(p->grad, m_[i], "adamw");
            for (size_t j = 0; j < p->value.numel(); ++j) {
                const double g = static_cast<double>(p->grad.data[j]);
                double m = beta1 * static_cast<double>(m_[i].data[j]) + (1.0 - beta1) * g;
                double v = beta2 * static_cast<double>(v_[i].data[j]) + (1.0 - beta2) * g * g;
                m_[i].data[j] = static_cast<S>(m);
                v_[i].data[j] = static_cast<S>(v);
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                double upd = lr * mhat / (std::sqrt(vhat) + eps);
                upd += lr * weight_decay * static_cast<double>(p->value.data[j]);
                p->value.data[j] -= static_cast<S>(upd);
            }
        }
    }

    int64_t step_count() const { return step_count_; }

    // Checkpoint access: moments are serialized alongside the model so a
    // resumed run continues the exact same trajectory.
    std::vector<Tensor<S>>& first_moments() { return m_; }
    std::vector<Tensor<S>>& second_moments() { return v_; }
    void restore(std::vector<Tensor<S>> m, std::vector<Tensor<S>> v, int64_t steps) {
        m_ = std::move(m);
        v_ = std::move(v);
        step_count_ = steps;
    }

private:
    std::vector<Tensor<S>> m_;
    std::vector<Tensor<S>> v_;
    int64_t step_count_ = 0;
};

} // namespace detours::tad
