#include "evotext/optim.hpp"

#include <cmath>

#include "evotext/errors.hpp"

namespace evotext {

Optimizer::Optimizer(OptimizerKind kind, std::vector<TensorPtr> params, double learning_rate,
                     AdamHyper adam)
    : kind_(kind), params_(std::move(params)), lr_(learning_rate), adam_(adam) {
    if (lr_ <= 0.0) throw ConfigError("Optimizer: learning rate must be positive");
    if (kind_ == OptimizerKind::adam) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const auto& p : params_) {
            m_.emplace_back(p->size(), 0.0);
            v_.emplace_back(p->size(), 0.0);
        }
    }
}

void Optimizer::step() {
    for (const auto& p : params_) {
        if (p->grad.size() != p->data.size()) {
            throw ContractError("Optimizer::step: parameter is missing its gradient");
        }
    }
    ++step_count_;
    if (kind_ == OptimizerKind::sgd) {
        for (const auto& p : params_) {
            for (std::size_t i = 0; i < p->size(); ++i) p->data[i] -= lr_ * p->grad[i];
        }
    } else {
        const double t = static_cast<double>(step_count_);
        const double bc1 = 1.0 - std::pow(adam_.beta1, t);
        const double bc2 = 1.0 - std::pow(adam_.beta2, t);
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto& p = params_[k];
            auto& m = m_[k];
            auto& v = v_[k];
            for (std::size_t i = 0; i < p->size(); ++i) {
                const double g = p->grad[i];
                m[i] = adam_.beta1 * m[i] + (1.0 - adam_.beta1) * g;
                v[i] = adam_.beta2 * v[i] + (1.0 - adam_.beta2) * g * g;
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                p->data[i] -= lr_ * mhat / (std::sqrt(vhat) + adam_.eps);
            }
        }
    }
    for (const auto& p : params_) p->zero_grad();
}

void zero_grads(const std::vector<TensorPtr>& params) {
    for (const auto& p : params) p->zero_grad();
}

}  // namespace evotext
