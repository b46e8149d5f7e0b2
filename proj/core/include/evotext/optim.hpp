#pragma once

#include <cstdint>
#include <vector>

#include "evotext/tensor.hpp"

namespace evotext {

enum class OptimizerKind { sgd, adam };

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Holds the parameter set plus per-parameter moment buffers. Every step
// requires populated grads on all parameters and zeroes them afterwards.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, std::vector<TensorPtr> params, double learning_rate,
              AdamHyper adam = {});

    void step();
    void set_learning_rate(double lr) { lr_ = lr; }
    double learning_rate() const { return lr_; }
    std::uint64_t step_count() const { return step_count_; }
    const std::vector<TensorPtr>& params() const { return params_; }

private:
    OptimizerKind kind_;
    std::vector<TensorPtr> params_;
    double lr_;
    AdamHyper adam_;
    std::uint64_t step_count_ = 0;
    std::vector<std::vector<double>> m_;  // first moments, adam only
    std::vector<std::vector<double>> v_;  // second moments, adam only
};

// Zeroes grads on every tensor in the list (used to drop gradients computed
// on frozen parameters that no optimizer owns).
void zero_grads(const std::vector<TensorPtr>& params);

}  // namespace evotext
