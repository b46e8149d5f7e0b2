#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "evotext/rng.hpp"

namespace evotext {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major array of 64-bit floats with an optional gradient buffer.
// Values are immutable once created except for `grad` and optimizer updates.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first needed
    bool requires_grad = false;

    std::size_t size() const { return data.size(); }
    std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    bool is_scalar() const { return data.size() == 1; }

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    void ensure_grad();
    void zero_grad();

    // FNV hash over the raw value bytes; used by freeze-invariant checks.
    std::uint64_t value_hash() const;

    static TensorPtr create(std::vector<std::size_t> shape, bool requires_grad = false);
    static TensorPtr from(std::vector<std::size_t> shape, std::vector<double> values,
                          bool requires_grad = false);
    static TensorPtr scalar(double v, bool requires_grad = false);
};

// One executed operation: enough to replay the forward pass bit-identically
// and to run the reverse-mode step.
struct TapeNode {
    const char* op;
    std::vector<TensorPtr> inputs;
    TensorPtr output;
    std::function<void()> forward;   // recompute output->data from inputs
    std::function<void()> backward;  // accumulate input grads from output grad
};

class Tape {
public:
    void record(TapeNode node) { nodes_.push_back(std::move(node)); }
    // Re-executes every recorded op in order; outputs are recomputed in place.
    void replay();
    std::size_t size() const { return nodes_.size(); }
    const std::vector<TapeNode>& nodes() const { return nodes_; }
    void clear() { nodes_.clear(); }

private:
    std::vector<TapeNode> nodes_;
};

// Ops record onto the thread-local active tape; with no active tape they are
// forward-only (inference mode).
Tape* active_tape();

class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

// Reverse-mode sweep from a scalar loss recorded on `tape`. Gradients on
// requires_grad tensors accumulate across calls until explicitly zeroed.
void backward(const TensorPtr& loss, Tape& tape);

// Attention-style boolean mask over an m x n score matrix; allow[r*n+c] != 0
// means query r may attend to key c.
struct AttnMask {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> allow;
};

// ---- differentiable ops ------------------------------------------------

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
TensorPtr transpose(const TensorPtr& a);
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
// a[m x n] + bias[n] broadcast over rows (the only broadcast supported).
TensorPtr add_row_broadcast(const TensorPtr& a, const TensorPtr& bias);
TensorPtr mul_elems(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& a, double c);
TensorPtr gelu(const TensorPtr& a);
TensorPtr tensor_sum(const TensorPtr& a);

// Row-stabilized softmax. With a mask, disallowed entries get weight 0 and
// each row must keep at least one allowed entry.
TensorPtr softmax_rows(const TensorPtr& x, const AttnMask* mask = nullptr);

TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias,
                     double eps);

// Mean over rows of -log softmax(logits)[target]. When row_select is given,
// only rows with a nonzero entry contribute (and the mean is over those).
TensorPtr cross_entropy_from_logits(const TensorPtr& logits,
                                    const std::vector<std::size_t>& targets,
                                    const std::vector<std::uint8_t>* row_select = nullptr);

// Gathers table rows by index; backward scatter-adds into the table.
TensorPtr embed_rows(const TensorPtr& table, const std::vector<std::size_t>& indices);

TensorPtr concat_cols(const std::vector<TensorPtr>& parts);

// Mean of the rows selected by row_select (at least one must be selected),
// producing a 1 x d tensor.
TensorPtr mean_rows(const TensorPtr& x, const std::vector<std::uint8_t>& row_select);

// ---- initialization -----------------------------------------------------

enum class InitScheme { uniform_scaled, zeros, ones };

// Deterministic for (shape, scheme, seed). uniform_scaled draws from
// U(-1/sqrt(fan_in), +1/sqrt(fan_in)) with fan_in = shape[0].
TensorPtr seeded_init(std::vector<std::size_t> shape, InitScheme scheme, std::uint64_t seed);

}  // namespace evotext
