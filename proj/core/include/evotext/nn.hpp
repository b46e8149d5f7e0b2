#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "evotext/tensor.hpp"

namespace evotext {

struct EmbeddingTable {
    TensorPtr token;     // V x d_model
    TensorPtr position;  // L_max x d_model
};

enum class BlockKind { encoder, decoder };

struct AttentionHead {
    TensorPtr wq, wk, wv;  // d_model x d_k
};

// Pre-norm residual block: x + MHA(LN1(x)), then + MLP(LN2(.)).
// Decoder blocks always apply the causal mask; encoder blocks never do.
struct TransformerBlock {
    BlockKind kind;
    std::vector<AttentionHead> heads;
    TensorPtr wo;              // (h*d_k) x d_model
    TensorPtr w1, b1, w2, b2;  // MLP, hidden width 4*d_model
    TensorPtr ln1_g, ln1_b, ln2_g, ln2_b;
};

constexpr std::size_t kNoWindow = std::numeric_limits<std::size_t>::max();
constexpr double kLayerNormEps = 1e-5;

// allow[i][j]: query i may attend to key j. window w limits each query to the
// w most recent positions including itself; pad-masked keys are never visible.
AttnMask build_attention_mask(std::size_t n, bool causal,
                              const std::vector<std::uint8_t>* pad_mask = nullptr,
                              std::size_t window = kNoWindow);

// softmax(Q K^T / sqrt(d_k)) V with masked positions excluded before softmax.
TensorPtr scaled_dot_attention(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v,
                               const AttnMask& mask);
TensorPtr scaled_dot_attention(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v,
                               bool causal,
                               const std::vector<std::uint8_t>* pad_mask = nullptr);

TensorPtr multi_head_attention(const TensorPtr& x, const TransformerBlock& block,
                               const AttnMask& mask);

TensorPtr block_forward(const TensorPtr& x, const TransformerBlock& block,
                        const std::vector<std::uint8_t>* pad_mask = nullptr,
                        std::size_t window = kNoWindow);

// token row + position row per position.
TensorPtr embed(const std::vector<std::size_t>& tokens, const EmbeddingTable& table);

EmbeddingTable make_embedding(std::size_t vocab, std::size_t l_max, std::size_t d_model,
                              std::uint64_t seed);
TransformerBlock make_block(BlockKind kind, std::size_t d_model, std::size_t n_heads,
                            std::uint64_t seed);

using NamedParams = std::vector<std::pair<std::string, TensorPtr>>;

void collect_block_params(const TransformerBlock& block, const std::string& prefix,
                          NamedParams& out);
void collect_embedding_params(const EmbeddingTable& emb, const std::string& prefix,
                              NamedParams& out);

std::vector<TensorPtr> values(const NamedParams& named);
void set_requires_grad(const std::vector<TensorPtr>& params, bool flag);
std::uint64_t params_hash(const std::vector<TensorPtr>& params);

}  // namespace evotext
