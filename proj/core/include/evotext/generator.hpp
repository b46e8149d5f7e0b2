#pragma once

#include <array>
#include <optional>

#include "evotext/nn.hpp"
#include "evotext/text.hpp"

namespace evotext {

struct ModelDims {
    std::size_t vocab = 0;
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t n_blocks = 4;
    std::size_t l_max = 64;
};

// Pooled linear classifier into {ungrammatical, grammatical}.
struct ClsHead {
    TensorPtr w;  // d_model x 2
    TensorPtr b;  // 1 x 2
};

// Autoregressive language model: decoder blocks with a tied-nothing LM head
// and an optional classification head trained during warm-up.
struct GeneratorModel {
    ModelDims dims;
    TokenizerMode mode = TokenizerMode::word;
    EmbeddingTable emb;
    std::vector<TransformerBlock> blocks;
    TensorPtr lnf_g, lnf_b;  // final layer norm
    TensorPtr lm_head;       // d_model x V
    std::optional<ClsHead> cls_head;
};

GeneratorModel make_generator(const ModelDims& dims, TokenizerMode mode, std::uint64_t seed);
void attach_cls_head(GeneratorModel& model, std::uint64_t seed);

NamedParams generator_named_params(const GeneratorModel& model);
// The frozen set during warm-up: transformer block parameters only.
std::vector<TensorPtr> generator_block_params(const GeneratorModel& model);
// Everything the language-model objective trains: embeddings, blocks, final
// norm, and the LM head.
std::vector<TensorPtr> generator_lm_params(const GeneratorModel& model);
std::vector<TensorPtr> generator_head_params(const GeneratorModel& model);

// Embeddings -> decoder blocks (causal, optionally windowed) -> final norm.
// Operates on the real (non-pad) prefix of the sequence.
TensorPtr generator_hidden(const GeneratorModel& model, const TokenSeq& seq,
                           std::size_t window = kNoWindow);

// Row t: unnormalized log-probabilities of token t+1 given tokens <= t.
TensorPtr lm_forward(const GeneratorModel& model, const TokenSeq& seq,
                     std::size_t window = kNoWindow);

// Sum over positions 2..N of log P(t_i | t_1..t_{i-1}); the first token is
// unconditioned by convention (prompts always supply it).
double sequence_log_prob(const GeneratorModel& model, const TokenSeq& seq);

struct GenerationConfig {
    enum class Strategy { greedy, temperature, top_k };
    std::size_t max_new_tokens = 16;
    std::size_t termination_id = Vocab::eot_id;
    Strategy strategy = Strategy::temperature;
    double temperature = 1.0;
    std::size_t top_k = 1;
    std::uint64_t seed = 0;
};

// Appends tokens per the strategy; stops on the termination token (not
// appended) or after max_new_tokens; deterministic given the seed.
TokenSeq generate(const GeneratorModel& model, const TokenSeq& prompt,
                  const GenerationConfig& cfg);

// Negative mean log-likelihood over all predicted positions of the batch,
// each conditioned on at most the previous `window` tokens. Records on the
// active tape; sequences shorter than 2 real tokens are skipped.
TensorPtr lm_loss(const GeneratorModel& model, const std::vector<TokenSeq>& batch,
                  std::size_t window);

// Mean-pool over real positions -> linear -> 1 x 2 logits (differentiable).
TensorPtr classify_logits_with_head(const GeneratorModel& model, const TokenSeq& seq);
// Softmax probabilities {P(label 0), P(label 1)}.
std::array<double, 2> classify_with_head(const GeneratorModel& model, const TokenSeq& seq);

// Trains only the classification head; every other parameter is bit-identical
// before vs after.
void warmup_head(GeneratorModel& model, const std::vector<std::pair<TokenSeq, int>>& data,
                 double lr, std::size_t epochs, std::size_t minibatch, std::uint64_t seed);

}  // namespace evotext
