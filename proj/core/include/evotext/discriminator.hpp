#pragma once

#include "evotext/generator.hpp"
#include "evotext/optim.hpp"

namespace evotext {

// Bidirectional encoder with two heads: grammatical-acceptability
// classification and masked-token filling.
struct DiscriminatorModel {
    ModelDims dims;
    TokenizerMode mode = TokenizerMode::word;
    EmbeddingTable emb;
    std::vector<TransformerBlock> blocks;  // encoder: no causal mask
    TensorPtr lnf_g, lnf_b;
    ClsHead cls_head;
    TensorPtr mlm_head;  // d_model x V
    double decision_threshold = 0.5;
};

DiscriminatorModel make_discriminator(const ModelDims& dims, TokenizerMode mode,
                                      std::uint64_t seed);

NamedParams discriminator_named_params(const DiscriminatorModel& model);
// Every parameter (hashing / checkpointing).
std::vector<TensorPtr> discriminator_params(const DiscriminatorModel& model);
// Trunk + the head the respective objective trains (an optimizer requires
// gradients on every parameter it owns).
std::vector<TensorPtr> discriminator_mlm_params(const DiscriminatorModel& model);
std::vector<TensorPtr> discriminator_cls_params(const DiscriminatorModel& model);

// Embeddings -> encoder blocks -> final norm over the real prefix. Mask
// tokens are ordinary vocabulary entries here.
TensorPtr discriminator_hidden(const DiscriminatorModel& model, const TokenSeq& seq);

struct ClassifyResult {
    int label = 0;
    double prob_grammatical = 0.0;
};

// Pooled encoder output -> linear -> softmax; label 1 iff the grammatical
// probability reaches the decision threshold (ties go to 1).
ClassifyResult classify(const DiscriminatorModel& model, const TokenSeq& seq);
TensorPtr discriminator_cls_logits(const DiscriminatorModel& model, const TokenSeq& seq);

// Masks the batch at mask_p, takes one optimizer step on the cross-entropy at
// masked positions only. A batch with zero maskable tokens is skipped and
// reports zero loss. The optimizer must own discriminator_params(model).
double mlm_pretrain_step(DiscriminatorModel& model, const std::vector<TokenSeq>& batch,
                         double mask_p, Optimizer& opt, std::uint64_t seed);

// Replaces each listed (mask-id) position with the argmax of the fill
// distribution; ties break toward the lowest token id; other positions are
// bit-identical.
TokenSeq mlm_fill(const DiscriminatorModel& model, const TokenSeq& masked,
                  const std::vector<std::size_t>& positions);

// Classification fine-tuning over all discriminator parameters; returns the
// per-epoch validation loss history (training loss when validation is empty).
std::vector<double> priori_finetune(DiscriminatorModel& model,
                                    const std::vector<std::pair<TokenSeq, int>>& train,
                                    const std::vector<std::pair<TokenSeq, int>>& validation,
                                    double lr, std::size_t epochs, std::size_t minibatch,
                                    std::uint64_t seed);

// Mean classification cross-entropy without parameter updates.
double classification_loss(const DiscriminatorModel& model,
                           const std::vector<std::pair<TokenSeq, int>>& data);

}  // namespace evotext
