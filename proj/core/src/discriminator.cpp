#include "evotext/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace evotext {

namespace {

std::vector<std::size_t> real_prefix(const TokenSeq& seq) {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < seq.ids.size(); ++i) {
        if (!seq.pad_mask[i]) break;
        ids.push_back(seq.ids[i]);
    }
    return ids;
}

std::vector<TensorPtr> trunk_params(const DiscriminatorModel& model) {
    NamedParams named;
    collect_embedding_params(model.emb, "emb", named);
    for (std::size_t i = 0; i < model.blocks.size(); ++i) {
        collect_block_params(model.blocks[i], "block" + std::to_string(i), named);
    }
    auto out = values(named);
    out.push_back(model.lnf_g);
    out.push_back(model.lnf_b);
    return out;
}

}  // namespace

DiscriminatorModel make_discriminator(const ModelDims& dims, TokenizerMode mode,
                                      std::uint64_t seed) {
    if (dims.vocab < 2) throw ConfigError("make_discriminator: vocab must be >= 2");
    DiscriminatorModel model;
    model.dims = dims;
    model.mode = mode;
    model.emb = make_embedding(dims.vocab, dims.l_max, dims.d_model, seed);
    for (std::size_t i = 0; i < dims.n_blocks; ++i) {
        model.blocks.push_back(
            make_block(BlockKind::encoder, dims.d_model, dims.n_heads, seed + 211 + 131 * i));
    }
    model.lnf_g = seeded_init({dims.d_model}, InitScheme::ones, 0);
    model.lnf_b = seeded_init({dims.d_model}, InitScheme::zeros, 0);
    model.cls_head.w = seeded_init({dims.d_model, 2}, InitScheme::uniform_scaled, seed + 31);
    model.cls_head.b = seeded_init({1, 2}, InitScheme::zeros, 0);
    model.mlm_head = seeded_init({dims.d_model, dims.vocab}, InitScheme::uniform_scaled,
                                 seed + 47);
    for (auto& t : {model.lnf_g, model.lnf_b, model.cls_head.w, model.cls_head.b,
                    model.mlm_head}) {
        t->requires_grad = true;
    }
    return model;
}

NamedParams discriminator_named_params(const DiscriminatorModel& model) {
    NamedParams out;
    collect_embedding_params(model.emb, "emb", out);
    for (std::size_t i = 0; i < model.blocks.size(); ++i) {
        collect_block_params(model.blocks[i], "block" + std::to_string(i), out);
    }
    out.emplace_back("lnf_g", model.lnf_g);
    out.emplace_back("lnf_b", model.lnf_b);
    out.emplace_back("cls.w", model.cls_head.w);
    out.emplace_back("cls.b", model.cls_head.b);
    out.emplace_back("mlm_head", model.mlm_head);
    return out;
}

std::vector<TensorPtr> discriminator_params(const DiscriminatorModel& model) {
    return values(discriminator_named_params(model));
}

std::vector<TensorPtr> discriminator_mlm_params(const DiscriminatorModel& model) {
    auto out = trunk_params(model);
    out.push_back(model.mlm_head);
    return out;
}

std::vector<TensorPtr> discriminator_cls_params(const DiscriminatorModel& model) {
    auto out = trunk_params(model);
    out.push_back(model.cls_head.w);
    out.push_back(model.cls_head.b);
    return out;
}

TensorPtr discriminator_hidden(const DiscriminatorModel& model, const TokenSeq& seq) {
    const auto ids = real_prefix(seq);
    if (ids.empty()) throw ContractError("discriminator_hidden: empty sequence");
    if (ids.size() > model.dims.l_max) {
        throw ContractError("discriminator_hidden: sequence length " +
                            std::to_string(ids.size()) + " exceeds maximum " +
                            std::to_string(model.dims.l_max));
    }
    TensorPtr x = embed(ids, model.emb);
    for (const auto& block : model.blocks) {
        x = block_forward(x, block);
    }
    return layer_norm(x, model.lnf_g, model.lnf_b, kLayerNormEps);
}

TensorPtr discriminator_cls_logits(const DiscriminatorModel& model, const TokenSeq& seq) {
    auto hidden = discriminator_hidden(model, seq);
    std::vector<std::uint8_t> all(hidden->rows(), 1);
    auto pooled = mean_rows(hidden, all);
    return add(matmul(pooled, model.cls_head.w), model.cls_head.b);
}

ClassifyResult classify(const DiscriminatorModel& model, const TokenSeq& seq) {
    auto logits = discriminator_cls_logits(model, seq);
    const double mx = std::max(logits->data[0], logits->data[1]);
    const double e0 = std::exp(logits->data[0] - mx), e1 = std::exp(logits->data[1] - mx);
    ClassifyResult r;
    r.prob_grammatical = e1 / (e0 + e1);
    r.label = r.prob_grammatical >= model.decision_threshold ? 1 : 0;
    return r;
}

double mlm_pretrain_step(DiscriminatorModel& model, const std::vector<TokenSeq>& batch,
                         double mask_p, Optimizer& opt, std::uint64_t seed) {
    if (mask_p <= 0.0 || mask_p >= 1.0) {
        throw ConfigError("mlm_pretrain_step: mask_p must be in (0,1)");
    }
    Tape tape;
    TapeScope scope(tape);
    std::vector<TensorPtr> losses;
    std::vector<double> weights;
    double total_masked = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        auto masked = mask_tokens(batch[s], mask_p, seed + s);
        if (masked.positions.empty()) continue;
        const auto ids = real_prefix(masked.masked);
        TokenSeq trimmed{ids, std::vector<std::uint8_t>(ids.size(), 1)};
        auto logits = matmul(discriminator_hidden(model, trimmed), model.mlm_head);
        std::vector<std::size_t> targets(ids.size(), 0);
        std::vector<std::uint8_t> sel(ids.size(), 0);
        for (auto pos : masked.positions) {
            targets[pos] = batch[s].ids[pos];
            sel[pos] = 1;
        }
        losses.push_back(cross_entropy_from_logits(logits, targets, &sel));
        const auto n = static_cast<double>(masked.positions.size());
        weights.push_back(n);
        total_masked += n;
    }
    if (losses.empty()) return 0.0;  // nothing maskable: skip, parameters unchanged
    TensorPtr loss = scale(losses[0], weights[0] / total_masked);
    for (std::size_t i = 1; i < losses.size(); ++i) {
        loss = add(loss, scale(losses[i], weights[i] / total_masked));
    }
    const double value = loss->data[0];
    backward(loss, tape);
    opt.step();
    return value;
}

TokenSeq mlm_fill(const DiscriminatorModel& model, const TokenSeq& masked,
                  const std::vector<std::size_t>& positions) {
    TokenSeq out = masked;
    if (positions.empty()) return out;
    const auto ids = real_prefix(masked);
    for (auto pos : positions) {
        if (pos >= ids.size() || ids[pos] != Vocab::mask_id) {
            throw ContractError("mlm_fill: position " + std::to_string(pos) +
                                " does not carry the mask id");
        }
    }
    TokenSeq trimmed{ids, std::vector<std::uint8_t>(ids.size(), 1)};
    auto logits = matmul(discriminator_hidden(model, trimmed), model.mlm_head);
    const std::size_t v = model.dims.vocab;
    for (auto pos : positions) {
        const double* row = &logits->data[pos * v];
        // the mask id itself is never a fill candidate
        std::size_t best = v;
        for (std::size_t c = 0; c < v; ++c) {
            if (c == Vocab::mask_id) continue;
            if (best == v || row[c] > row[best]) best = c;  // strict: ties keep the lowest id
        }
        out.ids[pos] = best;
    }
    return out;
}

double classification_loss(const DiscriminatorModel& model,
                           const std::vector<std::pair<TokenSeq, int>>& data) {
    if (data.empty()) throw ContractError("classification_loss: empty data");
    double total = 0.0;
    for (const auto& [seq, label] : data) {
        auto r = classify(model, seq);
        const double p = label == 1 ? r.prob_grammatical : 1.0 - r.prob_grammatical;
        total += -std::log(std::max(p, 1e-300));
    }
    return total / static_cast<double>(data.size());
}

std::vector<double> priori_finetune(DiscriminatorModel& model,
                                    const std::vector<std::pair<TokenSeq, int>>& train,
                                    const std::vector<std::pair<TokenSeq, int>>& validation,
                                    double lr, std::size_t epochs, std::size_t minibatch,
                                    std::uint64_t seed) {
    if (train.empty()) throw ContractError("priori_finetune: empty training data");
    if (minibatch < 1) throw ConfigError("priori_finetune: minibatch must be >= 1");
    Optimizer opt(OptimizerKind::adam, discriminator_cls_params(model), lr);
    Rng rng(seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> history;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += minibatch) {
            const std::size_t end = std::min(start + minibatch, order.size());
            Tape tape;
            TapeScope scope(tape);
            TensorPtr loss;
            const double inv = 1.0 / static_cast<double>(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const auto& [seq, label] = train[order[i]];
                auto ce = cross_entropy_from_logits(discriminator_cls_logits(model, seq),
                                                    {static_cast<std::size_t>(label)});
                auto term = scale(ce, inv);
                loss = loss ? add(loss, term) : term;
            }
            backward(loss, tape);
            opt.step();
        }
        history.push_back(classification_loss(model, validation.empty() ? train : validation));
    }
    return history;
}

}  // namespace evotext
