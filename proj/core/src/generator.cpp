#include "evotext/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evotext/optim.hpp"

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

double row_log_prob(const Tensor& logits, std::size_t row, std::size_t target) {
    const std::size_t c = logits.cols();
    const double* r = &logits.data[row * c];
    double mx = r[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, r[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) denom += std::exp(r[j] - mx);
    return r[target] - (mx + std::log(denom));
}

std::size_t argmax_lowest_id(const double* row, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j) {
        if (row[j] > row[best]) best = j;
    }
    return best;
}

std::size_t sample_index(const std::vector<double>& probs, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        acc += probs[j];
        if (u < acc) return j;
    }
    return probs.size() - 1;  // guard against rounding at u ~ 1
}

}  // namespace

GeneratorModel make_generator(const ModelDims& dims, TokenizerMode mode, std::uint64_t seed) {
    if (dims.vocab < 2) throw ConfigError("make_generator: vocab must be >= 2");
    GeneratorModel model;
    model.dims = dims;
    model.mode = mode;
    model.emb = make_embedding(dims.vocab, dims.l_max, dims.d_model, seed);
    for (std::size_t i = 0; i < dims.n_blocks; ++i) {
        model.blocks.push_back(
            make_block(BlockKind::decoder, dims.d_model, dims.n_heads, seed + 101 + 131 * i));
    }
    model.lnf_g = seeded_init({dims.d_model}, InitScheme::ones, 0);
    model.lnf_b = seeded_init({dims.d_model}, InitScheme::zeros, 0);
    model.lm_head = seeded_init({dims.d_model, dims.vocab}, InitScheme::uniform_scaled, seed + 77);
    for (auto& t : {model.lnf_g, model.lnf_b, model.lm_head}) t->requires_grad = true;
    return model;
}

void attach_cls_head(GeneratorModel& model, std::uint64_t seed) {
    ClsHead head;
    head.w = seeded_init({model.dims.d_model, 2}, InitScheme::uniform_scaled, seed);
    head.b = seeded_init({1, 2}, InitScheme::zeros, 0);
    head.w->requires_grad = true;
    head.b->requires_grad = true;
    model.cls_head = head;
}

NamedParams generator_named_params(const GeneratorModel& model) {
    NamedParams out;
    collect_embedding_params(model.emb, "emb", out);
    for (std::size_t i = 0; i < model.blocks.size(); ++i) {
        collect_block_params(model.blocks[i], "block" + std::to_string(i), out);
    }
    out.emplace_back("lnf_g", model.lnf_g);
    out.emplace_back("lnf_b", model.lnf_b);
    out.emplace_back("lm_head", model.lm_head);
    if (model.cls_head) {
        out.emplace_back("cls.w", model.cls_head->w);
        out.emplace_back("cls.b", model.cls_head->b);
    }
    return out;
}

std::vector<TensorPtr> generator_block_params(const GeneratorModel& model) {
    NamedParams named;
    for (std::size_t i = 0; i < model.blocks.size(); ++i) {
        collect_block_params(model.blocks[i], "block" + std::to_string(i), named);
    }
    return values(named);
}

std::vector<TensorPtr> generator_lm_params(const GeneratorModel& model) {
    auto out = generator_block_params(model);
    out.push_back(model.emb.token);
    out.push_back(model.emb.position);
    out.push_back(model.lnf_g);
    out.push_back(model.lnf_b);
    out.push_back(model.lm_head);
    return out;
}

std::vector<TensorPtr> generator_head_params(const GeneratorModel& model) {
    if (!model.cls_head) throw ContractError("generator_head_params: no classification head");
    return {model.cls_head->w, model.cls_head->b};
}

TensorPtr generator_hidden(const GeneratorModel& model, const TokenSeq& seq,
                           std::size_t window) {
    const auto ids = real_prefix(seq);
    if (ids.empty()) throw ContractError("generator_hidden: empty sequence");
    if (ids.size() > model.dims.l_max) {
        throw ContractError("generator_hidden: sequence length " + std::to_string(ids.size()) +
                            " exceeds maximum " + std::to_string(model.dims.l_max));
    }
    TensorPtr x = embed(ids, model.emb);
    for (const auto& block : model.blocks) {
        x = block_forward(x, block, nullptr, window);
    }
    return layer_norm(x, model.lnf_g, model.lnf_b, kLayerNormEps);
}

TensorPtr lm_forward(const GeneratorModel& model, const TokenSeq& seq, std::size_t window) {
    return matmul(generator_hidden(model, seq, window), model.lm_head);
}

double sequence_log_prob(const GeneratorModel& model, const TokenSeq& seq) {
    const auto ids = real_prefix(seq);
    if (ids.size() < 2) throw ContractError("sequence_log_prob: need at least 2 tokens");
    TokenSeq trimmed{ids, std::vector<std::uint8_t>(ids.size(), 1)};
    auto logits = lm_forward(model, trimmed);
    double lp = 0.0;
    for (std::size_t t = 1; t < ids.size(); ++t) {
        lp += row_log_prob(*logits, t - 1, ids[t]);
    }
    return lp;
}

TokenSeq generate(const GeneratorModel& model, const TokenSeq& prompt,
                  const GenerationConfig& cfg) {
    if (cfg.max_new_tokens < 1) throw ConfigError("generate: max_new_tokens must be >= 1");
    if (cfg.temperature <= 0.0) throw ConfigError("generate: temperature must be positive");
    if (cfg.top_k < 1) throw ConfigError("generate: top_k must be >= 1");
    auto ids = real_prefix(prompt);
    if (ids.empty()) throw ContractError("generate: empty prompt");
    Rng rng(cfg.seed);
    const std::size_t v = model.dims.vocab;
    for (std::size_t step = 0; step < cfg.max_new_tokens; ++step) {
        if (ids.size() >= model.dims.l_max) break;
        TokenSeq cur{ids, std::vector<std::uint8_t>(ids.size(), 1)};
        auto logits = lm_forward(model, cur);
        const double* row = &logits->data[(ids.size() - 1) * v];
        std::size_t next;
        if (cfg.strategy == GenerationConfig::Strategy::greedy) {
            next = argmax_lowest_id(row, v);
        } else if (cfg.strategy == GenerationConfig::Strategy::temperature) {
            double mx = row[0];
            for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
            std::vector<double> probs(v);
            double denom = 0.0;
            for (std::size_t j = 0; j < v; ++j) {
                probs[j] = std::exp((row[j] - mx) / cfg.temperature);
                denom += probs[j];
            }
            for (auto& p : probs) p /= denom;
            next = sample_index(probs, rng);
        } else {
            std::vector<std::size_t> order(v);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
            const std::size_t k = std::min(cfg.top_k, v);
            std::vector<double> probs(k);
            double mx = row[order[0]], denom = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                probs[j] = std::exp(row[order[j]] - mx);
                denom += probs[j];
            }
            for (auto& p : probs) p /= denom;
            next = order[sample_index(probs, rng)];
        }
        if (next == cfg.termination_id) break;
        ids.push_back(next);
    }
    return {ids, std::vector<std::uint8_t>(ids.size(), 1)};
}

TensorPtr lm_loss(const GeneratorModel& model, const std::vector<TokenSeq>& batch,
                  std::size_t window) {
    if (window < 1) throw ConfigError("lm_loss: context window must be >= 1");
    std::vector<TensorPtr> losses;
    std::vector<double> weights;
    double total_positions = 0.0;
    for (const auto& seq : batch) {
        const auto ids = real_prefix(seq);
        if (ids.size() < 2) continue;
        TokenSeq trimmed{ids, std::vector<std::uint8_t>(ids.size(), 1)};
        auto logits = lm_forward(model, trimmed, window);
        // row t predicts ids[t+1]; the last row has no target
        std::vector<std::size_t> targets(ids.size(), 0);
        std::vector<std::uint8_t> sel(ids.size(), 1);
        for (std::size_t t = 0; t + 1 < ids.size(); ++t) targets[t] = ids[t + 1];
        sel.back() = 0;
        losses.push_back(cross_entropy_from_logits(logits, targets, &sel));
        const auto n_pos = static_cast<double>(ids.size() - 1);
        weights.push_back(n_pos);
        total_positions += n_pos;
    }
    if (losses.empty()) return Tensor::scalar(0.0);
    TensorPtr total = scale(losses[0], weights[0] / total_positions);
    for (std::size_t i = 1; i < losses.size(); ++i) {
        total = add(total, scale(losses[i], weights[i] / total_positions));
    }
    return total;
}

TensorPtr classify_logits_with_head(const GeneratorModel& model, const TokenSeq& seq) {
    if (!model.cls_head) throw ContractError("classify_logits_with_head: no classification head");
    auto hidden = generator_hidden(model, seq);
    std::vector<std::uint8_t> all(hidden->rows(), 1);
    auto pooled = mean_rows(hidden, all);
    return add(matmul(pooled, model.cls_head->w), model.cls_head->b);
}

std::array<double, 2> classify_with_head(const GeneratorModel& model, const TokenSeq& seq) {
    auto logits = classify_logits_with_head(model, seq);
    const double mx = std::max(logits->data[0], logits->data[1]);
    const double e0 = std::exp(logits->data[0] - mx), e1 = std::exp(logits->data[1] - mx);
    return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

void warmup_head(GeneratorModel& model, const std::vector<std::pair<TokenSeq, int>>& data,
                 double lr, std::size_t epochs, std::size_t minibatch, std::uint64_t seed) {
    if (!model.cls_head) throw ContractError("warmup_head: no classification head");
    if (minibatch < 1) throw ConfigError("warmup_head: minibatch must be >= 1");
    for (const auto& [seq, label] : data) {
        if (label != 0 && label != 1) throw ContractError("warmup_head: labels must be 0 or 1");
    }
    // freeze the trunk so only the head receives gradients
    const auto frozen = generator_lm_params(model);
    set_requires_grad(frozen, false);
    Optimizer opt(OptimizerKind::adam, generator_head_params(model), lr);
    Rng rng(seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += minibatch) {
            const std::size_t end = std::min(start + minibatch, order.size());
            Tape tape;
            TapeScope scope(tape);
            TensorPtr loss;
            const double inv = 1.0 / static_cast<double>(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const auto& [seq, label] = data[order[i]];
                auto logits = classify_logits_with_head(model, seq);
                auto ce = cross_entropy_from_logits(
                    logits, {static_cast<std::size_t>(label)});
                auto term = scale(ce, inv);
                loss = loss ? add(loss, term) : term;
            }
            backward(loss, tape);
            opt.step();
        }
    }
    set_requires_grad(frozen, true);
}

}  // namespace evotext
