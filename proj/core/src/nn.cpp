#include "evotext/nn.hpp"

#include <cmath>

#include "evotext/errors.hpp"

namespace evotext {

AttnMask build_attention_mask(std::size_t n, bool causal,
                              const std::vector<std::uint8_t>* pad_mask, std::size_t window) {
    if (pad_mask && pad_mask->size() != n) {
        throw ShapeError("build_attention_mask: pad mask length " +
                         std::to_string(pad_mask->size()) + " for n=" + std::to_string(n));
    }
    AttnMask mask{n, n, std::vector<std::uint8_t>(n * n, 1)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            bool ok = true;
            if (causal && j > i) ok = false;
            if (window != kNoWindow && j + window <= i) ok = false;
            if (pad_mask && !(*pad_mask)[j]) ok = false;
            mask.allow[i * n + j] = ok ? 1 : 0;
        }
    }
    return mask;
}

TensorPtr scaled_dot_attention(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v,
                               const AttnMask& mask) {
    if (q->cols() != k->cols() || k->rows() != v->rows() || q->rows() != mask.rows ||
        k->rows() != mask.cols) {
        throw ShapeError("scaled_dot_attention: inconsistent Q/K/V/mask shapes");
    }
    const double inv = 1.0 / std::sqrt(static_cast<double>(q->cols()));
    auto scores = scale(matmul(q, transpose(k)), inv);
    auto weights = softmax_rows(scores, &mask);
    return matmul(weights, v);
}

TensorPtr scaled_dot_attention(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v,
                               bool causal, const std::vector<std::uint8_t>* pad_mask) {
    const std::size_t nq = q->rows(), nk = k->rows();
    if (causal && nq != nk) {
        throw ShapeError("scaled_dot_attention: causal masking requires square attention");
    }
    AttnMask mask{nq, nk, std::vector<std::uint8_t>(nq * nk, 1)};
    for (std::size_t i = 0; i < nq; ++i) {
        for (std::size_t j = 0; j < nk; ++j) {
            bool ok = !(causal && j > i);
            if (pad_mask && !(*pad_mask)[j]) ok = false;
            mask.allow[i * nk + j] = ok ? 1 : 0;
        }
    }
    return scaled_dot_attention(q, k, v, mask);
}

TensorPtr multi_head_attention(const TensorPtr& x, const TransformerBlock& block,
                               const AttnMask& mask) {
    std::vector<TensorPtr> outs;
    outs.reserve(block.heads.size());
    for (const auto& head : block.heads) {
        auto q = matmul(x, head.wq);
        auto k = matmul(x, head.wk);
        auto v = matmul(x, head.wv);
        outs.push_back(scaled_dot_attention(q, k, v, mask));
    }
    auto cat = outs.size() == 1 ? outs[0] : concat_cols(outs);
    return matmul(cat, block.wo);
}

TensorPtr block_forward(const TensorPtr& x, const TransformerBlock& block,
                        const std::vector<std::uint8_t>* pad_mask, std::size_t window) {
    const bool causal = block.kind == BlockKind::decoder;
    auto mask = build_attention_mask(x->rows(), causal, pad_mask, window);
    auto h = add(x, multi_head_attention(layer_norm(x, block.ln1_g, block.ln1_b, kLayerNormEps),
                                         block, mask));
    auto mlp_in = layer_norm(h, block.ln2_g, block.ln2_b, kLayerNormEps);
    auto hidden = gelu(add_row_broadcast(matmul(mlp_in, block.w1), block.b1));
    auto mlp_out = add_row_broadcast(matmul(hidden, block.w2), block.b2);
    return add(h, mlp_out);
}

TensorPtr embed(const std::vector<std::size_t>& tokens, const EmbeddingTable& table) {
    if (tokens.size() > table.position->rows()) {
        throw ContractError("embed: sequence length " + std::to_string(tokens.size()) +
                            " exceeds L_max " + std::to_string(table.position->rows()));
    }
    std::vector<std::size_t> positions(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) positions[i] = i;
    return add(embed_rows(table.token, tokens), embed_rows(table.position, positions));
}

EmbeddingTable make_embedding(std::size_t vocab, std::size_t l_max, std::size_t d_model,
                              std::uint64_t seed) {
    EmbeddingTable emb;
    emb.token = seeded_init({vocab, d_model}, InitScheme::uniform_scaled, seed);
    emb.position = seeded_init({l_max, d_model}, InitScheme::uniform_scaled, seed ^ 0x9e37ULL);
    emb.token->requires_grad = true;
    emb.position->requires_grad = true;
    return emb;
}

TransformerBlock make_block(BlockKind kind, std::size_t d_model, std::size_t n_heads,
                            std::uint64_t seed) {
    if (n_heads == 0 || d_model % n_heads != 0) {
        throw ConfigError("make_block: d_model " + std::to_string(d_model) +
                          " not divisible by head count " + std::to_string(n_heads));
    }
    const std::size_t d_k = d_model / n_heads;
    const std::size_t d_ff = 4 * d_model;
    TransformerBlock block;
    block.kind = kind;
    std::uint64_t s = seed;
    auto next_param = [&s](std::vector<std::size_t> shape) {
        auto t = seeded_init(std::move(shape), InitScheme::uniform_scaled, s++);
        t->requires_grad = true;
        return t;
    };
    for (std::size_t h = 0; h < n_heads; ++h) {
        block.heads.push_back({next_param({d_model, d_k}), next_param({d_model, d_k}),
                               next_param({d_model, d_k})});
    }
    block.wo = next_param({n_heads * d_k, d_model});
    block.w1 = next_param({d_model, d_ff});
    block.w2 = next_param({d_ff, d_model});
    block.b1 = seeded_init({d_ff}, InitScheme::zeros, 0);
    block.b2 = seeded_init({d_model}, InitScheme::zeros, 0);
    block.ln1_g = seeded_init({d_model}, InitScheme::ones, 0);
    block.ln1_b = seeded_init({d_model}, InitScheme::zeros, 0);
    block.ln2_g = seeded_init({d_model}, InitScheme::ones, 0);
    block.ln2_b = seeded_init({d_model}, InitScheme::zeros, 0);
    for (auto& t : {block.b1, block.b2, block.ln1_g, block.ln1_b, block.ln2_g, block.ln2_b}) {
        t->requires_grad = true;
    }
    return block;
}

void collect_block_params(const TransformerBlock& block, const std::string& prefix,
                          NamedParams& out) {
    for (std::size_t h = 0; h < block.heads.size(); ++h) {
        const std::string hp = prefix + ".head" + std::to_string(h);
        out.emplace_back(hp + ".wq", block.heads[h].wq);
        out.emplace_back(hp + ".wk", block.heads[h].wk);
        out.emplace_back(hp + ".wv", block.heads[h].wv);
    }
    out.emplace_back(prefix + ".wo", block.wo);
    out.emplace_back(prefix + ".w1", block.w1);
    out.emplace_back(prefix + ".b1", block.b1);
    out.emplace_back(prefix + ".w2", block.w2);
    out.emplace_back(prefix + ".b2", block.b2);
    out.emplace_back(prefix + ".ln1_g", block.ln1_g);
    out.emplace_back(prefix + ".ln1_b", block.ln1_b);
    out.emplace_back(prefix + ".ln2_g", block.ln2_g);
    out.emplace_back(prefix + ".ln2_b", block.ln2_b);
}

void collect_embedding_params(const EmbeddingTable& emb, const std::string& prefix,
                              NamedParams& out) {
    out.emplace_back(prefix + ".token", emb.token);
    out.emplace_back(prefix + ".position", emb.position);
}

std::vector<TensorPtr> values(const NamedParams& named) {
    std::vector<TensorPtr> out;
    out.reserve(named.size());
    for (const auto& [name, t] : named) out.push_back(t);
    return out;
}

void set_requires_grad(const std::vector<TensorPtr>& params, bool flag) {
    for (const auto& p : params) p->requires_grad = flag;
}

std::uint64_t params_hash(const std::vector<TensorPtr>& params) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& p : params) {
        h = fnv1a64(p->data.data(), p->data.size() * sizeof(double), h);
    }
    return h;
}

}  // namespace evotext
