// Acceptance suite: one pass/fail line per criterion, end to end, with every
// tolerance pinned below. Criteria 8-10 run the full synthetic-benchmark
// pipeline in process; criterion 11 invokes the installed CLI twice and
// compares artifacts byte for byte. The binary exits nonzero if any criterion
// fails, so ctest reports the suite red until every line passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "evotext/experiment.hpp"
#include "gradcheck.hpp"
#include "table_fixture.hpp"

namespace fs = std::filesystem;
using namespace evotext;
using Clock = std::chrono::steady_clock;

namespace {

// ---- pinned tolerances and budgets -----------------------------------------
constexpr double kGradH = 1e-5;          // finite-difference step
constexpr double kGradTol = 1e-4;        // max relative gradient error
constexpr std::size_t kGradSeeds = 20;   // seeded instances per operation
constexpr double kGradBudgetSec = 60.0;  // criterion 1 runtime budget
constexpr double kJointSumTol = 1e-8;    // joint distribution sums to 1
constexpr double kSeqProbTol = 1e-10;    // exp(log prob) vs chain product
constexpr std::size_t kCausalityTrials = 1000;
constexpr double kMetricTol = 1e-9;   // PPL/BPC identities
constexpr double kMaskSigma = 3.0;    // mask-count tolerance in std deviations
constexpr double kMinDAcc = 0.90;     // discriminator held-out accuracy floor
constexpr double kMinGainPts = 5.0;   // grammaticality improvement floor
constexpr double kMaxPplWorsenPct = 2.0;        // held-out PPL ceiling
constexpr double kMaxOldDomainWorsenPct = 5.0;  // escalation old-domain ceiling
constexpr double kLoopBudgetSec = 900.0;        // criterion 8: < 15 min
constexpr double kEscBudgetSec = 300.0;         // criterion 9: < 5 min

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
    if (!pass) ++g_failures;
    std::printf("[%s] criterion %2d: %s — %s\n", pass ? "PASS" : "FAIL", criterion, what.c_str(),
                detail.c_str());
    std::fflush(stdout);
}

TokenSeq seq_of(std::vector<std::size_t> ids) {
    TokenSeq s;
    s.pad_mask.assign(ids.size(), 1);
    s.ids = std::move(ids);
    return s;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

TensorPtr rnd(std::vector<std::size_t> shape, std::uint64_t seed) {
    return seeded_init(std::move(shape), InitScheme::uniform_scaled, seed);
}

// A fixed random weighting turns outputs with trivial sums (softmax rows,
// mean-pooled rows) into losses with nontrivial gradients.
TensorPtr weighted_sum(const TensorPtr& x, std::uint64_t seed) {
    return tensor_sum(mul_elems(x, rnd(x->shape, seed ^ 0xabcdef)));
}

// ---- criterion 1: gradient suite --------------------------------------------
void criterion_1() {
    const auto t0 = Clock::now();
    struct OpCheck {
        const char* name;
        std::function<double(std::uint64_t)> run;  // returns max relative error
    };
    std::vector<OpCheck> ops;
    ops.push_back({"matmul", [](std::uint64_t s) {
                       auto a = rnd({3, 4}, s), b = rnd({4, 2}, s + 1000);
                       return gradcheck::max_rel_err(
                           {a, b}, [&] { return tensor_sum(matmul(a, b)); }, kGradH);
                   }});
    ops.push_back({"transpose", [](std::uint64_t s) {
                       auto x = rnd({3, 4}, s);
                       return gradcheck::max_rel_err(
                           {x}, [&] { return weighted_sum(transpose(x), s); }, kGradH);
                   }});
    ops.push_back({"add", [](std::uint64_t s) {
                       auto a = rnd({3, 4}, s), b = rnd({3, 4}, s + 1000);
                       return gradcheck::max_rel_err(
                           {a, b}, [&] { return weighted_sum(add(a, b), s); }, kGradH);
                   }});
    ops.push_back({"add_row_broadcast", [](std::uint64_t s) {
                       auto a = rnd({3, 4}, s), bias = rnd({1, 4}, s + 1000);
                       return gradcheck::max_rel_err(
                           {a, bias}, [&] { return weighted_sum(add_row_broadcast(a, bias), s); },
                           kGradH);
                   }});
    ops.push_back({"mul_elems", [](std::uint64_t s) {
                       auto a = rnd({3, 4}, s), b = rnd({3, 4}, s + 1000);
                       return gradcheck::max_rel_err(
                           {a, b}, [&] { return tensor_sum(mul_elems(a, b)); }, kGradH);
                   }});
    ops.push_back({"scale", [](std::uint64_t s) {
                       auto x = rnd({3, 4}, s);
                       return gradcheck::max_rel_err(
                           {x}, [&] { return weighted_sum(scale(x, -1.7), s); }, kGradH);
                   }});
    ops.push_back({"gelu", [](std::uint64_t s) {
                       auto x = rnd({3, 4}, s);
                       return gradcheck::max_rel_err(
                           {x}, [&] { return weighted_sum(gelu(x), s); }, kGradH);
                   }});
    ops.push_back({"tensor_sum", [](std::uint64_t s) {
                       auto x = rnd({3, 4}, s);
                       return gradcheck::max_rel_err(
                           {x}, [&] { return tensor_sum(x); }, kGradH);
                   }});
    ops.push_back({"softmax_rows", [](std::uint64_t s) {
                       auto x = rnd({3, 5}, s);
                       return gradcheck::max_rel_err(
                           {x}, [&] { return weighted_sum(softmax_rows(x), s); }, kGradH);
                   }});
    ops.push_back({"softmax_rows(masked)", [](std::uint64_t s) {
                       auto x = rnd({3, 5}, s);
                       AttnMask mask{3, 5, std::vector<std::uint8_t>(15, 0)};
                       Rng rng(s + 77);
                       for (std::size_t r = 0; r < 3; ++r) {
                           mask.allow[r * 5 + rng.uniform_index(5)] = 1;  // at least one per row
                           for (std::size_t c = 0; c < 5; ++c) {
                               if (rng.uniform() < 0.5) mask.allow[r * 5 + c] = 1;
                           }
                       }
                       return gradcheck::max_rel_err(
                           {x}, [&] { return weighted_sum(softmax_rows(x, &mask), s); }, kGradH);
                   }});
    ops.push_back({"layer_norm", [](std::uint64_t s) {
                       auto x = rnd({3, 6}, s), g = rnd({6}, s + 1), b = rnd({6}, s + 2);
                       return gradcheck::max_rel_err(
                           {x, g, b},
                           [&] { return weighted_sum(layer_norm(x, g, b, kLayerNormEps), s); },
                           kGradH);
                   }});
    ops.push_back({"cross_entropy_from_logits", [](std::uint64_t s) {
                       auto x = rnd({4, 5}, s);
                       Rng rng(s + 3);
                       std::vector<std::size_t> targets(4);
                       for (auto& t : targets) t = rng.uniform_index(5);
                       return gradcheck::max_rel_err(
                           {x}, [&] { return cross_entropy_from_logits(x, targets); }, kGradH);
                   }});
    ops.push_back({"cross_entropy(row_select)", [](std::uint64_t s) {
                       auto x = rnd({4, 5}, s);
                       Rng rng(s + 4);
                       std::vector<std::size_t> targets(4);
                       for (auto& t : targets) t = rng.uniform_index(5);
                       std::vector<std::uint8_t> select = {1, 0, 1, 0};
                       return gradcheck::max_rel_err(
                           {x}, [&] { return cross_entropy_from_logits(x, targets, &select); },
                           kGradH);
                   }});
    ops.push_back({"embed_rows", [](std::uint64_t s) {
                       auto table = rnd({5, 4}, s);
                       std::vector<std::size_t> idx = {1, 3, 1, 0};  // repeats hit scatter-add
                       return gradcheck::max_rel_err(
                           {table}, [&] { return weighted_sum(embed_rows(table, idx), s); },
                           kGradH);
                   }});
    ops.push_back({"concat_cols", [](std::uint64_t s) {
                       auto a = rnd({3, 2}, s), b = rnd({3, 3}, s + 1);
                       return gradcheck::max_rel_err(
                           {a, b}, [&] { return weighted_sum(concat_cols({a, b}), s); }, kGradH);
                   }});
    ops.push_back({"mean_rows", [](std::uint64_t s) {
                       auto x = rnd({4, 3}, s);
                       std::vector<std::uint8_t> select = {1, 0, 1, 1};
                       return gradcheck::max_rel_err(
                           {x}, [&] { return weighted_sum(mean_rows(x, select), s); }, kGradH);
                   }});
    ops.push_back({"scaled_dot_attention", [](std::uint64_t s) {
                       auto q = rnd({3, 4}, s), k = rnd({3, 4}, s + 1), v = rnd({3, 4}, s + 2);
                       return gradcheck::max_rel_err(
                           {q, k, v},
                           [&] { return weighted_sum(scaled_dot_attention(q, k, v, true), s); },
                           kGradH);
                   }});
    ops.push_back({"block_forward", [](std::uint64_t s) {
                       auto block = make_block(BlockKind::decoder, 4, 2, s + 9);
                       auto x = rnd({3, 4}, s);
                       NamedParams named;
                       collect_block_params(block, "b", named);
                       std::vector<TensorPtr> leaves = values(named);
                       leaves.push_back(x);
                       return gradcheck::max_rel_err(
                           leaves, [&] { return weighted_sum(block_forward(x, block), s); },
                           kGradH);
                   }});

    double worst = 0.0;
    std::string worst_op = "-";
    for (const auto& op : ops) {
        for (std::uint64_t s = 1; s <= kGradSeeds; ++s) {
            const double err = op.run(s * 7919);
            if (err > worst) {
                worst = err;
                worst_op = op.name;
            }
        }
    }
    const double dt = seconds_since(t0);
    report(1, worst < kGradTol && dt < kGradBudgetSec, "gradient suite",
           std::to_string(ops.size()) + " ops x " + std::to_string(kGradSeeds) +
               " seeds, worst rel err " + fmt("%.2e", worst) + " (" + worst_op + "), " +
               fmt("%.1f", dt) + "s");
}

// ---- criterion 2: chain-rule consistency ------------------------------------
void criterion_2() {
    double worst_sum = 0.0, worst_prob = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ModelDims dims{.vocab = 3, .d_model = 8, .n_heads = 2, .n_blocks = 1, .l_max = 4};
        auto model = make_generator(dims, TokenizerMode::word, seed);
        for (std::size_t first = 0; first < 3; ++first) {
            double total = 0.0;
            for (std::size_t a = 0; a < 3; ++a) {
                for (std::size_t b = 0; b < 3; ++b) {
                    auto seq = seq_of({first, a, b});
                    const double joint = std::exp(sequence_log_prob(model, seq));
                    total += joint;
                    // chain product from the raw per-step softmax rows
                    auto logits = lm_forward(model, seq);
                    double product = 1.0;
                    for (std::size_t t = 1; t < 3; ++t) {
                        double mx = logits->at(t - 1, 0);
                        for (std::size_t c = 1; c < 3; ++c) {
                            mx = std::max(mx, logits->at(t - 1, c));
                        }
                        double denom = 0.0;
                        for (std::size_t c = 0; c < 3; ++c) {
                            denom += std::exp(logits->at(t - 1, c) - mx);
                        }
                        product *= std::exp(logits->at(t - 1, seq.ids[t]) - mx) / denom;
                    }
                    worst_prob = std::max(worst_prob, std::abs(joint - product));
                }
            }
            worst_sum = std::max(worst_sum, std::abs(total - 1.0));
        }
    }
    report(2, worst_sum < kJointSumTol && worst_prob < kSeqProbTol, "joint-probability identity",
           "vocab-3 L-3 enumeration: |sum-1| " + fmt("%.2e", worst_sum) +
               ", chain-product gap " + fmt("%.2e", worst_prob));
}

// ---- criterion 3: causality --------------------------------------------------
void criterion_3() {
    ModelDims dims{.vocab = 11, .d_model = 8, .n_heads = 2, .n_blocks = 2, .l_max = 8};
    auto g = make_generator(dims, TokenizerMode::word, 21);
    Rng rng(99);
    std::size_t violations = 0;
    for (std::size_t trial = 0; trial < kCausalityTrials; ++trial) {
        const std::size_t n = 3 + rng.uniform_index(5);       // length 3..7
        const std::size_t t = 1 + rng.uniform_index(n - 2);   // change at > t exists
        std::vector<std::size_t> base(n), alt;
        for (auto& id : base) id = 4 + rng.uniform_index(7);  // avoid reserved ids
        alt = base;
        for (std::size_t i = t + 1; i < n; ++i) alt[i] = 4 + rng.uniform_index(7);
        auto la = lm_forward(g, seq_of(base));
        auto lb = lm_forward(g, seq_of(alt));
        for (std::size_t r = 0; r <= t; ++r) {
            for (std::size_t c = 0; c < dims.vocab; ++c) {
                if (la->at(r, c) != lb->at(r, c)) ++violations;  // bit-identity required
            }
        }
    }

    // a briefly trained toy discriminator must show bidirectional context
    auto d = make_discriminator(dims, TokenizerMode::word, 22);
    {
        std::vector<TokenSeq> corpus;
        Rng crng(5);
        for (int i = 0; i < 8; ++i) {
            std::vector<std::size_t> ids(6);
            for (auto& id : ids) id = 4 + crng.uniform_index(7);
            corpus.push_back(seq_of(ids));
        }
        Optimizer opt(OptimizerKind::adam, discriminator_mlm_params(d), 1e-3);
        for (std::uint64_t s = 0; s < 10; ++s) mlm_pretrain_step(d, corpus, 0.15, opt, s);
    }
    bool counterexample = false;
    for (std::size_t trial = 0; trial < 50 && !counterexample; ++trial) {
        std::vector<std::size_t> base(5), alt;
        for (auto& id : base) id = 4 + rng.uniform_index(7);
        alt = base;
        alt[4] = 4 + (alt[4] - 4 + 1 + rng.uniform_index(6)) % 7;  // guaranteed different
        auto ha = discriminator_hidden(d, seq_of(base));
        auto hb = discriminator_hidden(d, seq_of(alt));
        for (std::size_t c = 0; c < dims.d_model; ++c) {
            if (ha->at(0, c) != hb->at(0, c)) counterexample = true;
        }
    }
    report(3, violations == 0 && counterexample, "causality",
           std::to_string(kCausalityTrials) + " decoder perturbation trials, " +
               std::to_string(violations) + " violations; encoder counterexample " +
               (counterexample ? "found" : "NOT found"));
}

// ---- criterion 4: metric identities ------------------------------------------
GeneratorModel uniform_model(std::size_t vocab, TokenizerMode mode) {
    ModelDims dims{.vocab = vocab, .d_model = 8, .n_heads = 2, .n_blocks = 1, .l_max = 16};
    auto model = make_generator(dims, mode, 1);
    for (auto& [name, t] : generator_named_params(model)) {
        std::fill(t->data.begin(), t->data.end(), 0.0);
    }
    return model;
}

void criterion_4() {
    double worst = 0.0;
    {
        auto m = uniform_model(16, TokenizerMode::word);
        std::vector<TokenSeq> corpus = {seq_of({3, 4, 5, 6}), seq_of({7, 8})};
        worst = std::max(worst, std::abs(perplexity(m, corpus) - 16.0));
    }
    {
        auto m = uniform_model(32, TokenizerMode::charlevel);
        std::vector<TokenSeq> corpus = {seq_of({4, 5, 6, 7, 8})};
        worst = std::max(worst, std::abs(bits_per_char(m, corpus) - 5.0));  // log2 32
        auto trained = make_generator(
            ModelDims{.vocab = 32, .d_model = 8, .n_heads = 2, .n_blocks = 1, .l_max = 16},
            TokenizerMode::charlevel, 33);
        worst = std::max(worst, std::abs(bits_per_char(trained, corpus) -
                                         std::log2(perplexity(trained, corpus))));
    }
    {
        // hand-set conditionals 0.5, 0.25, 0.5: token-weighted PPL = 2.5198...
        auto m = uniform_model(4, TokenizerMode::word);
        m.lnf_b->data[0] = 1.0;
        const double logits[4] = {std::log(0.5), std::log(0.25), std::log(0.125),
                                  std::log(0.125)};
        for (std::size_t c = 0; c < 4; ++c) m.lm_head->at(0, c) = logits[c];
        std::vector<TokenSeq> corpus = {seq_of({3, 0, 1}), seq_of({3, 0})};
        const double expected =
            std::exp(-(std::log(0.5) + std::log(0.25) + std::log(0.5)) / 3.0);
        worst = std::max(worst, std::abs(perplexity(m, corpus) - expected));
        const double macro = (std::exp(-(std::log(0.5) + std::log(0.25)) / 2.0) + 2.0) / 2.0;
        worst = std::max(worst, std::abs(per_sentence_perplexity(m, corpus) - macro));
    }
    report(4, worst < kMetricTol, "metric identities",
           "uniform PPL/BPC, hand-set conditionals, BPC=log2(PPL): worst gap " +
               fmt("%.2e", worst));
}

// ---- criterion 5: preprocessing ----------------------------------------------
void criterion_5() {
    std::size_t exact = 0;
    bool idempotent = true;
    for (const auto& [original, processed] : fixtures::kPreprocessPairs) {
        const std::string got = preprocess_text(original);
        if (got == processed) ++exact;
        if (preprocess_text(got) != got) idempotent = false;
        if (preprocess_text(processed) != processed) idempotent = false;
    }
    report(5, exact == fixtures::kPreprocessPairs.size() && idempotent, "preprocessing fixture",
           std::to_string(exact) + "/" + std::to_string(fixtures::kPreprocessPairs.size()) +
               " pairs character-exact; idempotent " + (idempotent ? "yes" : "NO"));
}

// ---- criterion 6: stage-isolation invariants ----------------------------------
std::vector<std::pair<TokenSeq, int>> toy_labeled(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::pair<TokenSeq, int>> data;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> ids(5);
        const int label = static_cast<int>(rng.uniform_index(2));
        for (auto& id : ids) id = (label ? 4 : 8) + rng.uniform_index(4);
        data.push_back({seq_of(ids), label});
    }
    return data;
}

void criterion_6() {
    ModelDims dims{.vocab = 12, .d_model = 8, .n_heads = 2, .n_blocks = 2, .l_max = 16};
    LoopConfig cfg;
    cfg.priori_epochs = 2;
    cfg.priori_minibatch = 4;
    cfg.samples_per_iteration = 4;
    cfg.max_new_tokens = 4;
    cfg.iterations = 2;
    cfg.finetune_minibatch = 4;
    cfg.max_len = 8;
    cfg.seed = 17;
    const auto labeled = toy_labeled(16, 3);

    // priori learning and warm-up must leave the generator blocks untouched
    auto g = make_generator(dims, TokenizerMode::word, 5);
    attach_cls_head(g, 6);
    auto d = make_discriminator(dims, TokenizerMode::word, 7);
    const std::uint64_t blocks_before = params_hash(generator_block_params(g));
    priori_learning(d, g, labeled, cfg);
    const bool blocks_frozen = params_hash(generator_block_params(g)) == blocks_before;

    // the co-training iterations must never update the discriminator
    Vocab vocab;
    vocab.mode = TokenizerMode::word;
    vocab.id_to_token = {"<pad>", "<eot>", "<mask>", "<unk>", "a", "b", "c", "d",
                         "e",     "f",     "g",      "h"};
    for (std::size_t i = 0; i < vocab.id_to_token.size(); ++i) {
        vocab.token_to_id[vocab.id_to_token[i]] = i;
    }
    const std::uint64_t d_before = params_hash(discriminator_params(d));
    RunState state;
    for (std::size_t i = 0; i < cfg.iterations; ++i) {
        evotext_iteration(g, d, {"a", "b"}, vocab, cfg, state);
    }
    const bool d_frozen = params_hash(discriminator_params(d)) == d_before;

    // label-0 samples must not influence the semi-supervised stage at all
    auto mixed_g = make_generator(dims, TokenizerMode::word, 50);
    auto pure_g = make_generator(dims, TokenizerMode::word, 50);
    std::vector<GeneratedSample> mixed = {{"a", "a b c", 1, 0.9},
                                          {"b", "d c b a", 0, 0.2},
                                          {"c", "c d e", 1, 0.8},
                                          {"d", "h g f", 0, 0.1}};
    std::vector<GeneratedSample> pure;
    for (const auto& s : mixed) {
        if (s.label == 1) pure.push_back(s);
    }
    semi_supervised_finetune(mixed_g, mixed, vocab, cfg);
    semi_supervised_finetune(pure_g, pure, vocab, cfg);
    const bool gated = params_hash(generator_lm_params(mixed_g)) ==
                       params_hash(generator_lm_params(pure_g));

    report(6, blocks_frozen && d_frozen && gated, "stage-isolation invariants",
           std::string("priori keeps G blocks ") + (blocks_frozen ? "intact" : "CHANGED") +
               "; iterations keep D " + (d_frozen ? "intact" : "CHANGED") +
               "; label-0 deletion " + (gated ? "bit-identical" : "DIVERGED"));
}

// ---- criterion 7: masking contract --------------------------------------------
void criterion_7() {
    // 10^4 real tokens at p=0.15: expected 1500, sigma = sqrt(n p (1-p))
    std::vector<std::size_t> ids(10000);
    Rng rng(123);
    for (auto& id : ids) id = 4 + rng.uniform_index(40);
    auto masked = mask_tokens(seq_of(ids), 0.15, 2024);
    const double sigma = std::sqrt(10000.0 * 0.15 * 0.85);
    const double dev = std::abs(static_cast<double>(masked.positions.size()) - 1500.0);
    const bool count_ok = dev <= kMaskSigma * sigma;

    // mlm_fill must touch only the masked positions
    ModelDims dims{.vocab = 12, .d_model = 8, .n_heads = 2, .n_blocks = 1, .l_max = 16};
    auto d = make_discriminator(dims, TokenizerMode::word, 9);
    std::vector<std::size_t> small(8);
    for (auto& id : small) id = 4 + rng.uniform_index(8);
    auto sm = mask_tokens(seq_of(small), 0.5, 77);
    auto filled = mlm_fill(d, sm.masked, sm.positions);
    bool fill_ok = !sm.positions.empty();
    for (std::size_t i = 0; i < small.size(); ++i) {
        const bool was_masked =
            std::find(sm.positions.begin(), sm.positions.end(), i) != sm.positions.end();
        if (was_masked) {
            if (filled.ids[i] == Vocab::mask_id) fill_ok = false;
        } else if (filled.ids[i] != small[i]) {
            fill_ok = false;
        }
    }

    // every escalation-fed sample carries label 1
    Vocab vocab;
    vocab.mode = TokenizerMode::word;
    vocab.id_to_token = {"<pad>", "<eot>", "<mask>", "<unk>", "a", "b", "c", "d",
                         "e",     "f",     "g",      "h"};
    for (std::size_t i = 0; i < vocab.id_to_token.size(); ++i) {
        vocab.token_to_id[vocab.id_to_token[i]] = i;
    }
    auto g = make_generator(dims, TokenizerMode::word, 10);
    attach_cls_head(g, 12);
    LoopConfig cfg;
    cfg.samples_per_iteration = 6;
    cfg.max_new_tokens = 4;
    cfg.finetune_minibatch = 4;
    cfg.max_len = 8;
    cfg.escalation_d_steps = 3;
    cfg.seed = 11;
    auto fed = self_escalation(g, d, {"e f g", "g h e"}, {"e", "g"}, vocab, cfg);
    bool labels_ok = !fed.empty();
    for (const auto& s : fed) {
        if (s.label != 1) labels_ok = false;
    }

    report(7, count_ok && fill_ok && labels_ok, "masking contract",
           "mask count " + std::to_string(masked.positions.size()) + " (|dev| " +
               fmt("%.1f", dev) + " <= 3 sigma " + fmt("%.1f", kMaskSigma * sigma) +
               "); fill touches only masked positions " + (fill_ok ? "yes" : "NO") +
               "; escalation labels all 1 " + (labels_ok ? "yes" : "NO"));
}

// ---- criteria 8-10: synthetic benchmark ----------------------------------------
struct BenchmarkOutcome {
    PipelineResult full;
    double pipeline_sec = 0.0;
    EscalationResult esc;
    double esc_sec = 0.0;
    std::vector<std::pair<std::string, double>> ablation_gram;  // name -> grammaticality
};

BenchmarkOutcome run_benchmark() {
    BenchmarkOutcome out;
    ExperimentConfig cfg;  // pinned experiment defaults, fixed seed
    const auto data = make_synthetic_experiment(cfg);

    auto t0 = Clock::now();
    out.full = run_pipeline(data, cfg);
    out.pipeline_sec = seconds_since(t0);

    t0 = Clock::now();
    out.esc = run_escalation(out.full.g, out.full.d, data, cfg);
    out.esc_sec = seconds_since(t0);

    const std::pair<const char*, bool LoopConfig::*> flags[] = {
        {"remove discriminator pretraining", &LoopConfig::skip_d_pretrain},
        {"remove generator head warm-up", &LoopConfig::skip_warmup},
        {"remove supervised fine-tuning", &LoopConfig::skip_supervised},
        {"remove semi-supervised fine-tuning", &LoopConfig::skip_semisupervised},
    };
    for (const auto& [name, member] : flags) {
        ExperimentConfig ablated = cfg;
        ablated.loop.*member = true;
        auto r = run_pipeline(data, ablated);
        out.ablation_gram.push_back({name, r.final_grammaticality});
    }
    return out;
}

void criterion_8(const BenchmarkOutcome& b) {
    const double gain = 100.0 * (b.full.final_grammaticality - b.full.baseline_grammaticality);
    const double ppl_pct = 100.0 * (b.full.final_ppl / b.full.baseline_ppl - 1.0);
    const bool pass = b.full.d_heldout_accuracy >= kMinDAcc && gain >= kMinGainPts &&
                      ppl_pct <= kMaxPplWorsenPct && b.pipeline_sec < kLoopBudgetSec;
    report(8, pass, "end-to-end improvement",
           "D held-out acc " + fmt("%.3f", b.full.d_heldout_accuracy) + " (>= 0.90); gram " +
               fmt("%.3f", b.full.baseline_grammaticality) + " -> " +
               fmt("%.3f", b.full.final_grammaticality) + " (" + fmt("%+.1f", gain) +
               "pt >= +5); PPL " + fmt("%+.2f", ppl_pct) + "% (<= +2%); " +
               fmt("%.0f", b.pipeline_sec) + "s (< 900)");
}

void criterion_9(const BenchmarkOutcome& b) {
    const double old_pct = 100.0 * (b.esc.old_ppl_after / b.esc.old_ppl_before - 1.0);
    const bool pass = b.esc.new_ppl_after < b.esc.new_ppl_before &&
                      old_pct < kMaxOldDomainWorsenPct && b.esc_sec < kEscBudgetSec;
    report(9, pass, "knowledge update",
           "new-domain PPL " + fmt("%.1f", b.esc.new_ppl_before) + " -> " +
               fmt("%.1f", b.esc.new_ppl_after) + " (strictly down); old-domain " +
               fmt("%+.2f", old_pct) + "% (< 5%); " + fmt("%.0f", b.esc_sec) + "s (< 300)");
}

void criterion_10(const BenchmarkOutcome& b, const fs::path& repro_dir) {
    bool all_below = true;
    double largest_drop = -1e9;
    std::string largest_name;
    std::ostringstream drops;
    for (const auto& [name, gram] : b.ablation_gram) {
        const double drop = 100.0 * (b.full.final_grammaticality - gram);
        if (gram > b.full.final_grammaticality) all_below = false;
        if (drop > largest_drop) {
            largest_drop = drop;
            largest_name = name;
        }
        drops << " [" << name << " " << fmt("%+.1f", -drop) << "pt]";
    }
    const bool supervised_largest = largest_name == "remove supervised fine-tuning";
    std::error_code ec;
    const bool table_emitted = fs::file_size(repro_dir / "ablation_table.txt", ec) > 0 && !ec;
    const bool pass = all_below && supervised_largest && table_emitted;
    report(10, pass, "ablation ordering",
           "full " + fmt("%.3f", b.full.final_grammaticality) + ";" + drops.str() +
               "; all <= full " + (all_below ? "yes" : "NO") + "; largest drop: " + largest_name +
               "; table emitted " + (table_emitted ? "yes" : "NO"));
    if (!supervised_largest) {
        std::printf(
            "        note: the largest-drop clause requires removing supervised fine-tuning to\n"
            "        hurt most, but with an untied output projection the classification\n"
            "        gradient reaches generation only through the decoder blocks and is\n"
            "        close to a no-op; the semi-supervised stage carries the improvement, so\n"
            "        its removal is always the largest drop. Reported red rather than tuned\n"
            "        around; see the ablation table for the measured ordering.\n");
    }
}

// ---- criterion 11: byte-identical repro -----------------------------------------
bool same_bytes(const fs::path& a, const fs::path& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    std::ostringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    return sa.str() == sb.str();
}

struct ReproOutcome {
    bool pass = false;
    std::string detail;
    fs::path dir;  // criterion 10 checks the emitted ablation table here
};

// Runs `repro` twice under the same output-directory name (artifacts embed the
// effective config, so the directory name must match between runs) and
// compares every produced file byte for byte.
ReproOutcome run_repro_twice(const std::string& cli, const fs::path& work) {
    const fs::path dir = work / "repro";
    const fs::path saved = work / "repro_first";
    fs::remove_all(dir);
    fs::remove_all(saved);
    const std::string cmd = "\"" + cli + "\" --output-dir \"" + dir.string() +
                            "\" --seed 3 repro > \"" + (work / "repro_stdout.txt").string() +
                            "\" 2>&1";
    bool pass = std::system(cmd.c_str()) == 0;
    std::string detail;
    if (!pass) {
        detail = "first repro run failed (" + cli + ")";
    } else {
        fs::rename(dir, saved);
        pass = std::system(cmd.c_str()) == 0;
        if (!pass) detail = "second repro run failed";
    }
    std::size_t compared = 0;
    if (pass) {
        for (const auto& entry : fs::directory_iterator(saved)) {
            const fs::path other = dir / entry.path().filename();
            ++compared;
            if (!fs::exists(other) || !same_bytes(entry.path(), other)) {
                pass = false;
                detail = "mismatch: " + entry.path().filename().string();
                break;
            }
        }
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!fs::exists(saved / entry.path().filename())) {
                pass = false;
                detail = "extra file in second run: " + entry.path().filename().string();
            }
        }
        if (pass) {
            detail = std::to_string(compared) +
                     " artifacts byte-identical across two seed-3 repro runs";
        }
    }
    return {pass, detail, dir};
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "tools/evotext";
    const fs::path work = fs::temp_directory_path() / "evotext_acceptance";
    fs::create_directories(work);

    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();

    std::printf("running the synthetic benchmark matrix (a few minutes)...\n");
    std::fflush(stdout);
    const BenchmarkOutcome bench = run_benchmark();
    criterion_8(bench);
    criterion_9(bench);

    const ReproOutcome repro = run_repro_twice(cli, work);
    criterion_10(bench, repro.dir);
    report(11, repro.pass, "reproducibility", repro.detail);

    std::printf("%d/11 criteria passing\n", 11 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
