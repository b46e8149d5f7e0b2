// Microbenchmarks for the hot paths of the training loop: raw tensor ops,
// attention, the full forward/backward step, and sampling throughput.

#include <benchmark/benchmark.h>

#include "evotext/generator.hpp"
#include "evotext/discriminator.hpp"

using namespace evotext;

namespace {

TokenSeq seq_of_len(std::size_t n, std::uint64_t seed, std::size_t vocab) {
    Rng rng(seed);
    TokenSeq s;
    for (std::size_t i = 0; i < n; ++i) {
        s.ids.push_back(4 + rng.uniform_index(vocab - 4));
        s.pad_mask.push_back(1);
    }
    return s;
}

GeneratorModel bench_generator(std::size_t d_model, std::size_t n_blocks) {
    ModelDims dims{.vocab = 128, .d_model = d_model, .n_heads = 4, .n_blocks = n_blocks,
                   .l_max = 64};
    return make_generator(dims, TokenizerMode::word, 7);
}

void bm_matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    auto a = seeded_init({n, n}, InitScheme::uniform_scaled, 1);
    auto b = seeded_init({n, n}, InitScheme::uniform_scaled, 2);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(bm_matmul)->Arg(32)->Arg(64)->Arg(128);

void bm_attention(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    auto q = seeded_init({n, 32}, InitScheme::uniform_scaled, 1);
    auto k = seeded_init({n, 32}, InitScheme::uniform_scaled, 2);
    auto v = seeded_init({n, 32}, InitScheme::uniform_scaled, 3);
    for (auto _ : state) benchmark::DoNotOptimize(scaled_dot_attention(q, k, v, true));
}
BENCHMARK(bm_attention)->Arg(16)->Arg(32)->Arg(64);

void bm_lm_forward(benchmark::State& state) {
    auto g = bench_generator(64, static_cast<std::size_t>(state.range(0)));
    auto seq = seq_of_len(32, 5, g.dims.vocab);
    for (auto _ : state) benchmark::DoNotOptimize(lm_forward(g, seq));
}
BENCHMARK(bm_lm_forward)->Arg(2)->Arg(4);

void bm_lm_train_step(benchmark::State& state) {
    auto g = bench_generator(64, 2);
    std::vector<TokenSeq> batch;
    for (std::uint64_t i = 0; i < 8; ++i) batch.push_back(seq_of_len(24, i, g.dims.vocab));
    Optimizer opt(OptimizerKind::adam, generator_lm_params(g), 1e-4);
    for (auto _ : state) {
        Tape tape;
        {
            TapeScope scope(tape);
            auto loss = lm_loss(g, batch, kNoWindow);
            backward(loss, tape);
        }
        opt.step();
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 8 * 24);
}
BENCHMARK(bm_lm_train_step);

void bm_generate(benchmark::State& state) {
    auto g = bench_generator(32, 2);
    TokenSeq prompt = seq_of_len(2, 9, g.dims.vocab);
    GenerationConfig cfg;
    cfg.max_new_tokens = 16;
    cfg.strategy = GenerationConfig::Strategy::temperature;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        cfg.seed = seed++;
        benchmark::DoNotOptimize(generate(g, prompt, cfg));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 16);
}
BENCHMARK(bm_generate);

void bm_mlm_fill(benchmark::State& state) {
    ModelDims dims{.vocab = 128, .d_model = 32, .n_heads = 4, .n_blocks = 1, .l_max = 64};
    auto d = make_discriminator(dims, TokenizerMode::word, 11);
    auto seq = seq_of_len(24, 3, dims.vocab);
    auto masked = mask_tokens(seq, 0.15, 4);
    for (auto _ : state) benchmark::DoNotOptimize(mlm_fill(d, masked.masked, masked.positions));
}
BENCHMARK(bm_mlm_fill);

}  // namespace

BENCHMARK_MAIN();
