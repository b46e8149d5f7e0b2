#include "evotext/experiment.hpp"

#include <algorithm>
#include <numeric>

namespace evotext {

namespace {

std::string join_words(const std::vector<std::string>& words) {
    std::string s;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) s.push_back(' ');
        s += words[i];
    }
    return s;
}

std::uint64_t derive(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t x = base ^ (stream * 0x9E3779B97F4A7C15ULL + 0x7F4A7C15ULL);
    return splitmix64(x);
}

}  // namespace

ExperimentData make_synthetic_experiment(const ExperimentConfig& cfg) {
    ExperimentData data;
    data.grammar = demo_grammar();
    data.new_grammar = new_domain_grammar();
    Rng rng(derive(cfg.data_seed, 0x01));

    for (std::size_t i = 0; i < cfg.n_train; ++i) {
        data.train_lines.push_back(join_words(cfg_sample(data.grammar, rng)));
    }
    std::vector<std::string> heldout_lines;
    for (std::size_t i = 0; i < cfg.n_heldout; ++i) {
        heldout_lines.push_back(join_words(cfg_sample(data.grammar, rng)));
    }

    // labeled acceptability set: half fresh positives, half corrupted negatives
    std::vector<std::pair<std::string, int>> labeled;
    Rng lrng(derive(cfg.data_seed, 0x02));
    while (labeled.size() + 1 < cfg.n_labeled) {
        auto words = cfg_sample(data.grammar, lrng);
        labeled.push_back({join_words(words), 1});
        std::vector<std::string> bad;
        if (corrupt_sentence(data.grammar, words, lrng, bad)) {
            labeled.push_back({join_words(bad), 0});
        }
    }

    Rng nrng(derive(cfg.data_seed, 0x03));
    for (std::size_t i = 0; i < cfg.n_new_domain; ++i) {
        data.new_lines.push_back(join_words(cfg_sample(data.new_grammar, nrng)));
    }
    std::vector<std::string> new_heldout;
    for (std::size_t i = 0; i < cfg.n_heldout / 2 + 1; ++i) {
        new_heldout.push_back(join_words(cfg_sample(data.new_grammar, nrng)));
    }

    // one vocabulary across both domains so the knowledge update needs no
    // tokenizer change; all grammar terminals included explicitly
    std::vector<std::string> vocab_lines = data.train_lines;
    vocab_lines.push_back(join_words(data.grammar.terminals()));
    vocab_lines.push_back(join_words(data.new_grammar.terminals()));
    vocab_lines.insert(vocab_lines.end(), data.new_lines.begin(), data.new_lines.end());
    data.vocab = build_vocab(vocab_lines, TokenizerMode::word, 256);

    const std::size_t max_len = cfg.loop.max_len;
    for (const auto& line : data.train_lines) {
        data.train_seqs.push_back(encode_with_terminator(line, data.vocab, max_len));
    }
    for (const auto& line : heldout_lines) {
        data.heldout_seqs.push_back(encode_with_terminator(line, data.vocab, max_len));
    }
    for (const auto& line : new_heldout) {
        data.new_heldout_seqs.push_back(encode_with_terminator(line, data.vocab, max_len));
    }
    auto split = split_corpus(labeled, derive(cfg.data_seed, 0x04), 8, 1, 1);
    for (const auto& [text, label] : split.train) {
        data.labeled_train.push_back({encode(text, data.vocab, max_len), label});
    }
    for (const auto& [text, label] : split.test) {
        data.labeled_heldout.push_back({encode(text, data.vocab, max_len), label});
    }

    data.prompts = {"the", "a", "every", "some", "this", "alice", "bob", "grace"};
    data.cue_prompts = {"il", "un", "ogni", "questo", "quel", "mario"};
    return data;
}

void pretrain_generator_lm(GeneratorModel& g, const std::vector<TokenSeq>& corpus,
                           std::size_t steps, std::size_t minibatch, double lr,
                           std::uint64_t seed) {
    if (corpus.empty()) throw ContractError("pretrain_generator_lm: empty corpus");
    Optimizer opt(OptimizerKind::adam, generator_lm_params(g), lr);
    Rng rng(seed);
    for (std::size_t step = 0; step < steps; ++step) {
        std::vector<TokenSeq> batch;
        for (std::size_t i = 0; i < minibatch; ++i) {
            batch.push_back(corpus[rng.uniform_index(corpus.size())]);
        }
        Tape tape;
        TapeScope scope(tape);
        auto loss = lm_loss(g, batch, kNoWindow);
        backward(loss, tape);
        opt.step();
    }
}

void pretrain_discriminator_mlm(DiscriminatorModel& d, const std::vector<TokenSeq>& corpus,
                                std::size_t steps, std::size_t minibatch, double mask_p,
                                double lr, std::uint64_t seed) {
    if (corpus.empty()) throw ContractError("pretrain_discriminator_mlm: empty corpus");
    Optimizer opt(OptimizerKind::adam, discriminator_mlm_params(d), lr);
    Rng rng(seed);
    for (std::size_t step = 0; step < steps; ++step) {
        std::vector<TokenSeq> batch;
        for (std::size_t i = 0; i < minibatch; ++i) {
            batch.push_back(corpus[rng.uniform_index(corpus.size())]);
        }
        mlm_pretrain_step(d, batch, mask_p, opt, derive(seed, 0x100 + step));
    }
}

double sample_grammaticality(const GeneratorModel& g, const ExperimentData& data,
                             const LoopConfig& cfg, std::size_t n_samples, std::uint64_t seed) {
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < n_samples; ++i) {
        GenerationConfig gen;
        gen.max_new_tokens = cfg.max_new_tokens;
        gen.termination_id = cfg.termination_id;
        gen.strategy = GenerationConfig::Strategy::temperature;
        gen.temperature = cfg.temperature;
        gen.seed = derive(seed, 0x200 + i);
        auto prompt = encode(data.prompts[i % data.prompts.size()], data.vocab, cfg.max_len);
        texts.push_back(decode(generate(g, prompt, gen), data.vocab));
    }
    return oracle_grammaticality(texts, data.grammar);
}

PipelineResult run_pipeline(const ExperimentData& data, const ExperimentConfig& cfg) {
    const auto& loop = cfg.loop;
    ModelDims g_dims = cfg.g_dims;
    g_dims.vocab = data.vocab.size();
    ModelDims d_dims = g_dims;
    d_dims.n_blocks = cfg.d_blocks;

    PipelineResult r{make_generator(g_dims, data.vocab.mode, derive(loop.seed, 0x10)),
                     make_discriminator(d_dims, data.vocab.mode, derive(loop.seed, 0x11)),
                     {}};
    attach_cls_head(r.g, derive(loop.seed, 0x12));

    pretrain_generator_lm(r.g, data.train_seqs, cfg.g_pretrain_steps, cfg.g_pretrain_minibatch,
                          cfg.g_pretrain_lr, derive(loop.seed, 0x13));
    if (!loop.skip_d_pretrain) {
        pretrain_discriminator_mlm(r.d, data.train_seqs, cfg.d_pretrain_steps,
                                   cfg.d_pretrain_minibatch, loop.mask_p, cfg.d_pretrain_lr,
                                   derive(loop.seed, 0x14));
    }
    priori_learning(r.d, r.g, data.labeled_train, loop);

    ConfusionCounts counts;
    for (const auto& [seq, label] : data.labeled_heldout) {
        const int predicted = classify(r.d, seq).label;
        if (label == 1) {
            (predicted == 1 ? counts.tp : counts.fn) += 1;
        } else {
            (predicted == 0 ? counts.tn : counts.fp) += 1;
        }
    }
    r.d_heldout_accuracy = accuracy(counts);

    r.baseline_grammaticality =
        sample_grammaticality(r.g, data, loop, cfg.eval_samples, derive(loop.seed, 0x15));
    r.baseline_ppl = perplexity(r.g, data.heldout_seqs);

    for (std::size_t i = 0; i < loop.iterations; ++i) {
        evotext_iteration(r.g, r.d, data.prompts, data.vocab, loop, r.state);
    }

    r.final_grammaticality =
        sample_grammaticality(r.g, data, loop, cfg.eval_samples, derive(loop.seed, 0x15));
    r.final_ppl = perplexity(r.g, data.heldout_seqs);
    return r;
}

EscalationResult run_escalation(GeneratorModel& g, DiscriminatorModel& d,
                                const ExperimentData& data, const ExperimentConfig& cfg) {
    EscalationResult r;
    r.new_ppl_before = perplexity(g, data.new_heldout_seqs);
    r.old_ppl_before = perplexity(g, data.heldout_seqs);
    LoopConfig loop = cfg.loop;
    self_escalation(g, d, data.new_lines, data.cue_prompts, data.vocab, loop);
    r.new_ppl_after = perplexity(g, data.new_heldout_seqs);
    r.old_ppl_after = perplexity(g, data.heldout_seqs);
    return r;
}

}  // namespace evotext
