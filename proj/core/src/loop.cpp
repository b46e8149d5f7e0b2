#include "evotext/loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <numeric>

#include <json.hpp>

namespace evotext {

namespace {

std::vector<TensorPtr> generator_cls_params(const GeneratorModel& g) {
    // the supervised objective updates the blocks and the head; embeddings and
    // the final norm stay fixed
    auto out = generator_block_params(g);
    auto head = generator_head_params(g);
    out.insert(out.end(), head.begin(), head.end());
    return out;
}

TensorPtr mean_cls_loss(const GeneratorModel& g,
                        const std::vector<std::pair<TokenSeq, int>>& batch) {
    TensorPtr loss;
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (const auto& [seq, label] : batch) {
        auto ce = cross_entropy_from_logits(classify_logits_with_head(g, seq),
                                            {static_cast<std::size_t>(label)});
        auto term = scale(ce, inv);
        loss = loss ? add(loss, term) : term;
    }
    return loss;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t x = base ^ (stream * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL);
    return splitmix64(x);
}

}  // namespace

void LoopConfig::validate() const {
    if (tau1 <= 0 || tau2 <= 0 || tau3 <= 0 || tau4 <= 0) {
        throw ConfigError("LoopConfig: learning rates must be positive");
    }
    if (mask_p < 0.0 || mask_p > 1.0) throw ConfigError("LoopConfig: mask_p must be in [0,1]");
    if (samples_per_iteration < 1) throw ConfigError("LoopConfig: M must be >= 1");
    if (max_new_tokens < 1) throw ConfigError("LoopConfig: l must be >= 1");
    if (context_window < 1) throw ConfigError("LoopConfig: context window must be >= 1");
    if (finetune_minibatch < 1 || priori_minibatch < 1) {
        throw ConfigError("LoopConfig: minibatch sizes must be >= 1");
    }
}

void priori_learning(DiscriminatorModel& d, GeneratorModel& g,
                     const std::vector<std::pair<TokenSeq, int>>& data, const LoopConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw ContractError("priori_learning: empty data");
    if (!g.cls_head) throw ContractError("priori_learning: generator head not attached");
    Optimizer opt_d(OptimizerKind::adam, discriminator_cls_params(d), cfg.tau1);
    Optimizer opt_g(OptimizerKind::adam, generator_head_params(g), cfg.tau2);
    const auto g_trunk = generator_lm_params(g);
    set_requires_grad(g_trunk, false);  // blocks stay frozen for the whole stage
    Rng rng(derive_seed(cfg.seed, 0xA1));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < cfg.priori_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.priori_minibatch) {
            const std::size_t end = std::min(start + cfg.priori_minibatch, order.size());
            std::vector<std::pair<TokenSeq, int>> batch;
            for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
            {
                Tape tape;
                TapeScope scope(tape);
                TensorPtr loss;
                const double inv = 1.0 / static_cast<double>(batch.size());
                for (const auto& [seq, label] : batch) {
                    auto ce = cross_entropy_from_logits(discriminator_cls_logits(d, seq),
                                                        {static_cast<std::size_t>(label)});
                    auto term = scale(ce, inv);
                    loss = loss ? add(loss, term) : term;
                }
                backward(loss, tape);
                opt_d.step();
            }
            if (!cfg.skip_warmup) {
                Tape tape;
                TapeScope scope(tape);
                auto loss = mean_cls_loss(g, batch);
                backward(loss, tape);
                opt_g.step();
            }
        }
    }
    set_requires_grad(g_trunk, true);
}

std::vector<GeneratedSample> build_training_dataset(const GeneratorModel& g,
                                                    const DiscriminatorModel& d,
                                                    const std::vector<std::string>& prompts,
                                                    const Vocab& vocab, const LoopConfig& cfg,
                                                    std::uint64_t round_seed) {
    if (prompts.empty()) throw ContractError("build_training_dataset: no prompts");
    std::vector<GeneratedSample> samples;
    samples.reserve(cfg.samples_per_iteration);
    for (std::size_t m = 0; m < cfg.samples_per_iteration; ++m) {
        const std::string& prompt = prompts[m % prompts.size()];
        auto encoded = encode(prompt, vocab, cfg.max_len);
        GenerationConfig gen;
        gen.max_new_tokens = cfg.max_new_tokens;
        gen.termination_id = cfg.termination_id;
        gen.strategy = GenerationConfig::Strategy::temperature;
        gen.temperature = cfg.temperature;
        gen.seed = derive_seed(round_seed, m);
        auto out = generate(g, encoded, gen);
        GeneratedSample sample;
        sample.prompt = prompt;
        // the discriminator sees the raw generator output, no normalization
        sample.text = decode(out, vocab);
        auto verdict = classify(d, encode(sample.text, vocab, cfg.max_len));
        sample.label = verdict.label;
        sample.prob = verdict.prob_grammatical;
        samples.push_back(std::move(sample));
    }
    return samples;
}

double supervised_finetune(GeneratorModel& g, const std::vector<GeneratedSample>& samples,
                           const Vocab& vocab, const LoopConfig& cfg) {
    if (samples.empty()) return 0.0;
    if (!g.cls_head) throw ContractError("supervised_finetune: generator head not attached");
    const std::vector<TensorPtr> frozen{g.emb.token, g.emb.position, g.lnf_g, g.lnf_b};
    set_requires_grad(frozen, false);
    Optimizer opt(OptimizerKind::adam, generator_cls_params(g), cfg.tau3);
    double total = 0.0;
    std::size_t count = 0;
    // exactly one epoch, samples taken in order
    for (std::size_t start = 0; start < samples.size(); start += cfg.finetune_minibatch) {
        const std::size_t end = std::min(start + cfg.finetune_minibatch, samples.size());
        std::vector<std::pair<TokenSeq, int>> batch;
        for (std::size_t i = start; i < end; ++i) {
            batch.push_back({encode(samples[i].text, vocab, cfg.max_len), samples[i].label});
        }
        Tape tape;
        TapeScope scope(tape);
        auto loss = mean_cls_loss(g, batch);
        total += loss->data[0] * static_cast<double>(batch.size());
        count += batch.size();
        backward(loss, tape);
        opt.step();
    }
    set_requires_grad(frozen, true);
    return total / static_cast<double>(count);
}

double semi_supervised_finetune(GeneratorModel& g, const std::vector<GeneratedSample>& samples,
                                const Vocab& vocab, const LoopConfig& cfg) {
    std::vector<TokenSeq> fit;  // Z^fit: label-1 samples only
    for (const auto& s : samples) {
        if (s.label != 1) continue;
        auto seq = encode_with_terminator(s.text, vocab, cfg.max_len);
        if (seq.real_length() >= 2) fit.push_back(std::move(seq));
    }
    if (fit.empty()) return 0.0;
    Optimizer opt(OptimizerKind::adam, generator_lm_params(g), cfg.tau4);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start < fit.size(); start += cfg.finetune_minibatch) {
        const std::size_t end = std::min(start + cfg.finetune_minibatch, fit.size());
        std::vector<TokenSeq> batch(fit.begin() + static_cast<std::ptrdiff_t>(start),
                                    fit.begin() + static_cast<std::ptrdiff_t>(end));
        Tape tape;
        TapeScope scope(tape);
        auto loss = lm_loss(g, batch, cfg.context_window);
        total += loss->data[0] * static_cast<double>(batch.size());
        count += batch.size();
        backward(loss, tape);
        opt.step();
    }
    return total / static_cast<double>(count);
}

void evotext_iteration(GeneratorModel& g, const DiscriminatorModel& d,
                       const std::vector<std::string>& prompts, const Vocab& vocab,
                       const LoopConfig& cfg, RunState& state) {
    cfg.validate();
    const auto round_seed = derive_seed(cfg.seed, 0xB000 + state.iteration);
    auto samples = build_training_dataset(g, d, prompts, vocab, cfg, round_seed);
    IterationRecord record;
    record.iteration = state.iteration;
    if (!cfg.skip_supervised) {
        record.supervised_loss = supervised_finetune(g, samples, vocab, cfg);
    }
    if (!cfg.skip_semisupervised) {
        record.lm_loss = semi_supervised_finetune(g, samples, vocab, cfg);
    }
    std::size_t ones = 0;
    for (const auto& s : samples) ones += s.label == 1 ? 1 : 0;
    record.label1_fraction = static_cast<double>(ones) / static_cast<double>(samples.size());
    state.records.push_back(record);
    ++state.iteration;
}

std::vector<GeneratedSample> self_escalation(GeneratorModel& g, DiscriminatorModel& d,
                                             const std::vector<std::string>& new_corpus,
                                             const std::vector<std::string>& cue_prompts,
                                             const Vocab& vocab, const LoopConfig& cfg) {
    cfg.validate();
    if (new_corpus.empty()) throw ContractError("self_escalation: empty new corpus");
    if (cue_prompts.empty()) throw ContractError("self_escalation: no cue prompts");

    // (1) retrain the discriminator on the new corpus by masked prediction
    if (cfg.mask_p > 0.0) {
        std::vector<TokenSeq> batch;
        for (const auto& line : new_corpus) {
            batch.push_back(encode_with_terminator(line, vocab, cfg.max_len));
        }
        Optimizer opt(OptimizerKind::adam, discriminator_mlm_params(d), cfg.escalation_d_lr);
        for (std::size_t step = 0; step < cfg.escalation_d_steps; ++step) {
            mlm_pretrain_step(d, batch, cfg.mask_p, opt, derive_seed(cfg.seed, 0xC000 + step));
        }
    }

    // (2) generate from the cue prompts; (3) mask; (4) let D fill the masks
    std::vector<GeneratedSample> fed;
    for (std::size_t m = 0; m < cfg.samples_per_iteration; ++m) {
        const std::string& prompt = cue_prompts[m % cue_prompts.size()];
        GenerationConfig gen;
        gen.max_new_tokens = cfg.max_new_tokens;
        gen.termination_id = cfg.termination_id;
        gen.strategy = GenerationConfig::Strategy::temperature;
        gen.temperature = cfg.temperature;
        gen.seed = derive_seed(cfg.seed, 0xD000 + m);
        auto out = generate(g, encode(prompt, vocab, cfg.max_len), gen);
        auto masked = mask_tokens(out, cfg.mask_p, derive_seed(cfg.seed, 0xE000 + m));
        auto filled = mlm_fill(d, masked.masked, masked.positions);
        GeneratedSample sample;
        sample.prompt = prompt;
        sample.text = decode(filled, vocab);
        sample.label = 1;  // completed sequences are labeled grammatical by construction
        sample.prob = 1.0;
        fed.push_back(std::move(sample));
    }

    // (5) fine-tune the generator on the completions at the escalation rate
    LoopConfig esc = cfg;
    esc.tau3 = cfg.escalation_g_lr;
    esc.tau4 = cfg.escalation_g_lr;
    if (!cfg.skip_supervised) supervised_finetune(g, fed, vocab, esc);
    if (!cfg.skip_semisupervised) semi_supervised_finetune(g, fed, vocab, esc);
    return fed;
}

ClockFn system_clock_iso8601() {
    return [] {
        const auto now = std::chrono::system_clock::now();
        const std::time_t t = std::chrono::system_clock::to_time_t(now);
        std::tm tm{};
        gmtime_r(&t, &tm);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
        return std::string(buf);
    };
}

void write_run_log(const RunState& state, std::ostream& out, const ClockFn& clock) {
    for (const auto& r : state.records) {
        nlohmann::ordered_json j;
        j["iteration"] = r.iteration;
        j["supervised_loss"] = r.supervised_loss;
        j["lm_loss"] = r.lm_loss;
        j["label1_fraction"] = r.label1_fraction;
        j["timestamp"] = clock();
        out << j.dump() << '\n';
    }
}

}  // namespace evotext
