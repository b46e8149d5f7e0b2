#pragma once

#include <functional>
#include <ostream>

#include "evotext/discriminator.hpp"

namespace evotext {

struct LoopConfig {
    double tau1 = 1e-3;  // discriminator priori lr
    double tau2 = 1e-2;  // generator head warm-up lr
    double tau3 = 1e-4;  // supervised fine-tune lr
    double tau4 = 1e-4;  // semi-supervised fine-tune lr
    std::size_t priori_epochs = 10;  // N_ep
    std::size_t priori_minibatch = 16;
    std::size_t samples_per_iteration = 16;  // M
    std::size_t max_new_tokens = 12;         // l
    std::size_t termination_id = Vocab::eot_id;
    double mask_p = 0.15;
    std::size_t context_window = kNoWindow;  // k
    std::size_t iterations = 156;
    std::size_t finetune_minibatch = 64;
    std::size_t max_len = 32;  // encode length for labeling / fine-tuning
    double temperature = 1.0;
    bool skip_d_pretrain = false;
    bool skip_warmup = false;
    bool skip_supervised = false;
    bool skip_semisupervised = false;
    std::uint64_t seed = 0;
    // knowledge-update stage
    double escalation_d_lr = 1e-3;
    double escalation_g_lr = 5e-4;
    std::size_t escalation_d_steps = 50;

    void validate() const;
};

struct GeneratedSample {
    std::string prompt;
    std::string text;  // raw generator output, prompt included
    int label = 0;
    double prob = 0.0;
};

struct IterationRecord {
    std::size_t iteration = 0;
    double supervised_loss = 0.0;
    double lm_loss = 0.0;
    double label1_fraction = 0.0;
};

struct RunState {
    std::size_t iteration = 0;
    std::vector<IterationRecord> records;
};

// Interleaved per-minibatch training: one discriminator step at tau1 then one
// generator-head step at tau2; generator blocks stay frozen throughout.
void priori_learning(DiscriminatorModel& d, GeneratorModel& g,
                     const std::vector<std::pair<TokenSeq, int>>& data, const LoopConfig& cfg);

// Generates one sample per prompt slot (prompts cycled to M samples), labels
// each with the discriminator on the raw generator output.
std::vector<GeneratedSample> build_training_dataset(const GeneratorModel& g,
                                                    const DiscriminatorModel& d,
                                                    const std::vector<std::string>& prompts,
                                                    const Vocab& vocab, const LoopConfig& cfg,
                                                    std::uint64_t round_seed);

// One epoch of classification training on the generator's own generations
// against the discriminator labels; trains the decoder blocks and the head.
double supervised_finetune(GeneratorModel& g, const std::vector<GeneratedSample>& samples,
                           const Vocab& vocab, const LoopConfig& cfg);

// One epoch of windowed LM training restricted to label-1 samples.
double semi_supervised_finetune(GeneratorModel& g, const std::vector<GeneratedSample>& samples,
                                const Vocab& vocab, const LoopConfig& cfg);

// generate -> label -> supervised -> semi-supervised; never updates the
// discriminator (passed const).
void evotext_iteration(GeneratorModel& g, const DiscriminatorModel& d,
                       const std::vector<std::string>& prompts, const Vocab& vocab,
                       const LoopConfig& cfg, RunState& state);

// Knowledge update: retrain D by masked-token prediction on the new corpus,
// generate from cue prompts, mask 15%, let D fill the masks, then fine-tune G
// on the completions, all labeled 1. Returns the fed samples.
std::vector<GeneratedSample> self_escalation(GeneratorModel& g, DiscriminatorModel& d,
                                             const std::vector<std::string>& new_corpus,
                                             const std::vector<std::string>& cue_prompts,
                                             const Vocab& vocab, const LoopConfig& cfg);

using ClockFn = std::function<std::string()>;
ClockFn system_clock_iso8601();

// One structured record per iteration, line-delimited.
void write_run_log(const RunState& state, std::ostream& out, const ClockFn& clock);

}  // namespace evotext
