#pragma once

#include <optional>
#include <string>
#include <vector>

#include "evotext/generator.hpp"
#include "evotext/grammar.hpp"

namespace evotext {

// exp of the mean per-token negative log-likelihood across the corpus,
// token-weighted. A zero-probability token yields +infinity with a warning
// on stderr.
double perplexity(const GeneratorModel& model, const std::vector<TokenSeq>& corpus);
// Macro average of per-sequence perplexities (geometric-mean inverse
// probability per sequence, then arithmetic mean across sequences).
double per_sentence_perplexity(const GeneratorModel& model, const std::vector<TokenSeq>& corpus);

struct ConfusionCounts {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    std::size_t total() const { return tp + tn + fp + fn; }
};

// (TP + TN) / total.
double accuracy(const ConfusionCounts& c);

struct ClozeItem {
    std::vector<std::size_t> context;     // non-empty
    std::vector<std::size_t> candidates;  // >= 2, contains answer
    std::size_t answer = 0;
};

// Picks the candidate maximizing the continuation's log-probability; ties
// break toward the lowest token id. Returns the fraction answered correctly.
double cloze_accuracy(const GeneratorModel& model, const std::vector<ClozeItem>& items);

// Mean -log2 conditional probability per character; the model must be
// character-level.
double bits_per_char(const GeneratorModel& model, const std::vector<TokenSeq>& corpus);

// Fraction of samples recognized by the generating grammar.
double oracle_grammaticality(const std::vector<std::string>& samples, const Cfg& grammar);

struct EvalDataset {
    std::string name;
    std::vector<TokenSeq> sequences;
    std::vector<ClozeItem> cloze;  // optional: enables the accuracy column
};

struct EvalEntry {
    std::string name;
    double ppl = 0.0;
    std::optional<double> acc;
    std::optional<double> bpc;
    std::size_t samples = 0;
};

struct EvalReport {
    std::vector<EvalEntry> entries;
    std::string config_fingerprint;
    std::uint64_t model_hash = 0;
};

// Computes every applicable metric per dataset with no parameter updates.
EvalReport zero_shot_report(const GeneratorModel& model, const std::vector<EvalDataset>& datasets,
                            const std::string& config_fingerprint);

// One structured record per entry, line-delimited.
std::string report_to_jsonl(const EvalReport& report);
// Human-readable fixed-width table.
std::string report_table(const EvalReport& report);

}  // namespace evotext
