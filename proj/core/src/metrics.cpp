#include "evotext/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace evotext {

namespace {

// total negative log-likelihood and predicted-position count for one corpus
std::pair<double, std::size_t> corpus_nll(const GeneratorModel& model,
                                          const std::vector<TokenSeq>& corpus) {
    if (corpus.empty()) throw ContractError("perplexity: empty corpus");
    double nll = 0.0;
    std::size_t positions = 0;
    for (const auto& seq : corpus) {
        const std::size_t n = seq.real_length();
        if (n < 2) throw ContractError("perplexity: every sequence needs >= 2 tokens");
        nll -= sequence_log_prob(model, seq);
        positions += n - 1;
    }
    if (!std::isfinite(nll)) {
        std::fprintf(stderr, "warning: zero-probability token encountered; perplexity is +inf\n");
        return {std::numeric_limits<double>::infinity(), positions};
    }
    return {nll, positions};
}

}  // namespace

double perplexity(const GeneratorModel& model, const std::vector<TokenSeq>& corpus) {
    auto [nll, positions] = corpus_nll(model, corpus);
    return std::exp(nll / static_cast<double>(positions));
}

double per_sentence_perplexity(const GeneratorModel& model,
                               const std::vector<TokenSeq>& corpus) {
    if (corpus.empty()) throw ContractError("per_sentence_perplexity: empty corpus");
    double total = 0.0;
    for (const auto& seq : corpus) {
        total += perplexity(model, {seq});
    }
    return total / static_cast<double>(corpus.size());
}

double accuracy(const ConfusionCounts& c) {
    if (c.total() == 0) throw ContractError("accuracy: no judgment cases");
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double cloze_accuracy(const GeneratorModel& model, const std::vector<ClozeItem>& items) {
    if (items.empty()) throw ContractError("cloze_accuracy: no items");
    std::size_t correct = 0;
    for (const auto& item : items) {
        if (item.context.empty()) throw ContractError("cloze_accuracy: empty context");
        if (item.candidates.size() < 2) {
            throw ContractError("cloze_accuracy: need at least 2 candidates");
        }
        if (std::find(item.candidates.begin(), item.candidates.end(), item.answer) ==
            item.candidates.end()) {
            throw ContractError("cloze_accuracy: answer not among candidates");
        }
        auto cands = item.candidates;
        std::sort(cands.begin(), cands.end());  // ties resolve to the lowest id
        std::size_t best = cands[0];
        double best_lp = -std::numeric_limits<double>::infinity();
        for (auto cand : cands) {
            auto ids = item.context;
            ids.push_back(cand);
            TokenSeq seq{ids, std::vector<std::uint8_t>(ids.size(), 1)};
            const double lp = sequence_log_prob(model, seq);
            if (lp > best_lp) {
                best_lp = lp;
                best = cand;
            }
        }
        if (best == item.answer) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(items.size());
}

double bits_per_char(const GeneratorModel& model, const std::vector<TokenSeq>& corpus) {
    if (model.mode != TokenizerMode::charlevel) {
        throw ContractError("bits_per_char: model is not character-level");
    }
    auto [nll, positions] = corpus_nll(model, corpus);
    return nll / static_cast<double>(positions) / std::log(2.0);
}

double oracle_grammaticality(const std::vector<std::string>& samples, const Cfg& grammar) {
    if (samples.empty()) throw ContractError("oracle_grammaticality: no samples");
    std::size_t ok = 0;
    for (const auto& s : samples) {
        if (cfg_accepts(grammar, s)) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(samples.size());
}

EvalReport zero_shot_report(const GeneratorModel& model, const std::vector<EvalDataset>& datasets,
                            const std::string& config_fingerprint) {
    const auto params = values(generator_named_params(model));
    const auto hash_before = params_hash(params);
    EvalReport report;
    report.config_fingerprint = config_fingerprint;
    report.model_hash = hash_before;
    for (const auto& ds : datasets) {
        EvalEntry entry;
        entry.name = ds.name;
        entry.ppl = perplexity(model, ds.sequences);
        entry.samples = ds.sequences.size();
        if (!ds.cloze.empty()) entry.acc = cloze_accuracy(model, ds.cloze);
        if (model.mode == TokenizerMode::charlevel) {
            entry.bpc = bits_per_char(model, ds.sequences);
        }
        report.entries.push_back(std::move(entry));
    }
    if (params_hash(params) != hash_before) {
        throw ContractError("zero_shot_report: evaluation mutated the model");
    }
    return report;
}

std::string report_to_jsonl(const EvalReport& report) {
    std::string out;
    for (const auto& e : report.entries) {
        nlohmann::ordered_json j;
        j["dataset"] = e.name;
        j["ppl"] = e.ppl;
        if (e.acc) j["acc"] = *e.acc;
        if (e.bpc) j["bpc"] = *e.bpc;
        j["samples"] = e.samples;
        j["config"] = report.config_fingerprint;
        j["model_hash"] = report.model_hash;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string report_table(const EvalReport& report) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-16s %12s %8s %8s %8s\n", "dataset", "ppl", "acc", "bpc",
                  "n");
    out << line;
    for (const auto& e : report.entries) {
        std::string acc = e.acc ? [&] {
            char b[32];
            std::snprintf(b, sizeof(b), "%.4f", *e.acc);
            return std::string(b);
        }() : std::string("-");
        std::string bpc = e.bpc ? [&] {
            char b[32];
            std::snprintf(b, sizeof(b), "%.4f", *e.bpc);
            return std::string(b);
        }() : std::string("-");
        std::snprintf(line, sizeof(line), "%-16s %12.4f %8s %8s %8zu\n", e.name.c_str(), e.ppl,
                      acc.c_str(), bpc.c_str(), e.samples);
        out << line;
    }
    return out.str();
}

}  // namespace evotext
