#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "evotext/errors.hpp"
#include "evotext/rng.hpp"

namespace evotext {

// Normalization applied to training text, in order: contraction expansion,
// possessive-apostrophe removal, @/# marker stripping, non-ASCII removal,
// punctuation removal, whitespace collapse. Casing and digits are preserved.
// Idempotent.
std::string preprocess_text(const std::string& raw);

enum class TokenizerMode { word, charlevel };

struct Vocab {
    static constexpr std::size_t pad_id = 0;
    static constexpr std::size_t eot_id = 1;  // the termination token
    static constexpr std::size_t mask_id = 2;
    static constexpr std::size_t unk_id = 3;

    TokenizerMode mode = TokenizerMode::word;
    std::vector<std::string> id_to_token;
    std::unordered_map<std::string, std::size_t> token_to_id;

    std::size_t size() const { return id_to_token.size(); }
    std::size_t id_of(const std::string& token) const;
    const std::string& token_of(std::size_t id) const;
};

struct TokenSeq {
    std::vector<std::size_t> ids;
    std::vector<std::uint8_t> pad_mask;  // 1 = real token

    std::size_t length() const { return ids.size(); }
    std::size_t real_length() const;
};

struct LabeledSample {
    std::string text;
    int label = 0;  // 0 or 1
};

template <typename T>
struct CorpusSplit {
    std::vector<T> train, validation, test;
};

std::vector<std::string> tokenize(const std::string& text, TokenizerMode mode);

// Reserved tokens first, then frequency order with lexicographic tie-break.
Vocab build_vocab(const std::vector<std::string>& corpus, TokenizerMode mode,
                  std::size_t max_size);

// Tokenize, truncate to max_len, right-pad with pad id; unknowns map to unk.
TokenSeq encode(const std::string& text, const Vocab& vocab, std::size_t max_len);

// Same, but appends the termination token after the content (before padding).
TokenSeq encode_with_terminator(const std::string& text, const Vocab& vocab,
                                std::size_t max_len);

// Inverse of encode for in-vocab text: pad/terminator/mask ids are skipped.
std::string decode(const TokenSeq& seq, const Vocab& vocab);

// Seeded shuffle then contiguous partition; floor allocation with the
// remainder going to train.
template <typename T>
CorpusSplit<T> split_corpus(std::vector<T> samples, std::uint64_t seed, double r_train = 7,
                            double r_val = 1, double r_test = 2) {
    if (r_train <= 0 || r_val <= 0 || r_test <= 0) {
        throw ConfigError("split_corpus: ratios must be positive");
    }
    Rng rng(seed);
    rng.shuffle(samples);
    const double total = r_train + r_val + r_test;
    const std::size_t n = samples.size();
    const auto n_val = static_cast<std::size_t>(static_cast<double>(n) * r_val / total);
    const auto n_test = static_cast<std::size_t>(static_cast<double>(n) * r_test / total);
    const std::size_t n_train = n - n_val - n_test;
    CorpusSplit<T> split;
    split.train.assign(samples.begin(), samples.begin() + n_train);
    split.validation.assign(samples.begin() + n_train, samples.begin() + n_train + n_val);
    split.test.assign(samples.begin() + n_train + n_val, samples.end());
    return split;
}

// Accepts 2-column (text<TAB>label) and 4-column CoLA layout
// (source, label, star, sentence), auto-detected by column count.
std::vector<LabeledSample> load_labeled_tsv(const std::string& path);

struct MaskResult {
    TokenSeq masked;
    std::vector<std::size_t> positions;
};

// Each real (non-pad, non-terminator) token is independently replaced by the
// mask id with probability p. Deterministic for a fixed seed.
MaskResult mask_tokens(const TokenSeq& seq, double p, std::uint64_t seed);

std::vector<std::string> load_corpus_lines(const std::string& path);
void save_corpus_lines(const std::string& path, const std::vector<std::string>& lines);

// One token per line, line number = id (reserved tokens included).
void save_vocab(const Vocab& vocab, const std::string& path);
Vocab load_vocab(const std::string& path, TokenizerMode mode);

}  // namespace evotext
