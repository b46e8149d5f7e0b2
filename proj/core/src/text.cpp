#include "evotext/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace evotext {

namespace {

const char* kReserved[] = {"<pad>", "<eot>", "<mask>", "<unk>"};

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

}  // namespace

std::string preprocess_text(const std::string& raw) {
    std::string s = raw;
    // contraction expansion; won't is irregular and must precede the n't rule
    replace_all(s, "won't", "will not");
    replace_all(s, "Won't", "Will not");
    replace_all(s, "n't", " not");
    replace_all(s, "'ll", " will");
    replace_all(s, "'re", " are");
    replace_all(s, "'m", " am");
    replace_all(s, "'s", "s");  // possessive: drop the apostrophe, keep case
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        if (c >= 0x80) {
            out.push_back(' ');  // emoji / non-ASCII symbols
        } else if (c == '@' || c == '#') {
            // marker stripped, word kept
        } else if (std::isalnum(c) || std::isspace(c)) {
            out.push_back(static_cast<char>(c));
        }
        // remaining ASCII punctuation dropped
    }
    // collapse whitespace and trim
    std::string result;
    result.reserve(out.size());
    bool in_space = true;
    for (char c : out) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!in_space && !result.empty()) result.push_back(' ');
            in_space = true;
        } else {
            result.push_back(c);
            in_space = false;
        }
    }
    while (!result.empty() && result.back() == ' ') result.pop_back();
    return result;
}

std::size_t Vocab::id_of(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? unk_id : it->second;
}

const std::string& Vocab::token_of(std::size_t id) const {
    if (id >= id_to_token.size()) {
        throw IndexError("Vocab::token_of: id " + std::to_string(id) + " out of range");
    }
    return id_to_token[id];
}

std::size_t TokenSeq::real_length() const {
    std::size_t n = 0;
    for (auto m : pad_mask) n += m ? 1 : 0;
    return n;
}

std::vector<std::string> tokenize(const std::string& text, TokenizerMode mode) {
    std::vector<std::string> tokens;
    if (mode == TokenizerMode::word) {
        std::istringstream in(text);
        std::string tok;
        while (in >> tok) tokens.push_back(tok);
    } else {
        for (char c : text) tokens.emplace_back(1, c);
    }
    return tokens;
}

Vocab build_vocab(const std::vector<std::string>& corpus, TokenizerMode mode,
                  std::size_t max_size) {
    if (max_size < 5) throw ConfigError("build_vocab: max_size must be at least 5");
    if (corpus.empty()) throw ContractError("build_vocab: empty corpus");
    std::map<std::string, std::size_t> freq;  // ordered map gives the lexicographic tie-break
    for (const auto& line : corpus) {
        for (auto& tok : tokenize(line, mode)) ++freq[tok];
    }
    std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(), freq.end());
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocab vocab;
    vocab.mode = mode;
    for (const char* r : kReserved) vocab.id_to_token.emplace_back(r);
    for (const auto& [tok, count] : entries) {
        if (vocab.id_to_token.size() >= max_size) break;
        vocab.id_to_token.push_back(tok);
    }
    for (std::size_t i = 0; i < vocab.id_to_token.size(); ++i) {
        vocab.token_to_id[vocab.id_to_token[i]] = i;
    }
    return vocab;
}

TokenSeq encode(const std::string& text, const Vocab& vocab, std::size_t max_len) {
    if (max_len < 1) throw ConfigError("encode: max_len must be >= 1");
    TokenSeq seq;
    auto tokens = tokenize(text, vocab.mode);
    for (const auto& tok : tokens) {
        if (seq.ids.size() >= max_len) break;
        seq.ids.push_back(vocab.id_of(tok));
        seq.pad_mask.push_back(1);
    }
    while (seq.ids.size() < max_len) {
        seq.ids.push_back(Vocab::pad_id);
        seq.pad_mask.push_back(0);
    }
    return seq;
}

TokenSeq encode_with_terminator(const std::string& text, const Vocab& vocab,
                                std::size_t max_len) {
    if (max_len < 1) throw ConfigError("encode_with_terminator: max_len must be >= 1");
    TokenSeq seq;
    auto tokens = tokenize(text, vocab.mode);
    for (const auto& tok : tokens) {
        if (seq.ids.size() + 1 >= max_len) break;  // leave room for the terminator
        seq.ids.push_back(vocab.id_of(tok));
        seq.pad_mask.push_back(1);
    }
    seq.ids.push_back(Vocab::eot_id);
    seq.pad_mask.push_back(1);
    while (seq.ids.size() < max_len) {
        seq.ids.push_back(Vocab::pad_id);
        seq.pad_mask.push_back(0);
    }
    return seq;
}

std::string decode(const TokenSeq& seq, const Vocab& vocab) {
    std::string out;
    for (std::size_t i = 0; i < seq.ids.size(); ++i) {
        const std::size_t id = seq.ids[i];
        if (id == Vocab::pad_id || id == Vocab::eot_id || id == Vocab::mask_id ||
            !seq.pad_mask[i]) {
            continue;
        }
        const std::string& tok = vocab.token_of(id);
        if (vocab.mode == TokenizerMode::word) {
            if (!out.empty()) out.push_back(' ');
            out += tok;
        } else {
            out += tok;
        }
    }
    return out;
}

std::vector<LabeledSample> load_labeled_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_labeled_tsv: cannot open " + path);
    std::vector<LabeledSample> samples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> cols;
        std::size_t start = 0;
        while (true) {
            std::size_t tab = line.find('\t', start);
            cols.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        std::string text, label_str;
        if (cols.size() == 2) {
            text = cols[0];
            label_str = cols[1];
        } else if (cols.size() == 4) {
            label_str = cols[1];
            text = cols[3];
        } else {
            throw ParseError("load_labeled_tsv: line " + std::to_string(lineno) + " of " + path +
                             " has " + std::to_string(cols.size()) + " columns (want 2 or 4)");
        }
        if (label_str != "0" && label_str != "1") {
            throw ParseError("load_labeled_tsv: line " + std::to_string(lineno) +
                             ": label must be 0 or 1, got '" + label_str + "'");
        }
        samples.push_back({text, label_str == "1" ? 1 : 0});
    }
    return samples;
}

MaskResult mask_tokens(const TokenSeq& seq, double p, std::uint64_t seed) {
    if (p < 0.0 || p > 1.0) throw ContractError("mask_tokens: p must be in [0,1]");
    Rng rng(seed);
    MaskResult result;
    result.masked = seq;
    for (std::size_t i = 0; i < seq.ids.size(); ++i) {
        const bool real = seq.pad_mask[i] && seq.ids[i] != Vocab::pad_id &&
                          seq.ids[i] != Vocab::eot_id;
        if (!real) continue;
        if (rng.uniform() < p) {
            result.masked.ids[i] = Vocab::mask_id;
            result.positions.push_back(i);
        }
    }
    return result;
}

std::vector<std::string> load_corpus_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_corpus_lines: cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

void save_corpus_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path);
    if (!out) throw IoError("save_corpus_lines: cannot open " + path + " for writing");
    for (const auto& line : lines) out << line << '\n';
}

void save_vocab(const Vocab& vocab, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_vocab: cannot open " + path + " for writing");
    for (const auto& tok : vocab.id_to_token) out << tok << '\n';
}

Vocab load_vocab(const std::string& path, TokenizerMode mode) {
    std::ifstream in(path);
    if (!in) throw IoError("load_vocab: cannot open " + path);
    Vocab vocab;
    vocab.mode = mode;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        vocab.id_to_token.push_back(line);
    }
    for (std::size_t i = 0; i < 4; ++i) {
        if (vocab.id_to_token.size() <= i || vocab.id_to_token[i] != kReserved[i]) {
            throw ParseError("load_vocab: " + path + " is missing reserved token " +
                             kReserved[i] + " at id " + std::to_string(i));
        }
    }
    for (std::size_t i = 0; i < vocab.id_to_token.size(); ++i) {
        vocab.token_to_id[vocab.id_to_token[i]] = i;
    }
    return vocab;
}

}  // namespace evotext
