#include "evotext/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace evotext {

namespace {

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key " + key + " expects a number, got '" + value + "'");
    }
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    if (value == "none" || value == "unbounded") return kNoWindow;
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || p != value.data() + value.size()) {
        throw ConfigError("config: key " + key + " expects a non-negative integer, got '" +
                          value + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: key " + key + " expects true/false, got '" + value + "'");
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_size(std::size_t v) {
    return v == kNoWindow ? "none" : std::to_string(v);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
    Setter set;
    Getter get;
};

#define EVOTEXT_DOUBLE_KEY(field)                                                        \
    Key{[](RunConfig& c, const std::string& k, const std::string& v) {                   \
            c.field = parse_double(k, v);                                                \
        },                                                                               \
        [](const RunConfig& c) { return fmt_double(c.field); }}
#define EVOTEXT_SIZE_KEY(field)                                                          \
    Key{[](RunConfig& c, const std::string& k, const std::string& v) {                   \
            c.field = parse_size(k, v);                                                  \
        },                                                                               \
        [](const RunConfig& c) { return fmt_size(c.field); }}
#define EVOTEXT_BOOL_KEY(field)                                                          \
    Key{[](RunConfig& c, const std::string& k, const std::string& v) {                   \
            c.field = parse_bool(k, v);                                                  \
        },                                                                               \
        [](const RunConfig& c) { return c.field ? "true" : "false"; }}
#define EVOTEXT_STRING_KEY(field)                                                        \
    Key{[](RunConfig& c, const std::string&, const std::string& v) { c.field = v; },     \
        [](const RunConfig& c) { return c.field; }}

// std::map keeps serialization in a fixed (sorted) key order
const std::map<std::string, Key>& key_table() {
    static const std::map<std::string, Key> table = {
        {"tau1", EVOTEXT_DOUBLE_KEY(loop.tau1)},
        {"tau2", EVOTEXT_DOUBLE_KEY(loop.tau2)},
        {"tau3", EVOTEXT_DOUBLE_KEY(loop.tau3)},
        {"tau4", EVOTEXT_DOUBLE_KEY(loop.tau4)},
        {"priori_epochs", EVOTEXT_SIZE_KEY(loop.priori_epochs)},
        {"priori_minibatch", EVOTEXT_SIZE_KEY(loop.priori_minibatch)},
        {"samples_per_iteration", EVOTEXT_SIZE_KEY(loop.samples_per_iteration)},
        {"max_new_tokens", EVOTEXT_SIZE_KEY(loop.max_new_tokens)},
        {"mask_p", EVOTEXT_DOUBLE_KEY(loop.mask_p)},
        {"context_window", EVOTEXT_SIZE_KEY(loop.context_window)},
        {"iterations", EVOTEXT_SIZE_KEY(loop.iterations)},
        {"finetune_minibatch", EVOTEXT_SIZE_KEY(loop.finetune_minibatch)},
        {"max_len", EVOTEXT_SIZE_KEY(loop.max_len)},
        {"temperature", EVOTEXT_DOUBLE_KEY(loop.temperature)},
        {"skip_d_pretrain", EVOTEXT_BOOL_KEY(loop.skip_d_pretrain)},
        {"skip_warmup", EVOTEXT_BOOL_KEY(loop.skip_warmup)},
        {"skip_supervised", EVOTEXT_BOOL_KEY(loop.skip_supervised)},
        {"skip_semisupervised", EVOTEXT_BOOL_KEY(loop.skip_semisupervised)},
        {"seed", EVOTEXT_SIZE_KEY(loop.seed)},
        {"escalation_d_lr", EVOTEXT_DOUBLE_KEY(loop.escalation_d_lr)},
        {"escalation_g_lr", EVOTEXT_DOUBLE_KEY(loop.escalation_g_lr)},
        {"escalation_d_steps", EVOTEXT_SIZE_KEY(loop.escalation_d_steps)},
        {"vocab_size", EVOTEXT_SIZE_KEY(gen_dims.vocab)},
        {"d_model", EVOTEXT_SIZE_KEY(gen_dims.d_model)},
        {"n_heads", EVOTEXT_SIZE_KEY(gen_dims.n_heads)},
        {"g_blocks", EVOTEXT_SIZE_KEY(gen_dims.n_blocks)},
        {"l_max", EVOTEXT_SIZE_KEY(gen_dims.l_max)},
        {"d_blocks", EVOTEXT_SIZE_KEY(d_blocks)},
        {"tokenizer",
         Key{[](RunConfig& c, const std::string& k, const std::string& v) {
                 if (v == "word") {
                     c.mode = TokenizerMode::word;
                 } else if (v == "char") {
                     c.mode = TokenizerMode::charlevel;
                 } else {
                     throw ConfigError("config: key " + k + " expects word|char, got '" + v +
                                       "'");
                 }
             },
             [](const RunConfig& c) {
                 return std::string(c.mode == TokenizerMode::word ? "word" : "char");
             }}},
        {"corpus_path", EVOTEXT_STRING_KEY(corpus_path)},
        {"labeled_path", EVOTEXT_STRING_KEY(labeled_path)},
        {"output_dir", EVOTEXT_STRING_KEY(output_dir)},
        {"prompts", EVOTEXT_STRING_KEY(prompts)},
    };
    return table;
}

#undef EVOTEXT_DOUBLE_KEY
#undef EVOTEXT_SIZE_KEY
#undef EVOTEXT_BOOL_KEY
#undef EVOTEXT_STRING_KEY

}  // namespace

std::vector<std::string> RunConfig::prompt_list() const {
    std::vector<std::string> out;
    std::string cur;
    for (char c : prompts) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    if (out.empty()) throw ConfigError("config: prompts must name at least one cue word");
    return out;
}

ModelDims RunConfig::disc_dims() const {
    ModelDims d = gen_dims;
    d.n_blocks = d_blocks;
    return d;
}

void apply_config_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto it = key_table().find(key);
    if (it == key_table().end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second.set(cfg, key, value);
}

RunConfig parse_run_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.pop_back();
        std::size_t start = 0;
        while (start < line.size() && (line[start] == ' ' || line[start] == '\t')) ++start;
        line.erase(0, start);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: line " + std::to_string(lineno) +
                              " is not key=value: '" + line + "'");
        }
        apply_config_override(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_run_config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config_text(ss.str());
}

std::string serialize_run_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& [key, entry] : key_table()) {
        out += key;
        out += '=';
        out += entry.get(cfg);
        out += '\n';
    }
    return out;
}

std::string config_fingerprint(const RunConfig& cfg) {
    const std::string s = serialize_run_config(cfg);
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(s.data(), s.size())));
    return buf;
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_run_config: cannot open " + path + " for writing");
    out << serialize_run_config(cfg);
}

}  // namespace evotext
