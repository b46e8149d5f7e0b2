#pragma once

#include <string>

#include "evotext/loop.hpp"

namespace evotext {

// Whole-run configuration: loop hyperparameters, model dimensions, tokenizer
// mode, and data paths. Serialized as diffable key=value lines.
struct RunConfig {
    LoopConfig loop;
    ModelDims gen_dims{.vocab = 0, .d_model = 64, .n_heads = 4, .n_blocks = 4, .l_max = 64};
    std::size_t d_blocks = 2;  // discriminator depth; other dims shared
    TokenizerMode mode = TokenizerMode::word;
    std::string corpus_path;
    std::string labeled_path;
    std::string output_dir = ".";
    std::string prompts = "the,a,every,some,this";  // comma-separated cue words

    std::vector<std::string> prompt_list() const;
    ModelDims disc_dims() const;
};

// One "key=value" per line; '#' starts a comment. Unknown keys are errors.
RunConfig parse_run_config_text(const std::string& text);
RunConfig load_run_config(const std::string& path);
void apply_config_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Canonical serialization (fixed key order); parse(serialize(c)) == c.
std::string serialize_run_config(const RunConfig& cfg);
// Short hex digest of the canonical serialization.
std::string config_fingerprint(const RunConfig& cfg);

void save_run_config(const RunConfig& cfg, const std::string& path);

}  // namespace evotext
