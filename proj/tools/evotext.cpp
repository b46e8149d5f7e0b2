// Command-line front end: one subcommand per pipeline stage plus `repro`,
// which runs the whole desk-scale experiment matrix deterministically.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "evotext/checkpoint.hpp"
#include "evotext/config.hpp"
#include "evotext/experiment.hpp"

namespace fs = std::filesystem;
using namespace evotext;

namespace {

std::string output_path(const RunConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.output_dir);
    return (fs::path(cfg.output_dir) / name).string();
}

// every command records the configuration it actually ran with
void write_effective_config(const RunConfig& cfg, const std::string& command) {
    save_run_config(cfg, output_path(cfg, command + ".effective.config"));
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
}

std::uint64_t stage_seed(const RunConfig& cfg, std::uint64_t stream) {
    std::uint64_t x = cfg.loop.seed ^ (stream * 0x9E3779B97F4A7C15ULL);
    return splitmix64(x);
}

std::vector<TokenSeq> encode_corpus(const std::vector<std::string>& lines, const Vocab& vocab,
                                    std::size_t max_len) {
    std::vector<TokenSeq> out;
    out.reserve(lines.size());
    for (const auto& line : lines) out.push_back(encode_with_terminator(line, vocab, max_len));
    return out;
}

std::vector<std::pair<TokenSeq, int>> encode_labeled(const std::vector<LabeledSample>& samples,
                                                     const Vocab& vocab, std::size_t max_len) {
    std::vector<std::pair<TokenSeq, int>> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back({encode(s.text, vocab, max_len), s.label});
    return out;
}

Vocab corpus_vocab(const RunConfig& cfg, const std::vector<std::string>& lines) {
    const std::size_t cap = cfg.gen_dims.vocab > 0 ? cfg.gen_dims.vocab : 256;
    return build_vocab(lines, cfg.mode, cap);
}

int cmd_preprocess(const RunConfig& cfg, const std::string& in, const std::string& out) {
    auto lines = load_corpus_lines(in);
    for (auto& line : lines) line = preprocess_text(line);
    save_corpus_lines(out, lines);
    write_effective_config(cfg, "preprocess");
    std::cout << "preprocessed " << lines.size() << " lines -> " << out << "\n";
    return 0;
}

int cmd_pretrain_g(const RunConfig& cfg, const std::string& corpus_path, const std::string& out,
                   std::size_t steps, std::size_t minibatch, double lr) {
    auto lines = load_corpus_lines(corpus_path);
    auto vocab = corpus_vocab(cfg, lines);
    ModelDims dims = cfg.gen_dims;
    dims.vocab = vocab.size();
    auto g = make_generator(dims, cfg.mode, stage_seed(cfg, 0x10));
    auto seqs = encode_corpus(lines, vocab, cfg.loop.max_len);
    pretrain_generator_lm(g, seqs, steps, minibatch, lr, stage_seed(cfg, 0x13));
    save_generator_checkpoint(g, vocab, config_fingerprint(cfg), out);
    write_effective_config(cfg, "pretrain-g");
    std::cout << "pretrained generator: " << steps << " steps, vocab " << vocab.size()
              << ", ppl " << perplexity(g, seqs) << " -> " << out << "\n";
    return 0;
}

int cmd_pretrain_d(const RunConfig& cfg, const std::string& corpus_path, const std::string& out,
                   std::size_t steps, std::size_t minibatch, double lr) {
    auto lines = load_corpus_lines(corpus_path);
    auto vocab = corpus_vocab(cfg, lines);
    ModelDims dims = cfg.disc_dims();
    dims.vocab = vocab.size();
    auto d = make_discriminator(dims, cfg.mode, stage_seed(cfg, 0x11));
    auto seqs = encode_corpus(lines, vocab, cfg.loop.max_len);
    pretrain_discriminator_mlm(d, seqs, steps, minibatch, cfg.loop.mask_p, lr,
                               stage_seed(cfg, 0x14));
    save_discriminator_checkpoint(d, vocab, config_fingerprint(cfg), out);
    write_effective_config(cfg, "pretrain-d");
    std::cout << "pretrained discriminator: " << steps << " masked-prediction steps -> " << out
              << "\n";
    return 0;
}

int cmd_priori(const RunConfig& cfg, const std::string& g_path, const std::string& d_path,
               const std::string& labeled_path, const std::string& g_out,
               const std::string& d_out) {
    Vocab vocab;
    auto g = load_generator_checkpoint(g_path, vocab);
    Vocab d_vocab;
    auto d = load_discriminator_checkpoint(d_path, d_vocab);
    if (d_vocab.id_to_token != vocab.id_to_token) {
        throw ConfigError("priori: generator and discriminator vocabularies differ");
    }
    auto labeled = encode_labeled(load_labeled_tsv(labeled_path), vocab, cfg.loop.max_len);
    auto split = split_corpus(labeled, stage_seed(cfg, 0x04), 8, 1, 1);
    if (!g.cls_head) attach_cls_head(g, stage_seed(cfg, 0x12));
    priori_learning(d, g, split.train, cfg.loop);
    ConfusionCounts counts;
    for (const auto& [seq, label] : split.test) {
        const int predicted = classify(d, seq).label;
        if (label == 1) {
            (predicted == 1 ? counts.tp : counts.fn) += 1;
        } else {
            (predicted == 0 ? counts.tn : counts.fp) += 1;
        }
    }
    save_generator_checkpoint(g, vocab, config_fingerprint(cfg), g_out);
    save_discriminator_checkpoint(d, vocab, config_fingerprint(cfg), d_out);
    write_effective_config(cfg, "priori");
    std::cout << "priori learning done; discriminator held-out accuracy "
              << (counts.total() ? accuracy(counts) : 0.0) << "\n";
    return 0;
}

int cmd_loop(const RunConfig& cfg, const std::string& g_path, const std::string& d_path,
             const std::string& g_out, const std::string& log_path) {
    Vocab vocab;
    auto g = load_generator_checkpoint(g_path, vocab);
    Vocab d_vocab;
    auto d = load_discriminator_checkpoint(d_path, d_vocab);
    if (!g.cls_head && !cfg.loop.skip_supervised) {
        throw ContractError("loop: generator has no classifier head; run priori first "
                            "or pass --set skip_supervised=true");
    }
    RunState state;
    for (std::size_t i = 0; i < cfg.loop.iterations; ++i) {
        evotext_iteration(g, d, cfg.prompt_list(), vocab, cfg.loop, state);
    }
    save_generator_checkpoint(g, vocab, config_fingerprint(cfg), g_out);
    if (!log_path.empty()) {
        std::ofstream log(log_path, std::ios::binary);
        if (!log) throw IoError("cannot open " + log_path + " for writing");
        write_run_log(state, log, system_clock_iso8601());
    }
    write_effective_config(cfg, "loop");
    std::cout << "ran " << cfg.loop.iterations << " iterations -> " << g_out << "\n";
    return 0;
}

int cmd_escalate(const RunConfig& cfg, const std::string& g_path, const std::string& d_path,
                 const std::string& new_corpus_path, const std::string& g_out,
                 const std::string& d_out) {
    Vocab vocab;
    auto g = load_generator_checkpoint(g_path, vocab);
    Vocab d_vocab;
    auto d = load_discriminator_checkpoint(d_path, d_vocab);
    auto new_lines = load_corpus_lines(new_corpus_path);
    auto fed = self_escalation(g, d, new_lines, cfg.prompt_list(), vocab, cfg.loop);
    save_generator_checkpoint(g, vocab, config_fingerprint(cfg), g_out);
    save_discriminator_checkpoint(d, vocab, config_fingerprint(cfg), d_out);
    write_effective_config(cfg, "escalate");
    std::cout << "knowledge update done; " << fed.size() << " completed samples fed back\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& g_path,
             const std::vector<std::string>& corpora) {
    Vocab vocab;
    auto g = load_generator_checkpoint(g_path, vocab);
    std::vector<EvalDataset> datasets;
    for (const auto& spec : corpora) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("eval: --corpus expects name=path, got '" + spec + "'");
        }
        EvalDataset ds;
        ds.name = spec.substr(0, eq);
        ds.sequences =
            encode_corpus(load_corpus_lines(spec.substr(eq + 1)), vocab, cfg.loop.max_len);
        datasets.push_back(std::move(ds));
    }
    auto report = zero_shot_report(g, datasets, config_fingerprint(cfg));
    std::cout << report_table(report);
    write_text(output_path(cfg, "eval_report.jsonl"), report_to_jsonl(report));
    write_effective_config(cfg, "eval");
    return 0;
}

int cmd_generate(const RunConfig& cfg, const std::string& g_path, const std::string& prompt,
                 std::size_t n, const std::string& strategy, std::size_t top_k) {
    Vocab vocab;
    auto g = load_generator_checkpoint(g_path, vocab);
    GenerationConfig gen;
    gen.max_new_tokens = cfg.loop.max_new_tokens;
    gen.termination_id = cfg.loop.termination_id;
    gen.temperature = cfg.loop.temperature;
    gen.top_k = top_k;
    if (strategy == "greedy") {
        gen.strategy = GenerationConfig::Strategy::greedy;
    } else if (strategy == "temperature") {
        gen.strategy = GenerationConfig::Strategy::temperature;
    } else if (strategy == "top_k") {
        gen.strategy = GenerationConfig::Strategy::top_k;
    } else {
        throw ConfigError("generate: unknown strategy '" + strategy + "'");
    }
    auto encoded = encode(prompt, vocab, cfg.loop.max_len);
    for (std::size_t i = 0; i < n; ++i) {
        gen.seed = stage_seed(cfg, 0x200 + i);
        std::cout << decode(generate(g, encoded, gen), vocab) << "\n";
    }
    return 0;
}

// ---- repro: the full deterministic experiment matrix -----------------------

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

struct AblationRow {
    std::string name;
    PipelineResult result;
};

int cmd_repro(const RunConfig& run_cfg, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.loop.seed = seed;
    const auto data = make_synthetic_experiment(cfg);

    std::vector<AblationRow> rows;
    rows.push_back({"full pipeline", run_pipeline(data, cfg)});
    struct Flag {
        std::string name;
        bool LoopConfig::*member;
    };
    const std::vector<Flag> flags = {
        {"remove discriminator pretraining", &LoopConfig::skip_d_pretrain},
        {"remove generator head warm-up", &LoopConfig::skip_warmup},
        {"remove supervised fine-tuning", &LoopConfig::skip_supervised},
        {"remove semi-supervised fine-tuning", &LoopConfig::skip_semisupervised},
    };
    for (const auto& flag : flags) {
        ExperimentConfig ablated = cfg;
        ablated.loop.*flag.member = true;
        rows.push_back({flag.name, run_pipeline(data, ablated)});
    }
    auto& full = rows.front().result;

    std::ostringstream improvement;
    improvement << "end-to-end improvement (seed " << seed << ", "
                << cfg.loop.iterations << " iterations)\n"
                << "  discriminator held-out accuracy  " << fmt(full.d_heldout_accuracy) << "\n"
                << "  grammaticality baseline          " << fmt(full.baseline_grammaticality)
                << "\n"
                << "  grammaticality after loop        " << fmt(full.final_grammaticality)
                << "\n"
                << "  gain (points)                    "
                << fmt(100.0 * (full.final_grammaticality - full.baseline_grammaticality))
                << "\n"
                << "  held-out perplexity baseline     " << fmt(full.baseline_ppl) << "\n"
                << "  held-out perplexity after loop   " << fmt(full.final_ppl) << "\n"
                << "  perplexity change (%)            "
                << fmt(100.0 * (full.final_ppl / full.baseline_ppl - 1.0)) << "\n";

    std::ostringstream ablation;
    ablation << "ablation table (grammaticality after 156 iterations; drop vs full)\n";
    char line[160];
    std::snprintf(line, sizeof(line), "  %-38s %14s %14s %10s\n", "configuration",
                  "grammaticality", "perplexity", "drop(pt)");
    ablation << line;
    for (const auto& row : rows) {
        std::snprintf(line, sizeof(line), "  %-38s %14s %14s %10s\n", row.name.c_str(),
                      fmt(row.result.final_grammaticality).c_str(),
                      fmt(row.result.final_ppl).c_str(),
                      fmt(100.0 * (full.final_grammaticality -
                                   row.result.final_grammaticality))
                          .c_str());
        ablation << line;
    }

    auto esc_g = full.g;  // escalate a copy of the trained stack
    auto esc_d = full.d;
    auto esc = run_escalation(esc_g, esc_d, data, cfg);
    std::ostringstream escalation;
    escalation << "knowledge update (disjoint-token new domain)\n"
               << "  new-domain perplexity before  " << fmt(esc.new_ppl_before) << "\n"
               << "  new-domain perplexity after   " << fmt(esc.new_ppl_after) << "\n"
               << "  old-domain perplexity before  " << fmt(esc.old_ppl_before) << "\n"
               << "  old-domain perplexity after   " << fmt(esc.old_ppl_after) << "\n"
               << "  old-domain change (%)         "
               << fmt(100.0 * (esc.old_ppl_after / esc.old_ppl_before - 1.0)) << "\n";

    RunConfig out_cfg = run_cfg;
    out_cfg.loop = cfg.loop;
    out_cfg.gen_dims = cfg.g_dims;
    out_cfg.gen_dims.vocab = data.vocab.size();
    out_cfg.d_blocks = cfg.d_blocks;
    const std::string fingerprint = config_fingerprint(out_cfg);

    write_text(output_path(out_cfg, "improvement_table.txt"), improvement.str());
    write_text(output_path(out_cfg, "ablation_table.txt"), ablation.str());
    write_text(output_path(out_cfg, "escalation_table.txt"), escalation.str());
    {
        std::ofstream log(output_path(out_cfg, "run_log.jsonl"), std::ios::binary);
        // fixed clock so a re-run with the same seed is byte-identical
        write_run_log(full.state, log, [] { return std::string("1970-01-01T00:00:00Z"); });
    }
    save_generator_checkpoint(esc_g, data.vocab, fingerprint,
                              output_path(out_cfg, "generator_final.evtx"));
    save_discriminator_checkpoint(esc_d, data.vocab, fingerprint,
                                  output_path(out_cfg, "discriminator_final.evtx"));
    save_run_config(out_cfg, output_path(out_cfg, "repro.effective.config"));

    std::cout << improvement.str() << "\n" << ablation.str() << "\n" << escalation.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EvoText: generator-discriminator co-training at desk scale"};
    app.require_subcommand(1);

    RunConfig cfg;
    if (const char* env = std::getenv("EVOTEXT_OUTPUT_DIR")) cfg.output_dir = env;
    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--set", overrides, "config override key=value (repeatable)");
    app.add_option("--output-dir", cfg.output_dir, "directory for reports and configs");
    std::uint64_t seed_flag = 0;
    auto* seed_opt = app.add_option("--seed", seed_flag, "run seed (overrides config)");

    std::string in_path, out_path, g_path, d_path, labeled_path, g_out, d_out, log_path;
    std::string prompt = "the", strategy = "temperature";
    std::vector<std::string> eval_corpora;
    std::size_t steps = 120, minibatch = 16, n_samples = 5, top_k = 1;
    double lr = 3e-3;

    auto* preprocess = app.add_subcommand("preprocess", "normalize a corpus file line by line");
    preprocess->add_option("--in", in_path, "input corpus")->required();
    preprocess->add_option("--out", out_path, "output corpus")->required();

    auto* pretrain_g = app.add_subcommand("pretrain-g", "language-model pretraining from scratch");
    pretrain_g->add_option("--corpus", in_path)->required();
    pretrain_g->add_option("--out", out_path, "generator checkpoint")->required();
    pretrain_g->add_option("--steps", steps);
    pretrain_g->add_option("--minibatch", minibatch);
    pretrain_g->add_option("--lr", lr);

    auto* pretrain_d =
        app.add_subcommand("pretrain-d", "masked-prediction pretraining from scratch");
    pretrain_d->add_option("--corpus", in_path)->required();
    pretrain_d->add_option("--out", out_path, "discriminator checkpoint")->required();
    pretrain_d->add_option("--steps", steps)->default_val(std::size_t{400});
    pretrain_d->add_option("--minibatch", minibatch);
    pretrain_d->add_option("--lr", lr)->default_val(1e-3);

    auto* priori = app.add_subcommand(
        "priori", "fine-tune the discriminator and warm up the generator head on labeled data");
    priori->add_option("--generator", g_path)->required();
    priori->add_option("--discriminator", d_path)->required();
    priori->add_option("--labeled", labeled_path, "TSV: text<TAB>label or CoLA layout")
        ->required();
    priori->add_option("--out-generator", g_out)->required();
    priori->add_option("--out-discriminator", d_out)->required();

    auto* loop = app.add_subcommand("loop", "generate -> label -> fine-tune iterations");
    loop->add_option("--generator", g_path)->required();
    loop->add_option("--discriminator", d_path)->required();
    loop->add_option("--out-generator", g_out)->required();
    loop->add_option("--log", log_path, "line-delimited iteration log");
    std::size_t iterations_flag = 0;
    auto* iters_opt = loop->add_option("--iterations", iterations_flag);
    loop->add_flag_callback("--skip-d-pretrain",
                            [&cfg] { cfg.loop.skip_d_pretrain = true; });
    loop->add_flag_callback("--skip-warmup", [&cfg] { cfg.loop.skip_warmup = true; });
    loop->add_flag_callback("--skip-supervised", [&cfg] { cfg.loop.skip_supervised = true; });
    loop->add_flag_callback("--skip-semisupervised",
                            [&cfg] { cfg.loop.skip_semisupervised = true; });

    auto* escalate =
        app.add_subcommand("escalate", "knowledge update from a new-domain corpus");
    escalate->add_option("--generator", g_path)->required();
    escalate->add_option("--discriminator", d_path)->required();
    escalate->add_option("--new-corpus", in_path)->required();
    escalate->add_option("--out-generator", g_out)->required();
    escalate->add_option("--out-discriminator", d_out)->required();

    auto* eval = app.add_subcommand("eval", "zero-shot metrics report (no parameter updates)");
    eval->add_option("--generator", g_path)->required();
    eval->add_option("--corpus", eval_corpora, "name=path (repeatable)")->required();

    auto* generate = app.add_subcommand("generate", "batch sampling from a checkpoint");
    generate->add_option("--generator", g_path)->required();
    generate->add_option("--prompt", prompt);
    generate->add_option("--samples", n_samples);
    generate->add_option("--strategy", strategy, "greedy|temperature|top_k");
    generate->add_option("--top-k", top_k);

    auto* repro = app.add_subcommand(
        "repro", "run the full synthetic experiment matrix and write the report tables");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_path.empty()) {
            std::string keep_output = cfg.output_dir;
            cfg = load_run_config(config_path);
            if (std::getenv("EVOTEXT_OUTPUT_DIR") || app.count("--output-dir")) {
                cfg.output_dir = keep_output;
            }
        }
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("--set expects key=value, got '" + kv + "'");
            }
            apply_config_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (seed_opt->count()) cfg.loop.seed = seed_flag;
        if (iters_opt->count()) cfg.loop.iterations = iterations_flag;

        if (preprocess->parsed()) return cmd_preprocess(cfg, in_path, out_path);
        if (pretrain_g->parsed()) {
            return cmd_pretrain_g(cfg, in_path, out_path, steps, minibatch, lr);
        }
        if (pretrain_d->parsed()) {
            return cmd_pretrain_d(cfg, in_path, out_path, steps, minibatch, lr);
        }
        if (priori->parsed()) return cmd_priori(cfg, g_path, d_path, labeled_path, g_out, d_out);
        if (loop->parsed()) return cmd_loop(cfg, g_path, d_path, g_out, log_path);
        if (escalate->parsed()) return cmd_escalate(cfg, g_path, d_path, in_path, g_out, d_out);
        if (eval->parsed()) return cmd_eval(cfg, g_path, eval_corpora);
        if (generate->parsed()) {
            return cmd_generate(cfg, g_path, prompt, n_samples, strategy, top_k);
        }
        if (repro->parsed()) {
            return cmd_repro(cfg, seed_opt->count() ? seed_flag : ExperimentConfig{}.loop.seed);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
    } catch (const ContractError& e) {
        std::cerr << "contract error: " << e.what() << "\n";
    } catch (const VersionError& e) {
        std::cerr << "version error: " << e.what() << "\n";
    } catch (const IntegrityError& e) {
        std::cerr << "integrity error: " << e.what() << "\n";
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
    } catch (const ShapeError& e) {
        std::cerr << "shape error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return 1;
}
