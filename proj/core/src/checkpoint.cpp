#include "evotext/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace evotext {

namespace {

constexpr char kMagic[4] = {'E', 'V', 'T', 'X'};
constexpr std::uint8_t kKindGenerator = 0;
constexpr std::uint8_t kKindDiscriminator = 1;

// Buffer-backed writer so the checksum can cover everything after the magic.
struct Writer {
    std::string buf;

    void bytes(const void* p, std::size_t n) {
        buf.append(static_cast<const char*>(p), n);
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
};

struct Reader {
    std::string buf;
    std::size_t pos = 0;
    std::string path;

    void bytes(void* p, std::size_t n) {
        if (pos + n > buf.size()) {
            throw TruncationError("checkpoint " + path + " is truncated");
        }
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return v;
    }
    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
};

void write_common(Writer& w, std::uint8_t kind, const ModelDims& dims, TokenizerMode mode,
                  const Vocab& vocab, const std::string& fingerprint, const NamedParams& params,
                  double threshold, bool has_cls_head) {
    w.u32(kCheckpointVersion);
    w.u8(kind);
    w.u8(mode == TokenizerMode::word ? 0 : 1);
    w.u64(dims.vocab);
    w.u64(dims.d_model);
    w.u64(dims.n_heads);
    w.u64(dims.n_blocks);
    w.u64(dims.l_max);
    w.f64(threshold);
    w.u8(has_cls_head ? 1 : 0);
    w.str(fingerprint);
    w.u32(static_cast<std::uint32_t>(vocab.id_to_token.size()));
    for (const auto& tok : vocab.id_to_token) w.str(tok);
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        w.str(name);
        w.u32(static_cast<std::uint32_t>(t->shape.size()));
        for (auto s : t->shape) w.u64(s);
    }
    for (const auto& [name, t] : params) {
        for (double v : t->data) w.f64(v);
    }
}

void write_file(const Writer& w, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot open " + path + " for writing");
    out.write(kMagic, 4);
    out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
    const std::uint64_t sum = fnv1a64(w.buf.data(), w.buf.size());
    for (int i = 0; i < 8; ++i) {
        const char b = static_cast<char>(sum >> (8 * i));
        out.write(&b, 1);
    }
    if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

Reader open_checked(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string all = ss.str();
    if (all.size() < 4 || std::memcmp(all.data(), kMagic, 4) != 0) {
        throw ParseError("load_checkpoint: " + path + " has bad magic bytes");
    }
    if (all.size() < 12) throw TruncationError("checkpoint " + path + " is truncated");
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) {
        stored |= static_cast<std::uint64_t>(
                      static_cast<std::uint8_t>(all[all.size() - 8 + static_cast<std::size_t>(i)]))
                  << (8 * i);
    }
    Reader r;
    r.path = path;
    r.buf = all.substr(4, all.size() - 12);
    if (fnv1a64(r.buf.data(), r.buf.size()) != stored) {
        throw IntegrityError("checkpoint " + path + " failed its integrity check");
    }
    return r;
}

struct Header {
    std::uint8_t kind = 0;
    TokenizerMode mode = TokenizerMode::word;
    ModelDims dims;
    double threshold = 0.5;
    bool has_cls_head = false;
    std::string fingerprint;
    Vocab vocab;
};

Header read_header(Reader& r) {
    const std::uint32_t version = r.u32();
    if (version > kCheckpointVersion) {
        throw VersionError("checkpoint " + r.path + " has version " + std::to_string(version) +
                           "; this build supports up to " + std::to_string(kCheckpointVersion));
    }
    Header h;
    h.kind = r.u8();
    h.mode = r.u8() == 0 ? TokenizerMode::word : TokenizerMode::charlevel;
    h.dims.vocab = r.u64();
    h.dims.d_model = r.u64();
    h.dims.n_heads = r.u64();
    h.dims.n_blocks = r.u64();
    h.dims.l_max = r.u64();
    h.threshold = r.f64();
    h.has_cls_head = r.u8() != 0;
    h.fingerprint = r.str();
    h.vocab.mode = h.mode;
    const std::uint32_t n_tokens = r.u32();
    for (std::uint32_t i = 0; i < n_tokens; ++i) h.vocab.id_to_token.push_back(r.str());
    for (std::size_t i = 0; i < h.vocab.id_to_token.size(); ++i) {
        h.vocab.token_to_id[h.vocab.id_to_token[i]] = i;
    }
    return h;
}

void read_params_into(Reader& r, const NamedParams& params) {
    const std::uint32_t count = r.u32();
    if (count != params.size()) {
        throw ShapeError("checkpoint " + r.path + " directory lists " + std::to_string(count) +
                         " tensors; model has " + std::to_string(params.size()));
    }
    for (const auto& [name, t] : params) {
        const std::string stored_name = r.str();
        if (stored_name != name) {
            throw ShapeError("checkpoint " + r.path + ": expected tensor " + name + ", found " +
                             stored_name);
        }
        const std::uint32_t ndim = r.u32();
        std::vector<std::size_t> shape(ndim);
        for (auto& s : shape) s = r.u64();
        if (shape != t->shape) {
            throw ShapeError("checkpoint " + r.path + ": tensor " + name + " shape mismatch");
        }
    }
    for (const auto& [name, t] : params) {
        for (auto& v : t->data) v = r.f64();
    }
}

}  // namespace

void save_generator_checkpoint(const GeneratorModel& model, const Vocab& vocab,
                               const std::string& config_fingerprint, const std::string& path) {
    Writer w;
    write_common(w, kKindGenerator, model.dims, model.mode, vocab, config_fingerprint,
                 generator_named_params(model), 0.0, model.cls_head.has_value());
    write_file(w, path);
}

void save_discriminator_checkpoint(const DiscriminatorModel& model, const Vocab& vocab,
                                   const std::string& config_fingerprint,
                                   const std::string& path) {
    Writer w;
    write_common(w, kKindDiscriminator, model.dims, model.mode, vocab, config_fingerprint,
                 discriminator_named_params(model), model.decision_threshold, true);
    write_file(w, path);
}

GeneratorModel load_generator_checkpoint(const std::string& path, Vocab& vocab,
                                         std::string* config_fingerprint) {
    Reader r = open_checked(path);
    Header h = read_header(r);
    if (h.kind != kKindGenerator) {
        throw ParseError("load_checkpoint: " + path + " does not hold a generator");
    }
    auto model = make_generator(h.dims, h.mode, 0);
    if (h.has_cls_head) attach_cls_head(model, 0);
    read_params_into(r, generator_named_params(model));
    vocab = h.vocab;
    if (config_fingerprint) *config_fingerprint = h.fingerprint;
    return model;
}

DiscriminatorModel load_discriminator_checkpoint(const std::string& path, Vocab& vocab,
                                                 std::string* config_fingerprint) {
    Reader r = open_checked(path);
    Header h = read_header(r);
    if (h.kind != kKindDiscriminator) {
        throw ParseError("load_checkpoint: " + path + " does not hold a discriminator");
    }
    auto model = make_discriminator(h.dims, h.mode, 0);
    model.decision_threshold = h.threshold;
    read_params_into(r, discriminator_named_params(model));
    vocab = h.vocab;
    if (config_fingerprint) *config_fingerprint = h.fingerprint;
    return model;
}

std::string checkpoint_kind(const std::string& path) {
    Reader r = open_checked(path);
    Header h = read_header(r);
    return h.kind == kKindGenerator ? "generator" : "discriminator";
}

}  // namespace evotext
