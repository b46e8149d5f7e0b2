#pragma once

#include <string>

#include "evotext/discriminator.hpp"

namespace evotext {

// Checkpoint container: magic "EVTX", format version, model kind, tokenizer
// mode, dimensions, config fingerprint, vocabulary, a name/shape directory,
// little-endian 64-bit float payloads, and a trailing integrity checksum over
// everything after the magic.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct VersionError : ParseError {
    using ParseError::ParseError;
};
struct IntegrityError : ParseError {
    using ParseError::ParseError;
};
struct TruncationError : IoError {
    using IoError::IoError;
};

void save_generator_checkpoint(const GeneratorModel& model, const Vocab& vocab,
                               const std::string& config_fingerprint, const std::string& path);
void save_discriminator_checkpoint(const DiscriminatorModel& model, const Vocab& vocab,
                                   const std::string& config_fingerprint,
                                   const std::string& path);

GeneratorModel load_generator_checkpoint(const std::string& path, Vocab& vocab,
                                         std::string* config_fingerprint = nullptr);
DiscriminatorModel load_discriminator_checkpoint(const std::string& path, Vocab& vocab,
                                                 std::string* config_fingerprint = nullptr);

// Peeks at the kind byte: "generator" or "discriminator".
std::string checkpoint_kind(const std::string& path);

}  // namespace evotext
