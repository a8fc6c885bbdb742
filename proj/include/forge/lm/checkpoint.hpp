#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "forge/lm/model.hpp"
#include "forge/lm/tokenizer.hpp"

namespace forge::lm {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything needed to resume or sample: config, tokenizer, base weights,
/// adapters and the chain of stages that produced them.
struct Checkpoint {
    TinyLm model;
    Tokenizer tokenizer;
    std::optional<AdapterWeights> adapters;
    std::vector<std::string> lineage;  // "base", then "ci", "vd", "ti" as trained
    std::string rng_state;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary container; every weight is stored as a little-endian 32-bit float.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rounds every weight to float32 so in-memory state matches a saved copy.
void round_to_stored_precision(Checkpoint& ckpt);

}  // namespace forge::lm
