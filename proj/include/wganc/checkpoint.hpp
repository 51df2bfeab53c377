#pragma once

#include <filesystem>

#include "wganc/families.hpp"
#include "wganc/nn.hpp"

namespace wganc::checkpoint {

// Text checkpoints: a header with the spec and init seed, then per-layer
// shapes and row-major values as hex floats, which round-trip bit-exactly.
void save_mlp(const std::filesystem::path& path, const nn::MlpParams& params);
nn::MlpParams load_mlp(const std::filesystem::path& path);

// Bank checkpoints store each critic's transform descriptor (kind +
// parameter) alongside its parameters.
void save_bank(const std::filesystem::path& path, const families::CriticBank& bank);
families::CriticBank load_bank(const std::filesystem::path& path);

}  // namespace wganc::checkpoint
