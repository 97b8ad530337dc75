#pragma once

#include <cstdint>

#include "lstmpipe/lstm_model.hpp"

namespace lstmpipe {

// Deterministic helpers shared by the trainer, the manifest generator and the
// tests. Weight matrices get uniform values in +-sqrt(6 / (lx + 2*lh)) (the
// dense head uses +-0.5); biases start at zero. The draw order is frozen:
// per layer wx then wh row-major, then the dense matrix.
void xavier_init(ModelSpec& model, std::uint64_t seed);

// Two-layer autoencoder: 1 -> 9 (latent) -> repeat -> 9 -> dense 1, TS = 8.
ModelSpec small_autoencoder(std::uint64_t seed = 42);

// Four-layer autoencoder: 1 -> 32 -> 8 (latent) -> repeat -> 8 -> 32 ->
// dense 1, TS = 8.
ModelSpec nominal_autoencoder(std::uint64_t seed = 42);

}  // namespace lstmpipe
