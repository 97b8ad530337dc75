#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lstmpipe/lstm_model.hpp"

namespace lstmpipe {

// Model manifests are single JSON documents (schema version 1) holding layer
// dimensions, numeric formats, the gate block order marker ("ifgo"), and raw
// integer weight arrays (activation format for matrices, wide format for
// biases), so a manifest pins the fixed-point model bit-exactly. Activation
// tables may be embedded for byte-level reproduction across machines; when
// absent they are rebuilt deterministically from the formats.

struct LoadedManifest {
    ModelSpec model;                  // weights dequantized from the raw arrays
    std::optional<ActTables> tables;  // present when the file embeds tables
};

LoadedManifest load_manifest(const std::string& path);
ModelSpec load_model(const std::string& path);

void save_manifest(const std::string& path, const ModelSpec& model, bool embed_tables = true);

// Builds the quantized execution model, preferring embedded tables.
FixedModel fixed_model_from(const LoadedManifest& m);

// One window as CSV: one row per timestep, one column per feature.
std::vector<Vec> read_window_csv(const std::string& path);
void write_sequence_csv(const std::string& path, const std::vector<Vec>& rows);

}  // namespace lstmpipe
