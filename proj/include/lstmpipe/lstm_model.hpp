#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lstmpipe/act_tables.hpp"
#include "lstmpipe/fixed_point.hpp"

namespace lstmpipe {

// Row-major dense matrix of doubles; small models only, no BLAS needed.
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(size_t(r) * c, 0.0) {}
    double& at(int r, int c) { return a[size_t(r) * cols + c]; }
    double at(int r, int c) const { return a[size_t(r) * cols + c]; }
};

using Vec = std::vector<double>;

struct LayerSpec {
    int lx = 1;                    // input vector length
    int lh = 1;                    // hidden vector length
    int ts = 1;                    // timesteps per inference
    bool return_sequences = true;  // emit every h_t, or only the final one
};

// Gate blocks are stored stacked in the fixed order (input, forget,
// candidate, output): row block g*lh..(g+1)*lh-1 belongs to gate g.
struct LstmWeights {
    Matrix wx;  // [4*lh x lx]
    Matrix wh;  // [4*lh x lh]
    Vec b;      // [4*lh]
};

struct DenseHead {
    Matrix w;  // [out x lh_last]
    Vec b;     // [out]
};

struct Formats {
    FixedFormat act{16, 12};   // weights, inputs, hidden state
    FixedFormat wide{32, 24};  // biases, cell state, accumulators
};

struct CellState {
    Vec h, c;
};

struct ModelSpec {
    std::vector<LayerSpec> layers;
    std::vector<LstmWeights> weights;
    int repeat_vector_after = -1;  // index of the latent (last-only) layer; -1 = none
    DenseHead dense;
    Formats formats;
    int ts = 1;
    std::string name;

    int input_width() const { return layers.empty() ? 0 : layers.front().lx; }
    int output_width() const { return dense.w.rows; }
    // Throws SpecError when dimensions do not chain or the sequence-return
    // flags are inconsistent with the latent position.
    void validate() const;
};

enum class Numerics { Float, Fixed };

// One LSTM cell update in float arithmetic.
CellState cell_step(const Vec& x, const CellState& state, const LstmWeights& w,
                    const LayerSpec& spec);

// Full layer from zero initial state; returns all h_t when return_sequences,
// otherwise a single final vector.
std::vector<Vec> layer_forward(const std::vector<Vec>& xs, const LayerSpec& spec,
                               const LstmWeights& w);

// Quantized mirror of the model: raw integer weights plus activation tables.
struct FixedLayer {
    std::vector<std::int32_t> wx, wh;  // act format raw, row-major
    std::vector<std::int64_t> b;       // wide format raw
};

struct FixedModel {
    std::vector<LayerSpec> layers;
    std::vector<FixedLayer> fx_layers;
    int repeat_vector_after = -1;
    std::vector<std::int32_t> dense_w;  // act format raw
    std::vector<std::int64_t> dense_b;  // wide format raw
    int dense_out = 0;
    Formats formats;
    int ts = 1;
    ActTables tables;
};

FixedModel quantize_model(const ModelSpec& model);

struct CellStateFx {
    std::vector<std::int32_t> h;  // act format raw
    std::vector<std::int64_t> c;  // wide format raw
};

// One LSTM cell update in fixed-point arithmetic. Gate pre-activations are
// accumulated at the wide format and rescaled once per gate; the forget-gate
// product against the wide cell state runs at double width before a single
// rounding back to wide.
CellStateFx fixed_cell_step(const std::vector<std::int32_t>& x_raw, const CellStateFx& state,
                            const FixedLayer& w, const LayerSpec& spec, const Formats& fmts,
                            const ActTables& tables);

// End-to-end autoencoder forward pass: encoder layers -> latent repeated TS
// times -> decoder layers -> per-timestep dense head. Input and output are
// TS rows of input_width/output_width doubles; the fixed path quantizes
// inputs, runs entirely on raw integers, and dequantizes the result.
std::vector<Vec> model_forward(const std::vector<Vec>& input, const ModelSpec& model,
                               Numerics numerics);
std::vector<Vec> model_forward_fixed(const std::vector<Vec>& input, const FixedModel& model);

}  // namespace lstmpipe
