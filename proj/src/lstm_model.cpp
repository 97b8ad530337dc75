#include "lstmpipe/lstm_model.hpp"

#include <cmath>

#include "lstmpipe/errors.hpp"

namespace lstmpipe {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check(bool ok, const std::string& msg) {
    if (!ok) throw SpecError(msg);
}

}  // namespace

void ModelSpec::validate() const {
    check(!layers.empty(), "model has no layers");
    check(layers.size() == weights.size(), "layer/weight count mismatch");
    check(ts >= 1, "timestep count must be >= 1");
    check(formats.act.valid() && formats.wide.valid(), "invalid numeric formats");
    // The fixed-point engine accumulates products exactly: the wide format
    // must carry exactly the product resolution of two activation operands.
    check(formats.wide.frac_bits == 2 * formats.act.frac_bits,
          "wide format must have twice the activation fraction bits");
    check(formats.wide.word_bits > formats.act.word_bits,
          "wide format must be wider than the activation format");

    for (size_t k = 0; k < layers.size(); ++k) {
        const auto& s = layers[k];
        const auto& w = weights[k];
        check(s.lx >= 1 && s.lh >= 1, "layer dimensions must be >= 1");
        check(s.ts == ts, "per-layer timestep count must match the model");
        check(w.wx.rows == 4 * s.lh && w.wx.cols == s.lx, "wx dimensions mismatch");
        check(w.wh.rows == 4 * s.lh && w.wh.cols == s.lh, "wh dimensions mismatch");
        check(int(w.b.size()) == 4 * s.lh, "bias length mismatch");
        if (k > 0) check(s.lx == layers[k - 1].lh, "layer input width must chain from previous layer");
        bool is_latent = int(k) == repeat_vector_after;
        check(s.return_sequences == !is_latent,
              "exactly the latent layer must return only its final hidden vector");
    }
    check(repeat_vector_after >= -1 && repeat_vector_after < int(layers.size()),
          "latent layer index out of range");
    check(dense.w.rows >= 1, "dense head must have at least one output");
    check(dense.w.cols == layers.back().lh, "dense head width must match the last layer");
    check(int(dense.b.size()) == dense.w.rows, "dense bias length mismatch");
}

CellState cell_step(const Vec& x, const CellState& state, const LstmWeights& w,
                    const LayerSpec& spec) {
    check(int(x.size()) == spec.lx, "cell_step: input width mismatch");
    check(int(state.h.size()) == spec.lh && int(state.c.size()) == spec.lh,
          "cell_step: state width mismatch");

    const int lh = spec.lh;
    Vec pre(4 * lh, 0.0);
    for (int r = 0; r < 4 * lh; ++r) {
        double acc = w.b[r];
        for (int c = 0; c < spec.lx; ++c) acc += w.wx.at(r, c) * x[c];
        for (int c = 0; c < lh; ++c) acc += w.wh.at(r, c) * state.h[c];
        pre[r] = acc;
    }

    CellState next{Vec(lh), Vec(lh)};
    for (int j = 0; j < lh; ++j) {
        double i = sigmoid(pre[j]);
        double f = sigmoid(pre[lh + j]);
        double g = std::tanh(pre[2 * lh + j]);
        double o = sigmoid(pre[3 * lh + j]);
        next.c[j] = f * state.c[j] + i * g;
        next.h[j] = o * std::tanh(next.c[j]);
    }
    return next;
}

std::vector<Vec> layer_forward(const std::vector<Vec>& xs, const LayerSpec& spec,
                               const LstmWeights& w) {
    check(int(xs.size()) == spec.ts, "layer_forward: sequence length mismatch");
    CellState state{Vec(spec.lh, 0.0), Vec(spec.lh, 0.0)};
    std::vector<Vec> out;
    for (int t = 0; t < spec.ts; ++t) {
        state = cell_step(xs[t], state, w, spec);
        if (spec.return_sequences) out.push_back(state.h);
    }
    if (!spec.return_sequences) out.push_back(state.h);
    return out;
}

FixedModel quantize_model(const ModelSpec& model) {
    model.validate();
    FixedModel fm;
    fm.layers = model.layers;
    fm.repeat_vector_after = model.repeat_vector_after;
    fm.formats = model.formats;
    fm.ts = model.ts;
    fm.tables = build_act_tables(model.formats.act);

    auto q_act = [&](double v) { return std::int32_t(quantize(v, model.formats.act).raw); };
    auto q_wide = [&](double v) { return quantize(v, model.formats.wide).raw; };

    for (size_t k = 0; k < model.layers.size(); ++k) {
        FixedLayer fl;
        for (double v : model.weights[k].wx.a) fl.wx.push_back(q_act(v));
        for (double v : model.weights[k].wh.a) fl.wh.push_back(q_act(v));
        for (double v : model.weights[k].b) fl.b.push_back(q_wide(v));
        fm.fx_layers.push_back(std::move(fl));
    }
    for (double v : model.dense.w.a) fm.dense_w.push_back(q_act(v));
    for (double v : model.dense.b) fm.dense_b.push_back(q_wide(v));
    fm.dense_out = model.dense.w.rows;
    return fm;
}

CellStateFx fixed_cell_step(const std::vector<std::int32_t>& x_raw, const CellStateFx& state,
                            const FixedLayer& w, const LayerSpec& spec, const Formats& fmts,
                            const ActTables& tables) {
    check(int(x_raw.size()) == spec.lx, "fixed_cell_step: input width mismatch");
    check(int(state.h.size()) == spec.lh && int(state.c.size()) == spec.lh,
          "fixed_cell_step: state width mismatch");

    const int lh = spec.lh, lx = spec.lx;
    const int fa = fmts.act.frac_bits;

    // Gate pre-activations: products carry 2*fa fraction bits, which by the
    // format contract equals the wide fraction; the bias adds in directly and
    // a single round-to-nearest-even brings the sum down to the activation
    // format.
    std::vector<std::int64_t> pre(4 * lh);
    for (int r = 0; r < 4 * lh; ++r) {
        std::int64_t acc = w.b[r];
        const std::int32_t* wxr = &w.wx[size_t(r) * lx];
        for (int c = 0; c < lx; ++c) acc += std::int64_t(wxr[c]) * x_raw[c];
        const std::int32_t* whr = &w.wh[size_t(r) * lh];
        for (int c = 0; c < lh; ++c) acc += std::int64_t(whr[c]) * state.h[c];
        pre[r] = saturate_raw(rne_shift(acc, fa), fmts.act);
    }

    CellStateFx next{std::vector<std::int32_t>(lh), std::vector<std::int64_t>(lh)};
    for (int j = 0; j < lh; ++j) {
        std::int64_t i = sigmoid_lut_raw(pre[j], tables);
        std::int64_t f = sigmoid_lut_raw(pre[lh + j], tables);
        std::int64_t g = tanh_pwl_raw(pre[2 * lh + j], tables);
        std::int64_t o = sigmoid_lut_raw(pre[3 * lh + j], tables);

        // f (act) times c (wide) runs at act+wide fraction bits and rounds
        // once back to wide; i*g lands on the wide scale directly.
        __int128 fc = __int128(f) * state.c[j];
        std::int64_t c_new = saturate_raw(__int128(rne_shift(fc, fa)) + __int128(i) * g,
                                          fmts.wide);
        next.c[j] = c_new;

        std::int64_t c_act = saturate_raw(
            rne_shift(c_new, fmts.wide.frac_bits - fa), fmts.act);
        std::int64_t tc = tanh_pwl_raw(c_act, tables);
        next.h[j] = std::int32_t(saturate_raw(rne_shift(__int128(o) * tc, fa), fmts.act));
    }
    return next;
}

std::vector<Vec> model_forward_fixed(const std::vector<Vec>& input, const FixedModel& model) {
    check(int(input.size()) == model.ts, "model_forward: input sequence length mismatch");
    const int fa = model.formats.act.frac_bits;
    const double lsb = model.formats.act.lsb();

    std::vector<std::vector<std::int32_t>> cur(model.ts);
    for (int t = 0; t < model.ts; ++t) {
        check(int(input[t].size()) == model.layers.front().lx,
              "model_forward: input width mismatch");
        for (double v : input[t])
            cur[t].push_back(std::int32_t(quantize(v, model.formats.act).raw));
    }

    for (size_t k = 0; k < model.layers.size(); ++k) {
        const auto& spec = model.layers[k];
        CellStateFx state{std::vector<std::int32_t>(spec.lh, 0),
                          std::vector<std::int64_t>(spec.lh, 0)};
        std::vector<std::vector<std::int32_t>> out;
        for (int t = 0; t < model.ts; ++t) {
            state = fixed_cell_step(cur[t], state, model.fx_layers[k], spec, model.formats,
                                    model.tables);
            if (spec.return_sequences) out.push_back(state.h);
        }
        if (int(k) == model.repeat_vector_after) {
            cur.assign(model.ts, state.h);  // broadcast the latent vector
        } else {
            check(spec.return_sequences, "non-latent layers must return sequences");
            cur = std::move(out);
        }
    }

    const int lh = model.layers.back().lh;
    std::vector<Vec> result(model.ts, Vec(model.dense_out));
    for (int t = 0; t < model.ts; ++t) {
        for (int o = 0; o < model.dense_out; ++o) {
            std::int64_t acc = model.dense_b[o];
            const std::int32_t* wr = &model.dense_w[size_t(o) * lh];
            for (int c = 0; c < lh; ++c) acc += std::int64_t(wr[c]) * cur[t][c];
            result[t][o] = double(saturate_raw(rne_shift(acc, fa), model.formats.act)) * lsb;
        }
    }
    return result;
}

std::vector<Vec> model_forward(const std::vector<Vec>& input, const ModelSpec& model,
                               Numerics numerics) {
    model.validate();
    if (numerics == Numerics::Fixed) return model_forward_fixed(input, quantize_model(model));

    check(int(input.size()) == model.ts, "model_forward: input sequence length mismatch");
    std::vector<Vec> cur = input;
    for (size_t k = 0; k < model.layers.size(); ++k) {
        const auto& spec = model.layers[k];
        check(int(cur[0].size()) == spec.lx, "model_forward: width mismatch entering layer");
        std::vector<Vec> out = layer_forward(cur, spec, model.weights[k]);
        if (int(k) == model.repeat_vector_after) {
            cur.assign(model.ts, out.back());  // broadcast the latent vector
        } else {
            check(spec.return_sequences, "non-latent layers must return sequences");
            cur = std::move(out);
        }
    }
    std::vector<Vec> result(model.ts, Vec(model.dense.w.rows));
    for (int t = 0; t < model.ts; ++t) {
        for (int o = 0; o < model.dense.w.rows; ++o) {
            double acc = model.dense.b[o];
            for (int c = 0; c < model.dense.w.cols; ++c) acc += model.dense.w.at(o, c) * cur[t][c];
            result[t][o] = acc;
        }
    }
    return result;
}

}  // namespace lstmpipe
