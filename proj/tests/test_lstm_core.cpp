#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "lstmpipe/errors.hpp"
#include "lstmpipe/lstm_model.hpp"
#include "lstmpipe/reference_models.hpp"

using namespace lstmpipe;

namespace {

LstmWeights zero_weights(int lx, int lh) {
    LstmWeights w;
    w.wx = Matrix(4 * lh, lx);
    w.wh = Matrix(4 * lh, lh);
    w.b.assign(4 * lh, 0.0);
    return w;
}

// Plain re-statement of the gate equations, kept structurally independent of
// the library loop (explicit gate vectors, no shared pre-activation array).
CellState naive_step(const Vec& x, const CellState& st, const LstmWeights& w, int lx, int lh) {
    auto dot_row = [&](int r) {
        double acc = w.b[r];
        for (int c = 0; c < lx; ++c) acc += w.wx.at(r, c) * x[c];
        for (int c = 0; c < lh; ++c) acc += w.wh.at(r, c) * st.h[c];
        return acc;
    };
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    CellState nx{Vec(lh), Vec(lh)};
    for (int j = 0; j < lh; ++j) {
        double i = sig(dot_row(j));
        double f = sig(dot_row(lh + j));
        double g = std::tanh(dot_row(2 * lh + j));
        double o = sig(dot_row(3 * lh + j));
        nx.c[j] = f * st.c[j] + i * g;
        nx.h[j] = o * std::tanh(nx.c[j]);
    }
    return nx;
}

void fill_uniform(ModelSpec& m, std::uint64_t seed, double lo, double hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& w : m.weights) {
        for (double& v : w.wx.a) v = u(rng);
        for (double& v : w.wh.a) v = u(rng);
        for (double& v : w.b) v = u(rng) * 0.25;
    }
    for (double& v : m.dense.w.a) v = u(rng);
    for (double& v : m.dense.b) v = u(rng) * 0.25;
}

}  // namespace

TEST_CASE("zero weights and state give zero outputs") {
    LayerSpec spec{3, 4, 5, true};
    LstmWeights w = zero_weights(3, 4);
    CellState st{Vec(4, 0.0), Vec(4, 0.0)};
    CellState nx = cell_step(Vec{1.0, -2.0, 0.5}, st, w, spec);
    for (double v : nx.h) CHECK(v == 0.0);
    for (double v : nx.c) CHECK(v == 0.0);
    std::vector<Vec> xs(5, Vec{0.3, 0.7, -0.5});
    auto out = layer_forward(xs, spec, w);
    REQUIRE(out.size() == 5);
    for (auto& h : out)
        for (double v : h) CHECK(v == 0.0);
}

TEST_CASE("unit cell with zero weights halves the carried cell state") {
    // All pre-activations are zero, so i=f=o=0.5 and g=0; with c=1 carried in,
    // the new cell is 0.5 and the hidden output is 0.5*tanh(0.5).
    LayerSpec spec{1, 1, 1, true};
    LstmWeights w = zero_weights(1, 1);
    CellState st{Vec{0.0}, Vec{1.0}};
    CellState nx = cell_step(Vec{0.7}, st, w, spec);
    CHECK(nx.c[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(nx.h[0] == doctest::Approx(0.5 * std::tanh(0.5)).epsilon(1e-15));
    CHECK(nx.h[0] == doctest::Approx(0.23105857863).epsilon(1e-9));

    // same (x-independent) result for a different input
    CellState nx2 = cell_step(Vec{-3.0}, st, w, spec);
    CHECK(nx2.h[0] == nx.h[0]);

    // fixed-point path lands within 2^-6 of the float value
    Formats fmts;
    ActTables tables = build_act_tables(fmts.act);
    FixedLayer fl;
    fl.wx.assign(4, 0);
    fl.wh.assign(4, 0);
    fl.b.assign(4, 0);
    CellStateFx stf{{0}, {std::int64_t(1) << fmts.wide.frac_bits}};
    CellStateFx nxf = fixed_cell_step({std::int32_t(quantize(0.7, fmts.act).raw)}, stf, fl, spec,
                                      fmts, tables);
    double hf = double(nxf.h[0]) * fmts.act.lsb();
    double cf = double(nxf.c[0]) * fmts.wide.lsb();
    CHECK(std::fabs(hf - 0.5 * std::tanh(0.5)) <= std::exp2(-6));
    CHECK(std::fabs(cf - 0.5) <= std::exp2(-6));
}

TEST_CASE("a one-step layer equals a single cell update") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    LayerSpec spec{2, 3, 1, true};
    LstmWeights w = zero_weights(2, 3);
    for (double& v : w.wx.a) v = u(rng);
    for (double& v : w.wh.a) v = u(rng);
    for (double& v : w.b) v = u(rng);
    Vec x{0.4, -0.9};
    auto out = layer_forward({x}, spec, w);
    CellState st{Vec(3, 0.0), Vec(3, 0.0)};
    CellState nx = cell_step(x, st, w, spec);
    REQUIRE(out.size() == 1);
    for (int j = 0; j < 3; ++j) CHECK(out[0][j] == nx.h[j]);
}

TEST_CASE("layer_forward matches a step-by-step reference") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    LayerSpec spec{2, 2, 3, true};
    LstmWeights w = zero_weights(2, 2);
    for (double& v : w.wx.a) v = u(rng);
    for (double& v : w.wh.a) v = u(rng);
    for (double& v : w.b) v = u(rng);
    std::vector<Vec> xs;
    for (int t = 0; t < 3; ++t) xs.push_back(Vec{u(rng), u(rng)});

    auto got = layer_forward(xs, spec, w);
    CellState st{Vec(2, 0.0), Vec(2, 0.0)};
    REQUIRE(got.size() == 3);
    for (int t = 0; t < 3; ++t) {
        st = naive_step(xs[t], st, w, 2, 2);
        for (int j = 0; j < 2; ++j) CHECK(got[t][j] == st.h[j]);
    }

    // last-only mode returns exactly the final hidden vector
    spec.return_sequences = false;
    auto last = layer_forward(xs, spec, w);
    REQUIRE(last.size() == 1);
    for (int j = 0; j < 2; ++j) CHECK(last[0][j] == st.h[j]);
}

TEST_CASE("dimension violations are rejected") {
    LayerSpec spec{2, 3, 4, true};
    LstmWeights w = zero_weights(2, 3);
    CellState st{Vec(3, 0.0), Vec(3, 0.0)};
    CHECK_THROWS_AS(cell_step(Vec{1.0}, st, w, spec), SpecError);
    CellState bad{Vec(2, 0.0), Vec(3, 0.0)};
    CHECK_THROWS_AS(cell_step(Vec{1.0, 2.0}, bad, w, spec), SpecError);
    CHECK_THROWS_AS(layer_forward(std::vector<Vec>(3, Vec{0.0, 0.0}), spec, w), SpecError);
}

TEST_CASE("model validation enforces the autoencoder contract") {
    ModelSpec m = small_autoencoder();
    CHECK_NOTHROW(m.validate());
    ModelSpec wrong_flag = m;
    wrong_flag.layers[0].return_sequences = true;  // latent layer must be last-only
    CHECK_THROWS_AS(wrong_flag.validate(), SpecError);
    ModelSpec broken_chain = m;
    broken_chain.layers[1].lx = 5;
    CHECK_THROWS_AS(broken_chain.validate(), SpecError);
    ModelSpec bad_formats = m;
    bad_formats.formats.wide = FixedFormat{32, 20};  // wide fraction must be twice act
    CHECK_THROWS_AS(bad_formats.validate(), SpecError);
    ModelSpec bad_dense = m;
    bad_dense.dense.w = Matrix(1, 5);
    CHECK_THROWS_AS(bad_dense.validate(), SpecError);
}

TEST_CASE("model_forward is the composition of its layers") {
    ModelSpec m = small_autoencoder(7);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vec> input;
    for (int t = 0; t < m.ts; ++t) input.push_back(Vec{u(rng)});

    auto got = model_forward(input, m, Numerics::Float);

    // hand-compose: encoder (latent, last-only) -> repeat -> decoder -> dense
    auto latent = layer_forward(input, m.layers[0], m.weights[0]);
    REQUIRE(latent.size() == 1);
    std::vector<Vec> repeated(m.ts, latent[0]);
    auto decoded = layer_forward(repeated, m.layers[1], m.weights[1]);
    REQUIRE(got.size() == size_t(m.ts));
    for (int t = 0; t < m.ts; ++t) {
        for (int o = 0; o < m.dense.w.rows; ++o) {
            double acc = m.dense.b[o];
            for (int c = 0; c < m.dense.w.cols; ++c) acc += m.dense.w.at(o, c) * decoded[t][c];
            CHECK(got[t][o] == doctest::Approx(acc).epsilon(1e-12));
        }
    }
}

TEST_CASE("identity dense head passes the last layer through") {
    ModelSpec m;
    m.layers = {LayerSpec{1, 2, 4, true}};
    m.weights = {zero_weights(1, 2)};
    fill_uniform(m, 5, -0.8, 0.8);
    m.dense.w = Matrix(2, 2);
    m.dense.w.at(0, 0) = 1.0;
    m.dense.w.at(1, 1) = 1.0;
    m.dense.b.assign(2, 0.0);
    m.ts = 4;
    m.name = "probe";
    m.validate();
    std::vector<Vec> input(4, Vec{0.5});
    auto out = model_forward(input, m, Numerics::Float);
    auto hs = layer_forward(input, m.layers[0], m.weights[0]);
    REQUIRE(out.size() == 4);
    for (int t = 0; t < 4; ++t)
        for (int j = 0; j < 2; ++j) CHECK(out[t][j] == doctest::Approx(hs[t][j]).epsilon(1e-12));
}

TEST_CASE("fixed-point model output tracks the float model") {
    // weights in [-1, 1], unit feature, TS = 8: every element of the fixed
    // reconstruction stays within 2^-5 of the float reconstruction
    ModelSpec m = small_autoencoder(3);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<Vec> input;
        for (int t = 0; t < m.ts; ++t) input.push_back(Vec{u(rng)});
        auto fl = model_forward(input, m, Numerics::Float);
        auto fx = model_forward(input, m, Numerics::Fixed);
        REQUIRE(fl.size() == fx.size());
        for (size_t t = 0; t < fl.size(); ++t)
            for (size_t o = 0; o < fl[t].size(); ++o)
                CHECK(std::fabs(fl[t][o] - fx[t][o]) <= std::exp2(-5));
    }
}

TEST_CASE("random cell agreement between numerics at hidden width four") {
    // one quantized cell update stays within 2^-6 of the float update
    LayerSpec spec{4, 4, 1, true};
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    Formats fmts;
    ActTables tables = build_act_tables(fmts.act);
    for (int rep = 0; rep < 20; ++rep) {
        LstmWeights w = zero_weights(4, 4);
        for (double& v : w.wx.a) v = u(rng);
        for (double& v : w.wh.a) v = u(rng);
        for (double& v : w.b) v = 0.25 * u(rng);
        Vec x(4);
        for (double& v : x) v = u(rng);

        CellState st{Vec(4, 0.0), Vec(4, 0.0)};
        CellState fl = cell_step(x, st, w, spec);

        FixedLayer wq;
        for (double v : w.wx.a) wq.wx.push_back(std::int32_t(quantize(v, fmts.act).raw));
        for (double v : w.wh.a) wq.wh.push_back(std::int32_t(quantize(v, fmts.act).raw));
        for (double v : w.b) wq.b.push_back(quantize(v, fmts.wide).raw);
        std::vector<std::int32_t> xq;
        for (double v : x) xq.push_back(std::int32_t(quantize(v, fmts.act).raw));
        CellStateFx stf{std::vector<std::int32_t>(4, 0), std::vector<std::int64_t>(4, 0)};
        CellStateFx fx = fixed_cell_step(xq, stf, wq, spec, fmts, tables);
        for (int j = 0; j < 4; ++j) {
            CHECK(std::fabs(double(fx.h[j]) * fmts.act.lsb() - fl.h[j]) <= std::exp2(-6));
            CHECK(std::fabs(double(fx.c[j]) * fmts.wide.lsb() - fl.c[j]) <= std::exp2(-6));
        }
    }
}

TEST_CASE("fixed execution is deterministic") {
    ModelSpec m = nominal_autoencoder(42);
    std::vector<Vec> input;
    for (int t = 0; t < m.ts; ++t) input.push_back(Vec{0.1 * t - 0.35});
    FixedModel fm = quantize_model(m);
    auto a = model_forward_fixed(input, fm);
    auto b = model_forward_fixed(input, fm);
    auto c = model_forward(input, m, Numerics::Fixed);
    REQUIRE(a.size() == b.size());
    for (size_t t = 0; t < a.size(); ++t)
        for (size_t j = 0; j < a[t].size(); ++j) {
            CHECK(a[t][j] == b[t][j]);
            CHECK(a[t][j] == c[t][j]);
        }
}

TEST_CASE("reference architectures have the documented shapes") {
    ModelSpec s = small_autoencoder();
    CHECK(s.layers.size() == 2);
    CHECK(s.layers[0].lx == 1);
    CHECK(s.layers[0].lh == 9);
    CHECK_FALSE(s.layers[0].return_sequences);
    CHECK(s.repeat_vector_after == 0);
    CHECK(s.ts == 8);
    CHECK(s.output_width() == 1);
    CHECK_NOTHROW(s.validate());

    ModelSpec n = nominal_autoencoder();
    CHECK(n.layers.size() == 4);
    CHECK(n.layers[0].lh == 32);
    CHECK(n.layers[1].lh == 8);
    CHECK_FALSE(n.layers[1].return_sequences);
    CHECK(n.repeat_vector_after == 1);
    CHECK(n.layers[3].lh == 32);
    CHECK(n.output_width() == 1);
    CHECK_NOTHROW(n.validate());

    // deterministic per seed, different across seeds
    ModelSpec s2 = small_autoencoder();
    CHECK(s.weights[0].wx.a == s2.weights[0].wx.a);
    ModelSpec s3 = small_autoencoder(43);
    CHECK(s.weights[0].wx.a != s3.weights[0].wx.a);
}
