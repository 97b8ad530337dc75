#include "lstmpipe/reference_models.hpp"

#include <cmath>
#include <random>

namespace lstmpipe {

namespace {

// 53-bit uniform in [0, 1); hand-rolled so the stream does not depend on the
// standard library's distribution implementation.
double u01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

double uniform_pm(std::mt19937_64& rng, double limit) { return (2.0 * u01(rng) - 1.0) * limit; }

ModelSpec make_autoencoder(std::string name, std::vector<LayerSpec> layers, int latent_idx,
                           int dense_out, int ts) {
    ModelSpec m;
    m.name = std::move(name);
    m.ts = ts;
    m.layers = std::move(layers);
    m.repeat_vector_after = latent_idx;
    for (auto& s : m.layers) {
        s.ts = ts;
        LstmWeights w;
        w.wx = Matrix(4 * s.lh, s.lx);
        w.wh = Matrix(4 * s.lh, s.lh);
        w.b.assign(size_t(4) * s.lh, 0.0);
        m.weights.push_back(std::move(w));
    }
    m.dense.w = Matrix(dense_out, m.layers.back().lh);
    m.dense.b.assign(dense_out, 0.0);
    return m;
}

}  // namespace

void xavier_init(ModelSpec& model, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (size_t k = 0; k < model.layers.size(); ++k) {
        const auto& s = model.layers[k];
        double limit = std::sqrt(6.0 / double(s.lx + 2 * s.lh));
        for (double& v : model.weights[k].wx.a) v = uniform_pm(rng, limit);
        for (double& v : model.weights[k].wh.a) v = uniform_pm(rng, limit);
        for (double& v : model.weights[k].b) v = 0.0;
    }
    for (double& v : model.dense.w.a) v = uniform_pm(rng, 0.5);
    for (double& v : model.dense.b) v = 0.0;
}

ModelSpec small_autoencoder(std::uint64_t seed) {
    ModelSpec m = make_autoencoder("small",
                                   {{1, 9, 8, false}, {9, 9, 8, true}},
                                   /*latent_idx=*/0, /*dense_out=*/1, /*ts=*/8);
    xavier_init(m, seed);
    m.validate();
    return m;
}

ModelSpec nominal_autoencoder(std::uint64_t seed) {
    ModelSpec m = make_autoencoder(
        "nominal",
        {{1, 32, 8, true}, {32, 8, 8, false}, {8, 8, 8, true}, {8, 32, 8, true}},
        /*latent_idx=*/1, /*dense_out=*/1, /*ts=*/8);
    xavier_init(m, seed);
    m.validate();
    return m;
}

}  // namespace lstmpipe
