#include "lstmpipe/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "lstmpipe/errors.hpp"
#include "lstmpipe/reference_models.hpp"

namespace lstmpipe {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Deterministic uniform/normal draws layered over mt19937_64 so the stream
// does not depend on standard-library distribution internals.
struct Rng {
    std::mt19937_64 gen;
    bool has_spare = false;
    double spare = 0.0;

    explicit Rng(std::uint64_t seed) : gen(seed) {}

    double u01() { return double(gen() >> 11) * 0x1.0p-53; }  // [0, 1)

    double normal() {  // Box-Muller, cached second draw
        if (has_spare) {
            has_spare = false;
            return spare;
        }
        double u1 = double((gen() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        double u2 = u01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * kPi * u2;
        spare = r * std::sin(a);
        has_spare = true;
        return r * std::cos(a);
    }
};

std::vector<double> ar1_window(Rng& rng, int ts, double alpha) {
    const int warmup = 8;
    double b = 0.0;
    std::vector<double> out(ts);
    for (int i = 0; i < ts + warmup; ++i) {
        double n = rng.normal();
        b = i == 0 ? n : alpha * b + n;
        if (i >= warmup) out[i - warmup] = b;
    }
    return out;
}

void normalize_window(std::vector<double>& w) {
    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= double(w.size());
    double var = 0.0;
    for (double& v : w) {
        v -= mean;
        var += v * v;
    }
    double sd = std::sqrt(var / double(w.size()));
    if (sd > 1e-12)
        for (double& v : w) v /= sd;
}

double rms(const std::vector<double>& w) {
    double s = 0.0;
    for (double v : w) s += v * v;
    return std::sqrt(s / double(w.size()));
}

// ---- BPTT ---------------------------------------------------------------

struct StepCache {
    Vec x, h_prev, c_prev, i, f, g, o, c, tc;
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Forward pass of one layer recording everything the backward pass needs.
std::vector<StepCache> layer_forward_cached(const std::vector<Vec>& xs, const LayerSpec& spec,
                                            const LstmWeights& w) {
    const int lh = spec.lh;
    Vec h(lh, 0.0), c(lh, 0.0);
    std::vector<StepCache> cache(spec.ts);
    for (int t = 0; t < spec.ts; ++t) {
        StepCache& sc = cache[t];
        sc.x = xs[t];
        sc.h_prev = h;
        sc.c_prev = c;
        sc.i.resize(lh);
        sc.f.resize(lh);
        sc.g.resize(lh);
        sc.o.resize(lh);
        sc.c.resize(lh);
        sc.tc.resize(lh);
        for (int j = 0; j < lh; ++j) {
            double pi = w.b[j], pf = w.b[lh + j], pg = w.b[2 * lh + j], po = w.b[3 * lh + j];
            for (int cidx = 0; cidx < spec.lx; ++cidx) {
                double xv = xs[t][cidx];
                pi += w.wx.at(j, cidx) * xv;
                pf += w.wx.at(lh + j, cidx) * xv;
                pg += w.wx.at(2 * lh + j, cidx) * xv;
                po += w.wx.at(3 * lh + j, cidx) * xv;
            }
            for (int cidx = 0; cidx < lh; ++cidx) {
                double hv = h[cidx];
                pi += w.wh.at(j, cidx) * hv;
                pf += w.wh.at(lh + j, cidx) * hv;
                pg += w.wh.at(2 * lh + j, cidx) * hv;
                po += w.wh.at(3 * lh + j, cidx) * hv;
            }
            sc.i[j] = sigmoid(pi);
            sc.f[j] = sigmoid(pf);
            sc.g[j] = std::tanh(pg);
            sc.o[j] = sigmoid(po);
            sc.c[j] = sc.f[j] * c[j] + sc.i[j] * sc.g[j];
            sc.tc[j] = std::tanh(sc.c[j]);
        }
        for (int j = 0; j < lh; ++j) {
            c[j] = cache[t].c[j];
            h[j] = cache[t].o[j] * cache[t].tc[j];
        }
    }
    return cache;
}

Vec hidden_of(const StepCache& sc) {
    Vec h(sc.o.size());
    for (size_t j = 0; j < h.size(); ++j) h[j] = sc.o[j] * sc.tc[j];
    return h;
}

// Backward pass; dhs holds per-timestep gradients on h_t, dh_last an extra
// gradient on the final hidden vector. Returns gradients on the inputs and
// accumulates weight gradients into `grad`.
std::vector<Vec> layer_backward(const std::vector<StepCache>& cache, const LayerSpec& spec,
                                const LstmWeights& w, const std::vector<Vec>& dhs,
                                const Vec& dh_last, LstmWeights& grad) {
    const int lh = spec.lh, lx = spec.lx;
    Vec dh = dh_last, dc(lh, 0.0);
    std::vector<Vec> dxs(spec.ts, Vec(lx, 0.0));
    for (int t = spec.ts - 1; t >= 0; --t) {
        const StepCache& sc = cache[t];
        Vec da(4 * lh);
        for (int j = 0; j < lh; ++j) {
            double dhj = dh[j] + (dhs.empty() ? 0.0 : dhs[t][j]);
            double doj = dhj * sc.tc[j];
            double dcj = dc[j] + dhj * sc.o[j] * (1.0 - sc.tc[j] * sc.tc[j]);
            double dfj = dcj * sc.c_prev[j];
            double dij = dcj * sc.g[j];
            double dgj = dcj * sc.i[j];
            da[j] = dij * sc.i[j] * (1.0 - sc.i[j]);
            da[lh + j] = dfj * sc.f[j] * (1.0 - sc.f[j]);
            da[2 * lh + j] = dgj * (1.0 - sc.g[j] * sc.g[j]);
            da[3 * lh + j] = doj * sc.o[j] * (1.0 - sc.o[j]);
            dc[j] = dcj * sc.f[j];
        }
        for (int r = 0; r < 4 * lh; ++r) {
            double dar = da[r];
            if (dar == 0.0) continue;
            for (int cidx = 0; cidx < lx; ++cidx) grad.wx.at(r, cidx) += dar * sc.x[cidx];
            for (int cidx = 0; cidx < lh; ++cidx) grad.wh.at(r, cidx) += dar * sc.h_prev[cidx];
            grad.b[r] += dar;
        }
        for (int cidx = 0; cidx < lx; ++cidx) {
            double s = 0.0;
            for (int r = 0; r < 4 * lh; ++r) s += da[r] * w.wx.at(r, cidx);
            dxs[t][cidx] = s;
        }
        for (int j = 0; j < lh; ++j) {
            double s = 0.0;
            for (int r = 0; r < 4 * lh; ++r) s += da[r] * w.wh.at(r, j);
            dh[j] = s;
        }
    }
    return dxs;
}

Gradients zero_gradients(const ModelSpec& model) {
    Gradients g;
    for (size_t k = 0; k < model.layers.size(); ++k) {
        LstmWeights z;
        z.wx = Matrix(model.weights[k].wx.rows, model.weights[k].wx.cols);
        z.wh = Matrix(model.weights[k].wh.rows, model.weights[k].wh.cols);
        z.b.assign(model.weights[k].b.size(), 0.0);
        g.layers.push_back(std::move(z));
    }
    g.dense.w = Matrix(model.dense.w.rows, model.dense.w.cols);
    g.dense.b.assign(model.dense.b.size(), 0.0);
    return g;
}

void check_autoencoder_shape(const ModelSpec& model) {
    model.validate();
    if (model.output_width() != model.input_width())
        throw SpecError("reconstruction requires matching input and output widths");
}

std::vector<Vec> window_rows(const EventWindow& win, int ts, int width) {
    if (int(win.samples.size()) != ts * width)
        throw SpecError("window length does not match model dimensions");
    std::vector<Vec> rows(ts, Vec(width));
    for (int t = 0; t < ts; ++t)
        for (int c = 0; c < width; ++c) rows[t][c] = win.samples[size_t(t) * width + c];
    return rows;
}

double window_mse(const std::vector<Vec>& out, const std::vector<Vec>& in) {
    double s = 0.0;
    size_t n = 0;
    for (size_t t = 0; t < out.size(); ++t)
        for (size_t c = 0; c < out[t].size(); ++c) {
            double d = out[t][c] - in[t][c];
            s += d * d;
            ++n;
        }
    return s / double(n);
}

template <typename F>
void for_each_grad(const Gradients& g, F&& f) {
    for (const auto& w : g.layers) {
        for (double v : w.wx.a) f(v);
        for (double v : w.wh.a) f(v);
        for (double v : w.b) f(v);
    }
    for (double v : g.dense.w.a) f(v);
    for (double v : g.dense.b) f(v);
}

void apply_step(ModelSpec& m, const Gradients& g, double step) {
    for (size_t k = 0; k < m.weights.size(); ++k) {
        auto& w = m.weights[k];
        const auto& d = g.layers[k];
        for (size_t i = 0; i < w.wx.a.size(); ++i) w.wx.a[i] -= step * d.wx.a[i];
        for (size_t i = 0; i < w.wh.a.size(); ++i) w.wh.a[i] -= step * d.wh.a[i];
        for (size_t i = 0; i < w.b.size(); ++i) w.b[i] -= step * d.b[i];
    }
    for (size_t i = 0; i < m.dense.w.a.size(); ++i) m.dense.w.a[i] -= step * g.dense.w.a[i];
    for (size_t i = 0; i < m.dense.b.size(); ++i) m.dense.b[i] -= step * g.dense.b[i];
}

}  // namespace

std::vector<EventWindow> gen_dataset(int n_background, int n_signal, std::uint64_t seed,
                                     const GenParams& p) {
    if (n_background < 0 || n_signal < 0) throw DataError("window counts must be >= 0");
    if (p.ts < 1) throw DataError("window length must be >= 1");
    Rng rng(seed);
    std::vector<EventWindow> out;
    out.reserve(size_t(n_background + n_signal));

    for (int i = 0; i < n_background; ++i) {
        auto w = ar1_window(rng, p.ts, p.ar_alpha);
        normalize_window(w);
        out.push_back({std::move(w), 0});
    }
    const double chirp_rate = (p.chirp_f1 - p.chirp_f0) / double(std::max(1, 2 * (p.ts - 1)));
    for (int i = 0; i < n_signal; ++i) {
        auto b = ar1_window(rng, p.ts, p.ar_alpha);
        double phase0 = 2.0 * kPi * rng.u01();
        std::vector<double> s(p.ts);
        for (int t = 0; t < p.ts; ++t) {
            double phase = 2.0 * kPi * (p.chirp_f0 * t + chirp_rate * t * t) + phase0;
            double taper = std::sin(kPi * (t + 0.5) / p.ts);  // Hann window
            s[t] = taper * std::sin(phase);
        }
        double amp = p.snr * rms(b) / std::max(rms(s), 1e-12);
        std::vector<double> w(p.ts);
        for (int t = 0; t < p.ts; ++t) w[t] = b[t] + amp * s[t];
        normalize_window(w);
        out.push_back({std::move(w), 1});
    }
    return out;
}

void write_dataset_csv(const std::string& path, const std::vector<EventWindow>& windows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    char buf[64];
    for (size_t i = 0; i < windows.size(); ++i) {
        out << i << "," << windows[i].label;
        for (double v : windows[i].samples) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << "," << buf;
        }
        out << "\n";
    }
}

std::vector<EventWindow> read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset '" + path + "'");
    std::vector<EventWindow> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        EventWindow w;
        int col = 0;
        try {
            while (std::getline(ss, cell, ',')) {
                if (col == 0) {
                    // window id, informational only
                } else if (col == 1) {
                    w.label = std::stoi(cell);
                } else {
                    w.samples.push_back(std::stod(cell));
                }
                ++col;
            }
        } catch (const std::exception&) {
            throw DataError(path + ":" + std::to_string(lineno) + ": cannot parse '" + cell + "'");
        }
        if (col < 3) throw DataError(path + ":" + std::to_string(lineno) + ": too few columns");
        if (w.label != 0 && w.label != 1)
            throw DataError(path + ":" + std::to_string(lineno) + ": label must be 0 or 1");
        if (!out.empty() && w.samples.size() != out.front().samples.size())
            throw DataError(path + ":" + std::to_string(lineno) + ": ragged window length");
        out.push_back(std::move(w));
    }
    return out;
}

double batch_loss(const ModelSpec& model, const std::vector<EventWindow>& windows) {
    check_autoencoder_shape(model);
    if (windows.empty()) throw DataError("batch_loss on an empty batch");
    const int width = model.input_width();
    double total = 0.0;
    for (const auto& win : windows) {
        auto rows = window_rows(win, model.ts, width);
        total += window_mse(model_forward(rows, model, Numerics::Float), rows);
    }
    return total / double(windows.size());
}

std::pair<double, Gradients> loss_and_gradients(const ModelSpec& model,
                                                const std::vector<EventWindow>& windows) {
    check_autoencoder_shape(model);
    if (windows.empty()) throw DataError("loss_and_gradients on an empty batch");
    const int width = model.input_width();
    const int ts = model.ts;
    const int num_layers = int(model.layers.size());
    const int latent = model.repeat_vector_after;
    const double denom = double(windows.size()) * ts * model.output_width();

    Gradients grad = zero_gradients(model);
    double total = 0.0;

    for (const auto& win : windows) {
        auto input = window_rows(win, ts, width);

        // Forward, caching per layer.
        std::vector<std::vector<StepCache>> caches(num_layers);
        std::vector<Vec> cur = input;
        for (int k = 0; k < num_layers; ++k) {
            caches[k] = layer_forward_cached(cur, model.layers[k], model.weights[k]);
            if (k == latent) {
                cur.assign(ts, hidden_of(caches[k].back()));
            } else {
                cur.resize(ts);
                for (int t = 0; t < ts; ++t) cur[t] = hidden_of(caches[k][t]);
            }
        }

        // Dense head + loss gradient. The loss accumulates exactly like
        // batch_loss (per-window mean, then batch mean) so the two report
        // identical values for identical weights.
        const int out_n = model.dense.w.rows;
        std::vector<Vec> dy(ts, Vec(out_n));
        double win_sse = 0.0;
        for (int t = 0; t < ts; ++t) {
            for (int o = 0; o < out_n; ++o) {
                double acc = model.dense.b[o];
                for (int c = 0; c < model.dense.w.cols; ++c)
                    acc += model.dense.w.at(o, c) * cur[t][c];
                double r = acc - input[t][o];
                win_sse += r * r;
                dy[t][o] = 2.0 * r / denom;
            }
        }
        total += win_sse / double(ts * out_n);

        std::vector<Vec> dh_top(ts, Vec(model.dense.w.cols, 0.0));
        for (int t = 0; t < ts; ++t) {
            for (int o = 0; o < out_n; ++o) {
                double d = dy[t][o];
                for (int c = 0; c < model.dense.w.cols; ++c) {
                    grad.dense.w.at(o, c) += d * cur[t][c];
                    dh_top[t][c] += d * model.dense.w.at(o, c);
                }
                grad.dense.b[o] += d;
            }
        }

        // Backward through the stack.
        std::vector<Vec> dhs = dh_top;
        for (int k = num_layers - 1; k >= 0; --k) {
            Vec dh_last(model.layers[k].lh, 0.0);
            if (k == latent) {
                // The latent vector was broadcast to every decoder timestep.
                for (int t = 0; t < ts; ++t)
                    for (int j = 0; j < model.layers[k].lh; ++j) dh_last[j] += dhs[t][j];
                dhs.assign(ts, Vec(model.layers[k].lh, 0.0));
            }
            std::vector<Vec> dxs = layer_backward(caches[k], model.layers[k], model.weights[k],
                                                  dhs, dh_last, grad.layers[k]);
            dhs = std::move(dxs);
        }
    }

    return {total / double(windows.size()), std::move(grad)};
}

TrainResult train_autoencoder(const std::vector<EventWindow>& background, ModelSpec model,
                              const TrainParams& params) {
    if (background.empty()) throw DataError("training requires background windows");
    xavier_init(model, params.seed);
    check_autoencoder_shape(model);

    TrainResult res;
    for (int e = 0; e < params.epochs; ++e) {
        auto [loss, grad] = loss_and_gradients(model, background);
        if (!std::isfinite(loss)) throw TrainDivergence(e);
        res.loss_history.push_back(loss);

        double norm2 = 0.0;
        for_each_grad(grad, [&](double v) { norm2 += v * v; });
        double norm = std::sqrt(norm2);
        double scale = norm > params.clip_norm && norm > 0.0 ? params.clip_norm / norm : 1.0;

        // Backtracking: halve the step until the loss does not increase, so
        // the recorded loss history is nonincreasing by construction.
        double step = params.lr * scale;
        for (int h = 0; h <= params.max_halvings; ++h) {
            ModelSpec cand = model;
            apply_step(cand, grad, step);
            double cand_loss;
            try {
                cand_loss = batch_loss(cand, background);
            } catch (const std::exception&) {
                cand_loss = std::numeric_limits<double>::quiet_NaN();
            }
            if (cand_loss <= loss) {  // NaN fails this test and halves again
                model = std::move(cand);
                break;
            }
            step *= 0.5;
        }
    }
    // The trailing entry goes through the same accumulation path as the
    // per-epoch entries, so a frozen model yields a perfectly flat history.
    res.loss_history.push_back(loss_and_gradients(model, background).first);
    res.model = std::move(model);
    return res;
}

namespace {

template <typename ScoreFn>
std::vector<ScoredEvent> score_parallel(const std::vector<EventWindow>& events, int jobs,
                                        ScoreFn&& fn) {
    std::vector<ScoredEvent> out(events.size());
    if (jobs < 2 || events.size() < 2) {
        for (size_t i = 0; i < events.size(); ++i) out[i] = fn(i);
        return out;
    }
    size_t n = events.size();
    size_t workers = std::min(size_t(jobs), n);
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (size_t i = w; i < n; i += workers) out[i] = fn(i);
        });
    }
    for (auto& t : pool) t.join();
    return out;
}

}  // namespace

std::vector<ScoredEvent> score(const std::vector<EventWindow>& events, const ModelSpec& model,
                               Numerics numerics, int jobs) {
    check_autoencoder_shape(model);
    if (numerics == Numerics::Fixed) return score_fixed(events, quantize_model(model), jobs);
    const int width = model.input_width();
    return score_parallel(events, jobs, [&](size_t i) {
        auto rows = window_rows(events[i], model.ts, width);
        auto out = model_forward(rows, model, Numerics::Float);
        return ScoredEvent{window_mse(out, rows), events[i].label};
    });
}

std::vector<ScoredEvent> score_fixed(const std::vector<EventWindow>& events,
                                     const FixedModel& model, int jobs) {
    const int width = model.layers.front().lx;
    if (model.dense_out != width)
        throw SpecError("reconstruction requires matching input and output widths");
    return score_parallel(events, jobs, [&](size_t i) {
        std::vector<Vec> rows(model.ts, Vec(width));
        if (int(events[i].samples.size()) != model.ts * width)
            throw SpecError("window length does not match model dimensions");
        for (int t = 0; t < model.ts; ++t)
            for (int c = 0; c < width; ++c)
                rows[t][c] = events[i].samples[size_t(t) * width + c];
        auto out = model_forward_fixed(rows, model);
        return ScoredEvent{window_mse(out, rows), events[i].label};
    });
}

double threshold_from_fpr(const std::vector<double>& background_losses, double target_fpr) {
    if (background_losses.empty()) throw DataError("threshold_from_fpr on empty losses");
    if (!(target_fpr > 0.0 && target_fpr < 1.0))
        throw DataError("target FPR must lie strictly between 0 and 1");
    std::vector<double> sorted = background_losses;
    std::sort(sorted.begin(), sorted.end());
    const double n = double(sorted.size());
    for (size_t i = 0; i < sorted.size(); ++i) {
        if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;  // skip ties
        double above = double(sorted.size() - (i + 1));
        if (above / n <= target_fpr) return sorted[i];
    }
    return sorted.back();  // unreachable: the max always satisfies the bound
}

RocResult roc_auc(const std::vector<ScoredEvent>& scored) {
    std::vector<double> bg, sig;
    for (const auto& s : scored) (s.label ? sig : bg).push_back(s.loss);
    if (bg.empty() || sig.empty())
        throw DataError("ROC needs both background and signal events");
    std::sort(bg.begin(), bg.end());
    std::sort(sig.begin(), sig.end());

    std::vector<double> thresholds;
    thresholds.reserve(bg.size() + sig.size());
    thresholds.insert(thresholds.end(), bg.begin(), bg.end());
    thresholds.insert(thresholds.end(), sig.begin(), sig.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    RocResult res;
    auto frac_above = [](const std::vector<double>& v, double thr) {
        return double(v.end() - std::upper_bound(v.begin(), v.end(), thr)) / double(v.size());
    };
    for (double thr : thresholds)
        res.curve.push_back({thr, frac_above(bg, thr), frac_above(sig, thr)});
    res.curve.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});

    double auc = 0.0;
    double px = 0.0, py = 0.0;  // the top threshold contributes (0, 0)
    for (const auto& pt : res.curve) {
        auc += (pt.fpr - px) * (pt.tpr + py) / 2.0;
        px = pt.fpr;
        py = pt.tpr;
    }
    res.auc = auc;
    return res;
}

}  // namespace lstmpipe
