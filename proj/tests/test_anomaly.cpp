#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "lstmpipe/anomaly.hpp"
#include "lstmpipe/errors.hpp"
#include "lstmpipe/reference_models.hpp"

using namespace lstmpipe;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Fraction of window energy above 0.25 cycles/sample (naive DFT).
double high_band_fraction(const std::vector<double>& x) {
    const int n = int(x.size());
    double total = 0.0, high = 0.0;
    for (int k = 0; k <= n / 2; ++k) {
        double re = 0.0, im = 0.0;
        for (int t = 0; t < n; ++t) {
            double ang = -2.0 * kPi * k * t / n;
            re += x[t] * std::cos(ang);
            im += x[t] * std::sin(ang);
        }
        double e = re * re + im * im;
        total += e;
        if (double(k) / n >= 0.25) high += e;
    }
    return total > 0 ? high / total : 0.0;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

// Mann-Whitney pair statistic with half credit for ties.
double pair_statistic(const std::vector<ScoredEvent>& scored) {
    double wins = 0.0;
    long long pairs = 0;
    for (const auto& s : scored) {
        if (s.label != 1) continue;
        for (const auto& b : scored) {
            if (b.label != 0) continue;
            ++pairs;
            if (s.loss > b.loss)
                wins += 1.0;
            else if (s.loss == b.loss)
                wins += 0.5;
        }
    }
    return wins / double(pairs);
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), size_t(0));
        std::sort(idx.begin(), idx.end(), [&](size_t x, size_t y) { return v[x] < v[y]; });
        std::vector<double> r(v.size());
        for (size_t i = 0; i < idx.size(); ++i) r[idx[i]] = double(i);
        return r;
    };
    std::vector<double> ra = ranks(a), rb = ranks(b);
    double ma = 0, mb = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= double(ra.size());
    mb /= double(rb.size());
    double num = 0, da = 0, db = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(da * db);
}

ModelSpec zeroed_small() {
    ModelSpec m = small_autoencoder();
    for (auto& w : m.weights) {
        std::fill(w.wx.a.begin(), w.wx.a.end(), 0.0);
        std::fill(w.wh.a.begin(), w.wh.a.end(), 0.0);
        std::fill(w.b.begin(), w.b.end(), 0.0);
    }
    std::fill(m.dense.w.a.begin(), m.dense.w.a.end(), 0.0);
    std::fill(m.dense.b.begin(), m.dense.b.end(), 0.0);
    return m;
}

}  // namespace

TEST_CASE("dataset generation is deterministic and normalized") {
    CHECK(gen_dataset(0, 0, 1).empty());
    auto a = gen_dataset(20, 10, 7);
    auto b = gen_dataset(20, 10, 7);
    REQUIRE(a.size() == 30);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].label == b[i].label);
        CHECK(a[i].samples == b[i].samples);  // bit-for-bit
        CHECK(a[i].label == (i < 20 ? 0 : 1));
        REQUIRE(a[i].samples.size() == 8);
        double mean = 0.0, var = 0.0;
        for (double v : a[i].samples) mean += v;
        mean /= 8.0;
        for (double v : a[i].samples) var += (v - mean) * (v - mean);
        var /= 8.0;
        CHECK(std::fabs(mean) <= 1e-12);
        CHECK(std::fabs(var - 1.0) <= 1e-9);
    }
    auto c = gen_dataset(20, 10, 8);
    CHECK(a[0].samples != c[0].samples);
}

TEST_CASE("injected chirps concentrate energy above the background band") {
    GenParams p;
    p.snr = 1e6;  // signal term dominates completely
    auto data = gen_dataset(200, 200, 11, p);
    std::vector<double> f_bg, f_sig;
    for (const auto& w : data)
        (w.label ? f_sig : f_bg).push_back(high_band_fraction(w.samples));
    double med_bg = median(f_bg), med_sig = median(f_sig);
    CHECK(med_sig > med_bg);
    double mean_bg = std::accumulate(f_bg.begin(), f_bg.end(), 0.0) / double(f_bg.size());
    double mean_sig = std::accumulate(f_sig.begin(), f_sig.end(), 0.0) / double(f_sig.size());
    CHECK(mean_sig > mean_bg + 0.2);
}

TEST_CASE("dataset files round-trip exactly") {
    auto data = gen_dataset(6, 5, 13);
    const char* path = "anomaly_roundtrip.csv";
    write_dataset_csv(path, data);
    auto back = read_dataset_csv(path);
    REQUIRE(back.size() == data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        CHECK(back[i].label == data[i].label);
        CHECK(back[i].samples == data[i].samples);
    }
    std::remove(path);
    CHECK_THROWS_AS(read_dataset_csv("no_such_file.csv"), DataError);
}

TEST_CASE("scoring is the mean squared reconstruction error") {
    ModelSpec m = small_autoencoder(5);
    auto events = gen_dataset(10, 0, 3);
    auto scored = score(events, m, Numerics::Float);
    REQUIRE(scored.size() == events.size());
    for (size_t i = 0; i < events.size(); ++i) {
        std::vector<Vec> rows;
        for (double v : events[i].samples) rows.push_back(Vec{v});
        auto out = model_forward(rows, m, Numerics::Float);
        double mse = 0.0;
        for (size_t t = 0; t < rows.size(); ++t) mse += (out[t][0] - rows[t][0]) * (out[t][0] - rows[t][0]);
        mse /= double(rows.size());
        CHECK(scored[i].loss == doctest::Approx(mse).epsilon(1e-12));
        CHECK(scored[i].label == events[i].label);
    }
    // batch loss equals the mean of the per-event losses
    double mean_loss = 0.0;
    for (const auto& s : scored) mean_loss += s.loss;
    mean_loss /= double(scored.size());
    CHECK(batch_loss(m, events) == doctest::Approx(mean_loss).epsilon(1e-12));
}

TEST_CASE("a silent model scores unit loss on normalized windows") {
    ModelSpec m = zeroed_small();
    auto events = gen_dataset(12, 0, 17);
    for (const auto& s : score(events, m, Numerics::Float))
        CHECK(s.loss == doctest::Approx(1.0).epsilon(1e-9));
    // perfect reconstruction of an all-zero window costs nothing
    EventWindow zero{std::vector<double>(8, 0.0), 0};
    CHECK(score({zero}, m, Numerics::Float)[0].loss == 0.0);
}

TEST_CASE("parallel scoring preserves order and values") {
    ModelSpec m = small_autoencoder(5);
    auto events = gen_dataset(30, 30, 19);
    auto one = score(events, m, Numerics::Float, 1);
    auto four = score(events, m, Numerics::Float, 4);
    REQUIRE(one.size() == four.size());
    for (size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].loss == four[i].loss);
        CHECK(one[i].label == four[i].label);
    }
    FixedModel fm = quantize_model(m);
    auto fx1 = score_fixed(events, fm, 1);
    auto fx3 = score_fixed(events, fm, 3);
    for (size_t i = 0; i < fx1.size(); ++i) CHECK(fx1[i].loss == fx3[i].loss);
}

TEST_CASE("analytic gradients match central finite differences") {
    // two-layer autoencoder, hidden width 3, four timesteps
    ModelSpec m;
    m.layers = {LayerSpec{1, 3, 4, false}, LayerSpec{3, 3, 4, true}};
    m.weights.resize(2);
    m.weights[0].wx = Matrix(12, 1);
    m.weights[0].wh = Matrix(12, 3);
    m.weights[0].b.assign(12, 0.0);
    m.weights[1].wx = Matrix(12, 3);
    m.weights[1].wh = Matrix(12, 3);
    m.weights[1].b.assign(12, 0.0);
    m.repeat_vector_after = 0;
    m.dense.w = Matrix(1, 3);
    m.dense.b.assign(1, 0.0);
    m.ts = 4;
    m.name = "grad-probe";
    xavier_init(m, 99);
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (auto& w : m.weights)
        for (double& v : w.b) v = u(rng);
    for (double& v : m.dense.b) v = u(rng);
    m.validate();

    GenParams p;
    p.ts = 4;
    auto windows = gen_dataset(6, 0, 31, p);

    auto [loss0, grad] = loss_and_gradients(m, windows);
    CHECK(loss0 > 0.0);

    const double h = 1e-5;
    double worst = 0.0;
    auto probe = [&](double* slot, double analytic) {
        double keep = *slot;
        *slot = keep + h;
        double up = batch_loss(m, windows);
        *slot = keep - h;
        double dn = batch_loss(m, windows);
        *slot = keep;
        double fd = (up - dn) / (2.0 * h);
        double rel = std::fabs(analytic - fd) / std::max(1e-3, std::fabs(fd));
        worst = std::max(worst, rel);
    };
    for (size_t l = 0; l < m.weights.size(); ++l) {
        for (size_t i = 0; i < m.weights[l].wx.a.size(); ++i)
            probe(&m.weights[l].wx.a[i], grad.layers[l].wx.a[i]);
        for (size_t i = 0; i < m.weights[l].wh.a.size(); ++i)
            probe(&m.weights[l].wh.a[i], grad.layers[l].wh.a[i]);
        for (size_t i = 0; i < m.weights[l].b.size(); ++i)
            probe(&m.weights[l].b[i], grad.layers[l].b[i]);
    }
    for (size_t i = 0; i < m.dense.w.a.size(); ++i)
        probe(&m.dense.w.a[i], grad.dense.w.a[i]);
    for (size_t i = 0; i < m.dense.b.size(); ++i) probe(&m.dense.b[i], grad.dense.b[i]);
    CHECK(worst <= 1e-4);
}

TEST_CASE("training with zero learning rate freezes the initialization") {
    auto windows = gen_dataset(16, 0, 23);
    TrainParams p;
    p.epochs = 3;
    p.lr = 0.0;
    p.seed = 77;
    auto res = train_autoencoder(windows, small_autoencoder(), p);
    ModelSpec init = small_autoencoder();
    xavier_init(init, 77);
    for (size_t l = 0; l < init.weights.size(); ++l) {
        CHECK(res.model.weights[l].wx.a == init.weights[l].wx.a);
        CHECK(res.model.weights[l].wh.a == init.weights[l].wh.a);
        CHECK(res.model.weights[l].b == init.weights[l].b);
    }
    CHECK(res.model.dense.w.a == init.dense.w.a);
    REQUIRE(res.loss_history.size() == 4);
    for (double v : res.loss_history) CHECK(v == res.loss_history[0]);
}

TEST_CASE("a unit model on silent data sits at the zero-loss fixed point") {
    ModelSpec m;
    m.layers = {LayerSpec{1, 1, 8, false}, LayerSpec{1, 1, 8, true}};
    m.weights.resize(2);
    for (auto& w : m.weights) {
        w.wx = Matrix(4, 1);
        w.wh = Matrix(4, 1);
        w.b.assign(4, 0.0);
    }
    m.repeat_vector_after = 0;
    m.dense.w = Matrix(1, 1);
    m.dense.b.assign(1, 0.0);
    m.ts = 8;
    m.name = "unit";
    std::vector<EventWindow> zeros(4, EventWindow{std::vector<double>(8, 0.0), 0});
    TrainParams p;
    p.epochs = 5;
    auto res = train_autoencoder(zeros, m, p);
    CHECK(res.loss_history.back() <= 1e-12);
}

TEST_CASE("training loss never increases along the recorded history") {
    auto windows = gen_dataset(120, 0, 42);
    TrainParams p;
    p.epochs = 40;
    auto res = train_autoencoder(windows, small_autoencoder(), p);
    REQUIRE(res.loss_history.size() == size_t(p.epochs) + 1);
    for (size_t e = 1; e < res.loss_history.size(); ++e)
        CHECK(res.loss_history[e] <= res.loss_history[e - 1] + 1e-12);
    CHECK(res.loss_history.back() < res.loss_history.front());
}

TEST_CASE("non-finite data is reported as divergence with its epoch") {
    std::vector<EventWindow> bad(3, EventWindow{std::vector<double>(8, 1e160), 0});
    TrainParams p;
    p.epochs = 4;
    try {
        train_autoencoder(bad, small_autoencoder(), p);
        FAIL("expected divergence");
    } catch (const TrainDivergence& e) {
        CHECK(e.epoch == 0);
    }
}

TEST_CASE("threshold selection hits the requested false-positive rate") {
    CHECK(threshold_from_fpr({1.0, 2.0, 3.0, 4.0}, 0.25) == 3.0);
    CHECK(threshold_from_fpr({4.0, 2.0, 1.0, 3.0}, 0.25) == 3.0);  // order-free
    // a nearly-one target admits even the smallest loss as threshold
    CHECK(threshold_from_fpr({1.0, 2.0, 3.0, 4.0}, 0.999) == 1.0);
    CHECK(threshold_from_fpr({5.0, 5.0, 5.0}, 0.01) == 5.0);
    CHECK(threshold_from_fpr({5.0, 5.0, 5.0}, 0.9) == 5.0);
    CHECK_THROWS_AS(threshold_from_fpr({}, 0.5), DataError);
    CHECK_THROWS_AS(threshold_from_fpr({1.0}, 0.0), DataError);
    CHECK_THROWS_AS(threshold_from_fpr({1.0}, 1.0), DataError);

    // achieved rate is within target, and the next candidate down violates it
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> losses;
    for (int i = 0; i < 500; ++i) losses.push_back(u(rng));
    for (double target : {0.01, 0.1, 0.25, 0.5}) {
        double thr = threshold_from_fpr(losses, target);
        auto above = [&](double v) {
            int c = 0;
            for (double l : losses) c += l > v;
            return double(c) / double(losses.size());
        };
        CHECK(above(thr) <= target);
        double next_down = -1e300;
        for (double l : losses)
            if (l < thr) next_down = std::max(next_down, l);
        CHECK(above(next_down) > target);
    }
}

TEST_CASE("the area under the curve scores separability") {
    std::vector<ScoredEvent> perfect = {{0.1, 0}, {0.2, 0}, {0.9, 1}, {1.4, 1}};
    RocResult r = roc_auc(perfect);
    CHECK(r.auc == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.curve.back().fpr == 1.0);
    CHECK(r.curve.back().tpr == 1.0);

    std::vector<ScoredEvent> mixed = {{1.0, 0}, {3.5, 0}, {3.0, 1}, {4.0, 1}};
    CHECK(roc_auc(mixed).auc == doctest::Approx(0.75).epsilon(1e-12));

    std::vector<ScoredEvent> tied = {{1.0, 0}, {2.0, 0}, {2.0, 1}, {3.0, 1}};
    CHECK(roc_auc(tied).auc == doctest::Approx(pair_statistic(tied)).epsilon(1e-12));

    CHECK_THROWS_AS(roc_auc({{1.0, 0}, {2.0, 0}}), DataError);
    CHECK_THROWS_AS(roc_auc({{1.0, 1}}), DataError);
}

TEST_CASE("the trapezoid sweep equals the pair statistic on random data") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> bucket(0, 9);  // frequent ties
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<ScoredEvent> scored;
        for (int i = 0; i < 60; ++i) scored.push_back({0.1 * bucket(rng), coin(rng)});
        bool both = false;
        for (const auto& s : scored) both |= s.label != scored[0].label;
        if (!both) continue;
        CHECK(roc_auc(scored).auc == doctest::Approx(pair_statistic(scored)).epsilon(1e-12));
    }
}

TEST_CASE("the ranking metric ignores monotone rescaling of losses") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    std::vector<ScoredEvent> scored;
    for (int i = 0; i < 100; ++i) scored.push_back({u(rng), int(rng() % 2)});
    double base = roc_auc(scored).auc;
    std::vector<ScoredEvent> scaled = scored, exped = scored;
    for (auto& s : scaled) s.loss = 3.0 * s.loss + 2.0;
    for (auto& s : exped) s.loss = std::exp(s.loss);
    CHECK(roc_auc(scaled).auc == doctest::Approx(base).epsilon(1e-12));
    CHECK(roc_auc(exped).auc == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("random scores are uninformative") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ScoredEvent> scored;
    for (int i = 0; i < 4000; ++i) scored.push_back({u(rng), int(rng() % 2)});
    CHECK(roc_auc(scored).auc == doctest::Approx(0.5).epsilon(0.1));
    CHECK(std::fabs(roc_auc(scored).auc - 0.5) <= 0.05);
}

TEST_CASE("a briefly trained detector separates chirps from background") {
    auto train = gen_dataset(300, 0, 42);
    TrainParams p;
    p.epochs = 60;
    auto res = train_autoencoder(train, small_autoencoder(), p);

    auto eval = gen_dataset(100, 100, 43);
    auto scored_fl = score(eval, res.model, Numerics::Float);
    double auc_fl = roc_auc(scored_fl).auc;
    CHECK(auc_fl >= 0.7);  // short run; the acceptance suite trains in full

    // signal losses dominate background losses
    std::vector<double> bg, sig;
    for (const auto& s : scored_fl) (s.label ? sig : bg).push_back(s.loss);
    CHECK(median(sig) > median(bg));

    // fixed-point scoring ranks events like the float path
    FixedModel fm = quantize_model(res.model);
    auto scored_fx = score_fixed(eval, fm);
    std::vector<double> lf, lx;
    for (size_t i = 0; i < scored_fl.size(); ++i) {
        lf.push_back(scored_fl[i].loss);
        lx.push_back(scored_fx[i].loss);
    }
    CHECK(spearman(lf, lx) >= 0.99);
}

TEST_CASE("weight initialization is bounded and reproducible") {
    ModelSpec m = small_autoencoder();
    xavier_init(m, 4);
    ModelSpec m2 = small_autoencoder();
    xavier_init(m2, 4);
    CHECK(m.weights[0].wx.a == m2.weights[0].wx.a);
    CHECK(m.weights[1].wh.a == m2.weights[1].wh.a);
    CHECK(m.dense.w.a == m2.dense.w.a);
    for (size_t l = 0; l < m.weights.size(); ++l) {
        double limit = std::sqrt(6.0 / (m.layers[l].lx + 2.0 * m.layers[l].lh));
        for (double v : m.weights[l].wx.a) CHECK(std::fabs(v) <= limit);
        for (double v : m.weights[l].wh.a) CHECK(std::fabs(v) <= limit);
        for (double v : m.weights[l].b) CHECK(v == 0.0);
    }
    for (double v : m.dense.w.a) CHECK(std::fabs(v) <= 0.5);
    for (double v : m.dense.b) CHECK(v == 0.0);
}
