#include "lstmpipe/act_tables.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "lstmpipe/errors.hpp"

namespace lstmpipe {

namespace {

// Solve a small dense symmetric system by Gaussian elimination with partial
// pivoting. Sizes here are single digits, so nothing fancier is warranted.
std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
    const int n = int(b.size());
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        if (std::fabs(a[col][col]) < 1e-14) throw SpecError("singular system in tanh fit");
        for (int r = col + 1; r < n; ++r) {
            double f = a[r][col] / a[col][col];
            for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return x;
}

// Hat-basis value of knot j at x (piecewise-linear interpolation basis).
double hat(const std::vector<double>& knots, int j, double x) {
    double xj = knots[j];
    double left = j > 0 ? knots[j - 1] : xj;
    double right = j + 1 < int(knots.size()) ? knots[j + 1] : xj;
    if (x < left || x > right) return 0.0;
    if (x < xj) return (x - left) / (xj - left);
    if (x > xj) return (right - x) / (right - xj);
    return 1.0;
}

// Continuity-constrained least-squares fit of tanh on [0, knots.back()]:
// the approximation is the piecewise-linear interpolant of knot values y_j,
// with y_0 = 0 fixed; minimizing the squared error over a dense grid in the
// knot values keeps every segment join exact by construction.
std::vector<double> fit_tanh_knot_values(const std::vector<double>& knots, double grid_step) {
    const int n = int(knots.size());
    const int unknowns = n - 1;  // y_0 = 0 fixed
    std::vector<std::vector<double>> a(unknowns, std::vector<double>(unknowns, 0.0));
    std::vector<double> rhs(unknowns, 0.0);
    const double end = knots.back();
    const int steps = int(std::lround(end / grid_step));
    for (int i = 0; i <= steps; ++i) {
        double x = i * grid_step;
        double target = std::tanh(x);
        for (int j = 1; j < n; ++j) {
            double pj = hat(knots, j, x);
            if (pj == 0.0) continue;
            rhs[j - 1] += pj * target;
            for (int k = 1; k < n; ++k) {
                double pk = hat(knots, k, x);
                if (pk != 0.0) a[j - 1][k - 1] += pj * pk;
            }
        }
    }
    std::vector<double> y(n, 0.0);
    auto sol = solve_dense(std::move(a), std::move(rhs));
    for (int j = 1; j < n; ++j) y[j] = sol[j - 1];
    return y;
}

}  // namespace

ActTables build_act_tables(const FixedFormat& fmt, const ActTableOptions& opts) {
    if (!fmt.valid()) throw SpecError("invalid activation format " + fmt.to_string());
    if (fmt.word_bits - fmt.frac_bits < 2)
        throw SpecError("activation format needs at least two integer bits to hold +-1.0");
    if (opts.sigmoid_table_size < 2 || (opts.sigmoid_table_size & (opts.sigmoid_table_size - 1)))
        throw SpecError("sigmoid table size must be a power of two");

    ActTables t;
    t.fmt = fmt;
    t.one_raw = std::int64_t(1) << fmt.frac_bits;

    // --- sigmoid lookup table -------------------------------------------
    // Entries sit on a left-edge grid x_i = lo + i * step with a power-of-two
    // step, so index selection is a single rounded shift and the grid places
    // an entry exactly at x = 0 (entry count is even).
    double step = 2.0 * opts.sigmoid_half_range / opts.sigmoid_table_size;
    double step_raw = step * std::ldexp(1.0, fmt.frac_bits);
    int step_log2 = int(std::lround(std::log2(step_raw)));
    if (step_raw <= 0 || std::ldexp(1.0, step_log2) != step_raw)
        throw SpecError("sigmoid table step must be a power of two in raw units");
    t.sigmoid_step_log2 = step_log2;
    t.sigmoid_lo = -opts.sigmoid_half_range;
    t.sigmoid_hi = opts.sigmoid_half_range;
    t.sigmoid_lo_raw = std::llround(t.sigmoid_lo * std::ldexp(1.0, fmt.frac_bits));
    t.sigmoid_raw.resize(opts.sigmoid_table_size);
    for (int i = 0; i < opts.sigmoid_table_size; ++i) {
        double x = t.sigmoid_lo + i * step;
        t.sigmoid_raw[i] = std::int32_t(quantize(1.0 / (1.0 + std::exp(-x)), fmt).raw);
    }

    // --- piecewise-linear tanh ------------------------------------------
    const auto& knots = opts.tanh_knots;
    if (knots.size() < 2 || knots.front() != 0.0)
        throw SpecError("tanh knots must start at 0 and contain at least two points");
    for (size_t i = 1; i < knots.size(); ++i)
        if (knots[i] <= knots[i - 1]) throw SpecError("tanh knots must be strictly ascending");
    double sat_x = std::min(opts.tanh_sat_x, fmt.max_value());
    if (sat_x <= knots.back()) throw SpecError("tanh saturation point must lie beyond the last knot");

    std::vector<double> y = fit_tanh_knot_values(knots, fmt.lsb());

    // Per-segment slopes: fitted segments plus a linear tail that reaches 1.0
    // at sat_x. Slopes are quantized to 15 fractional bits; knot outputs are
    // then rebuilt sequentially with the quantized slopes so adjacent segments
    // share their join value exactly in raw arithmetic.
    std::vector<std::int64_t> x0_raw;
    std::vector<int> slope_q15;
    for (size_t i = 0; i + 1 < knots.size(); ++i) {
        double m = (y[i + 1] - y[i]) / (knots[i + 1] - knots[i]);
        x0_raw.push_back(quantize(knots[i], fmt).raw);
        slope_q15.push_back(int(std::llround(m * 32768.0)));
    }
    double tail_m = (1.0 - y.back()) / (sat_x - knots.back());
    x0_raw.push_back(quantize(knots.back(), fmt).raw);
    slope_q15.push_back(int(std::llround(tail_m * 32768.0)));

    t.tanh_segments.clear();
    std::int64_t y_wide = 0;  // output scale: 2^(frac_bits + 15)
    for (size_t i = 0; i < x0_raw.size(); ++i) {
        if (std::abs(slope_q15[i]) > 32767)
            throw SpecError("tanh segment slope exceeds unit magnitude");
        if (slope_q15[i] < 0) throw SpecError("tanh fit produced a decreasing segment");
        TanhSegment seg;
        seg.x0_raw = x0_raw[i];
        seg.y0_wide = y_wide;
        seg.slope_q15 = slope_q15[i];
        seg.breakpoint = double(seg.x0_raw) * fmt.lsb();
        seg.slope = double(seg.slope_q15) / 32768.0;
        seg.intercept = double(seg.y0_wide) * std::ldexp(1.0, -(fmt.frac_bits + 15)) -
                        seg.slope * seg.breakpoint;
        t.tanh_segments.push_back(seg);
        if (i + 1 < x0_raw.size())
            y_wide += std::int64_t(slope_q15[i]) * (x0_raw[i + 1] - x0_raw[i]);
    }
    return t;
}

std::int64_t sigmoid_lut_raw(std::int64_t x_raw, const ActTables& t) {
    std::int64_t idx = rne_shift(x_raw - t.sigmoid_lo_raw, t.sigmoid_step_log2);
    if (idx < 0) return 0;
    if (idx >= std::int64_t(t.sigmoid_raw.size())) return t.one_raw;
    return t.sigmoid_raw[size_t(idx)];
}

std::int64_t tanh_pwl_raw(std::int64_t x_raw, const ActTables& t) {
    std::int64_t ax = x_raw < 0 ? -x_raw : x_raw;
    const TanhSegment* seg = &t.tanh_segments[0];
    for (const auto& s : t.tanh_segments) {
        if (s.x0_raw > ax) break;
        seg = &s;
    }
    __int128 y_wide = __int128(seg->y0_wide) + __int128(seg->slope_q15) * (ax - seg->x0_raw);
    std::int64_t y = rne_shift(y_wide, 15);
    y = std::min(y, t.one_raw);
    return x_raw < 0 ? -y : y;
}

FixedValue sigmoid_lut(const FixedValue& x, const ActTables& t) {
    if (x.fmt != t.fmt) throw SpecError("sigmoid_lut: input format does not match tables");
    return {sigmoid_lut_raw(x.raw, t), t.fmt};
}

FixedValue tanh_pwl(const FixedValue& x, const ActTables& t) {
    if (x.fmt != t.fmt) throw SpecError("tanh_pwl: input format does not match tables");
    return {tanh_pwl_raw(x.raw, t), t.fmt};
}

}  // namespace lstmpipe
