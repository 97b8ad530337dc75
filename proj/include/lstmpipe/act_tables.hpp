#pragma once

#include <cstdint>
#include <vector>

#include "lstmpipe/fixed_point.hpp"

namespace lstmpipe {

// One linear segment of the tanh approximation, valid for |x| >= breakpoint
// until the next segment starts. Evaluation runs on the magnitude and the
// result is negated for negative inputs, so odd symmetry is exact in raw
// arithmetic. y0_wide carries the segment-start output at frac_bits+15
// resolution; sharing it between adjacent segments makes the curve exactly
// continuous before the final rounding step.
struct TanhSegment {
    std::int64_t x0_raw = 0;   // segment start, input format raw units
    std::int64_t y0_wide = 0;  // output at x0, scaled by 2^(frac_bits+15)
    int slope_q15 = 0;         // slope scaled by 2^15

    double breakpoint = 0.0;   // x0 as a real (reporting/serialization)
    double slope = 0.0;
    double intercept = 0.0;    // y0 - slope * x0
};

struct ActTableOptions {
    int sigmoid_table_size = 1024;
    double sigmoid_half_range = 8.0;  // table covers [-half_range, +half_range)
    // Positive breakpoints of the tanh fit, ascending, starting at 0. The fit
    // region ends at the last knot; from there a linear tail rises to 1.0 at
    // tanh_sat_x (clamped afterwards).
    std::vector<double> tanh_knots = {0.0, 0.35, 0.7, 1.05, 1.45, 1.9, 2.375, 3.0};
    double tanh_sat_x = 8.0;
};

struct ActTables {
    FixedFormat fmt;                     // input and output format
    std::int64_t one_raw = 0;            // raw encoding of 1.0 in fmt

    // Sigmoid lookup table: entry i holds sigmoid(lo + i * step) where
    // step = 2^-step_log2; inputs round to the nearest entry, inputs outside
    // the covered range clamp to 0 or 1.
    std::vector<std::int32_t> sigmoid_raw;
    std::int64_t sigmoid_lo_raw = 0;
    int sigmoid_step_log2 = 0;           // step in raw units = 2^step_log2
    double sigmoid_lo = 0.0, sigmoid_hi = 0.0;

    std::vector<TanhSegment> tanh_segments;  // ascending x0_raw, covering x >= 0
};

// Builds both approximations for the given activation format. The sigmoid
// table step must land on a power of two in raw units (the default 1024
// entries over [-8, 8) give a 2^-6 step). The tanh segments come from a
// continuity-constrained least-squares fit over the knot span; slopes are
// quantized to 15 fractional bits and segment joins are recomputed with the
// quantized slopes so the raw curve stays exactly continuous and monotone.
ActTables build_act_tables(const FixedFormat& fmt, const ActTableOptions& opts = {});

// Raw fast paths used by the fixed-point LSTM engine.
std::int64_t sigmoid_lut_raw(std::int64_t x_raw, const ActTables& tables);
std::int64_t tanh_pwl_raw(std::int64_t x_raw, const ActTables& tables);

FixedValue sigmoid_lut(const FixedValue& x, const ActTables& tables);
FixedValue tanh_pwl(const FixedValue& x, const ActTables& tables);

}  // namespace lstmpipe
