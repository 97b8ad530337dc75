#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "lstmpipe/perf_model.hpp"

namespace lstmpipe {

// One fully-specified configuration: reuse factors per layer, plus the
// resource and timing estimates recomputed from them. `balanced` records
// whether every layer's rx equals rh + lt_sigma + lt_tail.
struct DesignPoint {
    std::vector<ReuseFactors> rfs;
    ResourceEstimate resources;
    TimingEstimate timing;
    bool balanced = false;
};

// One row of a uniform-Rh sweep: the same rh applied to every layer.
struct SweepPoint {
    int rh = 1;
    DesignPoint dp;
};

// Non-dominated sweep points sorted by ascending system interval.
struct ParetoSet {
    std::vector<SweepPoint> points;
};

// Smallest rh such that the layer, paired with its balanced rx, fits the
// budget. Solves the real-valued relaxation of the cost inequality first,
// then walks the integer ceilings. Empty when no rh can fit (the tail term
// alone is a floor of 4*lh multipliers).
std::optional<int> min_rh_for_budget(const LayerSpec& spec, long long budget,
                                     const HwProfile& hw);

// Smallest common per-layer interval whose balanced configuration fits the
// device budget. Because the loop interval depends on rh alone and every
// layer shares TS, equal intervals force equal rh; the search walks the
// target interval upward and takes the first fit, which also has the lowest
// DSP count for that interval. Empty when even maximal reuse does not fit.
std::optional<DesignPoint> balance_model(const ModelSpec& model, const HwProfile& hw);

// Uniform-Rh sweep in [rh_min, rh_max] evaluated two ways: naive (rx = rh)
// and balanced (rx = rh + lt_sigma + lt_tail). Returns {naive, balanced}
// frontiers with dominated points removed.
std::pair<ParetoSet, ParetoSet> pareto_sweep(const ModelSpec& model, const HwProfile& hw,
                                             int rh_min, int rh_max);

// Evaluates one uniform configuration (helper shared with the CLI).
DesignPoint evaluate_design(const ModelSpec& model, const std::vector<ReuseFactors>& rfs,
                            const HwProfile& hw);

}  // namespace lstmpipe
