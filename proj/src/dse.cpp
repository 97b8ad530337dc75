#include "lstmpipe/dse.hpp"

#include <algorithm>
#include <cmath>

#include "lstmpipe/errors.hpp"

namespace lstmpipe {

namespace {

// Largest reuse factor worth considering for a layer: beyond this every
// multiplier group is down to a single DSP, so more reuse changes nothing.
long long rh_search_bound(const LayerSpec& spec) {
    return 4LL * spec.lh * std::max(spec.lx, spec.lh) + 1;
}

bool all_balanced(const std::vector<ReuseFactors>& rfs, const HwProfile& hw) {
    for (const auto& rf : rfs)
        if (rf.rx != balanced_rx(rf.rh, hw)) return false;
    return true;
}

}  // namespace

DesignPoint evaluate_design(const ModelSpec& model, const std::vector<ReuseFactors>& rfs,
                            const HwProfile& hw) {
    DesignPoint dp;
    dp.rfs = rfs;
    dp.resources = dsp_model(model, rfs);
    dp.timing = timing_model(model, rfs, hw);
    dp.balanced = all_balanced(rfs, hw);
    return dp;
}

std::optional<int> min_rh_for_budget(const LayerSpec& spec, long long budget,
                                     const HwProfile& hw) {
    const long long tail = 4LL * spec.lh;
    // The tail runs at reuse 1 and the two gate products need at least one
    // multiplier each, so below this floor nothing fits.
    if (budget < tail + 2) return std::nullopt;

    // Real-valued relaxation: 4*lx*lh/(rh+s) + 4*lh^2/rh <= budget - tail,
    // with s = lt_sigma + lt_tail, rearranged into a quadratic in rh. Its
    // positive root seeds the integer walk below.
    const double s = hw.lt_sigma + hw.lt_tail;
    const double bprime = double(budget - tail);
    const double gx = 4.0 * spec.lx * spec.lh;
    const double gh = 4.0 * double(spec.lh) * spec.lh;
    const double a = bprime;
    const double b = bprime * s - gx - gh;
    const double c = -gh * s;
    const double root = (-b + std::sqrt(b * b - 4 * a * c)) / (2 * a);

    long long start = std::max(1LL, (long long)std::floor(root) - 2);
    long long bound = rh_search_bound(spec);
    for (long long rh = start; rh <= bound; ++rh) {
        ReuseFactors rf{balanced_rx(int(rh), hw), int(rh), 1};
        if (dsp_layer(spec, rf) <= budget) return int(rh);
    }
    return std::nullopt;
}

std::optional<DesignPoint> balance_model(const ModelSpec& model, const HwProfile& hw) {
    if (model.layers.empty()) throw SpecError("balance_model requires a nonempty model");

    // The loop interval depends only on rh, and all layers share TS, so equal
    // layer intervals force one common rh. Walking rh upward walks the target
    // interval upward; the first configuration inside the budget is returned
    // (for a given interval the largest feasible rh also minimizes DSPs).
    long long bound = 1;
    for (const auto& spec : model.layers) bound = std::max(bound, rh_search_bound(spec));
    for (long long rh = 1; rh <= bound; ++rh) {
        std::vector<ReuseFactors> rfs(model.layers.size(),
                                      ReuseFactors{balanced_rx(int(rh), hw), int(rh), 1});
        if (dsp_model(model, rfs).dsp_model <= hw.dsp_total)
            return evaluate_design(model, rfs, hw);
    }
    return std::nullopt;
}

std::pair<ParetoSet, ParetoSet> pareto_sweep(const ModelSpec& model, const HwProfile& hw,
                                             int rh_min, int rh_max) {
    if (rh_min < 1 || rh_max < rh_min) throw SpecError("pareto_sweep requires 1 <= rh_min <= rh_max");

    auto sweep = [&](bool balanced) {
        std::vector<SweepPoint> pts;
        for (int rh = rh_min; rh <= rh_max; ++rh) {
            int rx = balanced ? balanced_rx(rh, hw) : rh;
            std::vector<ReuseFactors> rfs(model.layers.size(), ReuseFactors{rx, rh, 1});
            pts.push_back({rh, evaluate_design(model, rfs, hw)});
        }
        // Drop dominated points: another point at most as slow and at most as
        // hungry, strictly better on one axis.
        std::vector<SweepPoint> front;
        for (const auto& p : pts) {
            bool dominated = false;
            for (const auto& q : pts) {
                long long pii = p.dp.timing.system_interval_cycles;
                long long qii = q.dp.timing.system_interval_cycles;
                long long pd = p.dp.resources.dsp_model;
                long long qd = q.dp.resources.dsp_model;
                if (qii <= pii && qd <= pd && (qii < pii || qd < pd)) {
                    dominated = true;
                    break;
                }
            }
            if (!dominated) front.push_back(p);
        }
        std::sort(front.begin(), front.end(), [](const SweepPoint& x, const SweepPoint& y) {
            auto xk = std::make_pair(x.dp.timing.system_interval_cycles,
                                     x.dp.resources.dsp_model);
            auto yk = std::make_pair(y.dp.timing.system_interval_cycles,
                                     y.dp.resources.dsp_model);
            return xk != yk ? xk < yk : x.rh < y.rh;
        });
        return ParetoSet{std::move(front)};
    };

    return {sweep(false), sweep(true)};
}

}  // namespace lstmpipe
