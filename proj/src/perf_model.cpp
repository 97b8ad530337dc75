#include "lstmpipe/perf_model.hpp"

#include <algorithm>

#include "lstmpipe/errors.hpp"

namespace lstmpipe {

namespace {

long long ceil_div(long long a, long long b) { return (a + b - 1) / b; }

}  // namespace

const HwProfile& profile_zynq7045() {
    static const HwProfile p{"zynq7045-100MHz", 1, 1, 3, 5, 900, 100.0};
    return p;
}

const HwProfile& profile_u250() {
    static const HwProfile p{"u250-300MHz", 4, 1, 3, 5, 12288, 300.0};
    return p;
}

std::optional<HwProfile> named_profile(const std::string& name) {
    if (name == profile_zynq7045().name) return profile_zynq7045();
    if (name == profile_u250().name) return profile_u250();
    return std::nullopt;
}

std::vector<std::string> profile_names() {
    return {profile_zynq7045().name, profile_u250().name};
}

long long mvm_latency(int r, const HwProfile& hw) {
    if (r < 1) throw SpecError("reuse factor must be >= 1");
    return hw.lt_mult + (long long)(r - 1) * hw.ii_mult;
}

int balanced_rx(int rh, const HwProfile& hw) {
    if (rh < 1) throw SpecError("reuse factor must be >= 1");
    return rh + hw.lt_sigma + hw.lt_tail;
}

long long layer_ii(int rh, const HwProfile& hw) {
    return mvm_latency(rh, hw) + hw.lt_sigma + hw.lt_tail;
}

long long layer_interval(long long ii, int ts) {
    if (ii < 1 || ts < 1) throw SpecError("layer_interval requires ii >= 1 and ts >= 1");
    return ii * ts;
}

long long system_interval(const std::vector<long long>& intervals) {
    if (intervals.empty()) throw SpecError("system_interval of an empty layer list");
    return *std::max_element(intervals.begin(), intervals.end());
}

long long dsp_layer(const LayerSpec& spec, const ReuseFactors& rf) {
    if (spec.lx < 1 || spec.lh < 1) throw SpecError("layer dimensions must be >= 1");
    if (rf.rx < 1 || rf.rh < 1 || rf.rt < 1) throw SpecError("reuse factors must be >= 1");
    long long lx = spec.lx, lh = spec.lh;
    return ceil_div(4 * lx * lh, rf.rx) + ceil_div(4 * lh * lh, rf.rh) +
           ceil_div(4 * lh, rf.rt);
}

ResourceEstimate dsp_model(const ModelSpec& model, const std::vector<ReuseFactors>& rfs) {
    if (rfs.size() != model.layers.size())
        throw SpecError("one reuse-factor set required per layer");
    ResourceEstimate est;
    for (size_t k = 0; k < model.layers.size(); ++k) {
        est.dsp_per_layer.push_back(dsp_layer(model.layers[k], rfs[k]));
        est.dsp_model += est.dsp_per_layer.back();
    }
    est.dsp_dense = model.layers.empty()
                        ? 0
                        : (long long)model.dense.w.rows * model.layers.back().lh;
    est.dsp_model += est.dsp_dense;
    return est;
}

TimingEstimate timing_model(const ModelSpec& model, const std::vector<ReuseFactors>& rfs,
                            const HwProfile& hw) {
    if (rfs.size() != model.layers.size())
        throw SpecError("one reuse-factor set required per layer");
    TimingEstimate t;
    t.latency_cycles = 0;
    for (size_t k = 0; k < model.layers.size(); ++k) {
        long long ii = layer_ii(rfs[k].rh, hw);
        t.ii_per_layer.push_back(ii);
        t.interval_per_layer.push_back(layer_interval(ii, model.ts));
        // Serial composition: the layer waits for its whole input, runs the
        // input product once, then loops at the slower of the two sub-layers.
        long long mvm = mvm_latency(rfs[k].rx, hw);
        t.latency_cycles += mvm + model.ts * std::max(ii, mvm);
    }
    t.system_interval_cycles = system_interval(t.interval_per_layer);
    t.latency_cycles += 1;  // dense head drains one cycle after the last loop
    return t;
}

}  // namespace lstmpipe
