#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lstmpipe/lstm_model.hpp"

namespace lstmpipe {

// Latency constants and resource budget of a target device. The recurrent
// loop of an LSTM layer costs lt_mult + (Rh-1)*ii_mult cycles for the hidden
// matrix-vector product plus lt_sigma for the activation and lt_tail for the
// element-wise gate combination; dsp_total is the device multiplier budget.
struct HwProfile {
    std::string name;
    int lt_mult = 1;
    int ii_mult = 1;
    int lt_sigma = 3;
    int lt_tail = 5;
    long long dsp_total = 0;
    double freq_mhz = 0.0;
};

// Built-in device profiles.
const HwProfile& profile_zynq7045();  // 100 MHz, 900 DSPs, 1-cycle multiplier
const HwProfile& profile_u250();      // 300 MHz, 12288 DSPs, 4-cycle multiplier
std::optional<HwProfile> named_profile(const std::string& name);
std::vector<std::string> profile_names();

// Time-multiplexing degree of the three multiplier groups inside a layer:
// rx for the input-vector product, rh for the recurrent product, rt for the
// tail. R = 1 means fully parallel.
struct ReuseFactors {
    int rx = 1;
    int rh = 1;
    int rt = 1;
};

struct ResourceEstimate {
    std::vector<long long> dsp_per_layer;
    long long dsp_dense = 0;
    long long dsp_model = 0;
};

struct TimingEstimate {
    std::vector<long long> ii_per_layer;        // per-timestep loop interval
    std::vector<long long> interval_per_layer;  // ii * TS (continuous rewind)
    long long system_interval_cycles = 0;       // max over layers
    long long latency_cycles = 0;               // serial-execution upper bound
};

// Latency of one matrix-vector product with reuse factor r: the multiplier
// pipeline drains after lt_mult + (r-1)*ii_mult cycles.
long long mvm_latency(int r, const HwProfile& hw);

// Reuse factor of the input-side product that makes it exactly cover the
// recurrent product plus activation plus tail of the same layer.
int balanced_rx(int rh, const HwProfile& hw);

// Per-timestep loop interval of the recurrent sub-layer.
long long layer_ii(int rh, const HwProfile& hw);

// Layer-level interval with continuous loop pipelining: ii * TS.
long long layer_interval(long long ii, int ts);

// System interval: the slowest layer dominates.
long long system_interval(const std::vector<long long>& intervals);

// Multiplier count of one LSTM layer: ceil(4*lx*lh/rx) + ceil(4*lh*lh/rh)
// + ceil(4*lh/rt). The tail term counts 2*lh wide multiplies at 2 DSPs each.
long long dsp_layer(const LayerSpec& spec, const ReuseFactors& rf);

// Whole-model resource estimate; the dense head contributes out*lh_last
// multipliers at reuse 1.
ResourceEstimate dsp_model(const ModelSpec& model, const std::vector<ReuseFactors>& rfs);

// Whole-model timing estimate. latency_cycles is the serial-composition
// bound (every layer waits for the previous one to finish completely), which
// the simulated first-inference latency can only undercut via overlap.
TimingEstimate timing_model(const ModelSpec& model, const std::vector<ReuseFactors>& rfs,
                            const HwProfile& hw);

}  // namespace lstmpipe
