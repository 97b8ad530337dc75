#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lstmpipe/perf_model.hpp"

namespace lstmpipe {

// Per-layer stage timing. Each LSTM layer is split in two: a feed-forward
// matrix-vector stage for the input product (spacing and latency mvmx_ii)
// that may run ahead, and the recurrent loop (spacing ii, body latency
// body_latency) that carries the timestep feedback. barrier_input marks
// layers fed by a latent producer that must fully finish first.
struct LayerStage {
    long long ii = 1;
    long long body_latency = 1;
    long long mvmx_ii = 1;
    bool return_sequences = true;
    bool barrier_input = false;
};

struct StageConfig {
    std::vector<LayerStage> layers;
    long long dense_ii = 1;
    int ts = 1;
};

// One recurrent-loop iteration (or dense pass, layer == layer count).
struct TraceEvent {
    int inference = 0;
    int layer = 0;
    int timestep = 0;
    long long issue = 0;
    long long finish = 0;
};

struct ScheduleTrace {
    std::vector<TraceEvent> events;  // sorted by (issue, layer, timestep)
    int num_inferences = 0;
    int num_layers = 0;  // LSTM layers; the dense stage is layer num_layers
};

struct SimReport {
    long long latency_first = 0;  // first input to first completed inference
    std::optional<long long> steady_interval_cycles;  // needs >= 2 inferences
    std::vector<long long> stall_cycles;  // per layer: waiting beyond own spacing
};

// Maps a model plus reuse factors onto stage timings using the analytical
// constants: ii = recurrent loop interval, mvmx_ii = input-product latency,
// body_latency = ii, dense at one result per cycle.
StageConfig derive_stage_config(const ModelSpec& model, const std::vector<ReuseFactors>& rfs,
                                const HwProfile& hw);

// Deterministic schedule of back-to-back inferences. Constraints honored:
// within one inference successive timesteps of a layer are at least ii apart
// (the body is pipelined, feedback arrives exactly ii after issue); across
// inferences the loop rewinds with no drain, so the first timestep of the
// next inference follows the last issue by exactly ii once inputs are ready;
// sequence-returning producers release each timestep as it finishes while a
// latent producer releases everything at once; the input-product stage of a
// later inference may run ahead across the rewind boundary. arrival_gap
// spaces the availability of successive input windows (0 = all queued).
std::pair<ScheduleTrace, SimReport> simulate(const StageConfig& cfg, int num_inferences,
                                             long long arrival_gap = 0);

// Completion gap between the last two inferences; requires >= 3 inferences so
// the pipeline has left its fill phase.
long long steady_interval(const ScheduleTrace& trace);

// ASCII timeline of the recurrent loops and the dense stage, one row per
// stage, one digit per iteration (timestep index mod 10).
std::string render_gantt(const ScheduleTrace& trace, const StageConfig& cfg,
                         int max_width = 100);

}  // namespace lstmpipe
