#include "lstmpipe/pipeline_sim.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "lstmpipe/errors.hpp"

namespace lstmpipe {

StageConfig derive_stage_config(const ModelSpec& model, const std::vector<ReuseFactors>& rfs,
                                const HwProfile& hw) {
    if (rfs.size() != model.layers.size())
        throw SpecError("one reuse-factor set required per layer");
    StageConfig cfg;
    cfg.ts = model.ts;
    cfg.dense_ii = 1;
    for (size_t l = 0; l < model.layers.size(); ++l) {
        LayerStage st;
        st.ii = layer_ii(rfs[l].rh, hw);
        st.body_latency = st.ii;
        st.mvmx_ii = mvm_latency(rfs[l].rx, hw);
        st.return_sequences = model.layers[l].return_sequences;
        st.barrier_input = l > 0 && !model.layers[l - 1].return_sequences;
        cfg.layers.push_back(st);
    }
    return cfg;
}

std::pair<ScheduleTrace, SimReport> simulate(const StageConfig& cfg, int num_inferences,
                                             long long arrival_gap) {
    if (num_inferences < 1) throw SpecError("simulate requires at least one inference");
    if (cfg.layers.empty()) throw SpecError("simulate requires at least one layer");
    if (cfg.ts < 1) throw SpecError("simulate requires ts >= 1");
    for (const auto& st : cfg.layers)
        if (st.ii < 1 || st.body_latency < 1 || st.mvmx_ii < 1)
            throw SpecError("stage timings must be >= 1");

    const int L = int(cfg.layers.size());
    const int TS = cfg.ts;
    constexpr long long NEVER = std::numeric_limits<long long>::min() / 4;

    ScheduleTrace trace;
    trace.num_inferences = num_inferences;
    trace.num_layers = L;
    SimReport report;
    report.stall_cycles.assign(L, 0);

    std::vector<long long> last_mvmx(L, NEVER), last_rec(L, NEVER);
    long long last_dense = NEVER;
    // Finish time of each recurrent iteration of the current inference,
    // consumed by the next layer's readiness rule.
    std::vector<std::vector<long long>> rec_fin(L, std::vector<long long>(TS, 0));
    std::vector<long long> completion(num_inferences, 0);

    for (int k = 0; k < num_inferences; ++k) {
        const long long arrival = arrival_gap * k;
        for (int l = 0; l < L; ++l) {
            const auto& st = cfg.layers[l];
            for (int t = 0; t < TS; ++t) {
                long long ready;
                if (l == 0) {
                    ready = arrival;  // whole windows arrive at once
                } else if (st.barrier_input) {
                    ready = rec_fin[l - 1][TS - 1];  // latent producer: full completion
                } else {
                    ready = rec_fin[l - 1][t];  // streaming producer: one vector suffices
                }

                // Input-product stage: decoupled loop, free to run ahead
                // (also across the rewind boundary into the next inference).
                long long mvmx_issue = std::max(ready, last_mvmx[l] + st.mvmx_ii);
                last_mvmx[l] = mvmx_issue;
                long long mvmx_fin = mvmx_issue + st.mvmx_ii;

                // Recurrent loop: its own spacing is ii both within an
                // inference and across the rewind (no drain). Within an
                // inference the previous h must also be finished; across the
                // boundary the state restarts from zero, so only the spacing
                // applies. With body_latency == ii the two rules coincide.
                long long own = last_rec[l] == NEVER ? NEVER : last_rec[l] + st.ii;
                long long feedback = t > 0 ? rec_fin[l][t - 1] : NEVER;
                long long issue = std::max(mvmx_fin, std::max(own, feedback));
                if (own != NEVER) report.stall_cycles[l] += issue - own;
                last_rec[l] = issue;
                rec_fin[l][t] = issue + st.body_latency;
                trace.events.push_back({k, l, t, issue, rec_fin[l][t]});
            }
        }
        long long fin_k = 0;
        for (int t = 0; t < TS; ++t) {
            long long issue = std::max(rec_fin[L - 1][t], last_dense + cfg.dense_ii);
            last_dense = issue;
            fin_k = issue + cfg.dense_ii;
            trace.events.push_back({k, L, t, issue, fin_k});
        }
        completion[k] = fin_k;
    }

    std::stable_sort(trace.events.begin(), trace.events.end(),
                     [](const TraceEvent& a, const TraceEvent& b) {
                         if (a.issue != b.issue) return a.issue < b.issue;
                         if (a.layer != b.layer) return a.layer < b.layer;
                         if (a.timestep != b.timestep) return a.timestep < b.timestep;
                         return a.inference < b.inference;
                     });

    report.latency_first = completion[0];
    if (num_inferences >= 2)
        report.steady_interval_cycles =
            completion[num_inferences - 1] - completion[num_inferences - 2];
    return {std::move(trace), std::move(report)};
}

long long steady_interval(const ScheduleTrace& trace) {
    if (trace.num_inferences < 3)
        throw SpecError("steady_interval needs at least three inferences");
    std::vector<long long> completion(trace.num_inferences,
                                      std::numeric_limits<long long>::min());
    for (const auto& e : trace.events)
        completion[e.inference] = std::max(completion[e.inference], e.finish);
    return completion[trace.num_inferences - 1] - completion[trace.num_inferences - 2];
}

std::string render_gantt(const ScheduleTrace& trace, const StageConfig& cfg, int max_width) {
    if (max_width < 10) max_width = 10;
    long long span = 1;
    for (const auto& e : trace.events) span = std::max(span, e.finish);
    long long scale = (span + max_width - 1) / max_width;

    const int rows = trace.num_layers + 1;
    std::vector<std::string> grid(rows, std::string(size_t(max_width), ' '));
    for (const auto& e : trace.events) {
        long long c0 = e.issue / scale;
        long long c1 = std::max(c0 + 1, e.finish / scale);
        for (long long c = c0; c < c1 && c < max_width; ++c)
            grid[e.layer][size_t(c)] = char('0' + e.timestep % 10);
    }

    std::ostringstream out;
    out << "one column = " << scale << " cycle(s), span = " << span << " cycles\n";
    for (int r = 0; r < rows; ++r) {
        if (r < trace.num_layers)
            out << "lstm" << r << " |";
        else
            out << "dense |";
        out << grid[r] << "|\n";
    }
    (void)cfg;
    return out.str();
}

}  // namespace lstmpipe
