// lstmpipe: analytical estimation, design-space exploration, cycle-level
// simulation, inference and anomaly benchmarking for multi-layer LSTM
// accelerator pipelines. Every subcommand writes its artifacts plus a
// resolved_config.json into --out-dir; repeated runs with the same config
// and seed produce byte-identical files.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lstmpipe/anomaly.hpp"
#include "lstmpipe/dse.hpp"
#include "lstmpipe/errors.hpp"
#include "lstmpipe/manifest.hpp"
#include "lstmpipe/perf_model.hpp"
#include "lstmpipe/pipeline_sim.hpp"

using nlohmann::json;
using namespace lstmpipe;

namespace {

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << text;
}

void write_json(const std::filesystem::path& path, const json& j) {
    write_file(path, j.dump(2) + "\n");
}

// Applies config-file values to options the command line left untouched
// (file < flag precedence). Keys are the long option names without dashes.
struct ConfigBinder {
    std::map<std::string, CLI::Option*> opts;
    std::map<std::string, std::function<void(const json&)>> setters;

    template <class T>
    void bind(CLI::Option* opt, const std::string& key, T& target) {
        opts[key] = opt;
        setters[key] = [&target](const json& v) { target = v.get<T>(); };
    }
    void bind_list(CLI::Option* opt, const std::string& key, std::vector<int>& target) {
        opts[key] = opt;
        setters[key] = [&target](const json& v) {
            if (v.is_array())
                target = v.get<std::vector<int>>();
            else
                target = {v.get<int>()};
        };
    }
    void apply(const json& cfg, const std::string& path) {
        if (!cfg.is_object())
            throw CLI::ValidationError("config", "'" + path + "' must hold a JSON object");
        for (auto it = cfg.begin(); it != cfg.end(); ++it) {
            auto found = setters.find(it.key());
            if (found == setters.end())
                throw CLI::ValidationError("config",
                                           "unknown key '" + it.key() + "' in '" + path + "'");
            if (opts[it.key()]->count() == 0) found->second(it.value());
        }
    }
};

struct Common {
    std::string manifest;
    std::string profile = "zynq7045-100MHz";
    std::string out_dir = ".";
    std::uint64_t seed = 42;
    std::string format = "json";
    int jobs = 0;  // 0 = all available cores
    std::string config;
};

void add_common(CLI::App* cmd, Common& c, ConfigBinder& b) {
    b.bind(cmd->add_option("-m,--manifest", c.manifest, "model manifest JSON"), "manifest",
           c.manifest);
    b.bind(cmd->add_option("-p,--profile", c.profile, "hardware profile name"), "profile",
           c.profile);
    b.bind(cmd->add_option("-o,--out-dir", c.out_dir, "directory for report artifacts"),
           "out-dir", c.out_dir);
    b.bind(cmd->add_option("--seed", c.seed, "seed for all randomness"), "seed", c.seed);
    b.bind(cmd->add_option("--format", c.format, "stdout summary format")
               ->check(CLI::IsMember({"json", "csv"})),
           "format", c.format);
    b.bind(cmd->add_option("--jobs", c.jobs, "parallel workers (0 = all cores)"), "jobs",
           c.jobs);
    cmd->add_option("--config", c.config, "JSON config file; flags take precedence");
}

json profile_json(const HwProfile& hw) {
    return json{{"name", hw.name},         {"lt_mult", hw.lt_mult},
                {"ii_mult", hw.ii_mult},   {"lt_sigma", hw.lt_sigma},
                {"lt_tail", hw.lt_tail},   {"dsp_total", hw.dsp_total},
                {"freq_mhz", hw.freq_mhz}};
}

json model_json(const ModelSpec& m) {
    json layers = json::array();
    for (const auto& l : m.layers)
        layers.push_back(json{{"lx", l.lx}, {"lh", l.lh}, {"return_sequences", l.return_sequences}});
    return json{{"name", m.name},
                {"ts", m.ts},
                {"layers", layers},
                {"repeat_vector_after", m.repeat_vector_after},
                {"dense_out", m.output_width()}};
}

json reuse_json(const std::vector<ReuseFactors>& rfs) {
    json arr = json::array();
    for (const auto& rf : rfs) arr.push_back(json{{"rx", rf.rx}, {"rh", rf.rh}, {"rt", rf.rt}});
    return arr;
}

// Expands 1-or-N reuse lists to one entry per layer; empty rh defaults to 1
// and empty rx to the balanced value (with a notice, since that choice is a
// policy, not an identity).
std::vector<ReuseFactors> build_reuse(const ModelSpec& model, std::vector<int> rh,
                                      std::vector<int> rx, std::vector<int> rt,
                                      const HwProfile& hw) {
    size_t n = model.layers.size();
    auto broadcast = [n](std::vector<int> v, int fallback, const char* flag) {
        if (v.empty()) v.assign(n, fallback);
        if (v.size() == 1) v.assign(n, v[0]);
        if (v.size() != n)
            throw SpecError(std::string(flag) + " expects one value or one per layer (" +
                            std::to_string(n) + ")");
        return v;
    };
    rh = broadcast(std::move(rh), 1, "--rh");
    rt = broadcast(std::move(rt), 1, "--rt");
    bool rx_defaulted = rx.empty();
    if (rx_defaulted) {
        rx.reserve(n);
        for (size_t k = 0; k < n; ++k) rx.push_back(balanced_rx(rh[k], hw));
        std::string note = "note: --rx omitted; using balanced values";
        for (size_t k = 0; k < n; ++k) note += (k ? "," : " ") + std::to_string(rx[k]);
        std::cerr << note << "\n";
    }
    rx = broadcast(std::move(rx), 1, "--rx");
    std::vector<ReuseFactors> rfs(n);
    for (size_t k = 0; k < n; ++k) rfs[k] = ReuseFactors{rx[k], rh[k], rt[k]};
    return rfs;
}

void print_summary(const std::string& format, const json& report, const std::string& csv) {
    if (format == "json")
        std::cout << report.dump(2) << "\n";
    else
        std::cout << csv;
}

std::string metrics_csv(const std::vector<std::pair<std::string, std::string>>& rows) {
    std::string out = "metric,value\n";
    for (const auto& [k, v] : rows) out += k + "," + v + "\n";
    return out;
}

// ---------------------------------------------------------------- estimate

struct EstimateOpts {
    std::vector<int> rh, rx, rt;
};

int cmd_estimate(const Common& c, const EstimateOpts& o, const HwProfile& hw,
                 const std::filesystem::path& dir) {
    ModelSpec model = load_model(c.manifest);
    auto rfs = build_reuse(model, o.rh, o.rx, o.rt, hw);
    ResourceEstimate res = dsp_model(model, rfs);
    TimingEstimate tim = timing_model(model, rfs, hw);

    std::string csv = "layer,lx,lh,rx,rh,rt,dsp,ii_cycles,interval_cycles\n";
    for (size_t k = 0; k < model.layers.size(); ++k) {
        const auto& l = model.layers[k];
        csv += "lstm" + std::to_string(k) + "," + std::to_string(l.lx) + "," +
               std::to_string(l.lh) + "," + std::to_string(rfs[k].rx) + "," +
               std::to_string(rfs[k].rh) + "," + std::to_string(rfs[k].rt) + "," +
               std::to_string(res.dsp_per_layer[k]) + "," +
               std::to_string(tim.ii_per_layer[k]) + "," +
               std::to_string(tim.interval_per_layer[k]) + "\n";
    }
    csv += "dense,,,,,," + std::to_string(res.dsp_dense) + ",,\n";
    csv += "total,,,,,," + std::to_string(res.dsp_model) + ",," +
           std::to_string(tim.system_interval_cycles) + "\n";

    double inf_per_s = tim.system_interval_cycles > 0
                           ? hw.freq_mhz * 1e6 / double(tim.system_interval_cycles)
                           : 0.0;
    json report{{"profile", profile_json(hw)},
                {"model", model_json(model)},
                {"reuse", reuse_json(rfs)},
                {"resources",
                 {{"dsp_per_layer", res.dsp_per_layer},
                  {"dsp_dense", res.dsp_dense},
                  {"dsp_model", res.dsp_model},
                  {"fits_budget", res.dsp_model <= hw.dsp_total}}},
                {"timing",
                 {{"ii_per_layer", tim.ii_per_layer},
                  {"interval_per_layer", tim.interval_per_layer},
                  {"system_interval_cycles", tim.system_interval_cycles},
                  {"latency_cycles", tim.latency_cycles},
                  {"inferences_per_second", inf_per_s}}}};
    write_json(dir / "estimate.json", report);
    write_file(dir / "estimate.csv", csv);
    print_summary(c.format, report, csv);
    return 0;
}

// ----------------------------------------------------------------- explore

struct ExploreOpts {
    long long budget = -1;  // -1 = profile budget
    int rh_min = 1, rh_max = 32;
};

json sweep_json(const ParetoSet& set) {
    json arr = json::array();
    for (const auto& p : set.points)
        arr.push_back(json{{"rh", p.rh},
                           {"rx", p.dp.rfs.front().rx},
                           {"ii_cycles", p.dp.timing.ii_per_layer.front()},
                           {"system_interval_cycles", p.dp.timing.system_interval_cycles},
                           {"latency_cycles", p.dp.timing.latency_cycles},
                           {"dsp_model", p.dp.resources.dsp_model}});
    return arr;
}

std::string sweep_csv(const ParetoSet& set) {
    std::string csv = "rh,rx,ii_cycles,system_interval_cycles,latency_cycles,dsp_model\n";
    for (const auto& p : set.points)
        csv += std::to_string(p.rh) + "," + std::to_string(p.dp.rfs.front().rx) + "," +
               std::to_string(p.dp.timing.ii_per_layer.front()) + "," +
               std::to_string(p.dp.timing.system_interval_cycles) + "," +
               std::to_string(p.dp.timing.latency_cycles) + "," +
               std::to_string(p.dp.resources.dsp_model) + "\n";
    return csv;
}

int cmd_explore(const Common& c, const ExploreOpts& o, HwProfile hw,
                const std::filesystem::path& dir) {
    ModelSpec model = load_model(c.manifest);
    if (o.budget >= 0) hw.dsp_total = o.budget;
    auto best = balance_model(model, hw);
    auto [naive, balanced] = pareto_sweep(model, hw, o.rh_min, o.rh_max);

    json report{{"profile", profile_json(hw)},
                {"model", model_json(model)},
                {"budget", hw.dsp_total},
                {"sweep", {{"rh_min", o.rh_min}, {"rh_max", o.rh_max}}},
                {"feasible", best.has_value()},
                {"pareto_naive", sweep_json(naive)},
                {"pareto_balanced", sweep_json(balanced)}};
    if (best) {
        report["best"] = json{{"reuse", reuse_json(best->rfs)},
                              {"balanced", best->balanced},
                              {"dsp_model", best->resources.dsp_model},
                              {"ii_cycles", best->timing.ii_per_layer.front()},
                              {"system_interval_cycles", best->timing.system_interval_cycles},
                              {"latency_cycles", best->timing.latency_cycles}};
    } else {
        report["best"] = nullptr;
    }
    write_json(dir / "explore.json", report);
    write_file(dir / "pareto_naive.csv", sweep_csv(naive));
    write_file(dir / "pareto_balanced.csv", sweep_csv(balanced));

    std::vector<std::pair<std::string, std::string>> rows{
        {"budget", std::to_string(hw.dsp_total)},
        {"feasible", best ? "true" : "false"}};
    if (best) {
        rows.push_back({"rh", std::to_string(best->rfs.front().rh)});
        rows.push_back({"rx", std::to_string(best->rfs.front().rx)});
        rows.push_back({"ii_cycles", std::to_string(best->timing.ii_per_layer.front())});
        rows.push_back(
            {"system_interval_cycles", std::to_string(best->timing.system_interval_cycles)});
        rows.push_back({"dsp_model", std::to_string(best->resources.dsp_model)});
    }
    print_summary(c.format, report, metrics_csv(rows));
    if (!best) {
        std::cerr << "error: no balanced configuration of '" << model.name << "' fits "
                  << hw.dsp_total << " DSPs (the gate tail alone sets a floor); "
                  << "raise --budget or shrink the model\n";
        return 3;
    }
    return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateOpts {
    std::vector<int> rh, rx, rt;
    int inferences = 8;
    long long arrival_gap = 0;
    int gantt_width = 100;
};

int cmd_simulate(const Common& c, const SimulateOpts& o, const HwProfile& hw,
                 const std::filesystem::path& dir) {
    ModelSpec model = load_model(c.manifest);
    auto rfs = build_reuse(model, o.rh, o.rx, o.rt, hw);
    StageConfig cfg = derive_stage_config(model, rfs, hw);
    auto [trace, rep] = simulate(cfg, o.inferences, o.arrival_gap);
    TimingEstimate tim = timing_model(model, rfs, hw);

    std::string csv = "inference,layer,stage,timestep,issue,finish\n";
    for (const auto& e : trace.events) {
        std::string stage =
            e.layer == trace.num_layers ? "dense" : "lstm" + std::to_string(e.layer);
        csv += std::to_string(e.inference) + "," + std::to_string(e.layer) + "," + stage + "," +
               std::to_string(e.timestep) + "," + std::to_string(e.issue) + "," +
               std::to_string(e.finish) + "\n";
    }

    json stages = json::array();
    for (const auto& s : cfg.layers)
        stages.push_back(json{{"ii", s.ii},
                              {"body_latency", s.body_latency},
                              {"mvmx_ii", s.mvmx_ii},
                              {"return_sequences", s.return_sequences},
                              {"barrier_input", s.barrier_input}});
    json report{{"profile", profile_json(hw)},
                {"model", model_json(model)},
                {"reuse", reuse_json(rfs)},
                {"stages", {{"layers", stages}, {"dense_ii", cfg.dense_ii}, {"ts", cfg.ts}}},
                {"inferences", o.inferences},
                {"arrival_gap", o.arrival_gap},
                {"latency_first_cycles", rep.latency_first},
                {"steady_interval_cycles",
                 rep.steady_interval_cycles ? json(*rep.steady_interval_cycles) : json(nullptr)},
                {"stall_cycles", rep.stall_cycles},
                {"comparison",
                 {{"analytical_interval_per_layer", tim.interval_per_layer},
                  {"analytical_system_interval_cycles", tim.system_interval_cycles},
                  {"analytical_latency_bound_cycles", tim.latency_cycles},
                  {"simulated_steady_interval_cycles",
                   rep.steady_interval_cycles ? json(*rep.steady_interval_cycles) : json(nullptr)},
                  {"simulated_latency_first_cycles", rep.latency_first},
                  {"intervals_match",
                   rep.steady_interval_cycles
                       ? json(*rep.steady_interval_cycles == tim.system_interval_cycles)
                       : json(nullptr)}}}};
    write_json(dir / "simulate.json", report);
    write_file(dir / "trace.csv", csv);
    write_file(dir / "gantt.txt", render_gantt(trace, cfg, o.gantt_width));

    std::vector<std::pair<std::string, std::string>> rows{
        {"latency_first_cycles", std::to_string(rep.latency_first)},
        {"steady_interval_cycles",
         rep.steady_interval_cycles ? std::to_string(*rep.steady_interval_cycles)
                                    : std::string("unavailable")},
        {"analytical_system_interval_cycles", std::to_string(tim.system_interval_cycles)}};
    print_summary(c.format, report, metrics_csv(rows));
    return 0;
}

// ------------------------------------------------------------------- infer

struct InferOpts {
    std::string window;
    std::string numerics = "both";
};

double mse(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    double acc = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < a[i].size(); ++j) {
            double d = a[i][j] - b[i][j];
            acc += d * d;
            ++n;
        }
    return n ? acc / double(n) : 0.0;
}

int cmd_infer(const Common& c, const InferOpts& o, const std::filesystem::path& dir) {
    if (o.window.empty()) throw CLI::RequiredError("--window (flag or config file)");
    LoadedManifest lm = load_manifest(c.manifest);
    std::vector<Vec> input = read_window_csv(o.window);
    if (int(input.size()) != lm.model.ts ||
        (input.size() && int(input.front().size()) != lm.model.input_width()))
        throw DataError("'" + o.window + "': expected " + std::to_string(lm.model.ts) +
                        " rows of " + std::to_string(lm.model.input_width()) +
                        " columns for model '" + lm.model.name + "'");

    json report{{"model", model_json(lm.model)}, {"window", o.window}};
    std::vector<std::pair<std::string, std::string>> rows;
    std::vector<Vec> out_float, out_fixed;
    if (o.numerics != "fixed") {
        out_float = model_forward(input, lm.model, Numerics::Float);
        write_sequence_csv((dir / "reconstruction_float.csv").string(), out_float);
        report["mse_float"] = mse(input, out_float);
        rows.push_back({"mse_float", g17(mse(input, out_float))});
    }
    if (o.numerics != "float") {
        out_fixed = model_forward_fixed(input, fixed_model_from(lm));
        write_sequence_csv((dir / "reconstruction_fixed.csv").string(), out_fixed);
        report["mse_fixed"] = mse(input, out_fixed);
        rows.push_back({"mse_fixed", g17(mse(input, out_fixed))});
    }
    if (o.numerics == "both") {
        double worst = 0.0;
        for (size_t i = 0; i < out_float.size(); ++i)
            for (size_t j = 0; j < out_float[i].size(); ++j)
                worst = std::max(worst, std::abs(out_float[i][j] - out_fixed[i][j]));
        report["max_abs_numerics_gap"] = worst;
        rows.push_back({"max_abs_numerics_gap", g17(worst)});
    }
    write_json(dir / "infer.json", report);
    print_summary(c.format, report, metrics_csv(rows));
    return 0;
}

// ------------------------------------------------------------------- bench

struct BenchOpts {
    int background = 500, signal = 500;
    double snr = 8.0, fpr = 0.1;
    std::string dataset, save_dataset;
};

std::string roc_csv(const RocResult& r) {
    std::string csv = "threshold,fpr,tpr\n";
    for (const auto& p : r.curve)
        csv += g17(p.threshold) + "," + g17(p.fpr) + "," + g17(p.tpr) + "\n";
    return csv;
}

json class_metrics(const std::vector<ScoredEvent>& scored, double target_fpr) {
    std::vector<double> bg;
    long long sig_total = 0, sig_above = 0, bg_above = 0;
    for (const auto& s : scored)
        if (s.label == 0) bg.push_back(s.loss);
    double thr = threshold_from_fpr(bg, target_fpr);
    for (const auto& s : scored) {
        if (s.label == 0 && s.loss > thr) ++bg_above;
        if (s.label == 1) {
            ++sig_total;
            if (s.loss > thr) ++sig_above;
        }
    }
    return json{{"threshold", thr},
                {"achieved_fpr", bg.empty() ? 0.0 : double(bg_above) / double(bg.size())},
                {"tpr_at_threshold", sig_total ? double(sig_above) / double(sig_total) : 0.0}};
}

int cmd_bench(const Common& c, const BenchOpts& o, int jobs, const std::filesystem::path& dir) {
    LoadedManifest lm = load_manifest(c.manifest);
    std::vector<EventWindow> events;
    json source;
    if (!o.dataset.empty()) {
        events = read_dataset_csv(o.dataset);
        source = json{{"path", o.dataset}, {"events", events.size()}};
    } else {
        GenParams gp;
        gp.ts = lm.model.ts;
        gp.snr = o.snr;
        events = gen_dataset(o.background, o.signal, c.seed, gp);
        source = json{{"generated",
                       {{"background", o.background},
                        {"signal", o.signal},
                        {"snr", o.snr},
                        {"seed", c.seed}}}};
    }
    size_t want = size_t(lm.model.ts) * size_t(lm.model.input_width());
    for (const auto& e : events)
        if (e.samples.size() != want)
            throw DataError("dataset window length " + std::to_string(e.samples.size()) +
                            " does not match model '" + lm.model.name + "' (expects " +
                            std::to_string(want) + " samples)");
    if (!o.save_dataset.empty()) write_dataset_csv(o.save_dataset, events);

    auto scored_float = score(events, lm.model, Numerics::Float, jobs);
    auto scored_fixed = score_fixed(events, fixed_model_from(lm), jobs);
    RocResult roc_float_r = roc_auc(scored_float);
    RocResult roc_fixed_r = roc_auc(scored_fixed);

    json report{{"model", model_json(lm.model)},
                {"dataset", source},
                {"target_fpr", o.fpr},
                {"jobs", jobs},
                {"float", class_metrics(scored_float, o.fpr)},
                {"fixed", class_metrics(scored_fixed, o.fpr)},
                {"auc_float", roc_float_r.auc},
                {"auc_fixed", roc_fixed_r.auc},
                {"auc_gap", std::abs(roc_float_r.auc - roc_fixed_r.auc)}};
    write_json(dir / "bench.json", report);
    write_file(dir / "roc_float.csv", roc_csv(roc_float_r));
    write_file(dir / "roc_fixed.csv", roc_csv(roc_fixed_r));

    std::vector<std::pair<std::string, std::string>> rows{
        {"events", std::to_string(events.size())},
        {"auc_float", g17(roc_float_r.auc)},
        {"auc_fixed", g17(roc_fixed_r.auc)},
        {"auc_gap", g17(std::abs(roc_float_r.auc - roc_fixed_r.auc))},
        {"threshold_float", g17(report["float"]["threshold"].get<double>())},
        {"achieved_fpr_float", g17(report["float"]["achieved_fpr"].get<double>())},
        {"tpr_float", g17(report["float"]["tpr_at_threshold"].get<double>())}};
    print_summary(c.format, report, metrics_csv(rows));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LSTM accelerator pipeline modeling, exploration and benchmarking"};
    app.require_subcommand(1);

    Common c;
    std::map<std::string, ConfigBinder> binders;  // one per subcommand
    EstimateOpts eo;
    ExploreOpts xo;
    SimulateOpts so;
    InferOpts io;
    BenchOpts bo;

    auto* est = app.add_subcommand("estimate", "analytical timing and DSP report");
    {
        ConfigBinder& b = binders["estimate"];
        add_common(est, c, b);
        b.bind_list(est->add_option("--rh", eo.rh, "recurrent reuse, one value or per layer")
                        ->delimiter(','),
                    "rh", eo.rh);
        b.bind_list(est->add_option("--rx", eo.rx, "input-product reuse (default: balanced)")
                        ->delimiter(','),
                    "rx", eo.rx);
        b.bind_list(est->add_option("--rt", eo.rt, "tail reuse")->delimiter(','), "rt", eo.rt);
    }

    auto* expl = app.add_subcommand("explore", "balanced search plus uniform-Rh Pareto sweep");
    {
        ConfigBinder& b = binders["explore"];
        add_common(expl, c, b);
        b.bind(expl->add_option("--budget", xo.budget, "DSP budget (default: profile total)"),
               "budget", xo.budget);
        b.bind(expl->add_option("--rh-min", xo.rh_min, "sweep start"), "rh-min", xo.rh_min);
        b.bind(expl->add_option("--rh-max", xo.rh_max, "sweep end"), "rh-max", xo.rh_max);
    }

    auto* sim = app.add_subcommand("simulate", "cycle-level pipeline schedule");
    {
        ConfigBinder& b = binders["simulate"];
        add_common(sim, c, b);
        b.bind_list(sim->add_option("--rh", so.rh, "recurrent reuse, one value or per layer")
                        ->delimiter(','),
                    "rh", so.rh);
        b.bind_list(sim->add_option("--rx", so.rx, "input-product reuse (default: balanced)")
                        ->delimiter(','),
                    "rx", so.rx);
        b.bind_list(sim->add_option("--rt", so.rt, "tail reuse")->delimiter(','), "rt", so.rt);
        b.bind(sim->add_option("--inferences", so.inferences, "back-to-back inferences")
                   ->check(CLI::PositiveNumber),
               "inferences", so.inferences);
        b.bind(sim->add_option("--arrival-gap", so.arrival_gap,
                               "cycles between input arrivals (0 = all queued)"),
               "arrival-gap", so.arrival_gap);
        b.bind(sim->add_option("--gantt-width", so.gantt_width, "timeline width in columns"),
               "gantt-width", so.gantt_width);
    }

    auto* inf = app.add_subcommand("infer", "run one window through the autoencoder");
    {
        ConfigBinder& b = binders["infer"];
        add_common(inf, c, b);
        b.bind(inf->add_option("--window", io.window, "input window CSV"), "window", io.window);
        b.bind(inf->add_option("--numerics", io.numerics, "which arithmetic to run")
                   ->check(CLI::IsMember({"both", "float", "fixed"})),
               "numerics", io.numerics);
    }

    auto* ben = app.add_subcommand("bench", "anomaly-detection benchmark (ROC, AUC, threshold)");
    {
        ConfigBinder& b = binders["bench"];
        add_common(ben, c, b);
        b.bind(ben->add_option("--background", bo.background, "background windows to generate")
                   ->check(CLI::NonNegativeNumber),
               "background", bo.background);
        b.bind(ben->add_option("--signal", bo.signal, "signal windows to generate")
                   ->check(CLI::NonNegativeNumber),
               "signal", bo.signal);
        b.bind(ben->add_option("--snr", bo.snr, "chirp-to-background RMS ratio"), "snr", bo.snr);
        b.bind(ben->add_option("--fpr", bo.fpr, "target false-positive rate"), "fpr", bo.fpr);
        b.bind(ben->add_option("--dataset", bo.dataset, "load events from CSV instead"),
               "dataset", bo.dataset);
        b.bind(ben->add_option("--save-dataset", bo.save_dataset,
                               "write the generated events"),
               "save-dataset", bo.save_dataset);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    CLI::App* active = app.get_subcommands().front();
    const std::string command = active->get_name();

    try {
        if (!c.config.empty()) {
            std::ifstream in(c.config);
            if (!in) throw CLI::ValidationError("config", "cannot open '" + c.config + "'");
            json cfg;
            try {
                cfg = json::parse(in);
            } catch (const json::exception& e) {
                throw CLI::ValidationError("config", "'" + c.config + "': " + e.what());
            }
            binders[command].apply(cfg, c.config);
        }
        if (c.manifest.empty())
            throw CLI::RequiredError("--manifest (flag or config file)");
        auto hw = named_profile(c.profile);
        if (!hw) {
            std::string known;
            for (const auto& n : profile_names()) known += (known.empty() ? "" : ", ") + n;
            throw CLI::ValidationError("--profile",
                                       "unknown profile '" + c.profile + "' (known: " + known + ")");
        }
        int jobs = c.jobs > 0 ? c.jobs
                              : std::max(1, int(std::thread::hardware_concurrency()));

        std::filesystem::path dir(c.out_dir);
        std::filesystem::create_directories(dir);
        json resolved{{"command", command}, {"manifest", c.manifest},
                      {"profile", c.profile}, {"out-dir", c.out_dir},
                      {"seed", c.seed},       {"format", c.format},
                      {"jobs", jobs}};
        if (command == "estimate")
            resolved["options"] = json{{"rh", eo.rh}, {"rx", eo.rx}, {"rt", eo.rt}};
        else if (command == "explore")
            resolved["options"] =
                json{{"budget", xo.budget}, {"rh-min", xo.rh_min}, {"rh-max", xo.rh_max}};
        else if (command == "simulate")
            resolved["options"] = json{{"rh", so.rh},
                                       {"rx", so.rx},
                                       {"rt", so.rt},
                                       {"inferences", so.inferences},
                                       {"arrival-gap", so.arrival_gap},
                                       {"gantt-width", so.gantt_width}};
        else if (command == "infer")
            resolved["options"] = json{{"window", io.window}, {"numerics", io.numerics}};
        else if (command == "bench")
            resolved["options"] = json{{"background", bo.background},
                                       {"signal", bo.signal},
                                       {"snr", bo.snr},
                                       {"fpr", bo.fpr},
                                       {"dataset", bo.dataset},
                                       {"save-dataset", bo.save_dataset}};
        write_json(dir / "resolved_config.json", resolved);

        if (command == "estimate") return cmd_estimate(c, eo, *hw, dir);
        if (command == "explore") return cmd_explore(c, xo, *hw, dir);
        if (command == "simulate") return cmd_simulate(c, so, *hw, dir);
        if (command == "infer") return cmd_infer(c, io, dir);
        if (command == "bench") return cmd_bench(c, bo, jobs, dir);
        std::cerr << "error: unknown command '" << command << "'\n";
        return 2;
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ManifestError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const TrainDivergence& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
