#include "lstmpipe/manifest.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lstmpipe/errors.hpp"

namespace lstmpipe {

using nlohmann::json;

namespace {

const json& need(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw ManifestError(where + ": missing key '" + key + "'");
    return *it;
}

std::int64_t need_int(const json& j, const char* key, const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_number_integer()) throw ManifestError(where + "." + key + ": expected an integer");
    return v.get<std::int64_t>();
}

bool need_bool(const json& j, const char* key, const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_boolean()) throw ManifestError(where + "." + key + ": expected a boolean");
    return v.get<bool>();
}

std::vector<std::int64_t> need_int_array(const json& j, const char* key, size_t expect,
                                         const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_array())
        throw ManifestError(where + "." + key + ": expected an array");
    if (v.size() != expect)
        throw ManifestError(where + "." + key + ": expected " + std::to_string(expect) +
                            " integers, got " + std::to_string(v.size()));
    std::vector<std::int64_t> out;
    out.reserve(expect);
    for (const auto& e : v) {
        if (!e.is_number_integer())
            throw ManifestError(where + "." + key + ": expected integer elements");
        out.push_back(e.get<std::int64_t>());
    }
    return out;
}

FixedFormat read_format(const json& j, const std::string& where) {
    FixedFormat f;
    f.word_bits = int(need_int(j, "word_bits", where));
    f.frac_bits = int(need_int(j, "frac_bits", where));
    if (!f.valid()) throw ManifestError(where + ": invalid format " + f.to_string());
    return f;
}

void check_range(const std::vector<std::int64_t>& raws, const FixedFormat& fmt,
                 const std::string& where) {
    for (std::int64_t r : raws)
        if (r < fmt.raw_min() || r > fmt.raw_max())
            throw ManifestError(where + ": raw value " + std::to_string(r) +
                                " outside " + fmt.to_string() + " range");
}

json format_json(const FixedFormat& f) {
    return json{{"word_bits", f.word_bits}, {"frac_bits", f.frac_bits}};
}

json tables_json(const ActTables& t) {
    json sig{{"lo_raw", t.sigmoid_lo_raw},
             {"step_log2", t.sigmoid_step_log2},
             {"values", t.sigmoid_raw}};
    json segs = json::array();
    for (const auto& s : t.tanh_segments)
        segs.push_back(json{{"x0_raw", s.x0_raw}, {"y0_wide", s.y0_wide}, {"slope_q15", s.slope_q15}});
    return json{{"sigmoid", sig}, {"tanh_segments", segs}};
}

ActTables tables_from_json(const json& j, const FixedFormat& fmt, const std::string& where) {
    ActTables t;
    t.fmt = fmt;
    t.one_raw = std::int64_t(1) << fmt.frac_bits;
    const json& sig = need(j, "sigmoid", where);
    t.sigmoid_lo_raw = need_int(sig, "lo_raw", where + ".sigmoid");
    t.sigmoid_step_log2 = int(need_int(sig, "step_log2", where + ".sigmoid"));
    const json& vals = need(sig, "values", where + ".sigmoid");
    if (!vals.is_array() || vals.empty())
        throw ManifestError(where + ".sigmoid.values: expected a nonempty array");
    for (const auto& e : vals) t.sigmoid_raw.push_back(e.get<std::int32_t>());
    t.sigmoid_lo = double(t.sigmoid_lo_raw) * fmt.lsb();
    t.sigmoid_hi = t.sigmoid_lo +
                   double(t.sigmoid_raw.size()) * std::ldexp(1.0, t.sigmoid_step_log2) * fmt.lsb();

    const json& segs = need(j, "tanh_segments", where);
    if (!segs.is_array() || segs.empty())
        throw ManifestError(where + ".tanh_segments: expected a nonempty array");
    for (size_t i = 0; i < segs.size(); ++i) {
        std::string sw = where + ".tanh_segments[" + std::to_string(i) + "]";
        TanhSegment s;
        s.x0_raw = need_int(segs[i], "x0_raw", sw);
        s.y0_wide = need_int(segs[i], "y0_wide", sw);
        s.slope_q15 = int(need_int(segs[i], "slope_q15", sw));
        s.breakpoint = double(s.x0_raw) * fmt.lsb();
        s.slope = double(s.slope_q15) / 32768.0;
        s.intercept = double(s.y0_wide) * std::ldexp(1.0, -(fmt.frac_bits + 15)) -
                      s.slope * s.breakpoint;
        if (i > 0 && s.x0_raw <= t.tanh_segments.back().x0_raw)
            throw ManifestError(sw + ": breakpoints must be strictly ascending");
        t.tanh_segments.push_back(s);
    }
    return t;
}

}  // namespace

void save_manifest(const std::string& path, const ModelSpec& model, bool embed_tables) {
    FixedModel fm = quantize_model(model);

    json j;
    j["schema"] = 1;
    j["name"] = model.name;
    j["ts"] = model.ts;
    j["gate_order"] = "ifgo";
    j["formats"] = json{{"act", format_json(model.formats.act)},
                        {"wide", format_json(model.formats.wide)}};
    j["repeat_vector_after"] = model.repeat_vector_after;

    json layers = json::array();
    for (size_t k = 0; k < model.layers.size(); ++k) {
        const auto& s = model.layers[k];
        layers.push_back(json{{"lx", s.lx},
                              {"lh", s.lh},
                              {"return_sequences", s.return_sequences},
                              {"wx", fm.fx_layers[k].wx},
                              {"wh", fm.fx_layers[k].wh},
                              {"b", fm.fx_layers[k].b}});
    }
    j["layers"] = layers;
    j["dense"] = json{{"out", fm.dense_out}, {"w", fm.dense_w}, {"b", fm.dense_b}};
    if (embed_tables) j["act_tables"] = tables_json(fm.tables);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ManifestError("cannot open '" + path + "' for writing");
    out << j.dump() << "\n";
}

LoadedManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ManifestError("cannot open manifest '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ManifestError("manifest '" + path + "': " + e.what());
    }

    const std::string where = "manifest";
    if (need_int(j, "schema", where) != 1)
        throw ManifestError(where + ": unsupported schema version (expected 1)");
    const json& go = need(j, "gate_order", where);
    if (!go.is_string() || go.get<std::string>() != "ifgo")
        throw ManifestError(where + ".gate_order: expected \"ifgo\"");

    LoadedManifest lm;
    ModelSpec& m = lm.model;
    if (j.contains("name") && j["name"].is_string()) m.name = j["name"].get<std::string>();
    m.ts = int(need_int(j, "ts", where));
    const json& fj = need(j, "formats", where);
    m.formats.act = read_format(need(fj, "act", where + ".formats"), where + ".formats.act");
    m.formats.wide = read_format(need(fj, "wide", where + ".formats"), where + ".formats.wide");
    m.repeat_vector_after = int(need_int(j, "repeat_vector_after", where));

    const json& layers = need(j, "layers", where);
    if (!layers.is_array() || layers.empty())
        throw ManifestError(where + ".layers: expected a nonempty array");
    const double alsb = m.formats.act.lsb();
    const double wlsb = m.formats.wide.lsb();
    for (size_t k = 0; k < layers.size(); ++k) {
        std::string lw = where + ".layers[" + std::to_string(k) + "]";
        LayerSpec s;
        s.lx = int(need_int(layers[k], "lx", lw));
        s.lh = int(need_int(layers[k], "lh", lw));
        s.ts = m.ts;
        s.return_sequences = need_bool(layers[k], "return_sequences", lw);
        if (s.lx < 1 || s.lh < 1) throw ManifestError(lw + ": dimensions must be >= 1");

        auto wx = need_int_array(layers[k], "wx", size_t(4) * s.lh * s.lx, lw);
        auto wh = need_int_array(layers[k], "wh", size_t(4) * s.lh * s.lh, lw);
        auto b = need_int_array(layers[k], "b", size_t(4) * s.lh, lw);
        check_range(wx, m.formats.act, lw + ".wx");
        check_range(wh, m.formats.act, lw + ".wh");
        check_range(b, m.formats.wide, lw + ".b");

        LstmWeights w;
        w.wx = Matrix(4 * s.lh, s.lx);
        w.wh = Matrix(4 * s.lh, s.lh);
        w.b.resize(size_t(4) * s.lh);
        for (size_t i = 0; i < wx.size(); ++i) w.wx.a[i] = double(wx[i]) * alsb;
        for (size_t i = 0; i < wh.size(); ++i) w.wh.a[i] = double(wh[i]) * alsb;
        for (size_t i = 0; i < b.size(); ++i) w.b[i] = double(b[i]) * wlsb;
        m.layers.push_back(s);
        m.weights.push_back(std::move(w));
    }

    const json& dj = need(j, "dense", where);
    int out_n = int(need_int(dj, "out", where + ".dense"));
    int lh_last = m.layers.back().lh;
    if (out_n < 1) throw ManifestError(where + ".dense.out: must be >= 1");
    auto dw = need_int_array(dj, "w", size_t(out_n) * lh_last, where + ".dense");
    auto db = need_int_array(dj, "b", size_t(out_n), where + ".dense");
    check_range(dw, m.formats.act, where + ".dense.w");
    check_range(db, m.formats.wide, where + ".dense.b");
    m.dense.w = Matrix(out_n, lh_last);
    m.dense.b.resize(out_n);
    for (size_t i = 0; i < dw.size(); ++i) m.dense.w.a[i] = double(dw[i]) * alsb;
    for (size_t i = 0; i < db.size(); ++i) m.dense.b[i] = double(db[i]) * wlsb;

    try {
        m.validate();
    } catch (const SpecError& e) {
        throw ManifestError("manifest '" + path + "': " + e.what());
    }

    if (j.contains("act_tables"))
        lm.tables = tables_from_json(j["act_tables"], m.formats.act, where + ".act_tables");
    return lm;
}

ModelSpec load_model(const std::string& path) { return load_manifest(path).model; }

FixedModel fixed_model_from(const LoadedManifest& m) {
    FixedModel fm = quantize_model(m.model);
    if (m.tables) fm.tables = *m.tables;
    return fm;
}

std::vector<Vec> read_window_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input CSV '" + path + "'");
    std::vector<Vec> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        Vec row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                size_t used = 0;
                row.push_back(std::stod(cell, &used));
                while (used < cell.size() && std::isspace((unsigned char)cell[used])) ++used;
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw DataError(path + ":" + std::to_string(lineno) +
                                ": cannot parse '" + cell + "' as a number");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw DataError(path + ":" + std::to_string(lineno) + ": ragged row width");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(path + ": no data rows");
    return rows;
}

void write_sequence_csv(const std::string& path, const std::vector<Vec>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    char buf[64];
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", row[i]);
            out << (i ? "," : "") << buf;
        }
        out << "\n";
    }
}

}  // namespace lstmpipe
