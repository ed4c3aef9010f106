#pragma once

// Serialization: study JSON, run tables as CSV with a JSON column sidecar,
// fitted models, candidate tables, random tables, traces and simulation
// results. Numbers in CSV use at most 6 decimals so a reload and re-save is
// byte-identical.

#include "formix/core.hpp"
#include "formix/design.hpp"
#include "formix/model.hpp"
#include "formix/profiler.hpp"
#include "formix/sim.hpp"
#include "formix/study.hpp"
#include "formix/svem.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace formix::io {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Files and numbers

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFound("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
}

/// Fixed 6-decimal rendering with trailing zeros removed; empty for NaN.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "";
    if (!std::isfinite(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    std::string s(buf);
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
}

/// Parses a CSV number; a trailing % divides by 100.
inline double parse_number(std::string s, const std::string& where = "") {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    s = s.substr(b);
    double scale = 1.0;
    if (!s.empty() && s.back() == '%') {
        s.pop_back();
        scale = 0.01;
    }
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v * scale;
    } catch (const std::exception&) {
        throw ValidationError("not a number: '" + s + "'" + (where.empty() ? "" : " in " + where));
    }
}

// ---------------------------------------------------------------------------
// CSV

using CsvRow = std::vector<std::string>;

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string csv_line(const CsvRow& row) {
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_escape(row[i]);
    return out + "\n";
}

inline std::vector<CsvRow> parse_csv(const std::string& text) {
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string cell;
    bool quoted = false, any = false;
    std::size_t i = text.rfind("\xEF\xBB\xBF", 0) == 0 ? 3 : 0;
    for (; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(cell));
            cell.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !cell.empty()) {
                row.push_back(std::move(cell));
                rows.push_back(std::move(row));
            }
            row.clear();
            cell.clear();
            any = false;
        } else {
            cell += c;
            any = true;
        }
    }
    if (quoted) throw ValidationError("unterminated quoted CSV field");
    if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::size_t header_index(const CsvRow& header, const std::string& name, bool required = true) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    if (required) throw ValidationError("CSV header lacks column '" + name + "'");
    return header.size();
}

// ---------------------------------------------------------------------------
// Study

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
inline double null_or_number(const Json& j) { return j.is_null() ? kNaN : j.get<double>(); }

inline Json to_json(const Factor& f) {
    return Json{{"name", f.name},   {"role", to_string(f.role)},         {"low", f.low},
                {"high", f.high},   {"granularity", f.granularity},      {"levels", f.levels}};
}

inline Factor factor_from_json(const Json& j) {
    Factor f;
    f.name = j.at("name").get<std::string>();
    f.role = parse_role(j.at("role").get<std::string>());
    f.low = j.value("low", 0.0);
    f.high = j.value("high", 0.0);
    f.granularity = j.value("granularity", 0.0);
    f.levels = j.value("levels", std::vector<std::string>{});
    return f;
}

inline Json to_json(const ResponseSpec& r) {
    return Json{{"name", r.name},
                {"goal", to_string(r.goal)},
                {"target", number_or_null(r.target)},
                {"importance", r.importance},
                {"transform", to_string(r.transform)},
                {"bounded01", r.bounded01}};
}

inline ResponseSpec response_from_json(const Json& j) {
    ResponseSpec r;
    r.name = j.at("name").get<std::string>();
    r.goal = parse_goal(j.value("goal", std::string("none")));
    r.target = j.contains("target") ? null_or_number(j["target"]) : kNaN;
    r.importance = j.value("importance", 1.0);
    r.transform = parse_transform(j.value("transform", std::string("identity")));
    r.bounded01 = j.value("bounded01", false);
    return r;
}

inline Json factors_json(const std::vector<Factor>& fs) {
    Json a = Json::array();
    for (const auto& f : fs) a.push_back(to_json(f));
    return a;
}

inline std::vector<Factor> factors_from_json(const Json& j) {
    std::vector<Factor> fs;
    for (const auto& e : j) fs.push_back(factor_from_json(e));
    return fs;
}

inline Json to_json(const StudyDefinition& def) {
    Json rs = Json::array();
    for (const auto& r : def.responses) rs.push_back(to_json(r));
    return Json{{"name", def.name}, {"date", def.date}, {"factors", factors_json(def.factors)}, {"responses", rs}};
}

inline StudyDefinition study_from_json(const Json& j) {
    try {
        StudyDefinition def;
        def.name = j.at("name").get<std::string>();
        def.date = j.value("date", std::string());
        def.factors = factors_from_json(j.at("factors"));
        for (const auto& r : j.value("responses", Json::array())) def.responses.push_back(response_from_json(r));
        return def;
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("malformed study JSON: ") + e.what());
    }
}

inline Json parse_json(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const Json::exception& e) {
        throw ValidationError("malformed " + what + " JSON: " + e.what());
    }
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json to_json(const ValidationReport& r) {
    Json a = Json::array();
    for (const auto& v : r) a.push_back(Json{{"subject", v.subject}, {"message", v.message}});
    return a;
}

// ---------------------------------------------------------------------------
// Data tables

inline std::string format_setting(const Factor& f, double v) {
    if (f.discrete()) return f.levels.at(static_cast<std::size_t>(v));
    return format_number(v);
}

inline double parse_setting(const Factor& f, const std::string& cell, const std::string& where) {
    if (f.discrete()) return static_cast<double>(f.level_index(cell));
    if (cell.empty()) throw ValidationError("missing value for factor '" + f.name + "' in " + where);
    return parse_number(cell, where);
}

inline const char* kRunId = "Run ID";
inline const char* kNotes = "Notes";
inline const char* kExclude = "Exclude";

inline std::string table_to_csv(const DataTable& t) {
    CsvRow header{kRunId};
    for (const auto& f : t.factors) header.push_back(f.name);
    for (const auto& c : t.columns) header.push_back(c);
    header.push_back(kNotes);
    header.push_back(kExclude);
    if (!t.source_column.empty()) header.push_back(t.source_column);
    std::string out = csv_line(header);
    for (const auto& r : t.rows) {
        CsvRow row{r.run_id};
        for (std::size_t i = 0; i < t.factors.size(); ++i) row.push_back(format_setting(t.factors[i], r.factors[i]));
        for (const auto& v : r.values) row.push_back(v ? format_number(*v) : "");
        row.push_back(r.notes);
        row.push_back(r.exclude ? "1" : "0");
        if (!t.source_column.empty()) row.push_back(r.source);
        out += csv_line(row);
    }
    return out;
}

/// Column metadata kept beside a table CSV.
inline Json table_schema(const DataTable& t) {
    return Json{{"factors", factors_json(t.factors)}, {"columns", t.columns}, {"source_column", t.source_column}};
}

/// Reads a table written by table_to_csv using its sidecar schema.
inline DataTable table_from_csv(const std::string& csv, const Json& schema) {
    DataTable t;
    t.factors = factors_from_json(schema.at("factors"));
    t.columns = schema.at("columns").get<std::vector<std::string>>();
    t.source_column = schema.value("source_column", std::string());
    auto rows = parse_csv(csv);
    if (rows.empty()) throw ValidationError("empty table CSV");
    const auto& h = rows[0];
    auto id = header_index(h, kRunId);
    std::vector<std::size_t> fi, ci;
    for (const auto& f : t.factors) fi.push_back(header_index(h, f.name));
    for (const auto& c : t.columns) ci.push_back(header_index(h, c));
    auto ni = header_index(h, kNotes), ei = header_index(h, kExclude);
    auto si = t.source_column.empty() ? h.size() : header_index(h, t.source_column);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto cells = rows[r];
        cells.resize(h.size());
        std::string where = "row " + std::to_string(r + 1);
        DataRow row;
        row.run_id = cells[id];
        for (std::size_t i = 0; i < fi.size(); ++i) row.factors.push_back(parse_setting(t.factors[i], cells[fi[i]], where));
        for (auto c : ci)
            row.values.push_back(cells[c].empty() ? std::nullopt : std::optional<double>(parse_number(cells[c], where)));
        row.notes = cells[ni];
        row.exclude = cells[ei] == "1";
        if (si < h.size()) row.source = cells[si];
        t.rows.push_back(std::move(row));
    }
    return t;
}

/// Imports a user CSV against a study: every study factor must have a column
/// (mixture values as fractions or percents, categorical as labels); other
/// columns become measurement columns. Run ID, Notes, Exclude and the source
/// column are optional. Rows are checked with validate_table.
inline DataTable import_csv(const std::string& csv, const StudyDefinition& def, const std::string& source_column = "") {
    auto rows = parse_csv(csv);
    if (rows.empty()) throw ValidationError("empty CSV");
    const auto& h = rows[0];
    DataTable t;
    t.factors = def.factors;
    t.source_column = source_column;
    std::vector<std::size_t> fi;
    for (const auto& f : def.factors) fi.push_back(header_index(h, f.name));
    auto id = header_index(h, kRunId, false), ni = header_index(h, kNotes, false), ei = header_index(h, kExclude, false);
    auto si = source_column.empty() ? h.size() : header_index(h, source_column);
    std::vector<std::size_t> ci;
    for (std::size_t c = 0; c < h.size(); ++c) {
        if (c == id || c == ni || c == ei || c == si) continue;
        if (std::find(fi.begin(), fi.end(), c) != fi.end()) continue;
        ci.push_back(c);
        t.columns.push_back(h[c]);
    }
    for (const auto& r : def.responses)
        if (!t.has_column(r.name)) t.columns.push_back(r.name);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto cells = rows[r];
        cells.resize(h.size());
        std::string where = "row " + std::to_string(r + 1);
        DataRow row;
        row.run_id = id < h.size() && !cells[id].empty() ? cells[id] : detail::run_id(def, r - 1);
        for (std::size_t i = 0; i < fi.size(); ++i) row.factors.push_back(parse_setting(def.factors[i], cells[fi[i]], where));
        row.values.assign(t.columns.size(), std::nullopt);
        for (std::size_t k = 0; k < ci.size(); ++k) {
            const auto& cell = cells[ci[k]];
            if (!cell.empty() && cell != "NA") row.values[k] = parse_number(cell, where);
        }
        if (ni < h.size()) row.notes = cells[ni];
        if (ei < h.size()) row.exclude = cells[ei] == "1" || cells[ei] == "true";
        if (si < h.size()) row.source = cells[si];
        t.rows.push_back(std::move(row));
    }
    auto report = validate_table(t);
    if (!report.empty()) {
        std::string msg = "invalid data table:";
        for (const auto& v : report) msg += " [" + v.subject + ": " + v.message + "]";
        throw ValidationError(msg);
    }
    return t;
}

/// Round-trips the numbers through their CSV rendering so an in-memory table
/// equals its reload.
inline DataTable canonical(const DataTable& t) {
    return table_from_csv(table_to_csv(t), table_schema(t));
}

inline Json design_report(const Design& d) {
    std::vector<Settings> pts;
    for (const auto& r : d.table.rows)
        if (!r.exclude && std::find(pts.begin(), pts.end(), r.factors) == pts.end()) pts.push_back(r.factors);
    Json j{{"study", d.study.name},
           {"runs", d.table.rows.size()},
           {"seed", d.seed},
           {"method", d.method},
           {"oversample", d.oversample},
           {"infeasible_runs", d.infeasible_runs},
           {"distinct_runs", pts.size()},
           {"min_pairwise_distance", pts.size() >= 2 ? Json(min_pairwise_distance(d.table.factors, pts)) : Json(nullptr)}};
    if (validate_study(d.study).empty())
        j["heuristics"] = Json{{"min", min_run_heuristic(d.study)}, {"max", max_run_heuristic(d.study)}};
    return j;
}

// ---------------------------------------------------------------------------
// Models

inline Json to_json(const Effect& e, const std::vector<Factor>& fs) {
    Json ops = Json::array();
    for (const auto& o : e.operands) ops.push_back(Json::array({o.factor, o.level}));
    return Json{{"kind", to_string(e.kind)}, {"operands", ops}, {"name", effect_key(e, fs)}};
}

inline Effect effect_from_json(const Json& j) {
    Effect e;
    e.kind = parse_effect_kind(j.at("kind").get<std::string>());
    for (const auto& o : j.at("operands")) e.operands.push_back({o.at(0).get<std::size_t>(), o.at(1).get<int>()});
    return e;
}

inline Json to_json(const EnsembleModel& m) {
    Json effects = Json::array();
    for (const auto& e : m.effects) effects.push_back(to_json(e, m.factors));
    Json members = Json::array();
    for (const auto& f : m.members)
        members.push_back(Json{{"columns", f.columns}, {"coef", f.coef}, {"sse", f.sse}, {"n", f.n}});
    Json mean = Json::array();
    for (Eigen::Index i = 0; i < m.mean_coefficients().size(); ++i) mean.push_back(m.mean_coefficients()(i));
    return Json{{"response", m.response},  {"method", to_string(m.method)}, {"transform", to_string(m.transform)},
                {"samples", m.samples},    {"seed", m.seed},                {"skipped", m.skipped},
                {"rows", m.rows},          {"factors", factors_json(m.factors)},
                {"effects", effects},      {"mean_coefficients", mean},     {"members", members}};
}

inline EnsembleModel model_from_json(const Json& j) {
    try {
        EnsembleModel m;
        m.response = j.at("response").get<std::string>();
        m.method = parse_fit_method(j.at("method").get<std::string>());
        m.transform = parse_transform(j.at("transform").get<std::string>());
        m.samples = j.at("samples").get<std::size_t>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.skipped = j.at("skipped").get<std::size_t>();
        m.rows = j.at("rows").get<std::size_t>();
        m.factors = factors_from_json(j.at("factors"));
        for (const auto& e : j.at("effects")) m.effects.push_back(effect_from_json(e));
        for (const auto& f : j.at("members")) {
            LinearFit fit;
            fit.columns = f.at("columns").get<std::vector<std::size_t>>();
            fit.coef = f.at("coef").get<std::vector<double>>();
            fit.sse = f.at("sse").get<double>();
            fit.n = f.at("n").get<std::size_t>();
            m.members.push_back(std::move(fit));
        }
        m.finalize();
        return m;
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("malformed model JSON: ") + e.what());
    }
}

inline Json to_json(const ActualPredicted& ap) {
    return Json{{"run_ids", ap.run_ids},
                {"actual", ap.actual},
                {"predicted", ap.predicted},
                {"correlation", ap.correlation ? Json(*ap.correlation) : Json(nullptr)},
                {"outliers", ap.outliers}};
}

// ---------------------------------------------------------------------------
// Profiler outputs

inline Json settings_json(const std::vector<Factor>& fs, const Settings& s) {
    Json j = Json::object();
    for (std::size_t i = 0; i < fs.size(); ++i) {
        if (fs[i].discrete()) j[fs[i].name] = fs[i].levels.at(static_cast<std::size_t>(s[i]));
        else j[fs[i].name] = s[i];
    }
    return j;
}

/// Settings from a JSON object keyed by factor name; factors not given take
/// `base` values.
inline Settings settings_from_json(const std::vector<Factor>& fs, const Json& j, Settings base) {
    if (base.size() != fs.size()) base.assign(fs.size(), kNaN);
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::size_t i = 0;
        while (i < fs.size() && fs[i].name != it.key()) ++i;
        if (i == fs.size()) throw ValidationError("unknown factor '" + it.key() + "'");
        if (fs[i].discrete()) base[i] = static_cast<double>(fs[i].level_index(it.value().get<std::string>()));
        else base[i] = it.value().get<double>();
    }
    for (std::size_t i = 0; i < fs.size(); ++i)
        if (std::isnan(base[i])) throw ValidationError("no value for factor '" + fs[i].name + "'");
    return base;
}

inline Json to_json(const CandidateRecipe& c, const std::vector<Factor>& fs, const std::vector<std::string>& responses) {
    Json preds = Json::object(), weights = Json::object();
    for (std::size_t i = 0; i < responses.size() && i < c.predictions.size(); ++i) preds[responses[i]] = c.predictions[i];
    for (const auto& [r, w] : c.weights) weights[r] = w;
    return Json{{"label", c.label},           {"model", c.model_tag},        {"settings", settings_json(fs, c.settings)},
                {"predictions", preds},       {"desirability", c.desirability}, {"weights", weights}};
}

/// Optional truth columns for candidate tables (simulation studies).
using TruthColumns = std::vector<std::pair<std::string, std::function<double(const Settings&)>>>;

inline std::string candidates_to_csv(const CandidateTable& t, const TruthColumns& truth = {}) {
    CsvRow header{"Optimal Candidate", "Generating Model"};
    for (const auto& f : t.factors) header.push_back(f.name);
    for (const auto& r : t.responses) header.push_back("Predicted " + r);
    header.push_back("Desirability");
    for (const auto& r : t.responses) header.push_back("Weight " + r);
    for (const auto& [name, f] : truth) header.push_back("True " + name);
    std::string out = csv_line(header);
    for (const auto& c : t.rows) {
        CsvRow row{c.label, c.model_tag};
        for (std::size_t i = 0; i < t.factors.size(); ++i) row.push_back(format_setting(t.factors[i], c.settings[i]));
        for (std::size_t i = 0; i < t.responses.size(); ++i)
            row.push_back(i < c.predictions.size() ? format_number(c.predictions[i]) : "");
        row.push_back(format_number(c.desirability));
        for (const auto& r : t.responses) {
            std::string cell;
            for (const auto& [name, w] : c.weights)
                if (name == r) cell = format_number(w);
            row.push_back(cell);
        }
        for (const auto& [name, f] : truth) row.push_back(format_number(f(c.settings)));
        out += csv_line(row);
    }
    return out;
}

inline CandidateTable candidates_from_csv(const std::string& csv, const std::vector<Factor>& fs,
                                          const std::vector<std::string>& responses) {
    CandidateTable t{fs, responses, {}};
    auto rows = parse_csv(csv);
    if (rows.empty()) throw ValidationError("empty candidate CSV");
    const auto& h = rows[0];
    auto li = header_index(h, "Optimal Candidate"), mi = header_index(h, "Generating Model");
    auto di = header_index(h, "Desirability");
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto cells = rows[r];
        cells.resize(h.size());
        std::string where = "candidate row " + std::to_string(r + 1);
        CandidateRecipe c;
        c.label = cells[li];
        c.model_tag = cells[mi];
        for (const auto& f : fs) c.settings.push_back(parse_setting(f, cells[header_index(h, f.name)], where));
        for (const auto& name : responses) {
            const auto& p = cells[header_index(h, "Predicted " + name)];
            c.predictions.push_back(p.empty() ? kNaN : parse_number(p, where));
            const auto& w = cells[header_index(h, "Weight " + name)];
            if (!w.empty()) c.weights.push_back({name, parse_number(w, where)});
        }
        c.desirability = parse_number(cells[di], where);
        t.rows.push_back(std::move(c));
    }
    return t;
}

inline std::string random_table_to_csv(const RandomTable& t) {
    CsvRow header;
    for (const auto& f : t.factors) header.push_back(f.name);
    for (const auto& r : t.responses) header.push_back(r);
    header.push_back("Desirability");
    header.push_back("Cumulative Probability");
    std::string out = csv_line(header);
    for (std::size_t i = 0; i < t.settings.size(); ++i) {
        CsvRow row;
        for (std::size_t k = 0; k < t.factors.size(); ++k) row.push_back(format_setting(t.factors[k], t.settings[i][k]));
        for (double p : t.predictions[i]) row.push_back(format_number(p));
        row.push_back(format_number(t.desirability[i]));
        row.push_back(format_number(t.cumulative[i]));
        out += csv_line(row);
    }
    return out;
}

inline Json to_json(const Trace& t) {
    Json grid = Json::array(), d = Json::array(), responses = Json::object();
    for (double g : t.grid) grid.push_back(g);
    for (double v : t.desirability) d.push_back(number_or_null(v));
    for (const auto& [name, vals] : t.responses) {
        Json a = Json::array();
        for (double v : vals) a.push_back(number_or_null(v));
        responses[name] = a;
    }
    Json feasible = Json::array();
    for (bool b : t.feasible) feasible.push_back(b);
    return Json{{"factor", t.factor}, {"grid", grid},      {"labels", t.labels},
                {"responses", responses}, {"desirability", d}, {"feasible", feasible}};
}

// ---------------------------------------------------------------------------
// Simulation

inline Json to_json(const sim::BenchmarkConfig& c) {
    std::vector<std::string> methods;
    for (auto m : c.methods) methods.push_back(to_string(m));
    return Json{{"sizes", c.sizes},         {"methods", methods},           {"replicates", c.replicates},
                {"noise_scale", c.noise_scale}, {"seed", c.seed},           {"samples", c.samples},
                {"starts", c.optimize.starts},  {"refine", c.optimize.refine}};
}

inline sim::BenchmarkConfig sim_config_from_json(const Json& j) {
    sim::BenchmarkConfig c;
    try {
        if (j.contains("sizes")) c.sizes = j["sizes"].get<std::vector<std::size_t>>();
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& m : j["methods"]) c.methods.push_back(parse_fit_method(m.get<std::string>()));
        }
        c.replicates = j.value("replicates", c.replicates);
        c.noise_scale = j.value("noise_scale", c.noise_scale);
        c.seed = j.value("seed", c.seed);
        c.samples = j.value("samples", c.samples);
        c.optimize.starts = j.value("starts", c.optimize.starts);
        c.optimize.refine = j.value("refine", c.optimize.refine);
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("malformed simulation config: ") + e.what());
    }
    for (auto m : c.methods)
        if (m == FitMethod::svem_lasso) throw ValidationError("simulation methods are full, forward-aicc and svem-forward");
    if (c.replicates == 0) throw ValidationError("replicates must be at least 1");
    return c;
}

inline std::string sim_results_to_csv(const std::vector<sim::SimResult>& rs) {
    std::string out = csv_line({"size", "method", "replicate", "available", "percent"});
    for (const auto& r : rs)
        out += csv_line({std::to_string(r.size), to_string(r.method), std::to_string(r.replicate),
                         r.available ? "1" : "0", format_number(r.percent)});
    return out;
}

inline std::vector<sim::SimResult> sim_results_from_csv(const std::string& csv) {
    auto rows = parse_csv(csv);
    if (rows.empty()) throw ValidationError("empty results CSV");
    const auto& h = rows[0];
    auto si = header_index(h, "size"), mi = header_index(h, "method"), ri = header_index(h, "replicate");
    auto ai = header_index(h, "available"), pi = header_index(h, "percent");
    std::vector<sim::SimResult> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto c = rows[r];
        c.resize(h.size());
        std::string where = "results row " + std::to_string(r + 1);
        sim::SimResult s;
        s.size = static_cast<std::size_t>(parse_number(c[si], where));
        s.method = parse_fit_method(c[mi]);
        s.replicate = static_cast<std::size_t>(parse_number(c[ri], where));
        s.available = c[ai] == "1";
        s.percent = c[pi].empty() ? kNaN : parse_number(c[pi], where);
        out.push_back(s);
    }
    return out;
}

inline std::string sim_summary_to_csv(const sim::BenchmarkSummary& s) {
    std::string out = csv_line({"size", "method", "count", "available", "mean", "sd", "ci_half_width"});
    for (const auto& c : s.cells)
        out += csv_line({std::to_string(c.size), to_string(c.method), std::to_string(c.count), c.available ? "1" : "0",
                         format_number(c.mean), format_number(c.sd), format_number(c.ci_half_width)});
    return out;
}

inline Json to_json(const sim::BenchmarkSummary& s) {
    Json cells = Json::array(), tests = Json::array();
    for (const auto& c : s.cells)
        cells.push_back(Json{{"size", c.size},           {"method", to_string(c.method)}, {"count", c.count},
                             {"available", c.available}, {"mean", number_or_null(c.mean)}, {"sd", number_or_null(c.sd)},
                             {"ci_half_width", number_or_null(c.ci_half_width)}});
    for (const auto& t : s.tests)
        tests.push_back(Json{{"size", t.size},
                             {"better", to_string(t.better)},
                             {"worse", to_string(t.worse)},
                             {"pairs", t.pairs},
                             {"mean_difference", number_or_null(t.mean_difference)},
                             {"t", number_or_null(t.t)},
                             {"p_greater", number_or_null(t.p_greater)},
                             {"p_less", number_or_null(t.p_less)},
                             {"ordering_holds", t.mean_difference >= 0.0 && t.p_less >= 0.05}});
    return Json{{"cells", cells}, {"tests", tests}};
}

inline std::string sim_tests_to_csv(const sim::BenchmarkSummary& s) {
    std::string out =
        csv_line({"size", "better", "worse", "pairs", "mean_difference", "t", "p_greater", "p_less", "ordering_holds"});
    for (const auto& t : s.tests)
        out += csv_line({std::to_string(t.size), to_string(t.better), to_string(t.worse), std::to_string(t.pairs),
                         format_number(t.mean_difference), format_number(t.t), format_number(t.p_greater),
                         format_number(t.p_less), t.mean_difference >= 0.0 && t.p_less >= 0.05 ? "1" : "0"});
    return out;
}

} // namespace formix::io
