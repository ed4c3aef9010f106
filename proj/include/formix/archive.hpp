#pragma once

// One study per directory:
//   archive.json                 revision counter
//   study.json
//   design.csv, design.columns.json, design-report.json
//   data.csv, data.columns.json
//   models/<response>.json       default model set
//   models/<set>/<response>.json named model sets
//   candidates.csv               remembered settings
//   random_table.csv
//   log.txt                      one date-stamped line per write
//   history/<date>_r<rev>_<file> copy of every file as written at that revision

#include "formix/io.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <regex>

namespace formix {

/// Today's date as YYYY-MM-DD (UTC).
inline std::string iso_today() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[16];
    std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
    return buf;
}

class Archive {
public:
    explicit Archive(std::filesystem::path dir, std::function<std::string()> today = iso_today)
        : dir_(std::move(dir)), today_(std::move(today)) {}

    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path path(const std::string& name) const { return dir_ / name; }
    bool has(const std::string& name) const { return std::filesystem::exists(path(name)); }

    std::uint64_t revision() const {
        if (!has("archive.json")) return 0;
        return io::parse_json(io::read_file(path("archive.json")), "archive").value("revision", std::uint64_t{0});
    }

    // ---------------------------------------------------------------- study

    bool has_study() const { return has("study.json"); }

    StudyDefinition study() const {
        require("study.json", "study");
        return io::study_from_json(io::parse_json(io::read_file(path("study.json")), "study"));
    }

    void put_study(const StudyDefinition& def) {
        require_valid(def);
        write("study.json", io::dump(io::to_json(def)));
        commit("study " + def.name);
    }

    // ---------------------------------------------------------------- tables

    bool has_design() const { return has("design.csv"); }
    DataTable design() const { return table("design"); }
    io::Json design_report() const {
        require("design-report.json", "design report");
        return io::parse_json(io::read_file(path("design-report.json")), "design report");
    }

    void put_design(const Design& d) {
        write_table("design", d.table);
        write("design-report.json", io::dump(io::design_report(d)));
        commit("design " + std::to_string(d.table.rows.size()) + " runs, seed " + std::to_string(d.seed));
    }

    bool has_data() const { return has("data.csv"); }
    DataTable data() const { return table("data"); }

    void put_data(const DataTable& t, const std::string& action = "data") {
        write_table("data", t);
        commit(action + " " + std::to_string(t.rows.size()) + " rows");
    }

    // ---------------------------------------------------------------- models

    static void check_set_name(const std::string& set) {
        static const std::regex ok("[A-Za-z0-9_-]*");
        if (!std::regex_match(set, ok)) throw ValidationError("model set names use letters, digits, '-' and '_'");
    }

    std::filesystem::path model_path(const std::string& set, const std::string& response) const {
        check_set_name(set);
        auto base = dir_ / "models";
        if (!set.empty()) base /= set;
        return base / (response + ".json");
    }

    bool has_model(const std::string& set, const std::string& response) const {
        return std::filesystem::exists(model_path(set, response));
    }

    EnsembleModel model(const std::string& set, const std::string& response) const {
        auto p = model_path(set, response);
        if (!std::filesystem::exists(p))
            throw NotFound("no fitted model for '" + response + "'" + (set.empty() ? "" : " in set '" + set + "'"));
        return io::model_from_json(io::parse_json(io::read_file(p.string()), "model"));
    }

    void put_models(const std::string& set, const std::vector<EnsembleModel>& models) {
        std::string names;
        for (const auto& m : models) {
            auto p = model_path(set, m.response);
            write(std::filesystem::relative(p, dir_).generic_string(), io::dump(io::to_json(m)));
            names += (names.empty() ? "" : ",") + m.response;
        }
        commit("fit " + names + (set.empty() ? "" : " set " + set));
    }

    /// Model sets with at least one model: "" for the default set first.
    std::vector<std::string> model_sets() const {
        std::vector<std::string> out;
        auto base = dir_ / "models";
        if (!std::filesystem::exists(base)) return out;
        bool top = false;
        std::vector<std::string> named;
        for (const auto& e : std::filesystem::directory_iterator(base)) {
            if (e.is_regular_file() && e.path().extension() == ".json") top = true;
            if (e.is_directory()) named.push_back(e.path().filename().string());
        }
        std::sort(named.begin(), named.end());
        if (top) out.push_back("");
        for (auto& n : named) out.push_back(n);
        return out;
    }

    // ---------------------------------------------------------------- candidates

    CandidateStore candidates() const {
        CandidateStore s;
        if (!has("candidates.csv")) return s;
        auto def = study();
        s.items = io::candidates_from_csv(io::read_file(path("candidates.csv")), def.factors, response_names(def)).rows;
        return s;
    }

    void put_candidates(const CandidateStore& s, const std::string& action) {
        auto def = study();
        CandidateTable t{def.factors, response_names(def), s.items};
        write("candidates.csv", io::candidates_to_csv(t));
        commit(action);
    }

    void put_random_table(const RandomTable& t) {
        write("random_table.csv", io::random_table_to_csv(t));
        commit("random table " + std::to_string(t.settings.size()) + " rows");
    }

    std::vector<std::string> log() const {
        std::vector<std::string> out;
        if (!has("log.txt")) return out;
        std::istringstream in(io::read_file(path("log.txt")));
        for (std::string line; std::getline(in, line);) out.push_back(line);
        return out;
    }

    static std::vector<std::string> response_names(const StudyDefinition& def) {
        std::vector<std::string> out;
        for (const auto& r : def.responses) out.push_back(r.name);
        return out;
    }

private:
    std::filesystem::path dir_;
    std::function<std::string()> today_;

    void require(const std::string& name, const std::string& what) const {
        if (!has(name)) throw NotFound("the archive has no " + what + " (" + name + ")");
    }

    void write(const std::string& name, const std::string& text) {
        auto p = path(name);
        std::filesystem::create_directories(p.parent_path());
        io::write_file(p.string(), text);
        if (name == "archive.json") return;
        auto flat = name;
        std::replace(flat.begin(), flat.end(), '/', '_');
        auto h = dir_ / "history" / (today_() + "_r" + std::to_string(revision() + 1) + "_" + flat);
        std::filesystem::create_directories(h.parent_path());
        io::write_file(h.string(), text);
    }

    DataTable table(const std::string& stem) const {
        require(stem + ".csv", stem + " table");
        require(stem + ".columns.json", stem + " column metadata");
        return io::table_from_csv(io::read_file(path(stem + ".csv")),
                                  io::parse_json(io::read_file(path(stem + ".columns.json")), "column metadata"));
    }

    void write_table(const std::string& stem, const DataTable& t) {
        write(stem + ".csv", io::table_to_csv(t));
        write(stem + ".columns.json", io::dump(io::table_schema(t)));
    }

    void commit(const std::string& action) {
        auto rev = revision() + 1;
        write("archive.json", io::dump(io::Json{{"revision", rev}}));
        std::ofstream log(path("log.txt"), std::ios::app | std::ios::binary);
        log << today_() << "\t" << rev << "\t" << action << "\n";
    }
};

} // namespace formix
