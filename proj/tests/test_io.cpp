#include "formix/archive.hpp"
#include "formix/presets.hpp"
#include "formix/sim.hpp"
#include "formix/workflow.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <map>

using namespace formix;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    auto d = fs::temp_directory_path() / ("formix-io-" + name);
    fs::remove_all(d);
    return d;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        auto rel = fs::relative(e.path(), dir).generic_string();
        if (rel.rfind("history/", 0) == 0 || rel == "log.txt" || rel == "archive.json") continue;
        out[rel] = io::read_file(e.path().string());
    }
    return out;
}

Archive worked_archive(const std::string& name, std::size_t samples = 20) {
    Archive a(fresh_dir(name), [] { return std::string("2022-09-02"); });
    auto def = presets::lnp_study();
    a.put_study(def);
    auto d = round_and_repair(generate_space_filling(def, 23, 7));
    d = add_benchmark_runs(std::move(d), {{"benchmark", presets::lnp_benchmark(), 2}});
    a.put_design(randomize_order(std::move(d), 11));
    a.put_data(workflow::simulate_data(a, 3, 1.0));
    FitOptions opt;
    opt.samples = samples;
    workflow::fit_models(a, {}, opt, "");
    return a;
}

} // namespace

TEST(Numbers, FixedSixDecimalsTrimmed) {
    EXPECT_EQ(io::format_number(0.25), "0.25");
    EXPECT_EQ(io::format_number(1.0), "1");
    EXPECT_EQ(io::format_number(0.1234567), "0.123457");
    EXPECT_EQ(io::format_number(-0.0000001), "0");
    EXPECT_EQ(io::format_number(kNaN), "");
    EXPECT_EQ(io::format_number(12.5), "12.5");
}

TEST(Numbers, ParsePercentsAndRejectGarbage) {
    EXPECT_DOUBLE_EQ(io::parse_number("33%"), 0.33);
    EXPECT_DOUBLE_EQ(io::parse_number(" 0.5 "), 0.5);
    EXPECT_THROW(io::parse_number("0.5x"), ValidationError);
    EXPECT_THROW(io::parse_number(""), ValidationError);
}

TEST(Numbers, FormatParseIsIdempotent) {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        double v = uniform_open(rng) * 200.0 - 100.0;
        auto s = io::format_number(v);
        EXPECT_EQ(io::format_number(io::parse_number(s)), s);
        EXPECT_LE(std::abs(io::parse_number(s) - v), 5e-7);
    }
}

TEST(Csv, QuotesNewlinesAndBom) {
    auto text = "\xEF\xBB\xBF" "a,\"b,c\",\"say \"\"hi\"\"\"\r\n1,\"two\nlines\",3\n";
    auto rows = io::parse_csv(text);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0], (io::CsvRow{"a", "b,c", "say \"hi\""}));
    EXPECT_EQ(rows[1], (io::CsvRow{"1", "two\nlines", "3"}));
    EXPECT_EQ(io::parse_csv(io::csv_line(rows[0]) + io::csv_line(rows[1])), rows);
    EXPECT_THROW(io::parse_csv("\"open"), ValidationError);
}

TEST(StudyJson, RoundTripIsExact) {
    auto def = presets::lnp_study();
    auto text = io::dump(io::to_json(def));
    auto back = io::study_from_json(io::parse_json(text, "study"));
    EXPECT_EQ(io::dump(io::to_json(back)), text);
    ASSERT_EQ(back.factors.size(), def.factors.size());
    for (std::size_t i = 0; i < def.factors.size(); ++i) {
        EXPECT_EQ(back.factors[i].name, def.factors[i].name);
        EXPECT_EQ(back.factors[i].low, def.factors[i].low);
        EXPECT_EQ(back.factors[i].high, def.factors[i].high);
        EXPECT_EQ(back.factors[i].granularity, def.factors[i].granularity);
        EXPECT_EQ(back.factors[i].levels, def.factors[i].levels);
    }
    EXPECT_TRUE(std::isnan(back.responses[0].target));
    EXPECT_EQ(back.responses[1].importance, 0.2);
}

TEST(StudyJson, MalformedIsValidationError) {
    EXPECT_THROW(io::parse_json("{", "study"), ValidationError);
    EXPECT_THROW(io::study_from_json(io::parse_json("{\"factors\": []}", "study")), ValidationError);
    EXPECT_THROW(io::study_from_json(io::parse_json(R"({"name":"x","factors":[{"name":"a","role":"bogus"}]})", "study")),
                 Error);
}

TEST(TableCsv, DesignRoundTripsByteIdentical) {
    auto def = presets::lnp_study();
    auto d = round_and_repair(generate_space_filling(def, 23, 7));
    auto t = io::canonical(d.table);
    auto csv = io::table_to_csv(t);
    auto back = io::table_from_csv(csv, io::table_schema(t));
    EXPECT_EQ(io::table_to_csv(back), csv);
    ASSERT_EQ(back.rows.size(), 23u);
    for (std::size_t r = 0; r < back.rows.size(); ++r) EXPECT_EQ(back.rows[r].factors, t.rows[r].factors);
    EXPECT_NE(csv.find("H10"), std::string::npos);
}

TEST(TableCsv, CanonicalChangesAtMostHalfAUnitInSixthDecimal) {
    auto def = presets::lnp_study();
    auto d = generate_space_filling(def, 10, 3);
    auto c = io::canonical(d.table);
    for (std::size_t r = 0; r < c.rows.size(); ++r)
        for (std::size_t i = 0; i < def.factors.size(); ++i)
            EXPECT_LE(std::abs(c.rows[r].factors[i] - d.table.rows[r].factors[i]), 5e-7);
}

TEST(ImportCsv, PercentsLabelsAndMissing) {
    auto def = presets::lnp_study();
    std::string csv =
        "PEG,Helper,Ionizable,Cholesterol,Ionizable Lipid Type,N_P_ratio,flow rate,Potency,Size,Notes\n"
        "1%,33%,33%,33%,H102,10,1,71.5,NA,benchmark\n"
        "0.05,0.3,0.35,0.3,H103,6,3,,120,\n";
    auto t = io::import_csv(csv, def);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_DOUBLE_EQ(t.rows[0].factors[0], 0.01);
    EXPECT_EQ(t.rows[0].factors[4], 1.0);
    EXPECT_EQ(t.rows[0].values[t.column_index("Potency")], 71.5);
    EXPECT_FALSE(t.rows[0].values[t.column_index("Size")].has_value());
    EXPECT_FALSE(t.rows[1].values[t.column_index("Potency")].has_value());
    EXPECT_EQ(t.rows[0].notes, "benchmark");
    EXPECT_EQ(t.rows[0].run_id, "2022-09-02-LNP-1");
}

TEST(ImportCsv, BadRowsRejected) {
    auto def = presets::lnp_study();
    std::string head = "PEG,Helper,Ionizable,Cholesterol,Ionizable Lipid Type,N_P_ratio,flow rate\n";
    EXPECT_THROW(io::import_csv(head + "0.01,0.33,0.33,0.30,H101,10,1\n", def), ValidationError);
    EXPECT_THROW(io::import_csv(head + "0.01,0.33,0.33,0.33,H109,10,1\n", def), Error);
    EXPECT_THROW(io::import_csv("PEG,Helper\n0.1,0.9\n", def), ValidationError);
}

TEST(ModelJson, RoundTripPredictsIdentically) {
    auto def = presets::lnp_study();
    auto g = sim::builtin_generators();
    auto t = sim::simulate_experiment(g, 23, 4, 1.0);
    FitOptions opt;
    opt.samples = 15;
    auto m = fit_response(def, t, "Potency", opt);
    auto text = io::dump(io::to_json(m));
    auto back = io::model_from_json(io::parse_json(text, "model"));
    EXPECT_EQ(io::dump(io::to_json(back)), text);
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
        auto s = sample_feasible_point(def, rng);
        EXPECT_EQ(back.predict(s), m.predict(s));
    }
}

TEST(SimCsv, ResultsRoundTrip) {
    std::vector<sim::SimResult> rs{{16, FitMethod::full, 0, false, kNaN, {}},
                                   {16, FitMethod::svem_forward, 0, true, 93.25, {}},
                                   {24, FitMethod::forward_aicc, 3, true, 81.5, {}}};
    auto csv = io::sim_results_to_csv(rs);
    auto back = io::sim_results_from_csv(csv);
    ASSERT_EQ(back.size(), 3u);
    EXPECT_EQ(io::sim_results_to_csv(back), csv);
    EXPECT_FALSE(back[0].available);
    EXPECT_EQ(back[1].method, FitMethod::svem_forward);
    EXPECT_EQ(back[2].percent, 81.5);
}

TEST(Archive, SaveLoadSaveIsByteIdentical) {
    auto a = worked_archive("roundtrip");
    auto before = snapshot(a.dir());
    ASSERT_TRUE(before.count("study.json"));
    ASSERT_TRUE(before.count("design.csv"));
    ASSERT_TRUE(before.count("data.csv"));
    ASSERT_TRUE(before.count("models/Potency.json"));
    ASSERT_TRUE(before.count("models/Size.json"));

    auto dir2 = fresh_dir("roundtrip-copy");
    Archive b(dir2, [] { return std::string("2022-09-03"); });
    b.put_study(a.study());
    Design d;
    d.study = a.study();
    d.table = a.design();
    auto report = a.design_report();
    d.seed = report["seed"].get<std::uint64_t>();
    d.method = report["method"].get<std::string>();
    d.oversample = report["oversample"].get<std::size_t>();
    d.infeasible_runs = report["infeasible_runs"].get<std::vector<std::string>>();
    b.put_design(d);
    b.put_data(a.data());
    b.put_models("", {a.model("", "Potency"), a.model("", "Size")});
    EXPECT_EQ(snapshot(dir2), before);
}

TEST(Archive, RevisionLogAndDatedHistory) {
    auto a = worked_archive("log", 5);
    EXPECT_EQ(a.revision(), 4u);
    auto log = a.log();
    ASSERT_EQ(log.size(), 4u);
    EXPECT_EQ(log[0].rfind("2022-09-02\t1\tstudy LNP", 0), 0u);
    EXPECT_TRUE(fs::exists(a.dir() / "history" / "2022-09-02_r1_study.json"));
    EXPECT_TRUE(fs::exists(a.dir() / "history" / "2022-09-02_r3_data.csv"));
    EXPECT_TRUE(fs::exists(a.dir() / "history" / "2022-09-02_r4_models_Potency.json"));
}

TEST(Archive, MissingArtifactsAreNotFound) {
    Archive a(fresh_dir("empty"));
    EXPECT_EQ(a.revision(), 0u);
    EXPECT_THROW(a.study(), NotFound);
    EXPECT_THROW(a.data(), NotFound);
    EXPECT_THROW(a.model("", "Potency"), NotFound);
    EXPECT_TRUE(a.candidates().items.empty());
}

TEST(Archive, NamedModelSetsAndBadNames) {
    auto a = worked_archive("sets", 5);
    FitOptions opt;
    opt.samples = 5;
    opt.method = FitMethod::svem_lasso;
    workflow::fit_models(a, {"Potency"}, opt, "lasso");
    EXPECT_TRUE(fs::exists(a.dir() / "models" / "lasso" / "Potency.json"));
    EXPECT_EQ(a.model_sets(), (std::vector<std::string>{"", "lasso"}));
    EXPECT_EQ(a.model("lasso", "Potency").method, FitMethod::svem_lasso);
    EXPECT_THROW(a.model_path("../x", "Potency"), ValidationError);
}

TEST(Archive, CandidatesRoundTrip) {
    auto a = worked_archive("candidates", 10);
    workflow::ProfileRequest req;
    OptimizeOptions o;
    o.starts = 200;
    o.refine = 5;
    auto c = workflow::optimize(a, req, {}, 1, o, "optimum");
    workflow::remember(a, c, "optimum");
    auto csv = io::read_file((a.dir() / "candidates.csv").string());
    auto store = a.candidates();
    ASSERT_EQ(store.items.size(), 1u);
    a.put_candidates(store, "rewrite");
    EXPECT_EQ(io::read_file((a.dir() / "candidates.csv").string()), csv);
    EXPECT_NEAR(store.items[0].desirability, c.desirability, 1e-6);
}

TEST(Workflow, LocksParseLevelsAndRejectBlocking) {
    auto def = presets::lnp_study();
    auto locks = workflow::parse_locks(def, std::vector<std::string>{"Ionizable Lipid Type=H103", "flow rate=2.5"});
    EXPECT_EQ(locks[4], 2.0);
    EXPECT_EQ(locks[6], 2.5);
    EXPECT_FALSE(locks[0]);
    EXPECT_THROW(workflow::parse_locks(def, std::vector<std::string>{"nonsense"}), ValidationError);
    EXPECT_THROW(workflow::parse_locks(def, std::vector<std::string>{"Bogus=1"}), ValidationError);
    auto w = workflow::parse_weights({"Size=0.2", "Potency=1"});
    EXPECT_EQ(w.at("Size"), 0.2);
}

TEST(Workflow, CenterSettingsFeasible) {
    auto def = presets::lnp_study();
    auto s = workflow::center_settings(def);
    EXPECT_NEAR(mixture_sum(def.factors, s), 1.0, 1e-12);
    for (std::size_t i = 0; i < def.factors.size(); ++i) EXPECT_TRUE(within_bounds(def.factors[i], s[i]));
}

TEST(Workflow, SimulatedDataKeepsDesignRows) {
    auto a = worked_archive("simdata", 5);
    auto design = a.design();
    auto data = a.data();
    ASSERT_EQ(data.rows.size(), design.rows.size());
    for (std::size_t r = 0; r < data.rows.size(); ++r) {
        EXPECT_EQ(data.rows[r].run_id, design.rows[r].run_id);
        EXPECT_EQ(data.rows[r].factors, design.rows[r].factors);
        EXPECT_TRUE(data.rows[r].values[data.column_index("Potency")].has_value());
    }
}
