#include "formix/presets.hpp"
#include "formix/study.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace formix;

namespace {

StudyDefinition with_factors(std::vector<Factor> fs) {
    StudyDefinition def;
    def.name = "T";
    def.date = "2024-01-01";
    def.factors = std::move(fs);
    return def;
}

std::vector<Factor> mixtures(std::size_t m) {
    std::vector<Factor> fs;
    for (std::size_t i = 0; i < m; ++i) fs.push_back(Factor::mixture("M" + std::to_string(i), 0.0, 1.0, 0.01));
    return fs;
}

std::vector<std::string> levels(std::size_t k) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back("L" + std::to_string(i));
    return out;
}

bool mentions(const ValidationReport& r, const std::string& text) {
    return std::any_of(r.begin(), r.end(), [&](const Violation& v) { return v.message.find(text) != std::string::npos; });
}

// Builds the named column set of the second-order mixture-process model and
// counts it.
std::size_t enumerate_terms(const StudyDefinition& def) {
    std::vector<std::string> mix, proc;
    std::vector<std::string> cont;
    std::vector<std::vector<std::string>> groups;  // process columns per factor
    for (const auto& f : def.factors) {
        if (f.role == FactorRole::mixture) mix.push_back(f.name);
        if (f.role == FactorRole::continuous) {
            cont.push_back(f.name);
            groups.push_back({f.name});
        }
        if (f.role == FactorRole::categorical) {
            std::vector<std::string> g;
            for (std::size_t l = 0; l + 1 < f.levels.size(); ++l) g.push_back(f.name + "[" + f.levels[l] + "]");
            groups.push_back(g);
        }
    }
    for (const auto& g : groups)
        for (const auto& c : g) proc.push_back(c);
    std::set<std::string> terms;
    for (const auto& a : mix) terms.insert(a);
    for (const auto& a : mix)
        for (const auto& b : mix)
            if (a < b) terms.insert(a + "*" + b);
    for (const auto& a : mix)
        for (const auto& p : proc) terms.insert(a + "*" + p);
    for (std::size_t i = 0; i < groups.size(); ++i)
        for (std::size_t j = i + 1; j < groups.size(); ++j)
            for (const auto& a : groups[i])
                for (const auto& b : groups[j]) terms.insert(a + "*" + b);
    for (const auto& c : cont) terms.insert(c + "^2");
    return terms.size();
}

} // namespace

TEST(ValidateStudy, WorkedStudyIsValid) { EXPECT_TRUE(validate_study(presets::lnp_study()).empty()); }

TEST(ValidateStudy, SingleMixtureFactor) {
    auto def = with_factors({Factor::mixture("A", 0.0, 1.0, 0.01), Factor::continuous("T", 0, 1, 0.1)});
    auto r = validate_study(def);
    ASSERT_FALSE(r.empty());
    EXPECT_TRUE(mentions(r, "2 mixture"));
}

TEST(ValidateStudy, InfeasibleLows) {
    auto def = with_factors({Factor::mixture("A", 0.5, 0.9, 0.01), Factor::mixture("B", 0.6, 0.9, 0.01)});
    auto r = validate_study(def);
    ASSERT_FALSE(r.empty());
    EXPECT_TRUE(mentions(r, "sum of mixture lows"));
}

TEST(ValidateStudy, ReportsEachProblem) {
    auto def = with_factors({Factor::mixture("A", 0.0, 1.0, 0.01), Factor::mixture("A", 0.0, 1.0, 0.01),
                             Factor::categorical("K", {"x"}), Factor::continuous("T", 5, 1, 0.1)});
    def.responses = {{"Y", Goal::target, kNaN, -1.0, Transform::logit, false}};
    auto r = validate_study(def);
    EXPECT_GE(r.size(), 5u);
    EXPECT_TRUE(mentions(r, "duplicate factor"));
}

TEST(Heuristics, WorkedStudy) {
    auto def = presets::lnp_study();
    EXPECT_EQ(min_run_heuristic(def), 19u);
    EXPECT_EQ(second_order_term_count(def), 33u);
    EXPECT_EQ(max_run_heuristic(def), 34u);
}

TEST(Heuristics, RuleArithmetic) {
    EXPECT_EQ(min_run_heuristic(with_factors(mixtures(3))), 9u);
    auto fs = mixtures(2);
    fs.push_back(Factor::continuous("T", 0, 1, 0.1));
    fs.push_back(Factor::categorical("K1", levels(2)));
    fs.push_back(Factor::categorical("K2", levels(2)));
    EXPECT_EQ(min_run_heuristic(with_factors(fs)), 12u);
    EXPECT_EQ(max_run_heuristic(with_factors(mixtures(2))), 4u);
    auto f3 = mixtures(3);
    f3.push_back(Factor::continuous("T", 0, 1, 0.1));
    EXPECT_EQ(max_run_heuristic(with_factors(f3)), 11u);
}

TEST(Heuristics, TermCountMatchesEnumeration) {
    for (std::size_t m = 2; m <= 5; ++m)
        for (std::size_t c = 0; c <= 3; ++c)
            for (std::size_t k = 0; k <= 2; ++k)
                for (std::size_t lv = 2; lv <= 4; ++lv) {
                    auto fs = mixtures(m);
                    for (std::size_t i = 0; i < c; ++i) fs.push_back(Factor::continuous("C" + std::to_string(i), 0, 1, 0.1));
                    for (std::size_t i = 0; i < k; ++i) fs.push_back(Factor::categorical("K" + std::to_string(i), levels(lv + i)));
                    auto def = with_factors(fs);
                    EXPECT_EQ(second_order_term_count(def), enumerate_terms(def)) << m << " " << c << " " << k << " " << lv;
                }
}

TEST(Heuristics, InvariantToOrderAndBlocking) {
    auto def = presets::lnp_study();
    auto a = min_run_heuristic(def), b = max_run_heuristic(def);
    std::reverse(def.factors.begin(), def.factors.end());
    def.factors.push_back(Factor::blocking("Day", {"1", "2", "3"}));
    EXPECT_EQ(min_run_heuristic(def), a);
    EXPECT_EQ(max_run_heuristic(def), b);
}

TEST(Heuristics, MaxAtLeastMinOverFactorGrid) {
    // every study with >= 2 mixture factors and <= 6 factors in total
    std::vector<std::string> failures;
    for (std::size_t m = 2; m <= 6; ++m)
        for (std::size_t c = 0; m + c <= 6; ++c)
            for (std::size_t k = 0; m + c + k <= 6; ++k)
                for (std::size_t lv = 2; lv <= (k ? 4u : 2u); ++lv) {
                    auto fs = mixtures(m);
                    for (std::size_t i = 0; i < c; ++i) fs.push_back(Factor::continuous("C" + std::to_string(i), 0, 1, 0.1));
                    for (std::size_t i = 0; i < k; ++i) fs.push_back(Factor::categorical("K" + std::to_string(i), levels(lv)));
                    auto def = with_factors(fs);
                    if (max_run_heuristic(def) < min_run_heuristic(def))
                        failures.push_back(std::to_string(m) + "m" + std::to_string(c) + "c" + std::to_string(k) + "k" +
                                           std::to_string(lv));
                }
    std::string list;
    for (const auto& f : failures) list += f + " ";
    EXPECT_TRUE(failures.empty()) << failures.size() << " configurations with max < min: " << list;
}

TEST(Average, Examples) {
    DataTable t;
    t.columns = {"a", "b", "c"};
    t.rows.push_back({"r1", {}, {90.0, 100.0, std::nullopt}});
    t.rows.push_back({"r2", {}, {80.0, std::nullopt, std::nullopt}});
    t.rows.push_back({"r3", {}, {std::nullopt, std::nullopt, std::nullopt}});
    t.rows.push_back({"r4", {}, {7.25, 7.25, 7.25}});
    auto out = average_assay_columns(t, {"a", "b", "c"}, "mean");
    auto c = out.column_index("mean");
    EXPECT_DOUBLE_EQ(*out.rows[0].values[c], 95.0);
    EXPECT_DOUBLE_EQ(*out.rows[1].values[c], 80.0);
    EXPECT_FALSE(out.rows[2].values[c].has_value());
    EXPECT_DOUBLE_EQ(*out.rows[3].values[c], 7.25);
    EXPECT_THROW(average_assay_columns(t, {"zz"}, "m"), NotFound);
    EXPECT_EQ(t.columns.size(), 3u);
}

namespace {
DataTable rows_table(const StudyDefinition& def, std::size_t n, const std::string& prefix) {
    auto t = make_table(def);
    for (std::size_t i = 0; i < n; ++i) {
        DataRow r;
        r.run_id = prefix + std::to_string(i);
        r.factors = presets::lnp_benchmark();
        r.values = {double(i), std::nullopt};
        t.rows.push_back(r);
    }
    return t;
}
} // namespace

TEST(Concat, TwoStudiesThenFilter) {
    auto def = presets::lnp_study();
    auto a = rows_table(def, 23, "r");
    auto def2 = def;
    def2.factors[5].high = 16;
    auto b = rows_table(def2, 33, "r");
    auto c = concat_experiments({a, b}, "Source", {"first", "second"});
    EXPECT_EQ(c.rows.size(), 56u);
    std::set<std::string> ids, labels;
    for (const auto& r : c.rows) ids.insert(r.run_id), labels.insert(r.source);
    EXPECT_EQ(ids.size(), 56u);
    EXPECT_EQ(labels.size(), 2u);
    EXPECT_DOUBLE_EQ(c.factors[5].high, 16.0);
    auto fa = filter_by_source(c, "first");
    ASSERT_EQ(fa.rows.size(), 23u);
    for (std::size_t i = 0; i < 23; ++i) {
        EXPECT_EQ(fa.rows[i].run_id, a.rows[i].run_id);
        EXPECT_EQ(fa.rows[i].factors, a.rows[i].factors);
        EXPECT_EQ(fa.rows[i].values, a.rows[i].values);
    }
    auto fb = filter_by_source(c, "second");
    ASSERT_EQ(fb.rows.size(), 33u);
    for (std::size_t i = 0; i < 33; ++i) EXPECT_EQ(fb.rows[i].values, b.rows[i].values);
}

TEST(Concat, SingleTableAndMismatch) {
    auto def = presets::lnp_study();
    auto a = rows_table(def, 5, "r");
    auto c = concat_experiments({a}, "Source", {"only"});
    ASSERT_EQ(c.rows.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(c.rows[i].source, "only");
        EXPECT_EQ(c.rows[i].run_id, a.rows[i].run_id);
        EXPECT_EQ(c.rows[i].factors, a.rows[i].factors);
    }
    auto other = with_factors({Factor::mixture("X", 0, 1, 0.01), Factor::mixture("Y", 0, 1, 0.01)});
    auto b = make_table(other);
    EXPECT_THROW(concat_experiments({a, b}, "Source"), ValidationError);
}

TEST(ShiftCheck, Examples) {
    auto def = presets::lnp_study();
    auto old_t = make_table(def), new_t = make_table(def);
    old_t.rows.push_back({"o1", presets::lnp_benchmark(), {75.1, 80.0}});
    old_t.rows.push_back({"o2", presets::lnp_benchmark(), {75.1, 80.0}});
    new_t.rows.push_back({"n1", presets::lnp_benchmark(), {75.1, 80.0}});
    auto rep = benchmark_shift_check(old_t, new_t, {}, {{"Potency", 1.0}, {"Size", 1.0}});
    ASSERT_EQ(rep.matches.size(), 1u);
    for (const auto& e : rep.matches[0].entries) {
        EXPECT_EQ(e.delta, 0.0);
        EXPECT_FALSE(e.flagged);
    }
    new_t.rows[0].values[0] = 85.1;
    rep = benchmark_shift_check(old_t, new_t, {}, {{"Potency", 1.0}, {"Size", 1.0}});
    EXPECT_NEAR(rep.matches[0].entries[0].delta, 10.0, 1e-9);
    EXPECT_TRUE(rep.matches[0].entries[0].flagged);
    EXPECT_TRUE(rep.any_flagged());

    auto far = make_table(def);
    auto s = presets::lnp_benchmark();
    s[5] = 12;
    far.rows.push_back({"f1", s, {75.1, 80.0}});
    EXPECT_THROW(benchmark_shift_check(old_t, far), NotFound);
}

TEST(ShiftCheck, ReplicateNoiseEstimate) {
    auto def = presets::lnp_study();
    auto old_t = make_table(def), new_t = make_table(def);
    old_t.rows.push_back({"o1", presets::lnp_benchmark(), {74.0, 80.0}});
    old_t.rows.push_back({"o2", presets::lnp_benchmark(), {76.0, 80.0}});
    new_t.rows.push_back({"n1", presets::lnp_benchmark(), {78.0, 80.0}});
    auto rep = benchmark_shift_check(old_t, new_t);
    const auto& e = rep.matches[0].entries[0];
    EXPECT_NEAR(e.noise, std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(e.delta, 3.0, 1e-12);
    EXPECT_FALSE(e.flagged);
}

TEST(Table, ValidateTable) {
    auto def = presets::lnp_study();
    auto t = make_table(def);
    t.rows.push_back({"a", presets::lnp_benchmark(), {1.0, 2.0}});
    EXPECT_TRUE(validate_table(t).empty());
    t.rows.push_back({"a", presets::lnp_benchmark(), {1.0, 2.0}});
    auto s = presets::lnp_benchmark();
    s[0] = 0.02;
    t.rows.push_back({"b", s, {1.0, 2.0}});
    auto r = validate_table(t);
    EXPECT_TRUE(mentions(r, "duplicate"));
    EXPECT_TRUE(mentions(r, "sum to 1"));
}
