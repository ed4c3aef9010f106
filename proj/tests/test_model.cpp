#include "formix/model.hpp"
#include "formix/presets.hpp"
#include "formix/slab.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace formix;

namespace {

// Counts the candidate terms by walking the recipe over factor subsets rather
// than by constructing them.
std::size_t enumerate_effect_count(const StudyDefinition& def) {
    std::vector<std::size_t> atoms;
    std::vector<FactorRole> roles;
    std::size_t blocks = 0;
    for (const auto& f : def.factors) {
        if (f.role == FactorRole::blocking) {
            blocks += f.levels.size() - 1;
            continue;
        }
        atoms.push_back(f.numeric() ? 1 : f.levels.size() - 1);
        roles.push_back(f.role);
    }
    const std::size_t s = atoms.size();
    std::size_t total = 1;
    for (unsigned mask = 1; mask < (1u << s); ++mask) {
        int bits = __builtin_popcount(mask);
        if (bits > 3) continue;
        std::size_t prod = 1;
        for (std::size_t i = 0; i < s; ++i)
            if (mask & (1u << i)) prod *= atoms[i];
        total += prod;
    }
    for (std::size_t k = 0; k < s; ++k) {
        if (roles[k] != FactorRole::continuous) continue;
        total += 1;
        for (std::size_t m = 0; m < s; ++m)
            if (m != k && roles[m] != FactorRole::mixture) total += atoms[m];
    }
    std::size_t mix = 0;
    for (auto r : roles) mix += r == FactorRole::mixture;
    total += mix * (mix - 1) / 2;
    return total + blocks;
}

CodedFactorSpace lnp_space() { return CodedFactorSpace(presets::lnp_study().factors); }

} // namespace

TEST(Coding, PegLowerBoundCodesToZero) {
    auto space = lnp_space();
    EXPECT_DOUBLE_EQ(space.pseudo_denominator(), 1.0 - 0.31);
    EXPECT_EQ(space.code_value(0, 0.01), 0.0);
    EXPECT_NEAR(space.code_value(0, 0.05), 0.04 / 0.69, 1e-15);
    EXPECT_NEAR(space.code_value(0, 0.05), 0.057971, 1e-6);
}

TEST(Coding, ContinuousMidpointCodesToZero) {
    auto space = lnp_space();
    EXPECT_EQ(space.code_value(5, 10.0), 0.0);
    EXPECT_EQ(space.code_value(5, 6.0), -1.0);
    EXPECT_EQ(space.code_value(6, 3.0), 1.0);
}

TEST(Coding, RoundTripWithinTolerance) {
    auto def = presets::lnp_study();
    auto space = lnp_space();
    Rng rng(3);
    for (int t = 0; t < 500; ++t) {
        auto s = sample_feasible_point(def, rng);
        auto back = space.decode(space.code(s));
        for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(back[i], s[i], 1e-12);
    }
}

TEST(Coding, CodedMixtureSumsToOneInsideSlab) {
    auto def = presets::lnp_study();
    auto space = lnp_space();
    Rng rng(5);
    for (int t = 0; t < 200; ++t) {
        auto c = space.code(sample_feasible_point(def, rng));
        double z = c[0] + c[1] + c[2] + c[3];
        EXPECT_NEAR(z, 1.0, 1e-12);
        for (int i = 0; i < 4; ++i) EXPECT_GE(c[static_cast<std::size_t>(i)], -1e-15);
    }
}

TEST(Coding, OutOfBoundsBeyondOneStepThrows) {
    auto space = lnp_space();
    Settings s = presets::lnp_benchmark();
    s[5] = 14.05;  // within one 0.1 step
    EXPECT_NO_THROW(space.code(s));
    s[5] = 14.3;
    EXPECT_THROW(space.code(s), DomainError);
    s = presets::lnp_benchmark();
    s[4] = 3;
    EXPECT_THROW(space.code(s), DomainError);
}

TEST(Effects, TwoMixtureFactorsGiveFiveEffects) {
    StudyDefinition def;
    def.factors = {Factor::mixture("A", 0, 1, 0.01), Factor::mixture("B", 0, 1, 0.01)};
    auto e = build_candidate_effects(def);
    ASSERT_EQ(e.size(), 5u);
    EXPECT_EQ(e[0].kind, EffectKind::intercept);
    EXPECT_EQ(e[3].kind, EffectKind::two_way);
    EXPECT_EQ(e[4].kind, EffectKind::scheffe_cubic);
    EXPECT_EQ(effect_key(e[4], def.factors), "A*B*(A-B)");
}

TEST(Effects, ScheffeCubicVanishesOnDiagonal) {
    Effect e{EffectKind::scheffe_cubic, {{0, -1}, {1, -1}}};
    EXPECT_EQ(evaluate(e, {0.3, 0.3}), 0.0);
    EXPECT_NEAR(evaluate(e, {0.6, 0.4}), 0.6 * 0.4 * 0.2, 1e-15);
}

TEST(Effects, WorkedStudyCountMatchesEnumerator) {
    auto def = presets::lnp_study();
    auto e = build_candidate_effects(def);
    EXPECT_EQ(e.size(), enumerate_effect_count(def));
    EXPECT_EQ(e.size(), 100u);
}

TEST(Effects, CountMatchesEnumeratorAcrossShapes) {
    for (int m = 2; m <= 4; ++m)
        for (int c = 0; c <= 2; ++c)
            for (int levels = 0; levels <= 3; levels += (levels == 0 ? 2 : 1))
                for (int blk = 0; blk <= 1; ++blk) {
                    StudyDefinition def;
                    for (int i = 0; i < m; ++i) def.factors.push_back(Factor::mixture("m" + std::to_string(i), 0, 1, 0.01));
                    for (int i = 0; i < c; ++i) def.factors.push_back(Factor::continuous("c" + std::to_string(i), 0, 1, 0.1));
                    if (levels) {
                        std::vector<std::string> lv;
                        for (int l = 0; l < levels; ++l) lv.push_back("L" + std::to_string(l));
                        def.factors.push_back(Factor::categorical("cat", lv));
                    }
                    if (blk) def.factors.push_back(Factor::blocking("Day", {"1", "2", "3"}));
                    EXPECT_EQ(build_candidate_effects(def).size(), enumerate_effect_count(def));
                }
}

TEST(Effects, BlockDummiesNeverInsideProducts) {
    auto def = presets::lnp_study();
    def.factors.push_back(Factor::blocking("Day", {"1", "2"}));
    auto e = build_candidate_effects(def);
    std::size_t blocks = 0;
    for (const auto& eff : e)
        for (const auto& o : eff.operands)
            if (o.factor == 7) {
                EXPECT_EQ(eff.kind, EffectKind::block_dummy);
                ++blocks;
            }
    EXPECT_EQ(blocks, 1u);
}

TEST(Effects, NoFactorPairedWithItselfAndNoMixtureSquares) {
    auto def = presets::lnp_study();
    for (const auto& e : build_candidate_effects(def)) {
        if (e.kind == EffectKind::continuous_square || e.kind == EffectKind::partial_cubic) {
            EXPECT_EQ(def.factors[e.operands[0].factor].role, FactorRole::continuous);
            continue;
        }
        for (std::size_t a = 0; a < e.operands.size(); ++a)
            for (std::size_t b = a + 1; b < e.operands.size(); ++b)
                EXPECT_NE(e.operands[a].factor, e.operands[b].factor);
    }
}

TEST(Effects, KeysParseBack) {
    auto def = presets::lnp_study();
    for (const auto& e : build_candidate_effects(def))
        for (const auto& o : e.operands) EXPECT_EQ(parse_operand(operand_name(o, def.factors), def.factors), o);
}

TEST(Effects, ExpansionInvariantToFactorOrder) {
    auto def = presets::lnp_study();
    auto perm = def;
    std::vector<std::size_t> order{5, 2, 4, 0, 6, 3, 1};
    perm.factors.clear();
    for (auto i : order) perm.factors.push_back(def.factors[i]);
    auto e1 = build_candidate_effects(def), e2 = build_candidate_effects(perm);
    ASSERT_EQ(e1.size(), e2.size());
    CodedFactorSpace s1(def.factors), s2(perm.factors);
    Rng rng(11);
    for (int t = 0; t < 20; ++t) {
        auto x = sample_feasible_point(def, rng);
        Settings xp;
        for (auto i : order) xp.push_back(x[i]);
        auto r1 = expand(e1, s1.code(x)), r2 = expand(e2, s2.code(xp));
        // Scheffe cubic columns flip sign when their pair is listed in reverse
        r1 = r1.cwiseAbs(), r2 = r2.cwiseAbs();
        std::vector<double> v1(r1.data(), r1.data() + r1.size()), v2(r2.data(), r2.data() + r2.size());
        std::sort(v1.begin(), v1.end());
        std::sort(v2.begin(), v2.end());
        for (std::size_t j = 0; j < v1.size(); ++j) EXPECT_NEAR(v1[j], v2[j], 1e-12);
    }
}

TEST(Effects, ScheffeBoundOnSlab) {
    auto def = presets::lnp_study();
    auto space = lnp_space();
    auto effects = build_candidate_effects(def);
    Rng rng(17);
    for (int t = 0; t < 2000; ++t) {
        auto c = space.code(sample_feasible_point(def, rng));
        for (const auto& e : effects) {
            if (e.kind != EffectKind::scheffe_cubic) continue;
            double d = std::fabs(c[e.operands[0].factor] - c[e.operands[1].factor]);
            EXPECT_LE(std::fabs(evaluate(e, c)), 0.25 * d + 1e-15);
        }
    }
}

TEST(DesignMatrix, RowsColumnsAndDummies) {
    auto def = presets::lnp_study();
    auto design = generate_space_filling(def, 23, 7);
    auto& table = design.table;
    const auto col = table.add_column("Potency");
    for (std::size_t r = 0; r < table.rows.size(); ++r) table.rows[r].values[col] = static_cast<double>(r);
    auto effects = build_candidate_effects(def);
    auto dm = design_matrix(effects, CodedFactorSpace(def.factors), table, "Potency");
    EXPECT_EQ(dm.X.rows(), 23);
    EXPECT_EQ(dm.X.cols(), 100);
    EXPECT_TRUE((dm.X.col(0).array() == 1.0).all());
    for (Eigen::Index i = 0; i < dm.X.rows(); ++i) {
        double s = dm.X(i, 5) + dm.X(i, 6);
        EXPECT_TRUE(s == 0.0 || s == 1.0);
    }
    table.rows[3].values[col].reset();
    table.rows[4].exclude = true;
    auto dm2 = design_matrix(effects, CodedFactorSpace(def.factors), table, "Potency");
    EXPECT_EQ(dm2.X.rows(), 21);
    for (auto& row : table.rows) row.values[col].reset();
    EXPECT_THROW(design_matrix(effects, CodedFactorSpace(def.factors), table, "Potency"), ValidationError);
}
