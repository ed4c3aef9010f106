#pragma once

// Factor coding, candidate effects and their numeric expansion.

#include "formix/core.hpp"
#include "formix/study.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace formix {

/// Pseudo-component coding for mixtures, z = (x - L) / (1 - sum L); continuous
/// factors mapped affinely onto [-1, 1]; categorical and blocking factors keep
/// their level index (dummies are formed against the last level).
class CodedFactorSpace {
public:
    CodedFactorSpace() = default;
    explicit CodedFactorSpace(std::vector<Factor> factors) : factors_(std::move(factors)) {
        double lows = 0.0;
        for (const auto& f : factors_)
            if (f.role == FactorRole::mixture) lows += f.low;
        denom_ = 1.0 - lows;
    }

    const std::vector<Factor>& factors() const { return factors_; }
    double pseudo_denominator() const { return denom_; }

    /// Throws when a value lies outside its range by more than one granularity step.
    std::vector<double> code(const Settings& s) const {
        if (s.size() != factors_.size()) throw DomainError("settings width does not match the factor space");
        std::vector<double> c(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            const auto& f = factors_[i];
            if (f.numeric()) {
                double tol = std::max(f.granularity, 1e-12);
                if (!(s[i] >= f.low - tol && s[i] <= f.high + tol))
                    throw DomainError("factor '" + f.name + "' value " + std::to_string(s[i]) + " is out of bounds");
            } else if (!within_bounds(f, s[i])) {
                throw DomainError("factor '" + f.name + "' has no level index " + std::to_string(s[i]));
            }
            c[i] = code_value(i, s[i]);
        }
        return c;
    }

    double code_value(std::size_t i, double v) const {
        const auto& f = factors_[i];
        switch (f.role) {
        case FactorRole::mixture: return (v - f.low) / denom_;
        case FactorRole::continuous: return (2.0 * v - (f.low + f.high)) / (f.high - f.low);
        default: return v;
        }
    }

    Settings decode(const std::vector<double>& c) const {
        Settings s(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) {
            const auto& f = factors_[i];
            switch (f.role) {
            case FactorRole::mixture: s[i] = f.low + denom_ * c[i]; break;
            case FactorRole::continuous: s[i] = 0.5 * ((f.high - f.low) * c[i] + f.low + f.high); break;
            default: s[i] = c[i];
            }
        }
        return s;
    }

private:
    std::vector<Factor> factors_;
    double denom_ = 1.0;
};

enum class EffectKind {
    intercept,
    mixture_main,
    continuous_main,
    categorical_dummy,
    two_way,
    three_way,
    continuous_square,
    partial_cubic,   // c_k^2 * m
    scheffe_cubic,   // z_i z_j (z_i - z_j)
    block_dummy,
};

inline std::string to_string(EffectKind k) {
    switch (k) {
    case EffectKind::intercept: return "intercept";
    case EffectKind::mixture_main: return "mixture_main";
    case EffectKind::continuous_main: return "continuous_main";
    case EffectKind::categorical_dummy: return "categorical_dummy";
    case EffectKind::two_way: return "two_way";
    case EffectKind::three_way: return "three_way";
    case EffectKind::continuous_square: return "continuous_square";
    case EffectKind::partial_cubic: return "partial_cubic";
    case EffectKind::scheffe_cubic: return "scheffe_cubic";
    case EffectKind::block_dummy: return "block_dummy";
    }
    return "?";
}

inline EffectKind parse_effect_kind(const std::string& s) {
    for (int k = 0; k <= static_cast<int>(EffectKind::block_dummy); ++k)
        if (to_string(static_cast<EffectKind>(k)) == s) return static_cast<EffectKind>(k);
    throw ValidationError("unknown effect kind '" + s + "'");
}

/// A factor reference inside an effect. `level` selects the dummy column of a
/// categorical or blocking factor and is -1 for numeric factors.
struct Operand {
    std::size_t factor = 0;
    int level = -1;
    bool operator==(const Operand&) const = default;
};

struct Effect {
    EffectKind kind = EffectKind::intercept;
    std::vector<Operand> operands;
    bool operator==(const Effect&) const = default;
};

using EffectList = std::vector<Effect>;

inline double operand_value(const Operand& o, const std::vector<double>& coded) {
    if (o.level < 0) return coded[o.factor];
    return coded[o.factor] == static_cast<double>(o.level) ? 1.0 : 0.0;
}

/// Value of one effect at a coded point.
inline double evaluate(const Effect& e, const std::vector<double>& coded) {
    switch (e.kind) {
    case EffectKind::intercept: return 1.0;
    case EffectKind::continuous_square: {
        double c = operand_value(e.operands[0], coded);
        return c * c;
    }
    case EffectKind::partial_cubic: {
        double c = operand_value(e.operands[0], coded);
        return c * c * operand_value(e.operands[1], coded);
    }
    case EffectKind::scheffe_cubic: {
        double a = operand_value(e.operands[0], coded), b = operand_value(e.operands[1], coded);
        return a * b * (a - b);
    }
    default: {
        double v = 1.0;
        for (const auto& o : e.operands) v *= operand_value(o, coded);
        return v;
    }
    }
}

inline std::string operand_name(const Operand& o, const std::vector<Factor>& fs) {
    const auto& f = fs[o.factor];
    if (o.level < 0) return f.name;
    return f.name + "[" + f.levels[static_cast<std::size_t>(o.level)] + "]";
}

inline Operand parse_operand(const std::string& s, const std::vector<Factor>& fs) {
    for (std::size_t i = 0; i < fs.size(); ++i) {
        if (s == fs[i].name && fs[i].numeric()) return {i, -1};
        if (fs[i].discrete() && s.size() > fs[i].name.size() + 2 && s.compare(0, fs[i].name.size(), fs[i].name) == 0 &&
            s[fs[i].name.size()] == '[' && s.back() == ']') {
            auto label = s.substr(fs[i].name.size() + 1, s.size() - fs[i].name.size() - 2);
            return {i, static_cast<int>(fs[i].level_index(label))};
        }
    }
    throw ValidationError("unknown effect operand '" + s + "'");
}

/// Human-readable key, e.g. "PEG*N_P_ratio", "flow rate^2", "PEG*Helper*(PEG-Helper)".
inline std::string effect_key(const Effect& e, const std::vector<Factor>& fs) {
    auto n = [&](std::size_t i) { return operand_name(e.operands[i], fs); };
    switch (e.kind) {
    case EffectKind::intercept: return "Intercept";
    case EffectKind::continuous_square: return n(0) + "^2";
    case EffectKind::partial_cubic: return n(0) + "^2*" + n(1);
    case EffectKind::scheffe_cubic: return n(0) + "*" + n(1) + "*(" + n(0) + "-" + n(1) + ")";
    default: {
        std::string k;
        for (std::size_t i = 0; i < e.operands.size(); ++i) k += (i ? "*" : "") + n(i);
        return k;
    }
    }
}

namespace detail {
/// Main-effect columns of a study factor: one for numeric factors, levels-1
/// dummies for categorical ones.
inline std::vector<Operand> atoms(const std::vector<Factor>& fs, std::size_t i) {
    if (fs[i].numeric()) return {{i, -1}};
    std::vector<Operand> out;
    for (std::size_t l = 0; l + 1 < fs[i].levels.size(); ++l) out.push_back({i, static_cast<int>(l)});
    return out;
}
} // namespace detail

/// Candidate effects of the full model: intercept; main effects; all two- and
/// three-way products of distinct study factors; squares of continuous
/// factors; each square times every other non-mixture main effect; Scheffe
/// cubic terms for every mixture pair; blocking dummies alone. Pure quadratic
/// mixture terms are not included.
inline EffectList build_candidate_effects(const StudyDefinition& def) {
    const auto& fs = def.factors;
    std::vector<std::size_t> study;  // non-blocking factors
    for (std::size_t i = 0; i < fs.size(); ++i)
        if (fs[i].role != FactorRole::blocking) study.push_back(i);

    EffectList out{{EffectKind::intercept, {}}};
    for (auto i : study) {
        EffectKind kind = fs[i].role == FactorRole::mixture      ? EffectKind::mixture_main
                          : fs[i].role == FactorRole::continuous ? EffectKind::continuous_main
                                                                 : EffectKind::categorical_dummy;
        for (const auto& a : detail::atoms(fs, i)) out.push_back({kind, {a}});
    }
    for (std::size_t a = 0; a < study.size(); ++a)
        for (std::size_t b = a + 1; b < study.size(); ++b)
            for (const auto& oa : detail::atoms(fs, study[a]))
                for (const auto& ob : detail::atoms(fs, study[b])) out.push_back({EffectKind::two_way, {oa, ob}});
    for (std::size_t a = 0; a < study.size(); ++a)
        for (std::size_t b = a + 1; b < study.size(); ++b)
            for (std::size_t c = b + 1; c < study.size(); ++c)
                for (const auto& oa : detail::atoms(fs, study[a]))
                    for (const auto& ob : detail::atoms(fs, study[b]))
                        for (const auto& oc : detail::atoms(fs, study[c]))
                            out.push_back({EffectKind::three_way, {oa, ob, oc}});
    for (auto i : study)
        if (fs[i].role == FactorRole::continuous) out.push_back({EffectKind::continuous_square, {{i, -1}}});
    for (auto k : study) {
        if (fs[k].role != FactorRole::continuous) continue;
        for (auto m : study) {
            if (m == k || fs[m].role == FactorRole::mixture) continue;
            for (const auto& om : detail::atoms(fs, m)) out.push_back({EffectKind::partial_cubic, {{k, -1}, om}});
        }
    }
    for (std::size_t a = 0; a < study.size(); ++a)
        for (std::size_t b = a + 1; b < study.size(); ++b)
            if (fs[study[a]].role == FactorRole::mixture && fs[study[b]].role == FactorRole::mixture)
                out.push_back({EffectKind::scheffe_cubic, {{study[a], -1}, {study[b], -1}}});
    for (std::size_t i = 0; i < fs.size(); ++i)
        if (fs[i].role == FactorRole::blocking)
            for (std::size_t l = 0; l + 1 < fs[i].levels.size(); ++l)
                out.push_back({EffectKind::block_dummy, {{i, static_cast<int>(l)}}});
    return out;
}

/// Indices of the mixture main effects within an effect list.
inline std::vector<std::size_t> mixture_main_columns(const EffectList& effects) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < effects.size(); ++j)
        if (effects[j].kind == EffectKind::mixture_main) out.push_back(j);
    return out;
}

inline Eigen::VectorXd expand(const EffectList& effects, const std::vector<double>& coded) {
    Eigen::VectorXd row(static_cast<Eigen::Index>(effects.size()));
    for (std::size_t j = 0; j < effects.size(); ++j) row(static_cast<Eigen::Index>(j)) = evaluate(effects[j], coded);
    return row;
}

struct DesignMatrix {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::VectorXd w;
    std::vector<std::size_t> rows;  // table rows used, in order
};

/// Numeric expansion of the effects over the usable rows of a table (observed
/// response, not excluded). Column order follows the effect list.
inline DesignMatrix design_matrix(const EffectList& effects, const CodedFactorSpace& space, const DataTable& table,
                                  const std::string& response, const std::optional<Eigen::VectorXd>& weights = {}) {
    std::size_t col = table.column_index(response);
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        if (!table.rows[r].exclude && table.rows[r].values[col]) rows.push_back(r);
    if (rows.empty()) throw ValidationError("no usable rows for response '" + response + "'");
    const auto n = static_cast<Eigen::Index>(rows.size());
    DesignMatrix dm;
    dm.X.resize(n, static_cast<Eigen::Index>(effects.size()));
    dm.y.resize(n);
    dm.w = Eigen::VectorXd::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = table.rows[rows[static_cast<std::size_t>(i)]];
        dm.X.row(i) = expand(effects, space.code(row.factors)).transpose();
        dm.y(i) = *row.values[col];
    }
    if (weights) {
        if (weights->size() != n) throw ValidationError("weight vector length does not match usable rows");
        dm.w = *weights;
    }
    dm.rows = std::move(rows);
    return dm;
}

} // namespace formix
