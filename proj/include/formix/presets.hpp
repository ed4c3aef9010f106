#pragma once

// The worked lipid nanoparticle study: four lipids, ionizable lipid type,
// N:P ratio and flow rate, with Potency maximized and Size minimized.

#include "formix/design.hpp"
#include "formix/study.hpp"

namespace formix::presets {

inline StudyDefinition lnp_study() {
    StudyDefinition def;
    def.name = "LNP";
    def.date = "2022-09-02";
    def.factors = {
        Factor::mixture("PEG", 0.01, 0.05, 0.0001),
        Factor::mixture("Helper", 0.1, 0.6, 0.0001),
        Factor::mixture("Ionizable", 0.1, 0.6, 0.0001),
        Factor::mixture("Cholesterol", 0.1, 0.6, 0.0001),
        Factor::categorical("Ionizable Lipid Type", {"H101", "H102", "H103"}),
        Factor::continuous("N_P_ratio", 6, 14, 0.1),
        Factor::continuous("flow rate", 1, 3, 0.1),
    };
    def.responses = {
        {"Potency", Goal::maximize, kNaN, 1.0, Transform::identity, false},
        {"Size", Goal::minimize, kNaN, 0.2, Transform::identity, false},
    };
    return def;
}

/// 1% PEG, 33% each of helper, ionizable and cholesterol; H101; N:P 10; flow 1.
inline Settings lnp_benchmark() { return {0.01, 0.33, 0.33, 0.33, 0.0, 10.0, 1.0}; }

} // namespace formix::presets
