#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gma/network.hpp"

namespace gma {

/// Thresholds picking the modes worth screening: lightly damped, inside the
/// frequency band of interest, and not decaying too fast to matter.  Real
/// (non-oscillatory) modes are excluded by default since the indices target
/// oscillatory interaction.
struct ModeSelection {
    double zeta_max = 0.2;
    double f_max_hz = 100.0;
    double sigma_floor = 50.0;  // keep modes with sigma > -sigma_floor
    bool include_real = false;

    void validate() const {
        if (!(zeta_max > 0.0) || !(f_max_hz > 0.0) || !(sigma_floor > 0.0))
            throw ParameterError("ModeSelection: thresholds must be positive");
    }
};

struct ModeSubset {
    std::vector<ModeInfo> modes;  // ordered by damping ratio, least damped first
    ModeSelection thresholds;
};

/// Filters a mode list down to the screening subset.  Conjugate pairs are
/// collapsed to their positive-frequency representative (both members carry
/// identical index values).
inline ModeSubset select_modes(const std::vector<ModeInfo>& all,
                               ModeSelection sel = {}) {
    sel.validate();
    ModeSubset out;
    out.thresholds = sel;
    for (const ModeInfo& m : all) {
        const bool is_real = m.omega == 0.0;
        if (is_real && !sel.include_real) continue;
        if (!is_real && m.omega < 0.0) continue;  // keep the +omega member
        // a real mode has zeta identically +/-1, so the damping-ratio cut
        // only makes sense for oscillatory modes
        if (!is_real && !(m.zeta < sel.zeta_max)) continue;
        if (!(m.freq_hz <= sel.f_max_hz)) continue;
        if (!(m.sigma > -sel.sigma_floor)) continue;
        out.modes.push_back(m);
    }
    std::stable_sort(out.modes.begin(), out.modes.end(),
                     [](const ModeInfo& l, const ModeInfo& r) {
                         if (l.zeta != r.zeta) return l.zeta < r.zeta;
                         if (l.freq_hz != r.freq_hz) return l.freq_hz < r.freq_hz;
                         return l.sigma < r.sigma;
                     });
    return out;
}

/// Residue of the whole-system impedance at the mode nearest lambda,
/// computed from a refined eigentriple of the impedance realization:
///   Res = (C x)(y^H B) / (y^H x).
/// This is normalization-free and stays accurate on stiff realizations
/// where a global eigenvector matrix would be badly conditioned.
inline ComplexMatrix whole_residue(const SystemModel& model, Complex lambda) {
    const ComplexVector& eigs = model.eigenvalues;
    int best = 0;
    for (int i = 1; i < eigs.size(); ++i)
        if (std::abs(eigs(i) - lambda) < std::abs(eigs(best) - lambda)) best = i;
    if (std::abs(eigs(best) - lambda) > 1e-6 * std::max(1.0, std::abs(lambda)))
        throw ModeNotFoundError("whole_residue: no system mode near " +
                                std::to_string(lambda.real()) + " + " +
                                std::to_string(lambda.imag()) + "j");
    const Complex lam = eigs(best);
    double gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < eigs.size(); ++i)
        if (i != best) gap = std::min(gap, std::abs(eigs(i) - lam));
    if (!(gap > 1e-8 * std::max(1.0, std::abs(lam))))
        throw NonSimpleModeError("whole_residue: mode at " + std::to_string(lam.real()) +
                                 " + " + std::to_string(lam.imag()) +
                                 "j is part of a cluster; residue is not well defined");

    const netdetail::RefinedMode rm = netdetail::refine_mode(model.whole.ss.A, lam);
    const Complex denom = rm.left.dot(rm.right);  // y^H x
    if (std::abs(denom) < 1e-10)
        throw NonSimpleModeError(
            "whole_residue: left/right eigenvectors are numerically orthogonal; the mode "
            "behaves as defective");
    const ComplexVector cx = model.whole.ss.C.cast<Complex>() * rm.right;
    const Eigen::RowVectorXcd yb =
        rm.left.adjoint() * model.whole.ss.B.cast<Complex>();
    return (cx * yb) / denom;
}

/// Sensitivity of the mode nearest lambda to the (source i, node j) block
/// of the voltage-distribution matrix Y_G^-1 Y:
///   S = -Y_Gi(λ)^T · (Res_λ Z_ji)^T,
/// entry (a, b) of S being the derivative of λ with respect to entry (a, b)
/// of that block.  Placeholder buses are not sources; pass allow_placeholder
/// to probe their (vanishing) contribution anyway.
inline ComplexMatrix modal_voltage_sensitivity(const SystemModel& model, int source_bus,
                                               int node_bus, Complex lambda,
                                               bool allow_placeholder = false) {
    if (source_bus < 1 || source_bus > model.buses() || node_bus < 1 ||
        node_bus > model.buses())
        throw ParameterError("modal_voltage_sensitivity: bus index out of range");
    if (!allow_placeholder && model.source_at(source_bus) < 0)
        throw ParameterError("modal_voltage_sensitivity: bus " +
                             std::to_string(source_bus) +
                             " is not a source (placeholder admittance only)");
    const ComplexMatrix res = whole_residue(model, lambda);
    const ComplexMatrix y_gi =
        SystemModel::block(model.y_g.eval(lambda), source_bus, source_bus);
    const ComplexMatrix res_ji = SystemModel::block(res, node_bus, source_bus);
    return -(y_gi.transpose() * res_ji.transpose());
}

namespace inddetail {

inline double vdm_from_sensitivity(double sigma, const ComplexMatrix& sens) {
    const double denom = sens.norm();  // Frobenius
    if (!(denom > 1e-12)) {
        // insensitive pair: infinite-margin sentinel, signed so the margin
        // sign always mirrors the mode's stability
        if (sigma == 0.0) return 0.0;
        return sigma < 0.0 ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity();
    }
    return -sigma / denom;
}

}  // namespace inddetail

/// Voltage-distribution margin of (source i, node j) at the mode nearest
/// lambda: the mode's decay rate normalized by how strongly that pair can
/// move the mode.  Positive iff the mode is stable; +inf when the pair is
/// numerically insensitive.
inline double vdm(const SystemModel& model, int source_bus, int node_bus,
                  Complex lambda) {
    const ComplexMatrix sens =
        modal_voltage_sensitivity(model, source_bus, node_bus, lambda);
    return inddetail::vdm_from_sensitivity(lambda.real(), sens);
}

struct StgResult {
    int source_bus = 0;
    std::string label;
    double value = 0.0;
    ModeInfo argmin;  // subset mode achieving the minimum
};

/// Strength of the grid seen from one source: the smallest self-VDM over
/// the screening subset, with the mode that achieves it.
inline StgResult stg(const SystemModel& model, int source_bus,
                     const ModeSubset& subset) {
    if (subset.modes.empty())
        throw ParameterError("stg: mode subset is empty; widen the selection thresholds");
    const int dev = model.source_at(source_bus);
    if (dev < 0)
        throw ParameterError("stg: bus " + std::to_string(source_bus) +
                             " is not a source");
    StgResult out;
    out.source_bus = source_bus;
    out.label = model.def.label_of(static_cast<size_t>(dev));
    out.value = std::numeric_limits<double>::infinity();
    out.argmin = subset.modes.front();
    for (const ModeInfo& m : subset.modes) {
        const double v = vdm(model, source_bus, source_bus, m.lambda);
        if (v < out.value) {
            out.value = v;
            out.argmin = m;
        }
    }
    return out;
}

/// Classic short-circuit ratio.
inline double scr(double z_source_mag, double z_grid_mag) {
    if (!(z_grid_mag > 0.0)) throw ParameterError("scr: grid impedance must be positive");
    if (!(z_source_mag > 0.0))
        throw ParameterError("scr: source impedance must be positive");
    return z_source_mag / z_grid_mag;
}

struct ScrComparison {
    double scr_value = 0.0;  // |Z_s| / |Z_g| with |Z_s| = 1 / rated power
    double base_frequency_gain = 0.0;  // |[Y_G^-1 Y]_ii| at s = j*omega_base
    double one_plus_scr = 0.0;
};

/// Side-by-side report of the classic SCR and the base-frequency
/// voltage-distribution gain for a single-converter, single-branch case.
/// The two quantities are reported together, not asserted equal: the gain
/// restricted to s = j*omega_base plays the role of 1 + SCR only in the
/// ideal current-source limit.
inline ScrComparison stg_scr_comparison(const SystemModel& model, int source_bus) {
    const NetworkCase& def = model.def;
    const bool smib_shaped = def.buses == 1 && def.branches.size() == 1 &&
                             def.branches[0].to == 0 && def.devices.size() == 1 &&
                             def.devices[0].bus == source_bus;
    if (!smib_shaped)
        throw ParameterError(
            "stg_scr_comparison: supported only for a single-converter case with one "
            "branch to the stiff reference");
    const double z_grid = std::hypot(def.branches[0].r, def.branches[0].x);
    const double rated = std::visit(
        [](const auto& spec) -> double {
            using T = std::decay_t<decltype(spec)>;
            if constexpr (std::is_same_v<T, DqTransfer>)
                return 1.0;  // fitted source: rating unknown, assume system base
            else
                return spec.s_rated;
        },
        def.devices[0].device);
    ScrComparison out;
    out.scr_value = scr(1.0 / rated, z_grid);
    out.one_plus_scr = 1.0 + out.scr_value;
    const ComplexMatrix t = source_voltage_transfer(
        model, source_bus, source_bus, Complex(0.0, model.def.base.omega_base()));
    // a 2x2 dq block of a scalar complex gain has Frobenius norm sqrt(2)|g|
    out.base_frequency_gain = t.norm() / std::sqrt(2.0);
    return out;
}

/// Everything the screening produces, ready for serialization: one VDM
/// table per subset mode (rows = sources, columns = nodes), the per-source
/// STG with its critical mode, and advisory annotations.
struct IndexReport {
    std::string case_name;
    std::uint64_t case_hash = 0;  // filled by the I/O layer from file bytes
    std::string timestamp;        // empty = suppressed
    ModeSubset subset;
    std::vector<int> source_buses;
    std::vector<std::string> source_labels;
    std::vector<std::string> source_kinds;
    std::vector<Matrix> vdm_tables;  // subset.modes.size() tables, n_src x buses
    std::vector<StgResult> stg_rows;
    std::vector<std::string> advisories;
};

/// Advisory screening boundaries (never hard pass/fail): converters below
/// these self-strength levels deserve a closer look.
inline double stg_advisory_boundary(const std::string& kind) {
    if (kind == "gfm") return 0.4;
    if (kind == "gfl") return 1.0;
    return 0.0;  // no boundary published for machines / fitted sources
}

inline IndexReport build_index_report(const SystemModel& model,
                                      ModeSelection sel = {}) {
    IndexReport rep;
    rep.case_name = model.def.name;
    rep.subset = select_modes(system_modes(model), sel);
    for (size_t d = 0; d < model.def.devices.size(); ++d) {
        rep.source_buses.push_back(model.def.devices[d].bus);
        rep.source_labels.push_back(model.def.label_of(d));
        rep.source_kinds.push_back(device_kind_name(model.def.devices[d].device));
    }
    const int n_src = static_cast<int>(rep.source_buses.size());
    for (const ModeInfo& m : rep.subset.modes) {
        const ComplexMatrix res = whole_residue(model, m.lambda);
        const ComplexMatrix y_g_at = model.y_g.eval(m.lambda);
        Matrix table(n_src, model.buses());
        for (int a = 0; a < n_src; ++a) {
            const int i = rep.source_buses[static_cast<size_t>(a)];
            const ComplexMatrix y_gi = SystemModel::block(y_g_at, i, i);
            for (int j = 1; j <= model.buses(); ++j) {
                const ComplexMatrix s =
                    -(y_gi.transpose() * SystemModel::block(res, j, i).transpose());
                table(a, j - 1) = inddetail::vdm_from_sensitivity(m.sigma, s);
            }
        }
        rep.vdm_tables.push_back(std::move(table));
    }
    if (!rep.subset.modes.empty()) {
        for (int a = 0; a < n_src; ++a) {
            const int bus = rep.source_buses[static_cast<size_t>(a)];
            const StgResult r = stg(model, bus, rep.subset);
            rep.stg_rows.push_back(r);
            const double boundary =
                stg_advisory_boundary(rep.source_kinds[static_cast<size_t>(a)]);
            if (boundary > 0.0 && r.value < boundary)
                rep.advisories.push_back(
                    r.label + ": STG " + std::to_string(r.value) +
                    " is below the advisory screening boundary " +
                    std::to_string(boundary) + " for " +
                    rep.source_kinds[static_cast<size_t>(a)] + " sources");
        }
    }
    return rep;
}

}  // namespace gma
