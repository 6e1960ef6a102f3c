#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "gma/modal.hpp"
#include "gma/state_space.hpp"

namespace gma {

/// Matrix residue of a port transfer at one (simple) system mode.
struct ResidueMatrix {
    Complex mode;
    ComplexMatrix R;  // ports x ports
};

/// Controllability/observability of one mode through the selected ports.
struct PortModeFlags {
    bool controllable = false;  // psi_i * B1 != 0
    bool observable = false;    // C1 * phi_i != 0
};

/// |H(lambda_i + delta)| = 1 / |det G(lambda_i + delta)| sampled on a
/// shrinking offset sequence, with the fitted log-log slope used to decide
/// whether the determinant magnitude tends to zero at the mode.
struct DetHTrend {
    std::vector<double> delta;
    std::vector<double> h_mag;
    double slope = 0.0;
    bool tends_to_zero = false;
};

/// Port transfer G(s) = C1 (sI - A)^{-1} B1 + D1 evaluated by linear solve
/// (never by forming the resolvent).  Refuses evaluation within 1e-9 of an
/// eigenvalue; pass precomputed eigenvalues to avoid recomputing them in
/// frequency-sweep loops.
inline ComplexMatrix subsystem_transfer(const StateSpace& ss, const PortSelection& sel,
                                        Complex s,
                                        const ComplexVector* eigenvalues = nullptr) {
    sel.check_against(ss.A);
    ComplexVector eigs_local;
    if (eigenvalues == nullptr) {
        eigs_local = ss.A.eigenvalues();
        eigenvalues = &eigs_local;
    }
    for (Eigen::Index k = 0; k < eigenvalues->size(); ++k) {
        if (std::abs(s - (*eigenvalues)(k)) < 1e-9)
            throw PoleEvaluationError("subsystem_transfer: evaluation at pole " +
                                      std::to_string((*eigenvalues)(k).real()) + (
                                          (*eigenvalues)(k).imag() < 0 ? " - " : " + ") +
                                      std::to_string(std::abs((*eigenvalues)(k).imag())) + "j");
    }
    ComplexMatrix M = -ss.A.cast<Complex>();
    M.diagonal().array() += s;
    const ComplexMatrix X = Eigen::PartialPivLU<ComplexMatrix>(M).solve(sel.B1.cast<Complex>());
    return sel.C1.cast<Complex>() * X + sel.D1.cast<Complex>();
}

/// Residue of the port transfer at simple mode i:
///     Res_{lambda_i} G(s) = C1 phi_i psi_i B1.
inline ResidueMatrix residue_at_mode(const EigenSystem& es, const PortSelection& sel, int i) {
    if (sel.B1.rows() != es.Phi.rows() || sel.C1.cols() != es.Phi.rows())
        throw DimensionError("residue_at_mode: selection does not match system dimension");
    if (i < 0 || i >= es.size())
        throw DimensionError("residue_at_mode: mode index out of range");
    if (!es.is_simple(i))
        throw NonSimpleModeError("residue_at_mode: mode is repeated within tolerance; "
                                 "residues are only defined at simple modes");
    const ComplexVector cphi = sel.C1.cast<Complex>() * es.Phi.col(i);
    const Eigen::RowVectorXcd psib = es.Psi.row(i) * sel.B1.cast<Complex>();
    return ResidueMatrix{es.eigenvalues(i), cphi * psib};
}

inline ResidueMatrix residue_at_mode(const StateSpace& ss, const PortSelection& sel, int i) {
    return residue_at_mode(eigendecompose(ss), sel, i);
}

/// Whether mode i is excitable (controllable) and visible (observable)
/// through the selected ports, judged against 1e-9 relative thresholds.
inline PortModeFlags ctrb_obsv_flags(const EigenSystem& es, const PortSelection& sel, int i) {
    if (i < 0 || i >= es.size())
        throw DimensionError("ctrb_obsv_flags: mode index out of range");
    PortModeFlags f;
    const Eigen::RowVectorXcd psib = es.Psi.row(i) * sel.B1.cast<Complex>();
    const ComplexVector cphi = sel.C1.cast<Complex>() * es.Phi.col(i);
    const double bnorm = sel.B1.norm(), cnorm = sel.C1.norm();
    f.controllable = psib.norm() > 1e-9 * es.Psi.row(i).norm() * (bnorm > 0 ? bnorm : 1.0);
    f.observable = cphi.norm() > 1e-9 * es.Phi.col(i).norm() * (cnorm > 0 ? cnorm : 1.0);
    return f;
}

/// Sensitivity of mode i to the port-level transfer it closes against:
///     d lambda_i / d H = -(C1 phi_i psi_i B1)^T = -(Res_{lambda_i} G)^T.
/// Entry (k,j) is the first-order mode movement per unit perturbation of
/// H(s) entry (k,j) near s = lambda_i.  Undefined (and refused) when the
/// mode is not both controllable and observable through the ports.
inline ComplexMatrix gma_sensitivity(const EigenSystem& es, const PortSelection& sel, int i) {
    const PortModeFlags f = ctrb_obsv_flags(es, sel, i);
    if (!f.controllable || !f.observable) {
        std::string why;
        if (!f.controllable) why += " psi_i*B1 = 0 (mode not excitable through the ports);";
        if (!f.observable) why += " C1*phi_i = 0 (mode not visible through the ports);";
        throw PortCouplingError("gma_sensitivity: sensitivity undefined at this mode:" + why +
                                " choose ports that couple to the mode");
    }
    return -residue_at_mode(es, sel, i).R.transpose();
}

inline ComplexMatrix gma_sensitivity(const StateSpace& ss, const PortSelection& sel, int i) {
    return gma_sensitivity(eigendecompose(ss), sel, i);
}

/// Probe |H(s)| = 1/|det G(s)| on s = lambda_i + delta_t with delta_t halved
/// ten times.  At a mode that the ports both excite and observe the
/// determinant magnitude scales like |delta| (slope ~1 in log-log); at a
/// hidden mode it stays bounded away from zero (slope ~0).
inline DetHTrend det_h_check(const StateSpace& ss, const EigenSystem& es,
                             const PortSelection& sel, int i, int steps = 10) {
    if (i < 0 || i >= es.size())
        throw DimensionError("det_h_check: mode index out of range");
    DetHTrend out;
    const Complex lam = es.eigenvalues(i);
    const double d0 = 1e-2 * std::max(1.0, std::abs(lam));
    for (int t = 0; t < steps; ++t) {
        const double d = d0 * std::pow(0.5, t);
        const ComplexMatrix G = subsystem_transfer(ss, sel, lam + d, &es.eigenvalues);
        const Complex detG = Eigen::PartialPivLU<ComplexMatrix>(G).determinant();
        const double h = std::abs(detG) > 0 ? 1.0 / std::abs(detG)
                                            : std::numeric_limits<double>::infinity();
        out.delta.push_back(d);
        out.h_mag.push_back(h);
    }
    // least-squares slope of log(h) vs log(delta) over the tail of the sweep
    const int tail = std::min<int>(5, steps);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int t = steps - tail; t < steps; ++t) {
        const double x = std::log(out.delta[t]);
        const double y = std::log(std::max(out.h_mag[t], 1e-300));
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    out.slope = (tail * sxy - sx * sy) / (tail * sxx - sx * sx);
    out.tends_to_zero = out.slope > 0.5;
    return out;
}

inline DetHTrend det_h_check(const StateSpace& ss, const PortSelection& sel, int i) {
    return det_h_check(ss, eigendecompose(ss), sel, i);
}

}  // namespace gma
