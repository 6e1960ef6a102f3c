#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <optional>
#include <utility>

#include "gma/state_space.hpp"
#include "gma/vectorfit.hpp"

namespace gma {

/// Per-unit system shared by a whole study.
struct PerUnitBase {
    double s_base_mva = 100.0;
    double f_base_hz = 60.0;

    double omega_base() const { return 2.0 * M_PI * f_base_hz; }
};

/// Steady-state terminal conditions of one device: voltage phasor and the
/// complex power it injects into the bus, all on the system base.
struct OperatingPoint {
    double v = 1.0;      // voltage magnitude, pu
    double theta = 0.0;  // voltage angle, rad
    double p = 0.0;      // injected active power, pu
    double q = 0.0;      // injected reactive power, pu
};

/// Rotation by `angle`: maps local-frame dq vectors into the global frame.
inline Matrix rotation2(double angle) {
    Matrix r(2, 2);
    r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    return r;
}

/// Quarter-turn rotation; multiplying a dq vector by this matches multiplying
/// the corresponding phasor by j.
inline Matrix quadrature2() {
    Matrix j(2, 2);
    j << 0.0, -1.0, 1.0, 0.0;
    return j;
}

inline Complex to_phasor(const Vector& dq) { return Complex(dq(0), dq(1)); }

inline Vector from_phasor(Complex z) {
    Vector v(2);
    v << z.real(), z.imag();
    return v;
}

/// Square multi-port transfer function carried around as a real state-space
/// realization.  Port pairs are dq axes of buses, so sizes are always even;
/// the value at any complex s is obtained by a direct resolvent solve.
struct DqTransfer {
    StateSpace ss;

    explicit DqTransfer(StateSpace realization) : ss(std::move(realization)) {
        if (ss.m() != ss.r())
            throw DimensionError("DqTransfer: realization must be square (" +
                                 std::to_string(ss.r()) + " outputs vs " +
                                 std::to_string(ss.m()) + " inputs)");
    }

    int n() const { return ss.n(); }
    int ports() const { return ss.m(); }

    /// The resolvent solve runs in extended precision: assembled systems mix
    /// bus-elimination parasitics (|λ| ~ 1/eps) with slow physical modes, so
    /// (sI - A) is legitimately ill-conditioned and plain double would lose
    /// eight digits right where impedance/admittance identities are checked.
    ComplexMatrix eval(Complex s) const {
        using Cld = std::complex<long double>;
        using MatrixLd = Eigen::Matrix<Cld, Eigen::Dynamic, Eigen::Dynamic>;
        if (ss.n() == 0) return ss.D.cast<Complex>();
        MatrixLd m = (-ss.A).cast<Cld>();
        m.diagonal().array() += Cld(s.real(), s.imag());
        Eigen::PartialPivLU<MatrixLd> lu(m);
        if (!(lu.rcond() > 1e-14L))
            throw PoleEvaluationError("DqTransfer: evaluation point is numerically a pole (s = " +
                                      std::to_string(s.real()) + " + " +
                                      std::to_string(s.imag()) + "j)");
        const MatrixLd value =
            ss.C.cast<Cld>() * lu.solve(ss.B.cast<Cld>()) + ss.D.cast<Cld>();
        return value.unaryExpr([](Cld z) {
            return Complex(static_cast<double>(z.real()), static_cast<double>(z.imag()));
        });
    }

    /// Realization of the inverse transfer; needs invertible feedthrough.
    DqTransfer inverse() const {
        Eigen::FullPivLU<Matrix> lu(ss.D);
        if (!lu.isInvertible())
            throw AlgebraicLoopError(
                "DqTransfer: feedthrough matrix is singular, the inverse has no state-space "
                "realization");
        const Matrix d_inv = lu.inverse();
        return DqTransfer(StateSpace(ss.A - ss.B * d_inv * ss.C, ss.B * d_inv, -d_inv * ss.C,
                                     d_inv, ss.state_names, ss.output_names, ss.input_names));
    }

    /// Same dynamics with an extra constant term added to the feedthrough.
    DqTransfer with_feedthrough(const Matrix& extra) const {
        if (extra.rows() != ss.D.rows() || extra.cols() != ss.D.cols())
            throw DimensionError("DqTransfer: feedthrough shape mismatch");
        return DqTransfer(StateSpace(ss.A, ss.B, ss.C, ss.D + extra, ss.state_names,
                                     ss.input_names, ss.output_names));
    }
};

/// Rejects realizations whose growing modes are invisible from the terminals:
/// such a model would pass every port-level test while hiding an instability.
/// Decaying or marginal hidden modes are fine (they appear routinely when
/// control gains are set to zero) and are left alone.
inline void check_hidden_unstable_modes(const StateSpace& ss, double re_threshold = 1e-9) {
    if (ss.n() == 0) return;
    const ComplexVector eigs = ss.A.eigenvalues();
    const ComplexMatrix a = ss.A.cast<Complex>();
    for (int i = 0; i < eigs.size(); ++i) {
        if (eigs(i).real() <= re_threshold) continue;
        ComplexMatrix ctrb(ss.n(), ss.n() + ss.m());
        ctrb << a - eigs(i) * ComplexMatrix::Identity(ss.n(), ss.n()), ss.B.cast<Complex>();
        Eigen::JacobiSVD<ComplexMatrix> csvd(ctrb);
        if (csvd.singularValues()(ss.n() - 1) < 1e-9 * csvd.singularValues()(0))
            throw PortCouplingError(
                "check_hidden_unstable_modes: growing mode is uncontrollable from the "
                "terminals (Re = " +
                std::to_string(eigs(i).real()) + ")");
        ComplexMatrix obsv(ss.n() + ss.r(), ss.n());
        obsv << a - eigs(i) * ComplexMatrix::Identity(ss.n(), ss.n()), ss.C.cast<Complex>();
        Eigen::JacobiSVD<ComplexMatrix> osvd(obsv);
        if (osvd.singularValues()(ss.n() - 1) < 1e-9 * osvd.singularValues()(0))
            throw PortCouplingError(
                "check_hidden_unstable_modes: growing mode is unobservable from the "
                "terminals (Re = " +
                std::to_string(eigs(i).real()) + ")");
    }
}

/// Admittance of a series RL path in the synchronous frame: the current drawn
/// from an applied voltage, including the cross-coupling the rotating frame
/// induces between the axes.
inline DqTransfer series_rl_admittance(double r, double x, double omega_base,
                                       double scale = 1.0) {
    if (!(x > 0.0)) throw ParameterError("series_rl_admittance: reactance must be positive");
    if (r < 0.0) throw ParameterError("series_rl_admittance: negative resistance");
    if (!(omega_base > 0.0))
        throw ParameterError("series_rl_admittance: base frequency must be positive");
    const double inv_t = omega_base / x;
    Matrix a = -inv_t * (r * Matrix::Identity(2, 2) + x * quadrature2());
    Matrix b = inv_t * Matrix::Identity(2, 2);
    Matrix c = scale * Matrix::Identity(2, 2);
    return DqTransfer(StateSpace(a, b, c, Matrix::Zero(2, 2), {"i_d", "i_q"}, {"v_d", "v_q"},
                                 {"i_d", "i_q"}));
}

namespace devdetail {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ParameterError(msg);
}

/// Shared filter/operating-point validation and equilibrium phasors.
struct TerminalEquilibrium {
    Vector v0{2}, i0{2}, e0{2};  // global-frame voltage, current, internal EMF
    double p_dev = 0.0, q_dev = 0.0;

    TerminalEquilibrium(const OperatingPoint& op, double r, double x, double s_rated,
                        const std::string& who) {
        require(op.v > 0.0, who + ": operating-point voltage magnitude must be positive");
        require(s_rated > 0.0, who + ": device rating must be positive");
        require(x > 0.0, who + ": filter reactance must be positive");
        require(r >= 0.0, who + ": negative filter resistance");
        p_dev = op.p / s_rated;
        q_dev = op.q / s_rated;
        const Complex vbar = std::polar(op.v, op.theta);
        const Complex ibar = std::conj(Complex(p_dev, q_dev) / vbar);
        const Complex ebar = vbar + Complex(r, x) * ibar;
        v0 = from_phasor(vbar);
        i0 = from_phasor(ibar);
        e0 = from_phasor(ebar);
    }
};

}  // namespace devdetail

// ---------------------------------------------------------------------------
// Grid-following converter: synchronous-reference-frame phase-locked loop,
// proportional-integral current control, series RL output filter.
// ---------------------------------------------------------------------------

struct GflParams {
    double r_f = 0.01;        // filter resistance, device-base pu
    double x_f = 0.15;        // filter reactance, device-base pu
    double f_current = 300.0; // current-loop bandwidth, Hz
    double pll_kp = 50.0;     // loop-filter proportional gain, rad/s per pu volt
    double pll_ki = 2000.0;   // loop-filter integral gain
    double s_rated = 1.0;     // device rating as a fraction of the system base
};

/// States: filter current (global frame), current-loop integrators (local
/// frame), loop-filter integrator, tracked angle.
class GflDevice {
public:
    GflParams params;
    OperatingPoint op;
    double omega_base;

    // equilibrium, device-base global frame
    Vector v0{2}, i0{2}, e0{2};
    double delta0 = 0.0;   // = op.theta: the tracked angle locks to the bus
    Vector e_ff{2};        // frozen modulation feedforward, local frame
    Vector i_ref{2};       // current setpoint, local frame
    double k_pc = 0.0, k_ic = 0.0, t_f = 0.0;

    GflDevice(const GflParams& p, const OperatingPoint& o, double w_base)
        : params(p), op(o), omega_base(w_base) {
        devdetail::require(w_base > 0.0, "GflDevice: base frequency must be positive");
        devdetail::require(p.f_current > 0.0,
                           "GflDevice: current-loop bandwidth must be positive");
        devdetail::require(p.pll_kp >= 0.0 && p.pll_ki >= 0.0,
                           "GflDevice: negative loop-filter gain");
        const devdetail::TerminalEquilibrium eq(o, p.r_f, p.x_f, p.s_rated, "GflDevice");
        v0 = eq.v0;
        i0 = eq.i0;
        e0 = eq.e0;
        t_f = p.x_f / omega_base;
        k_pc = 2.0 * M_PI * p.f_current * t_f;
        k_ic = 2.0 * M_PI * p.f_current * p.r_f;
        delta0 = op.theta;
        e_ff = rotation2(-delta0) * e0;
        i_ref = rotation2(-delta0) * i0;
    }

    int n() const { return 6; }

    Vector equilibrium_state() const {
        Vector x = Vector::Zero(6);
        x.head(2) = i0;
        x(5) = delta0;
        return x;
    }

    /// Full nonlinear dynamics; x = [i_d, i_q, gamma_d, gamma_q, eps, delta],
    /// v is the bus voltage in the global frame (device-base pu throughout).
    Vector rhs(const Vector& x, const Vector& v) const {
        const Vector i = x.head(2);
        const Vector gamma = x.segment(2, 2);
        const double eps = x(4), delta = x(5);
        const Matrix to_local = rotation2(-delta);
        const Vector i_loc = to_local * i;
        const Vector e_loc = e_ff + k_pc * (i_ref - i_loc) + k_ic * gamma;
        const double vq_loc = (to_local * v)(1);
        Vector dx(6);
        dx.head(2) = (rotation2(delta) * e_loc - v -
                      (params.r_f * Matrix::Identity(2, 2) + params.x_f * quadrature2()) * i) /
                     t_f;
        dx.segment(2, 2) = i_ref - i_loc;
        dx(4) = vq_loc;
        dx(5) = params.pll_kp * vq_loc + params.pll_ki * eps;
        return dx;
    }

    /// Current the converter pushes into the bus (device base, global frame).
    Vector injected_current(const Vector& x) const { return x.head(2); }

    /// Small-signal model about the stored equilibrium, bus voltage in and
    /// injected current out (device base).
    StateSpace linearize() const {
        const Matrix jm = quadrature2();
        const Matrix rp = rotation2(delta0), rm = rotation2(-delta0);
        const Matrix m_f = params.r_f * Matrix::Identity(2, 2) + params.x_f * jm;
        Matrix a = Matrix::Zero(6, 6), b = Matrix::Zero(6, 2);
        // filter current
        a.block(0, 0, 2, 2) = (-(k_pc * Matrix::Identity(2, 2)) - m_f) / t_f;
        a.block(0, 2, 2, 2) = (k_ic / t_f) * rp;
        a.block(0, 5, 2, 1) = (jm * (e0 + k_pc * i0)) / t_f;
        b.block(0, 0, 2, 2) = -Matrix::Identity(2, 2) / t_f;
        // current-loop integrators
        a.block(2, 0, 2, 2) = -rm;
        a.block(2, 5, 2, 1) = jm * (rm * i0);
        // loop filter: vq in the tracked frame falls by |v| per rad of lead
        const Eigen::RowVector2d dvq_dv(-std::sin(delta0), std::cos(delta0));
        a(4, 5) = -(std::cos(delta0) * v0(0) + std::sin(delta0) * v0(1));
        b.block(4, 0, 1, 2) = dvq_dv;
        a(5, 4) = params.pll_ki;
        a(5, 5) = params.pll_kp * a(4, 5);
        b.block(5, 0, 1, 2) = params.pll_kp * dvq_dv;
        Matrix c = Matrix::Zero(2, 6);
        c.block(0, 0, 2, 2) = Matrix::Identity(2, 2);
        return StateSpace(a, b, c, Matrix::Zero(2, 2),
                          {"i_d", "i_q", "gamma_d", "gamma_q", "eps_pll", "delta"},
                          {"v_d", "v_q"}, {"i_d", "i_q"});
    }

    /// Terminal admittance on the system base: current drawn from the bus per
    /// unit of applied voltage (so the injected current enters negated).
    DqTransfer admittance() const {
        StateSpace lin = linearize();
        StateSpace scaled(lin.A, lin.B, -params.s_rated * lin.C, lin.D, lin.state_names,
                          lin.input_names, lin.output_names);
        check_hidden_unstable_modes(scaled);
        return DqTransfer(std::move(scaled));
    }
};

// ---------------------------------------------------------------------------
// Grid-forming converter: active-power/frequency droop sets the internal
// angle, a voltage loop regulates the quasi-static internal EMF and feeds a
// proportional-integral current loop behind the same series RL filter.
// ---------------------------------------------------------------------------

struct GfmParams {
    double r_f = 0.01;         // filter resistance, device-base pu
    double x_f = 0.15;         // filter reactance, device-base pu
    double f_current = 400.0;  // inner current-loop bandwidth, Hz
    double f_voltage = 40.0;   // voltage-loop integral bandwidth, Hz
    double droop_mp = 0.02;    // frequency droop, pu frequency per pu power
    double s_rated = 1.0;      // device rating as a fraction of the system base
    std::optional<double> v_set;  // internal EMF magnitude; derived when absent
};

/// States: filter current (global), current-loop integrators, voltage-loop
/// integrators (both local), droop angle.
class GfmDevice {
public:
    GfmParams params;
    OperatingPoint op;
    double omega_base;

    Vector v0{2}, i0{2}, e0{2};
    double delta0 = 0.0;  // droop angle locks to the internal EMF direction
    double e_set = 0.0;   // EMF magnitude target
    double p_set = 0.0;   // droop power setpoint (device base)
    Vector e_ff{2}, i_ff{2};
    double k_pc = 0.0, k_ic = 0.0, k_pv = 0.0, k_iv = 0.0, t_f = 0.0;

    GfmDevice(const GfmParams& p, const OperatingPoint& o, double w_base)
        : params(p), op(o), omega_base(w_base) {
        devdetail::require(w_base > 0.0, "GfmDevice: base frequency must be positive");
        devdetail::require(p.f_current > 0.0,
                           "GfmDevice: current-loop bandwidth must be positive");
        devdetail::require(p.f_voltage > 0.0,
                           "GfmDevice: voltage-loop bandwidth must be positive");
        devdetail::require(p.droop_mp >= 0.0, "GfmDevice: negative droop slope");
        const devdetail::TerminalEquilibrium eq(o, p.r_f, p.x_f, p.s_rated, "GfmDevice");
        v0 = eq.v0;
        i0 = eq.i0;
        e0 = eq.e0;
        t_f = p.x_f / omega_base;
        k_pc = 2.0 * M_PI * p.f_current * t_f;
        k_ic = 2.0 * M_PI * p.f_current * p.r_f;
        k_pv = 1.0 / p.x_f;
        k_iv = 2.0 * M_PI * p.f_voltage / p.x_f;
        const Complex ebar = to_phasor(e0);
        devdetail::require(std::abs(ebar) > 1e-6,
                           "GfmDevice: operating point has (near-)zero internal EMF");
        e_set = std::abs(ebar);
        if (params.v_set) {
            // sanity guard: a setpoint far from the implied EMF cannot hold
            // this operating point without integrator windup
            if (std::abs(*params.v_set - e_set) > 0.05 * e_set)
                throw ParameterError(
                    "GfmDevice: v_set is inconsistent with the operating point (implied EMF " +
                    std::to_string(e_set) + ", requested " + std::to_string(*params.v_set) + ")");
            e_set = *params.v_set;
        }
        delta0 = std::arg(ebar);
        p_set = v0.dot(i0);
        e_ff = rotation2(-delta0) * e0;
        i_ff = rotation2(-delta0) * i0;
    }

    int n() const { return 7; }

    Vector equilibrium_state() const {
        Vector x = Vector::Zero(7);
        x.head(2) = i0;
        x(6) = delta0;
        return x;
    }

    /// x = [i_d, i_q, gamma_d, gamma_q, xi_d, xi_q, delta].
    Vector rhs(const Vector& x, const Vector& v) const {
        const Vector i = x.head(2);
        const Vector gamma = x.segment(2, 2);
        const Vector xi = x.segment(4, 2);
        const double delta = x(6);
        const Matrix to_local = rotation2(-delta);
        const Matrix m_f = params.r_f * Matrix::Identity(2, 2) + params.x_f * quadrature2();
        Vector e_star(2);
        e_star << e_set, 0.0;
        const Vector emf_est = to_local * (v + m_f * i);  // quasi-static EMF, local frame
        const Vector i_cmd = i_ff + k_pv * (e_star - emf_est) + k_iv * xi;
        const Vector i_loc = to_local * i;
        const Vector e_loc = e_ff + k_pc * (i_cmd - i_loc) + k_ic * gamma;
        Vector dx(7);
        dx.head(2) = (rotation2(delta) * e_loc - v - m_f * i) / t_f;
        dx.segment(2, 2) = i_cmd - i_loc;
        dx.segment(4, 2) = e_star - emf_est;
        dx(6) = omega_base * params.droop_mp * (p_set - v.dot(i));
        return dx;
    }

    Vector injected_current(const Vector& x) const { return x.head(2); }

    StateSpace linearize() const {
        const Matrix jm = quadrature2();
        const Matrix rp = rotation2(delta0), rm = rotation2(-delta0);
        const Matrix m_f = params.r_f * Matrix::Identity(2, 2) + params.x_f * jm;
        // partials of the local-frame current command
        const Matrix dcmd_di = -k_pv * rm * m_f;
        const Matrix dcmd_dv = -k_pv * rm;
        const Vector dcmd_ddelta = k_pv * jm * (rm * e0);
        Matrix a = Matrix::Zero(7, 7), b = Matrix::Zero(7, 2);
        // filter current
        a.block(0, 0, 2, 2) = (rp * k_pc * (dcmd_di - rm) - m_f) / t_f;
        a.block(0, 2, 2, 2) = (k_ic / t_f) * rp;
        a.block(0, 4, 2, 2) = (k_pc * k_iv / t_f) * rp;
        a.block(0, 6, 2, 1) =
            (jm * e0 + rp * k_pc * (dcmd_ddelta + jm * (rm * i0))) / t_f;
        b.block(0, 0, 2, 2) = (rp * k_pc * dcmd_dv - Matrix::Identity(2, 2)) / t_f;
        // current-loop integrators
        a.block(2, 0, 2, 2) = dcmd_di - rm;
        a.block(2, 4, 2, 2) = k_iv * Matrix::Identity(2, 2);
        a.block(2, 6, 2, 1) = dcmd_ddelta + jm * (rm * i0);
        b.block(2, 0, 2, 2) = dcmd_dv;
        // voltage-loop integrators
        a.block(4, 0, 2, 2) = -rm * m_f;
        a.block(4, 6, 2, 1) = jm * (rm * e0);
        b.block(4, 0, 2, 2) = -rm;
        // droop angle
        a.block(6, 0, 1, 2) = -omega_base * params.droop_mp * v0.transpose();
        b.block(6, 0, 1, 2) = -omega_base * params.droop_mp * i0.transpose();
        Matrix c = Matrix::Zero(2, 7);
        c.block(0, 0, 2, 2) = Matrix::Identity(2, 2);
        return StateSpace(a, b, c, Matrix::Zero(2, 2),
                          {"i_d", "i_q", "gamma_d", "gamma_q", "xi_d", "xi_q", "delta"},
                          {"v_d", "v_q"}, {"i_d", "i_q"});
    }

    DqTransfer admittance() const {
        StateSpace lin = linearize();
        StateSpace scaled(lin.A, lin.B, -params.s_rated * lin.C, lin.D, lin.state_names,
                          lin.input_names, lin.output_names);
        check_hidden_unstable_modes(scaled);
        return DqTransfer(std::move(scaled));
    }
};

// ---------------------------------------------------------------------------
// Synchronous machine, classical model: constant EMF behind the transient
// reactance plus the swing equation.
// ---------------------------------------------------------------------------

struct SgParams {
    double r_a = 0.003;       // armature resistance, device-base pu
    double x_d_prime = 0.25;  // transient reactance, device-base pu
    double h = 4.0;           // inertia constant, s
    double d = 1.0;           // damping torque coefficient, pu per pu speed
    double s_rated = 1.0;     // device rating as a fraction of the system base
};

/// States: stator current (global frame), rotor angle, speed deviation.
class SgDevice {
public:
    SgParams params;
    OperatingPoint op;
    double omega_base;

    Vector v0{2}, i0{2}, e0{2};
    double delta0 = 0.0;  // rotor angle = direction of the internal EMF
    double e_mag = 0.0;   // constant EMF magnitude
    double p_mech = 0.0;  // mechanical power balancing the equilibrium
    double t_s = 0.0;

    SgDevice(const SgParams& p, const OperatingPoint& o, double w_base)
        : params(p), op(o), omega_base(w_base) {
        devdetail::require(w_base > 0.0, "SgDevice: base frequency must be positive");
        devdetail::require(p.h > 0.0, "SgDevice: inertia constant must be positive");
        devdetail::require(p.d >= 0.0, "SgDevice: negative damping coefficient");
        const devdetail::TerminalEquilibrium eq(o, p.r_a, p.x_d_prime, p.s_rated, "SgDevice");
        v0 = eq.v0;
        i0 = eq.i0;
        e0 = eq.e0;
        t_s = p.x_d_prime / omega_base;
        const Complex ebar = to_phasor(e0);
        devdetail::require(std::abs(ebar) > 1e-6,
                           "SgDevice: operating point has (near-)zero internal EMF");
        e_mag = std::abs(ebar);
        delta0 = std::arg(ebar);
        p_mech = e0.dot(i0);  // air-gap power, includes the stator loss
    }

    int n() const { return 4; }

    Vector equilibrium_state() const {
        Vector x = Vector::Zero(4);
        x.head(2) = i0;
        x(2) = delta0;
        return x;
    }

    /// x = [i_d, i_q, delta, omega]; omega is the pu speed deviation.
    Vector rhs(const Vector& x, const Vector& v) const {
        const Vector i = x.head(2);
        const double delta = x(2), omega = x(3);
        Vector e(2);
        e << e_mag * std::cos(delta), e_mag * std::sin(delta);
        const Matrix m_s =
            params.r_a * Matrix::Identity(2, 2) + params.x_d_prime * quadrature2();
        Vector dx(4);
        dx.head(2) = (e - v - m_s * i) / t_s;
        dx(2) = omega_base * omega;
        dx(3) = (p_mech - e.dot(i) - params.d * omega) / (2.0 * params.h);
        return dx;
    }

    Vector injected_current(const Vector& x) const { return x.head(2); }

    StateSpace linearize() const {
        const Matrix jm = quadrature2();
        const Matrix m_s =
            params.r_a * Matrix::Identity(2, 2) + params.x_d_prime * quadrature2();
        const Vector de_ddelta = jm * e0;  // EMF turns with the rotor
        Matrix a = Matrix::Zero(4, 4), b = Matrix::Zero(4, 2);
        a.block(0, 0, 2, 2) = -m_s / t_s;
        a.block(0, 2, 2, 1) = de_ddelta / t_s;
        b.block(0, 0, 2, 2) = -Matrix::Identity(2, 2) / t_s;
        a(2, 3) = omega_base;
        a.block(3, 0, 1, 2) = -e0.transpose() / (2.0 * params.h);
        a(3, 2) = -de_ddelta.dot(i0) / (2.0 * params.h);
        a(3, 3) = -params.d / (2.0 * params.h);
        Matrix c = Matrix::Zero(2, 4);
        c.block(0, 0, 2, 2) = Matrix::Identity(2, 2);
        return StateSpace(a, b, c, Matrix::Zero(2, 2), {"i_d", "i_q", "delta", "omega"},
                          {"v_d", "v_q"}, {"i_d", "i_q"});
    }

    DqTransfer admittance() const {
        StateSpace lin = linearize();
        StateSpace scaled(lin.A, lin.B, -params.s_rated * lin.C, lin.D, lin.state_names,
                          lin.input_names, lin.output_names);
        check_hidden_unstable_modes(scaled);
        return DqTransfer(std::move(scaled));
    }
};

/// Builds a terminal admittance from measured/simulated frequency samples by
/// rational fitting; refuses fits whose residual exceeds `max_rms` so a bad
/// measurement set cannot silently poison a study.
inline DqTransfer admittance_from_samples(const std::vector<FrequencySample>& samples,
                                          int order = 8, double max_rms = 1e-4,
                                          const FitOptions& options = {}) {
    const RationalFit fit = vector_fit(samples, order, options);
    if (fit.rms > max_rms)
        throw FitError("admittance_from_samples: fit residual " + std::to_string(fit.rms) +
                           " exceeds the acceptance threshold " + std::to_string(max_rms) +
                           "; raise the order or clean the samples",
                       fit.rms);
    StateSpace real = fit_realization(fit);
    check_hidden_unstable_modes(real);
    return DqTransfer(std::move(real));
}

}  // namespace gma
