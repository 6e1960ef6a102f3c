#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "gma/devices.hpp"
#include "gma/modal.hpp"

namespace gma {

/// Series RL path between two buses, optionally with line-charging
/// susceptance split half per end.  Bus 0 is the stiff reference (an ideal
/// source whose voltage carries no perturbation): branches to it model grid
/// equivalents.  `x` is the fundamental-frequency reactance omega_base*L.
struct Branch {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double b = 0.0;  // total shunt susceptance, half stamped at each end
};

/// Constant-impedance load: series RL to the reference.  x = 0 gives a
/// purely resistive load (static feedthrough, no state).
struct Load {
    int bus = 0;
    double r = 0.0;
    double x = 0.0;
};

using DeviceSpec = std::variant<GflParams, GfmParams, SgParams, DqTransfer>;

struct DevicePlacement {
    int bus = 0;
    DeviceSpec device;
    OperatingPoint op;
    std::string label;  // auto-derived from kind and bus when empty
};

inline std::string device_kind_name(const DeviceSpec& spec) {
    switch (spec.index()) {
        case 0: return "gfl";
        case 1: return "gfm";
        case 2: return "sg";
        default: return "data";
    }
}

/// Full study definition: topology, loads, device placements, bases.
struct NetworkCase {
    std::string name = "case";
    int buses = 0;  // numbered 1..buses; 0 is the stiff reference node
    std::vector<std::string> bus_labels;  // optional; empty means "bus1".."busN"
    PerUnitBase base;
    std::vector<Branch> branches;
    std::vector<Load> loads;
    std::vector<DevicePlacement> devices;
    double eps = 1e-6;  // placeholder source admittance at every bus

    void validate() const {
        if (buses < 1) throw ParameterError("NetworkCase: needs at least one bus");
        if (!(base.f_base_hz > 0.0))
            throw ParameterError("NetworkCase: base frequency must be positive");
        if (!(eps > 0.0)) throw ParameterError("NetworkCase: eps must be positive");
        if (!bus_labels.empty()) {
            if (static_cast<int>(bus_labels.size()) != buses)
                throw ParameterError("NetworkCase: " + std::to_string(bus_labels.size()) +
                                     " bus labels for " + std::to_string(buses) + " buses");
            std::set<std::string> seen;
            for (const std::string& l : bus_labels)
                if (l.empty() || !seen.insert(l).second)
                    throw ParameterError("NetworkCase: bus labels must be unique and non-empty");
        }
        if (branches.empty()) throw ParameterError("NetworkCase: no branches");
        for (const Branch& br : branches) {
            if (br.from < 0 || br.from > buses || br.to < 0 || br.to > buses)
                throw ParameterError("NetworkCase: branch endpoint " +
                                     std::to_string(br.from > buses || br.from < 0 ? br.from
                                                                                   : br.to) +
                                     " out of range");
            if (br.from == br.to)
                throw ParameterError("NetworkCase: branch connects bus " +
                                     std::to_string(br.from) + " to itself");
            if (!(br.x > 0.0))
                throw ParameterError(
                    "NetworkCase: series branch " + std::to_string(br.from) + "-" +
                    std::to_string(br.to) +
                    " must have positive reactance (zero-impedance ties are not modeled)");
            if (br.r < 0.0)
                throw ParameterError("NetworkCase: negative branch resistance on " +
                                     std::to_string(br.from) + "-" + std::to_string(br.to));
            if (br.b < 0.0)
                throw ParameterError("NetworkCase: negative shunt susceptance on " +
                                     std::to_string(br.from) + "-" + std::to_string(br.to));
        }
        for (const Load& ld : loads) {
            if (ld.bus < 1 || ld.bus > buses)
                throw ParameterError("NetworkCase: load bus " + std::to_string(ld.bus) +
                                     " out of range");
            if (ld.r < 0.0 || ld.x < 0.0)
                throw ParameterError("NetworkCase: negative load impedance at bus " +
                                     std::to_string(ld.bus));
            if (!(ld.r > 0.0 || ld.x > 0.0))
                throw ParameterError("NetworkCase: load at bus " + std::to_string(ld.bus) +
                                     " has zero impedance");
        }
        std::set<int> device_buses;
        std::set<std::string> labels;
        for (const DevicePlacement& dp : devices) {
            if (dp.bus < 1 || dp.bus > buses)
                throw ParameterError("NetworkCase: device bus " + std::to_string(dp.bus) +
                                     " out of range");
            if (!device_buses.insert(dp.bus).second)
                throw ParameterError("NetworkCase: two devices on bus " +
                                     std::to_string(dp.bus) +
                                     "; aggregate them into one placement first");
            if (!dp.label.empty() && !labels.insert(dp.label).second)
                throw ParameterError("NetworkCase: duplicate device label '" + dp.label + "'");
        }
        // connectivity: every bus must reach every other, counting the
        // reference node as an ordinary vertex
        std::vector<int> parent(buses + 1);
        for (int i = 0; i <= buses; ++i) parent[i] = i;
        const std::function<int(int)> find = [&](int a) {
            while (parent[a] != a) a = parent[a] = parent[parent[a]];
            return a;
        };
        for (const Branch& br : branches) parent[find(br.from)] = find(br.to);
        for (int b = 2; b <= buses; ++b)
            if (find(b) != find(1))
                throw ParameterError("NetworkCase: bus " + std::to_string(b) +
                                     " is not connected to the rest of the network");
    }

    std::string label_of(size_t device_index) const {
        const DevicePlacement& dp = devices[device_index];
        if (!dp.label.empty()) return dp.label;
        return device_kind_name(dp.device) + std::to_string(dp.bus);
    }

    std::string bus_label(int bus) const {
        if (!bus_labels.empty()) return bus_labels[static_cast<size_t>(bus - 1)];
        return "bus" + std::to_string(bus);
    }
};

namespace netdetail {

/// Series resistance inserted in front of every shunt capacitor so its
/// admittance stays proper (realizable).  Small enough to distort the
/// charging current by well under a percent across the studied band, large
/// enough to keep the parasitic pole it introduces out of the stiff range
/// that would degrade the eigensolve.
constexpr double kShuntSnubberR = 0.1;

struct Assembly {
    std::vector<Matrix> a_blocks;
    std::vector<std::string> state_names;
    Matrix B, C, D;
    int rows = 0;

    Assembly(int n_states, int n_ports)
        : B(Matrix::Zero(n_states, n_ports)), C(Matrix::Zero(n_ports, n_states)),
          D(Matrix::Zero(n_ports, n_ports)) {}

    int add_block(const Matrix& a, const std::string& tag) {
        const int at = rows;
        a_blocks.push_back(a);
        state_names.push_back(tag + "_i_d");
        state_names.push_back(tag + "_i_q");
        rows += 2;
        return at;
    }

    StateSpace finish(const std::vector<std::string>& inputs,
                      const std::vector<std::string>& outputs) const {
        Matrix a = Matrix::Zero(rows, rows);
        int at = 0;
        for (const Matrix& blk : a_blocks) {
            a.block(at, at, 2, 2) = blk;
            at += 2;
        }
        return StateSpace(a, B.topRows(rows), C.leftCols(rows), D, state_names, inputs,
                          outputs);
    }
};

inline std::vector<std::string> bus_port_names(int buses, const std::string& what) {
    std::vector<std::string> names;
    for (int b = 1; b <= buses; ++b) {
        names.push_back("bus" + std::to_string(b) + "_" + what + "_d");
        names.push_back("bus" + std::to_string(b) + "_" + what + "_q");
    }
    return names;
}

/// Parallel composition: same ports, currents add.
inline DqTransfer parallel(const DqTransfer& lhs, const DqTransfer& rhs) {
    if (lhs.ports() != rhs.ports())
        throw DimensionError("parallel: port count mismatch");
    const int n1 = lhs.n(), n2 = rhs.n(), p = lhs.ports();
    Matrix a = Matrix::Zero(n1 + n2, n1 + n2);
    a.topLeftCorner(n1, n1) = lhs.ss.A;
    a.bottomRightCorner(n2, n2) = rhs.ss.A;
    Matrix b(n1 + n2, p);
    b << lhs.ss.B, rhs.ss.B;
    Matrix c(p, n1 + n2);
    c << lhs.ss.C, rhs.ss.C;
    std::vector<std::string> states = lhs.ss.state_names;
    states.insert(states.end(), rhs.ss.state_names.begin(), rhs.ss.state_names.end());
    return DqTransfer(StateSpace(a, b, c, lhs.ss.D + rhs.ss.D, states, lhs.ss.input_names,
                                 lhs.ss.output_names));
}

/// One eigentriple (value, right vector, left vector) refined to machine
/// accuracy by two-sided inverse iteration with generalized Rayleigh
/// updates.  The assembled A mixes bus-elimination parasitics (|λ| up to
/// ~1/eps) with the physical modes, so raw QR output for the slow modes can
/// carry absolute errors on the order of machine-eps times the matrix norm;
/// shifted solves restore per-mode accuracy regardless of that stiffness.
struct RefinedMode {
    Complex lambda;
    ComplexVector right, left;  // unit norm, not biorthonormalized
};

inline RefinedMode refine_mode(const Matrix& a, Complex lambda0, int iters = 4) {
    const int n = static_cast<int>(a.rows());
    const ComplexMatrix ac = a.cast<Complex>();
    RefinedMode best;
    best.lambda = lambda0;
    best.right = ComplexVector::Ones(n) / std::sqrt(double(n));
    best.left = best.right;
    ComplexVector x = best.right, y = best.left;
    Complex lam = lambda0;
    for (int it = 0; it < iters; ++it) {
        const ComplexMatrix shifted = ac - lam * ComplexMatrix::Identity(n, n);
        const Eigen::PartialPivLU<ComplexMatrix> lu(shifted);
        x = lu.solve(x);
        if (!x.allFinite() || x.norm() == 0.0) break;
        x.normalize();
        y = lu.adjoint().solve(y);
        if (!y.allFinite() || y.norm() == 0.0) break;
        y.normalize();
        best.right = x;
        best.left = y;
        const Complex denom = y.dot(x);  // y^H x
        if (std::abs(denom) < 1e-12) break;
        const Complex next = y.dot(ac * x) / denom;
        if (!std::isfinite(next.real()) || !std::isfinite(next.imag())) break;
        // an update must stay local; a large jump means the iteration
        // latched onto a different (e.g. clustered) eigenvalue
        if (std::abs(next - lambda0) > 1e-3 * (1.0 + std::abs(lambda0))) break;
        lam = next;
        best.lambda = next;
    }
    return best;
}

inline Complex polish_eigenvalue(const Matrix& a, Complex lambda) {
    return refine_mode(a, lambda, 3).lambda;
}

inline ComplexVector sorted_eigenvalues(const Matrix& a) {
    const ComplexVector raw = a.eigenvalues();
    std::vector<Complex> v;
    for (int i = 0; i < raw.size(); ++i) {
        const Complex lam = raw(i);
        if (lam.imag() < 0.0) continue;  // regenerate conjugates after polishing
        Complex p = polish_eigenvalue(a, lam);
        if (lam.imag() == 0.0) {
            v.push_back(Complex(p.real(), 0.0));
        } else {
            if (p.imag() < 0.0) p = std::conj(p);
            v.push_back(p);
            v.push_back(std::conj(p));
        }
    }
    std::stable_sort(v.begin(), v.end(), [](Complex l, Complex r) {
        if (l.real() != r.real()) return l.real() > r.real();
        return l.imag() > r.imag();
    });
    ComplexVector out(raw.size());
    for (size_t i = 0; i < v.size(); ++i) out(static_cast<int>(i)) = v[i];
    return out;
}

}  // namespace netdetail

/// Dynamic node admittance of the passive network: maps the vector of bus
/// voltage perturbations to the currents drawn into branches, shunts and
/// loads.  Every series RL branch contributes
///     Y_br(s) = [[R + sL, -omega_base*L], [omega_base*L, R + sL]]^-1
/// stamped into its self/mutual blocks; reference-node ends are grounded.
inline DqTransfer build_node_admittance(const NetworkCase& def) {
    def.validate();
    const double w = def.base.omega_base();
    int n_states = 0;
    for (const Branch& br : def.branches) {
        n_states += 2;
        if (br.b > 0.0) n_states += (br.from != 0 ? 2 : 0) + (br.to != 0 ? 2 : 0);
    }
    for (const Load& ld : def.loads)
        if (ld.x > 0.0) n_states += 2;

    netdetail::Assembly asmb(n_states, 2 * def.buses);
    const Matrix eye = Matrix::Identity(2, 2);
    const Matrix jm = quadrature2();
    const auto port = [](int bus) { return 2 * (bus - 1); };

    for (size_t k = 0; k < def.branches.size(); ++k) {
        const Branch& br = def.branches[k];
        const double inv_t = w / br.x;
        const int at = asmb.add_block(-inv_t * (br.r * eye + br.x * jm),
                                      "br" + std::to_string(k));
        if (br.from != 0) {
            asmb.B.block(at, port(br.from), 2, 2) = inv_t * eye;
            asmb.C.block(port(br.from), at, 2, 2) = eye;  // current leaves the from-bus
        }
        if (br.to != 0) {
            asmb.B.block(at, port(br.to), 2, 2) = -inv_t * eye;
            asmb.C.block(port(br.to), at, 2, 2) = -eye;  // and enters the to-bus
        }
        if (br.b > 0.0) {
            const double c_half = br.b / (2.0 * w);
            const double inv_rc = 1.0 / (netdetail::kShuntSnubberR * c_half);
            for (int end : {br.from, br.to}) {
                if (end == 0) continue;
                const int sh = asmb.add_block(-inv_rc * eye - w * jm,
                                              "sh" + std::to_string(k) + "b" +
                                                  std::to_string(end));
                asmb.B.block(sh, port(end), 2, 2) = inv_rc * eye;
                asmb.C.block(port(end), sh, 2, 2) = -(1.0 / netdetail::kShuntSnubberR) * eye;
                asmb.D.block(port(end), port(end), 2, 2) +=
                    (1.0 / netdetail::kShuntSnubberR) * eye;
            }
        }
    }
    for (size_t k = 0; k < def.loads.size(); ++k) {
        const Load& ld = def.loads[k];
        if (ld.x > 0.0) {
            const double inv_t = w / ld.x;
            const int at = asmb.add_block(-inv_t * (ld.r * eye + ld.x * jm),
                                          "ld" + std::to_string(k));
            asmb.B.block(at, port(ld.bus), 2, 2) = inv_t * eye;
            asmb.C.block(port(ld.bus), at, 2, 2) = eye;
        } else {
            asmb.D.block(port(ld.bus), port(ld.bus), 2, 2) += (1.0 / ld.r) * eye;
        }
    }
    return DqTransfer(asmb.finish(netdetail::bus_port_names(def.buses, "v"),
                                  netdetail::bus_port_names(def.buses, "i")));
}

/// Block-diagonal admittance of all sources.  Every bus carries the small
/// placeholder diag(eps, eps) — alone on source-free buses, in parallel with
/// the device elsewhere — so the bus-voltage elimination always has a
/// feedthrough path.
inline DqTransfer assemble_source_admittance(const NetworkCase& def) {
    def.validate();
    const double w = def.base.omega_base();
    std::vector<StateSpace> blocks;
    for (size_t k = 0; k < def.devices.size(); ++k) {
        const DevicePlacement& dp = def.devices[k];
        const DqTransfer tf = std::visit(
            [&](const auto& spec) -> DqTransfer {
                using T = std::decay_t<decltype(spec)>;
                if constexpr (std::is_same_v<T, GflParams>)
                    return GflDevice(spec, dp.op, w).admittance();
                else if constexpr (std::is_same_v<T, GfmParams>)
                    return GfmDevice(spec, dp.op, w).admittance();
                else if constexpr (std::is_same_v<T, SgParams>)
                    return SgDevice(spec, dp.op, w).admittance();
                else {
                    if (spec.ports() != 2)
                        throw DimensionError(
                            "assemble_source_admittance: fitted device must be 2x2");
                    return spec;
                }
            },
            dp.device);
        blocks.push_back(tf.ss);
    }

    int n_states = 0;
    for (const StateSpace& b : blocks) n_states += b.n();
    Matrix a = Matrix::Zero(n_states, n_states);
    Matrix bmat = Matrix::Zero(n_states, 2 * def.buses);
    Matrix cmat = Matrix::Zero(2 * def.buses, n_states);
    Matrix dmat = def.eps * Matrix::Identity(2 * def.buses, 2 * def.buses);
    std::vector<std::string> states;
    int at = 0;
    for (size_t k = 0; k < def.devices.size(); ++k) {
        const StateSpace& blk = blocks[k];
        const int p = 2 * (def.devices[k].bus - 1);
        a.block(at, at, blk.n(), blk.n()) = blk.A;
        bmat.block(at, p, blk.n(), 2) = blk.B;
        cmat.block(p, at, 2, blk.n()) = blk.C;
        dmat.block(p, p, 2, 2) += blk.D;
        for (const std::string& s : blk.state_names)
            states.push_back(def.label_of(k) + "_" + s);
        at += blk.n();
    }
    return DqTransfer(StateSpace(a, bmat, cmat, dmat, states,
                                 netdetail::bus_port_names(def.buses, "v"),
                                 netdetail::bus_port_names(def.buses, "i")));
}

/// One system mode with its damping/frequency annotations.
struct ModeInfo {
    Complex lambda;
    double sigma = 0.0;    // 1/s
    double omega = 0.0;    // rad/s (signed)
    double freq_hz = 0.0;  // |omega| / 2pi
    double zeta = 0.0;     // -sigma / |lambda|
};

/// Assembled whole-system model: the source and network admittances, the
/// impedance realization Z = (Y_G + Y_N)^-1 (input: injected bus currents,
/// output: bus voltages), and its eigenvalues.
struct SystemModel {
    NetworkCase def;
    DqTransfer y_g;    // includes the eps placeholder on every bus
    DqTransfer y_n;
    DqTransfer whole;  // impedance realization
    ComplexVector eigenvalues;  // canonical order: Re desc, then Im desc

    SystemModel(NetworkCase d, DqTransfer g, DqTransfer n, DqTransfer z,
                ComplexVector eigs)
        : def(std::move(d)), y_g(std::move(g)), y_n(std::move(n)), whole(std::move(z)),
          eigenvalues(std::move(eigs)) {}

    int buses() const { return def.buses; }

    /// Index into def.devices of the source at `bus`, or -1.
    int source_at(int bus) const {
        for (size_t k = 0; k < def.devices.size(); ++k)
            if (def.devices[k].bus == bus) return static_cast<int>(k);
        return -1;
    }

    ComplexMatrix eval_y(Complex s) const { return y_g.eval(s) + y_n.eval(s); }
    ComplexMatrix eval_z(Complex s) const { return whole.eval(s); }

    /// 2x2 block (i, j) of a bus-indexed matrix (1-based buses).
    static ComplexMatrix block(const ComplexMatrix& m, int i, int j) {
        return m.block(2 * (i - 1), 2 * (j - 1), 2, 2);
    }

    /// Full eigensystem of the impedance realization, built on first use:
    /// residue/sensitivity work needs it, plain mode listings do not.
    const EigenSystem& modal() const {
        if (!es_) es_ = eigendecompose(whole.ss.A);
        return *es_;
    }

    /// Index of the eigenvalue in modal() nearest to lambda; refuses
    /// ambiguous matches (nearer to a different mode than to the target).
    int modal_index(Complex lambda) const {
        const EigenSystem& es = modal();
        int best = 0;
        for (int i = 1; i < es.size(); ++i)
            if (std::abs(es.eigenvalues(i) - lambda) <
                std::abs(es.eigenvalues(best) - lambda))
                best = i;
        const double dist = std::abs(es.eigenvalues(best) - lambda);
        if (dist > 1e-6 * std::max(1.0, std::abs(lambda)))
            throw ModeNotFoundError("SystemModel: no eigenvalue within tolerance of " +
                                    std::to_string(lambda.real()) + " + " +
                                    std::to_string(lambda.imag()) + "j");
        return best;
    }

private:
    mutable std::optional<EigenSystem> es_;
};

/// How singular the whole-system admittance is at s, as the ratio of its
/// smallest to largest singular value.  At a true system mode this vanishes;
/// the raw determinant would over/underflow long before the matrix is large.
inline double admittance_defect(const SystemModel& model, Complex s) {
    const Eigen::JacobiSVD<ComplexMatrix> svd(model.eval_y(s));
    return svd.singularValues()(svd.singularValues().size() - 1) /
           svd.singularValues()(0);
}

/// Assembles the whole system and its impedance realization.
inline SystemModel build_system(const NetworkCase& def) {
    def.validate();
    DqTransfer y_n = build_node_admittance(def);
    DqTransfer y_g = assemble_source_admittance(def);
    DqTransfer sum = netdetail::parallel(y_g, y_n);
    std::optional<DqTransfer> whole;
    try {
        whole = sum.inverse();
    } catch (const AlgebraicLoopError&) {
        throw AlgebraicLoopError(
            "build_system: the direct-feedthrough sum of Y_G and Y_N is singular, so the "
            "bus voltages cannot be eliminated into a state-space realization");
    }
    const ComplexVector eigs = netdetail::sorted_eigenvalues(whole->ss.A);
    return SystemModel(def, std::move(y_g), std::move(y_n), std::move(*whole), eigs);
}

/// All system modes (optionally restricted to a frequency band in Hz),
/// annotated with damping and frequency.  The ten least-damped reported
/// modes are verified to actually null the whole-system admittance.
inline std::vector<ModeInfo> system_modes(
    const SystemModel& model,
    std::optional<std::pair<double, double>> band_hz = std::nullopt) {
    std::vector<ModeInfo> out;
    for (int i = 0; i < model.eigenvalues.size(); ++i) {
        const Complex lam = model.eigenvalues(i);
        ModeInfo m;
        m.lambda = lam;
        m.sigma = lam.real();
        m.omega = lam.imag();
        m.freq_hz = std::abs(lam.imag()) / (2.0 * M_PI);
        m.zeta = std::abs(lam) > 0.0 ? -lam.real() / std::abs(lam) : 0.0;
        if (band_hz && (m.freq_hz < band_hz->first || m.freq_hz > band_hz->second)) continue;
        out.push_back(m);
    }
    // canonical order already groups least-damped first
    const size_t n_check = std::min<size_t>(out.size(), 10);
    for (size_t i = 0; i < n_check; ++i) {
        const double defect = admittance_defect(model, out[i].lambda);
        if (!(defect < 1e-6))
            throw Error("system_modes: eigenvalue " + std::to_string(out[i].sigma) + " + " +
                        std::to_string(out[i].omega) +
                        "j does not null the whole-system admittance (defect " +
                        std::to_string(defect) + "); realization and modes disagree");
    }
    return out;
}

/// Impedance frequency response of one 2x2 block: Z_{observe, inject}.
struct ScanPoint {
    double f_hz = 0.0;
    ComplexMatrix z;  // 2x2
};

inline std::vector<ScanPoint> impedance_scan(const SystemModel& model, int observe_bus,
                                             int inject_bus,
                                             const std::vector<double>& f_grid_hz) {
    if (observe_bus < 1 || observe_bus > model.buses() || inject_bus < 1 ||
        inject_bus > model.buses())
        throw ParameterError("impedance_scan: bus index out of range");
    std::vector<ScanPoint> out;
    for (double f : f_grid_hz) {
        if (!(f > 0.0)) throw ParameterError("impedance_scan: frequencies must be positive");
        const ComplexMatrix z = model.eval_z(Complex(0.0, 2.0 * M_PI * f));
        out.push_back({f, SystemModel::block(z, observe_bus, inject_bus)});
    }
    return out;
}

/// Transfer from a node-j voltage perturbation to the internal voltage of
/// the source at bus i: block (i, j) of Y_G^-1(s) Y(s).  Y_G is block
/// diagonal, so only the source's own block needs inverting.
inline ComplexMatrix source_voltage_transfer(const SystemModel& model, int source_bus,
                                             int node_bus, Complex s) {
    if (source_bus < 1 || source_bus > model.buses() || node_bus < 1 ||
        node_bus > model.buses())
        throw ParameterError("source_voltage_transfer: bus index out of range");
    const ComplexMatrix y_gi = SystemModel::block(model.y_g.eval(s), source_bus, source_bus);
    Eigen::FullPivLU<ComplexMatrix> lu(y_gi);
    if (!lu.isInvertible())
        throw PoleEvaluationError("source_voltage_transfer: source admittance block at bus " +
                                  std::to_string(source_bus) + " is singular at s");
    return lu.inverse() * SystemModel::block(model.eval_y(s), source_bus, node_bus);
}

}  // namespace gma
