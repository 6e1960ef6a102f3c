#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>
#include <vector>

#include "gma/state_space.hpp"

namespace gma {

/// Trajectories on the uniform grid t_k = k * dt (columns are time points).
struct SimulationResult {
    Vector times;
    Matrix states;   // n x T
    Matrix outputs;  // m x T
};

/// Piecewise-constant input: value[k] holds from times[k] (ascending) until
/// the next switch; zero before the first switch time.
struct PiecewiseConstant {
    std::vector<double> times;
    std::vector<Vector> values;

    Vector operator()(double t) const {
        if (times.size() != values.size())
            throw DimensionError("PiecewiseConstant: times/values size mismatch");
        Vector out;
        bool set = false;
        for (size_t k = 0; k < times.size(); ++k) {
            if (t >= times[k] - 1e-12) {
                out = values[k];
                set = true;
            }
        }
        if (!set && !values.empty()) out = Vector::Zero(values.front().size());
        return out;
    }
};

/// Exact zero-order-hold discretization over one step dt:
///     x_{k+1} = Ad x_k + Bd u_k,
/// with [Ad Bd; 0 I] = expm([A B; 0 0] * dt).  Exact for piecewise-constant
/// inputs regardless of stiffness, so no step-size stability limit applies.
struct Discretized {
    Matrix Ad, Bd;
};

inline Discretized discretize_exact(const Matrix& A, const Matrix& B, double dt) {
    if (dt <= 0.0) throw DimensionError("discretize_exact: dt must be positive");
    const Eigen::Index n = A.rows(), r = B.cols();
    Matrix M = Matrix::Zero(n + r, n + r);
    M.topLeftCorner(n, n) = A * dt;
    M.topRightCorner(n, r) = B * dt;
    const Matrix E = M.exp();
    return Discretized{E.topLeftCorner(n, n), E.topRightCorner(n, r)};
}

/// Propagate dx/dt = A x + B u(t), y = C x + D u from x(0) = x0 to t_end.
/// The input is sampled at the start of each step and held (zero-order hold);
/// per-step propagation uses the exact matrix exponential above.
inline SimulationResult simulate(const StateSpace& ss, const Vector& x0,
                                 const std::function<Vector(double)>& input,
                                 double t_end, double dt) {
    if (dt <= 0.0) throw DimensionError("simulate: dt must be positive");
    if (t_end < 0.0) throw DimensionError("simulate: t_end must be non-negative");
    if (x0.size() != ss.n()) throw DimensionError("simulate: x0 does not match state count");
    if (!x0.allFinite()) throw DimensionError("simulate: x0 must be finite");

    const int T = static_cast<int>(std::floor(t_end / dt + 1e-9)) + 1;
    const Discretized d = discretize_exact(ss.A, ss.B, dt);

    SimulationResult out;
    out.times = Vector::LinSpaced(T, 0.0, dt * (T - 1));
    out.states = Matrix::Zero(ss.n(), T);
    out.outputs = Matrix::Zero(ss.m(), T);

    Vector x = x0;
    for (int k = 0; k < T; ++k) {
        Vector u = input ? input(out.times(k)) : Vector::Zero(ss.r());
        if (u.size() != ss.r()) throw DimensionError("simulate: input sample has wrong size");
        if (!u.allFinite()) throw DimensionError("simulate: input sample must be finite");
        out.states.col(k) = x;
        out.outputs.col(k) = ss.C * x + ss.D * u;
        x = d.Ad * x + d.Bd * u;
    }
    return out;
}

inline SimulationResult simulate(const StateSpace& ss, const Vector& x0, double t_end, double dt) {
    return simulate(ss, x0, nullptr, t_end, dt);
}

}  // namespace gma
