#pragma once

#include <Eigen/Dense>

#include <complex>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gma/errors.hpp"

namespace gma {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

namespace detail {

inline void check_unique(const std::vector<std::string>& names, const char* what) {
    std::unordered_set<std::string> seen;
    for (const auto& n : names) {
        if (!seen.insert(n).second)
            throw DimensionError(std::string("StateSpace: duplicate ") + what + " label '" + n + "'");
    }
}

inline std::vector<std::string> default_names(const char prefix, Eigen::Index count) {
    std::vector<std::string> out;
    out.reserve(static_cast<size_t>(count));
    for (Eigen::Index k = 0; k < count; ++k)
        out.push_back(std::string(1, prefix) + std::to_string(k));
    return out;
}

}  // namespace detail

/// Continuous-time LTI model
///     dx/dt = A x + B u,   y = C x + D u
/// with name labels on states, inputs and outputs so that downstream tables
/// (participation, port selections, reports) stay readable.
class StateSpace {
  public:
    Matrix A, B, C, D;
    std::vector<std::string> state_names, input_names, output_names;

    StateSpace() = default;

    StateSpace(Matrix A_, Matrix B_, Matrix C_, Matrix D_,
               std::vector<std::string> states = {},
               std::vector<std::string> inputs = {},
               std::vector<std::string> outputs = {})
        : A(std::move(A_)), B(std::move(B_)), C(std::move(C_)), D(std::move(D_)),
          state_names(std::move(states)), input_names(std::move(inputs)),
          output_names(std::move(outputs)) {
        if (A.rows() != A.cols())
            throw DimensionError("StateSpace: A must be square");
        if (B.rows() != A.rows())
            throw DimensionError("StateSpace: B must have as many rows as A");
        if (C.cols() != A.cols())
            throw DimensionError("StateSpace: C must have as many columns as A");
        if (D.rows() != C.rows() || D.cols() != B.cols())
            throw DimensionError("StateSpace: D must be (outputs x inputs)");
        if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !D.allFinite())
            throw DimensionError("StateSpace: matrices must be finite");

        if (state_names.empty()) state_names = detail::default_names('x', A.rows());
        if (input_names.empty()) input_names = detail::default_names('u', B.cols());
        if (output_names.empty()) output_names = detail::default_names('y', C.rows());
        if (static_cast<Eigen::Index>(state_names.size()) != A.rows())
            throw DimensionError("StateSpace: state label count does not match A");
        if (static_cast<Eigen::Index>(input_names.size()) != B.cols())
            throw DimensionError("StateSpace: input label count does not match B");
        if (static_cast<Eigen::Index>(output_names.size()) != C.rows())
            throw DimensionError("StateSpace: output label count does not match C");
        detail::check_unique(state_names, "state");
        detail::check_unique(input_names, "input");
        detail::check_unique(output_names, "output");
    }

    int n() const { return static_cast<int>(A.rows()); }   // states
    int r() const { return static_cast<int>(B.cols()); }   // inputs
    int m() const { return static_cast<int>(C.rows()); }   // outputs

    int state_index(const std::string& name) const {
        for (size_t k = 0; k < state_names.size(); ++k)
            if (state_names[k] == name) return static_cast<int>(k);
        throw DimensionError("StateSpace: unknown state '" + name + "'");
    }
};

/// A square m'-port view into a system: effective input map B1 (n x m'),
/// output map C1 (m' x n) and feedthrough D1 (m' x m').  Ports may be plain
/// index selections or arbitrary real linear combinations of the system's
/// inputs/outputs or of the states themselves.
class PortSelection {
  public:
    Matrix B1;  // n x m'
    Matrix C1;  // m' x n
    Matrix D1;  // m' x m'

    /// Every state is both a port input and a port output (B1 = C1 = I).
    static PortSelection full_state(int n) {
        PortSelection s;
        s.B1 = Matrix::Identity(n, n);
        s.C1 = Matrix::Identity(n, n);
        s.D1 = Matrix::Zero(n, n);
        return s;
    }

    /// Ports over a subset of states: unit columns/rows of the identity.
    static PortSelection state_ports(int n, const std::vector<int>& idx) {
        if (idx.empty()) throw DimensionError("PortSelection: empty state index list");
        PortSelection s;
        const int m = static_cast<int>(idx.size());
        s.B1 = Matrix::Zero(n, m);
        s.C1 = Matrix::Zero(m, n);
        s.D1 = Matrix::Zero(m, m);
        for (int k = 0; k < m; ++k) {
            if (idx[k] < 0 || idx[k] >= n)
                throw DimensionError("PortSelection: state index out of range");
            s.B1(idx[k], k) = 1.0;
            s.C1(k, idx[k]) = 1.0;
        }
        return s;
    }

    /// Ports over a subset of the system's physical inputs/outputs; the two
    /// lists must be equally long so the port transfer is square.
    static PortSelection io_ports(const StateSpace& ss,
                                  const std::vector<int>& in_idx,
                                  const std::vector<int>& out_idx) {
        if (in_idx.size() != out_idx.size() || in_idx.empty())
            throw DimensionError("PortSelection: need equally many (and >0) inputs and outputs");
        const int m = static_cast<int>(in_idx.size());
        PortSelection s;
        s.B1 = Matrix::Zero(ss.n(), m);
        s.C1 = Matrix::Zero(m, ss.n());
        s.D1 = Matrix::Zero(m, m);
        for (int k = 0; k < m; ++k) {
            if (in_idx[k] < 0 || in_idx[k] >= ss.r())
                throw DimensionError("PortSelection: input index out of range");
            if (out_idx[k] < 0 || out_idx[k] >= ss.m())
                throw DimensionError("PortSelection: output index out of range");
            s.B1.col(k) = ss.B.col(in_idx[k]);
            s.C1.row(k) = ss.C.row(out_idx[k]);
        }
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) s.D1(a, b) = ss.D(out_idx[a], in_idx[b]);
        return s;
    }

    /// Arbitrary real linear-combination ports.
    static PortSelection from_weights(Matrix B1, Matrix C1, Matrix D1) {
        PortSelection s;
        s.B1 = std::move(B1);
        s.C1 = std::move(C1);
        s.D1 = std::move(D1);
        if (s.B1.cols() != s.C1.rows())
            throw DimensionError("PortSelection: input and output port counts differ");
        if (s.D1.rows() != s.C1.rows() || s.D1.cols() != s.B1.cols())
            throw DimensionError("PortSelection: D1 must be (ports x ports)");
        if (s.B1.cols() == 0)
            throw DimensionError("PortSelection: at least one port required");
        if (!s.B1.allFinite() || !s.C1.allFinite() || !s.D1.allFinite())
            throw DimensionError("PortSelection: weights must be finite");
        return s;
    }

    int ports() const { return static_cast<int>(B1.cols()); }

    void check_against(const Matrix& A) const {
        if (B1.rows() != A.rows() || C1.cols() != A.cols())
            throw DimensionError("PortSelection: selection does not match system dimension");
    }
};

}  // namespace gma
