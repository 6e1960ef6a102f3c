#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gma/state_space.hpp"

namespace gma {

/// Right/left eigenvector pair of a real state matrix A:
///     A Phi = Phi diag(eigenvalues),   Psi = Phi^{-1},
/// so Psi A Phi is diagonal and Phi Psi = I (biorthonormal scaling).
///
/// Ordering is canonical: descending real part, then descending imaginary
/// part, which keeps conjugate pairs adjacent with the +omega member first
/// and makes mode indices reproducible across runs.  Each right eigenvector
/// has unit 2-norm and its largest-magnitude entry is rotated to the positive
/// real axis; the conjugate partner column is the exact conjugate.
struct EigenSystem {
    ComplexVector eigenvalues;
    ComplexMatrix Phi;  // right eigenvectors, one per column
    ComplexMatrix Psi;  // left eigenvectors, one per row
    double a_norm = 0.0;  // Frobenius norm of the decomposed matrix

    int size() const { return static_cast<int>(eigenvalues.size()); }

    /// Distance from eigenvalue i to the nearest other eigenvalue.
    double gap(int i) const {
        double g = std::numeric_limits<double>::infinity();
        for (int j = 0; j < size(); ++j)
            if (j != i) g = std::min(g, std::abs(eigenvalues(i) - eigenvalues(j)));
        return g;
    }

    /// True when eigenvalue i is simple within the repeated-mode tolerance
    /// (1e-7 * ||A||_F); residues and sensitivities require this.
    bool is_simple(int i, double tol_scale = 1e-7) const {
        return gap(i) > tol_scale * a_norm;
    }
};

namespace detail {

inline void sort_eigensystem(ComplexVector& lambda, ComplexMatrix& Phi) {
    const int n = static_cast<int>(lambda.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (lambda(a).real() != lambda(b).real()) return lambda(a).real() > lambda(b).real();
        return lambda(a).imag() > lambda(b).imag();
    });
    ComplexVector l2(n);
    ComplexMatrix P2(Phi.rows(), n);
    for (int k = 0; k < n; ++k) {
        l2(k) = lambda(order[k]);
        P2.col(k) = Phi.col(order[k]);
    }
    lambda.swap(l2);
    Phi.swap(P2);
}

/// Scale each column to unit norm with its largest entry real-positive; force
/// conjugate columns to be exact conjugates so conjugate-mode results stay
/// elementwise conjugate downstream.
inline void normalize_phases(ComplexVector& lambda, ComplexMatrix& Phi) {
    const int n = static_cast<int>(lambda.size());
    for (int i = 0; i < n; ++i) {
        Phi.col(i).normalize();
        Eigen::Index k = 0;
        Phi.col(i).cwiseAbs().maxCoeff(&k);
        const Complex piv = Phi(k, i);
        if (std::abs(piv) > 0.0) Phi.col(i) *= std::abs(piv) / piv;

        const bool pair_head = lambda(i).imag() > 0.0 && i + 1 < n &&
                               std::abs(lambda(i + 1) - std::conj(lambda(i))) <=
                                   1e-12 * (1.0 + std::abs(lambda(i)));
        if (pair_head) {
            lambda(i + 1) = std::conj(lambda(i));
            Phi.col(i + 1) = Phi.col(i).conjugate();
            ++i;
        }
    }
}

}  // namespace detail

/// Diagonalize a real state matrix.  Throws NonDiagonalizableError when the
/// eigenvector matrix is numerically singular (defective/repeated modes) or
/// when the biorthonormality residual ||Phi Psi - I||_F exceeds 1e-9 * n.
inline EigenSystem eigendecompose(const Matrix& A) {
    if (A.rows() != A.cols() || A.rows() == 0)
        throw DimensionError("eigendecompose: A must be square and non-empty");
    if (!A.allFinite())
        throw DimensionError("eigendecompose: A must be finite");

    Eigen::EigenSolver<Matrix> solver(A, /*computeEigenvectors=*/true);
    if (solver.info() != Eigen::Success)
        throw NonDiagonalizableError("eigendecompose: eigensolver failed to converge");

    EigenSystem es;
    es.a_norm = A.norm();
    es.eigenvalues = solver.eigenvalues();
    es.Phi = solver.eigenvectors();
    detail::sort_eigensystem(es.eigenvalues, es.Phi);
    detail::normalize_phases(es.eigenvalues, es.Phi);

    Eigen::FullPivLU<ComplexMatrix> lu(es.Phi);
    if (lu.rcond() < 1e-13)
        throw NonDiagonalizableError(
            "eigendecompose: eigenvector matrix is numerically singular; "
            "matrix appears non-diagonalizable within tolerance");

    const int n = es.size();
    const ComplexMatrix I = ComplexMatrix::Identity(n, n);
    es.Psi = lu.solve(I);
    // one Newton refinement pass keeps ||Phi Psi - I|| near machine level
    es.Psi += es.Psi * (I - es.Phi * es.Psi);

    const double resid = (es.Phi * es.Psi - I).norm();
    if (resid > 1e-9 * n)
        throw NonDiagonalizableError(
            "eigendecompose: biorthonormality residual " + std::to_string(resid) +
            " exceeds tolerance; matrix appears non-diagonalizable within tolerance");
    return es;
}

inline EigenSystem eigendecompose(const StateSpace& ss) { return eigendecompose(ss.A); }

/// Participation matrix P(k,i) = Phi(k,i) * Psi(i,k): the share of state k in
/// mode i.  Invariant to eigenvector scaling; every column sums to 1.
inline ComplexMatrix participation_matrix(const EigenSystem& es) {
    return es.Phi.cwiseProduct(es.Psi.transpose());
}

/// Sensitivity of eigenvalue i to every entry of A at once:
///     d lambda_i / d A = (phi_i psi_i)^T,
/// i.e. entry (k,j) is the first-order movement of lambda_i per unit change
/// of A(k,j).  Plain transpose, not conjugate.
inline ComplexMatrix eigen_sensitivity_to_A(const EigenSystem& es, int i) {
    if (i < 0 || i >= es.size())
        throw DimensionError("eigen_sensitivity_to_A: mode index out of range");
    return (es.Phi.col(i) * es.Psi.row(i)).transpose();
}

}  // namespace gma
