#pragma once

// Shared helpers for the test suites: seeded random systems, finite-difference
// Jacobians, eigenvalue tracking, contour-integral residues and a small DFT.

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <random>
#include <vector>

#include "gma/state_space.hpp"

namespace testutil {

using gma::Complex;
using gma::ComplexMatrix;
using gma::ComplexVector;
using gma::Matrix;
using gma::Vector;

inline Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    Matrix M(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) M(i, j) = dist(rng);
    return M;
}

/// Random stable matrix with a guaranteed relative eigenvalue gap, so that
/// residue/sensitivity checks are not polluted by near-repeated modes.
inline Matrix random_stable_matrix(int n, std::mt19937_64& rng, double min_gap_rel = 1e-2) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        Matrix A = random_matrix(n, n, rng, 1.0 / std::sqrt(double(n)));
        const ComplexVector eigs = A.eigenvalues();
        double max_re = -1e300;
        for (int i = 0; i < n; ++i) max_re = std::max(max_re, eigs(i).real());
        std::uniform_real_distribution<double> shift(0.5, 1.5);
        A.diagonal().array() -= max_re + shift(rng);

        const ComplexVector e2 = A.eigenvalues();
        double min_gap = 1e300;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                min_gap = std::min(min_gap, std::abs(e2(i) - e2(j)));
        if (n == 1 || min_gap > min_gap_rel * A.norm()) return A;
    }
    throw std::runtime_error("random_stable_matrix: could not find well-separated spectrum");
}

/// Eigenvalue of A closest to the reference value.
inline Complex nearest_eigenvalue(const Matrix& A, Complex ref) {
    const ComplexVector eigs = A.eigenvalues();
    Complex best = eigs(0);
    for (int i = 1; i < eigs.size(); ++i)
        if (std::abs(eigs(i) - ref) < std::abs(best - ref)) best = eigs(i);
    return best;
}

/// Central-difference Jacobian of f: R^n -> R^m around x0.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x0,
                          double h_rel = 1e-6) {
    const Vector f0 = f(x0);
    Matrix J(f0.size(), x0.size());
    for (int j = 0; j < x0.size(); ++j) {
        const double h = h_rel * std::max(1.0, std::abs(x0(j)));
        Vector xp = x0, xm = x0;
        xp(j) += h;
        xm(j) -= h;
        J.col(j) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return J;
}

/// Residue of the resolvent (sI - A)^{-1} at an isolated eigenvalue, by
/// trapezoid quadrature of the Cauchy integral on a circle that encloses
/// only that eigenvalue.  Geometric convergence makes 64 points plenty.
inline ComplexMatrix contour_residue(const Matrix& A, Complex lambda, double radius,
                                     int points = 64) {
    const int n = static_cast<int>(A.rows());
    ComplexMatrix acc = ComplexMatrix::Zero(n, n);
    for (int k = 0; k < points; ++k) {
        const double th = 2.0 * M_PI * k / points;
        const Complex w = std::polar(radius, th);
        ComplexMatrix M = -A.cast<Complex>();
        M.diagonal().array() += lambda + w;
        acc += Eigen::PartialPivLU<ComplexMatrix>(M).inverse() * w;
    }
    return acc / double(points);
}

/// Newton iteration for a root of an analytic scalar function, derivative by
/// central differences in the complex plane.
inline Complex newton_root(const std::function<Complex(Complex)>& f, Complex s0,
                           int max_iter = 60, double tol = 1e-13) {
    Complex s = s0;
    for (int it = 0; it < max_iter; ++it) {
        const double h = 1e-7 * std::max(1.0, std::abs(s));
        const Complex df = (f(s + h) - f(s - h)) / (2.0 * h);
        const Complex step = f(s) / df;
        s -= step;
        if (std::abs(step) < tol * std::max(1.0, std::abs(s))) break;
    }
    return s;
}

/// Frequency (Hz) of the largest DFT magnitude over k = 1..T/2-1 (DC bin
/// excluded), plus the grid resolution, for peak-location assertions.
struct DftPeak {
    double freq_hz;
    double resolution_hz;
};

inline DftPeak dft_peak(const Vector& signal, double dt) {
    const int T = static_cast<int>(signal.size());
    double best_mag = -1.0;
    int best_k = 1;
    for (int k = 1; k < T / 2; ++k) {
        Complex acc(0, 0);
        for (int t = 0; t < T; ++t)
            acc += signal(t) * std::polar(1.0, -2.0 * M_PI * k * t / T);
        if (std::abs(acc) > best_mag) {
            best_mag = std::abs(acc);
            best_k = k;
        }
    }
    const double df = 1.0 / (T * dt);
    return DftPeak{best_k * df, df};
}

}  // namespace testutil
