#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include "gma/state_space.hpp"

namespace gma {

/// One frequency-response sample: value = F(j*omega), omega in rad/s.
struct FrequencySample {
    double omega = 0.0;
    ComplexMatrix value;
};

struct FitOptions {
    int max_iterations = 10;
    double pole_movement_tol = 1e-8;  // relative, convergence criterion
    bool enforce_stable = true;       // reflect right-half-plane poles
    bool with_linear_term = false;    // include s*E (improper) term
    std::vector<double> weights;      // optional per-sample weights (uniform if empty)
    // Refuse least-squares passes whose condition estimate exceeds this.
    // Benign over-fitting (order above the true pole count) is routinely
    // rank-deficient around 1e15 yet still converges, so the default only
    // screens out numerically hopeless problems.
    double condition_limit = 1e16;
};

/// Shared-pole rational matrix
///     F(s) = sum_m R_m / (s - a_m) + D (+ s*E)
/// with complex-conjugate pole/residue closure, so F(conj s) = conj F(s).
/// Poles are ordered deterministically: complex pairs by ascending frequency
/// with the +omega member first, then real poles by descending value.
struct RationalFit {
    ComplexVector poles;
    std::vector<ComplexMatrix> residues;  // one (rows x cols) matrix per pole
    Matrix d;
    Matrix e;  // only meaningful when has_linear
    bool has_linear = false;
    double rms = 0.0;
    bool converged = false;
    int iterations = 0;

    int order() const { return static_cast<int>(poles.size()); }
    int rows() const { return static_cast<int>(d.rows()); }
    int cols() const { return static_cast<int>(d.cols()); }

    ComplexMatrix eval(Complex s) const {
        ComplexMatrix out = d.cast<Complex>();
        if (has_linear) out += s * e.cast<Complex>();
        for (int m = 0; m < order(); ++m) out += residues[m] / (s - poles(m));
        return out;
    }
};

/// Mode information pulled out of a rational fit near a target frequency.
struct ModeData {
    Complex lambda;
    double sigma = 0.0;
    double freq_hz = 0.0;
    ComplexMatrix residue;
};

namespace vfdetail {

// basis bookkeeping: real poles contribute one real coefficient, conjugate
// pairs two (Re and Im of the residue at the +omega member)
struct PoleBasis {
    std::vector<Complex> heads;     // Im > 0 pair heads and real poles
    std::vector<bool> is_pair;

    explicit PoleBasis(const std::vector<Complex>& poles) {
        for (const Complex& a : poles) {
            if (a.imag() > 0.0) {
                heads.push_back(a);
                is_pair.push_back(true);
            } else if (a.imag() == 0.0) {
                heads.push_back(a);
                is_pair.push_back(false);
            }
            // Im < 0 members are implied by their heads
        }
    }

    int coeff_count() const {
        int n = 0;
        for (bool p : is_pair) n += p ? 2 : 1;
        return n;
    }

    /// Complex values of the real-coefficient basis functions at s.
    std::vector<Complex> eval(Complex s) const {
        std::vector<Complex> out;
        out.reserve(coeff_count());
        for (size_t h = 0; h < heads.size(); ++h) {
            const Complex a = heads[h];
            if (is_pair[h]) {
                const Complex pa = 1.0 / (s - a);
                const Complex pb = 1.0 / (s - std::conj(a));
                out.push_back(pa + pb);
                out.push_back(Complex(0, 1) * (pa - pb));
            } else {
                out.push_back(1.0 / (s - a));
            }
        }
        return out;
    }

    /// Turn real basis coefficients back into pole/residue pairs.
    void unpack(const Eigen::Ref<const Vector>& coeffs, int offset,
                std::vector<Complex>& poles_out, std::vector<Complex>& res_out) const {
        int c = offset;
        for (size_t h = 0; h < heads.size(); ++h) {
            if (is_pair[h]) {
                const Complex r(coeffs(c), coeffs(c + 1));
                poles_out.push_back(heads[h]);
                res_out.push_back(r);
                poles_out.push_back(std::conj(heads[h]));
                res_out.push_back(std::conj(r));
                c += 2;
            } else {
                poles_out.push_back(heads[h]);
                res_out.push_back(Complex(coeffs(c), 0.0));
                c += 1;
            }
        }
    }
};

/// Zeros of sigma(s) = 1 + sum c~_m phi_m(s): eigenvalues of the real matrix
/// A - b c~^T built blockwise from the current poles.
inline std::vector<Complex> relocate_poles(const PoleBasis& basis,
                                           const Eigen::Ref<const Vector>& ctilde) {
    int dim = 0;
    for (bool p : basis.is_pair) dim += p ? 2 : 1;
    Matrix A = Matrix::Zero(dim, dim);
    Vector b = Vector::Zero(dim);
    Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(dim);
    int at = 0, coeff = 0;
    for (size_t h = 0; h < basis.heads.size(); ++h) {
        if (basis.is_pair[h]) {
            const double sr = basis.heads[h].real(), si = basis.heads[h].imag();
            A.block(at, at, 2, 2) << sr, si, -si, sr;
            b(at) = 2.0;
            c(at) = ctilde(coeff);
            c(at + 1) = ctilde(coeff + 1);
            at += 2;
            coeff += 2;
        } else {
            A(at, at) = basis.heads[h].real();
            b(at) = 1.0;
            c(at) = ctilde(coeff);
            at += 1;
            coeff += 1;
        }
    }
    const Matrix H = A - b * c;
    const ComplexVector eigs = H.eigenvalues();
    std::vector<Complex> out(eigs.data(), eigs.data() + eigs.size());
    return out;
}

/// Canonicalize a pole set: exact conjugate closure, optional stability
/// reflection, deterministic ordering (pairs by ascending frequency, +omega
/// first; real poles afterwards by descending value).
inline std::vector<Complex> canonicalize(std::vector<Complex> poles, bool enforce_stable) {
    for (Complex& a : poles) {
        if (enforce_stable && a.real() > 0.0) a = Complex(-a.real(), a.imag());
        if (std::abs(a.imag()) < 1e-12 * std::max(1.0, std::abs(a.real())))
            a = Complex(a.real(), 0.0);
    }
    std::vector<Complex> heads, reals;
    std::vector<Complex> pool = poles;
    // greedy conjugate pairing: match each +Im pole with its nearest -Im pole
    std::vector<bool> used(pool.size(), false);
    for (size_t i = 0; i < pool.size(); ++i) {
        if (used[i] || pool[i].imag() <= 0.0) continue;
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < pool.size(); ++j) {
            if (used[j] || j == i || pool[j].imag() >= 0.0) continue;
            const double dist = std::abs(pool[j] - std::conj(pool[i]));
            if (dist < best_d) {
                best_d = dist;
                best = static_cast<int>(j);
            }
        }
        if (best >= 0) {
            used[i] = used[best] = true;
            // average the pair to restore exact conjugacy
            const Complex head = 0.5 * (pool[i] + std::conj(pool[best]));
            heads.push_back(head);
        } else {
            used[i] = true;  // unmatched: demote to a real pole
            reals.push_back(Complex(pool[i].real(), 0.0));
        }
    }
    for (size_t i = 0; i < pool.size(); ++i)
        if (!used[i] && pool[i].imag() <= 0.0) {
            if (pool[i].imag() < 0.0) continue;  // matched implicitly above
            reals.push_back(pool[i]);
        }
    // leftover unmatched -Im poles (pathological): demote to real
    if (2 * heads.size() + reals.size() < poles.size()) {
        for (size_t i = 0; i < pool.size(); ++i)
            if (!used[i] && pool[i].imag() < 0.0) reals.push_back(Complex(pool[i].real(), 0.0));
    }
    std::sort(heads.begin(), heads.end(),
              [](Complex a, Complex b) { return a.imag() < b.imag(); });
    std::sort(reals.begin(), reals.end(),
              [](Complex a, Complex b) { return a.real() > b.real(); });
    std::vector<Complex> out;
    for (const Complex& h : heads) {
        out.push_back(h);
        out.push_back(std::conj(h));
    }
    for (const Complex& r : reals) out.push_back(r);
    return out;
}

inline double pole_movement(const std::vector<Complex>& a, const std::vector<Complex>& b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(a[i])));
    return worst;
}

}  // namespace vfdetail

/// Fit a shared-pole rational matrix to frequency samples by iterative pole
/// relocation: each pass solves one linear least-squares problem for a
/// scaling function sigma(s) and scaled fit, then moves the poles to the
/// zeros of sigma; residues/constant terms come from a final fixed-pole
/// solve.  Initial poles are conjugate pairs with imaginary parts log-spaced
/// over the sample band and real parts -imag/100 (odd orders add one real
/// pole at the band's geometric center).
inline RationalFit vector_fit(const std::vector<FrequencySample>& samples, int order,
                              const FitOptions& options = {}) {
    if (order < 0) throw DimensionError("vector_fit: order must be non-negative");
    if (samples.empty()) throw DimensionError("vector_fit: no samples");
    const int p_rows = static_cast<int>(samples.front().value.rows());
    const int p_cols = static_cast<int>(samples.front().value.cols());
    if (p_rows == 0 || p_cols == 0) throw DimensionError("vector_fit: empty sample matrices");

    std::vector<double> distinct;
    for (const auto& s : samples) {
        if (!(s.omega >= 0.0) || !std::isfinite(s.omega))
            throw DimensionError("vector_fit: sample frequencies must be finite and >= 0");
        if (s.value.rows() != p_rows || s.value.cols() != p_cols)
            throw DimensionError("vector_fit: inconsistent sample matrix shapes");
        if (!s.value.allFinite()) throw DimensionError("vector_fit: non-finite sample value");
        distinct.push_back(s.omega);
    }
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (static_cast<int>(distinct.size()) < std::max(1, 2 * order))
        throw DimensionError("vector_fit: need at least 2*order distinct frequencies");
    if (!options.weights.empty() && options.weights.size() != samples.size())
        throw DimensionError("vector_fit: weight count must match sample count");

    const int K = static_cast<int>(samples.size());
    const int ne = p_rows * p_cols;
    const int nb = order + 1 + (options.with_linear_term ? 1 : 0);  // per-element block

    const auto weight_of = [&](int k) {
        return options.weights.empty() ? 1.0 : options.weights[static_cast<size_t>(k)];
    };

    // ---- initial pole layout over the sampled band
    std::vector<Complex> poles;
    {
        double w_hi = distinct.back();
        double w_lo = 0.0;
        for (double w : distinct)
            if (w > 0.0) {
                w_lo = w;
                break;
            }
        if (w_lo == 0.0) w_lo = w_hi > 0 ? w_hi * 1e-3 : 1.0;
        if (w_hi <= 0.0) w_hi = 1.0;
        if (w_hi <= w_lo) w_hi = w_lo * 10.0;
        const int npairs = order / 2;
        for (int m = 0; m < npairs; ++m) {
            const double t = npairs == 1 ? 0.5 : double(m) / (npairs - 1);
            const double wi = w_lo * std::pow(w_hi / w_lo, t);
            poles.push_back(Complex(-wi / 100.0, wi));
            poles.push_back(Complex(-wi / 100.0, -wi));
        }
        if (order % 2 == 1) poles.push_back(Complex(-std::sqrt(w_lo * w_hi), 0.0));
        poles = vfdetail::canonicalize(poles, options.enforce_stable);
    }

    RationalFit fit;
    fit.has_linear = options.with_linear_term;
    fit.converged = (order == 0);
    fit.iterations = 0;

    // ---- stage A: pole relocation iterations
    for (int it = 0; order > 0 && it < options.max_iterations; ++it) {
        const vfdetail::PoleBasis basis(poles);
        const int nc = basis.coeff_count();

        // data magnitude, used to scale the non-triviality constraint row
        double data_sq = 0.0;
        for (int k = 0; k < K; ++k)
            data_sq += std::pow(weight_of(k), 2) *
                       samples[static_cast<size_t>(k)].value.squaredNorm();
        const double relax_scale = std::sqrt(data_sq) / double(K);

        // Solves one weighted least-squares pass.  In the relaxed form the
        // scaling function's asymptote dtil is a free unknown pinned by an
        // extra row that fixes its weighted average to one; this keeps noisy
        // data from dragging in spurious barely-damped poles.  If dtil
        // collapses toward zero (or the relaxed system is too ill-conditioned)
        // the caller retries with the asymptote fixed at one.
        const auto solve_pass = [&](bool relaxed, Vector& sol_out) -> double {
            const int cols = ne * nb + nc + (relaxed ? 1 : 0);
            const int rows = 2 * K * ne + (relaxed ? 1 : 0);
            Matrix M = Matrix::Zero(rows, cols);
            Vector rhs = Vector::Zero(rows);

            for (int k = 0; k < K; ++k) {
                const Complex s(0.0, samples[static_cast<size_t>(k)].omega);
                const double wgt = weight_of(k);
                const std::vector<Complex> phi = basis.eval(s);
                for (int e = 0; e < ne; ++e) {
                    const Complex F =
                        samples[static_cast<size_t>(k)].value(e % p_rows, e / p_rows);
                    const int row = 2 * (k * ne + e);
                    const int b0 = e * nb;
                    for (int m = 0; m < nc; ++m) {
                        M(row, b0 + m) = wgt * phi[static_cast<size_t>(m)].real();
                        M(row + 1, b0 + m) = wgt * phi[static_cast<size_t>(m)].imag();
                        const Complex coupled = -F * phi[static_cast<size_t>(m)];
                        M(row, ne * nb + m) = wgt * coupled.real();
                        M(row + 1, ne * nb + m) = wgt * coupled.imag();
                    }
                    M(row, b0 + nc) = wgt;  // constant term (real part row only)
                    if (options.with_linear_term) {
                        M(row, b0 + nc + 1) = 0.0;
                        M(row + 1, b0 + nc + 1) = wgt * s.imag();
                    }
                    if (relaxed) {
                        M(row, ne * nb + nc) = -wgt * F.real();
                        M(row + 1, ne * nb + nc) = -wgt * F.imag();
                    } else {
                        rhs(row) = wgt * F.real();
                        rhs(row + 1) = wgt * F.imag();
                    }
                }
            }
            if (relaxed) {
                const int row = 2 * K * ne;
                double wsum = 0.0;
                for (int k = 0; k < K; ++k) {
                    const double wgt = weight_of(k);
                    const std::vector<Complex> phi =
                        basis.eval(Complex(0.0, samples[static_cast<size_t>(k)].omega));
                    for (int m = 0; m < nc; ++m)
                        M(row, ne * nb + m) += relax_scale * wgt * phi[static_cast<size_t>(m)].real();
                    wsum += wgt;
                }
                M(row, ne * nb + nc) = relax_scale * wsum;
                rhs(row) = relax_scale * wsum;
            }

            // column scaling keeps the QR honest when frequencies span decades
            Vector colscale(cols);
            for (int c = 0; c < cols; ++c) {
                const double nrm = M.col(c).norm();
                colscale(c) = nrm > 0 ? nrm : 1.0;
                M.col(c) /= colscale(c);
            }
            Eigen::ColPivHouseholderQR<Matrix> qr(M);
            const auto& R = qr.matrixR();
            const double r_max = std::abs(R(0, 0));
            const int rank_dim = static_cast<int>(std::min(M.rows(), M.cols()));
            const double r_min = std::abs(R(rank_dim - 1, rank_dim - 1));
            if (!(r_min > 0.0) || r_max / r_min > options.condition_limit)
                throw FitError(
                    "vector_fit: least-squares system is ill-conditioned "
                    "(condition estimate " +
                        std::to_string(r_min > 0 ? r_max / r_min
                                                 : std::numeric_limits<double>::infinity()) +
                        "); reduce the order or enrich the samples",
                    0.0);
            sol_out = qr.solve(rhs);
            sol_out.array() /= colscale.array();
            return relaxed ? sol_out(ne * nb + nc) : 1.0;
        };

        Vector sol;
        double dtil = 1.0;
        bool need_fixed = false;
        try {
            dtil = solve_pass(true, sol);
            if (std::abs(dtil) < 1e-8) need_fixed = true;
        } catch (const FitError&) {
            need_fixed = true;
        }
        if (need_fixed) dtil = solve_pass(false, sol);

        const Vector ctilde = sol.segment(ne * nb, nc) / dtil;
        std::vector<Complex> moved = vfdetail::relocate_poles(basis, ctilde);
        moved = vfdetail::canonicalize(moved, options.enforce_stable);

        fit.iterations = it + 1;
        const double movement = vfdetail::pole_movement(poles, moved);
        poles = moved;
        if (movement < options.pole_movement_tol) {
            fit.converged = true;
            break;
        }
    }

    // ---- stage B: residues with the poles frozen
    {
        const vfdetail::PoleBasis basis(poles);
        const int nc = basis.coeff_count();
        const int bcols = nc + 1 + (options.with_linear_term ? 1 : 0);
        fit.d = Matrix::Zero(p_rows, p_cols);
        fit.e = Matrix::Zero(p_rows, p_cols);

        std::vector<std::vector<Complex>> phis(static_cast<size_t>(K));
        for (int k = 0; k < K; ++k)
            phis[static_cast<size_t>(k)] =
                basis.eval(Complex(0.0, samples[static_cast<size_t>(k)].omega));

        std::vector<std::vector<Complex>> res_by_elem(static_cast<size_t>(ne));
        std::vector<Complex> poles_of_first;
        for (int e = 0; e < ne; ++e) {
            Matrix M = Matrix::Zero(2 * K, bcols);
            Vector rhs = Vector::Zero(2 * K);
            for (int k = 0; k < K; ++k) {
                const double wgt = weight_of(k);
                const Complex F = samples[static_cast<size_t>(k)].value(e % p_rows, e / p_rows);
                for (int m = 0; m < nc; ++m) {
                    M(2 * k, m) = wgt * phis[static_cast<size_t>(k)][static_cast<size_t>(m)].real();
                    M(2 * k + 1, m) =
                        wgt * phis[static_cast<size_t>(k)][static_cast<size_t>(m)].imag();
                }
                M(2 * k, nc) = wgt;
                if (options.with_linear_term)
                    M(2 * k + 1, nc + 1) = wgt * samples[static_cast<size_t>(k)].omega;
                rhs(2 * k) = wgt * F.real();
                rhs(2 * k + 1) = wgt * F.imag();
            }
            Vector colscale(bcols);
            for (int c = 0; c < bcols; ++c) {
                const double nrm = M.col(c).norm();
                colscale(c) = nrm > 0 ? nrm : 1.0;
                M.col(c) /= colscale(c);
            }
            Vector sol = Eigen::ColPivHouseholderQR<Matrix>(M).solve(rhs);
            sol.array() /= colscale.array();

            std::vector<Complex> pl, rs;
            basis.unpack(sol.head(nc), 0, pl, rs);
            if (e == 0) poles_of_first = pl;
            res_by_elem[static_cast<size_t>(e)] = rs;
            fit.d(e % p_rows, e / p_rows) = sol(nc);
            if (options.with_linear_term) fit.e(e % p_rows, e / p_rows) = sol(nc + 1);
        }

        const int np = static_cast<int>(poles_of_first.size());
        fit.poles = ComplexVector(np);
        for (int m = 0; m < np; ++m) fit.poles(m) = poles_of_first[static_cast<size_t>(m)];
        fit.residues.assign(static_cast<size_t>(np), ComplexMatrix::Zero(p_rows, p_cols));
        for (int e = 0; e < ne; ++e)
            for (int m = 0; m < np; ++m)
                fit.residues[static_cast<size_t>(m)](e % p_rows, e / p_rows) =
                    res_by_elem[static_cast<size_t>(e)][static_cast<size_t>(m)];
    }

    // ---- recompute the residual that we report
    double acc = 0.0;
    for (const auto& s : samples)
        acc += (fit.eval(Complex(0.0, s.omega)) - s.value).squaredNorm();
    fit.rms = std::sqrt(acc / (double(K) * double(ne)));
    return fit;
}

/// Pick the fitted pole nearest to a target frequency (Hz) within a window
/// (Hz); ties on distance resolve to the better-damped pole.  Returns the
/// pole, its damping/frequency split and its residue matrix.
inline ModeData extract_mode_data(const RationalFit& fit, double f_target_hz,
                                  double window_hz) {
    if (window_hz <= 0.0) throw DimensionError("extract_mode_data: window must be positive");
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int m = 0; m < fit.order(); ++m) {
        if (fit.poles(m).imag() < 0.0) continue;  // conjugate partners are implied
        const double f = fit.poles(m).imag() / (2.0 * M_PI);
        const double dist = std::abs(f - f_target_hz);
        if (dist > window_hz) continue;
        if (dist < best_dist - 1e-12 ||
            (std::abs(dist - best_dist) <= 1e-12 &&
             std::abs(fit.poles(m).real()) < std::abs(fit.poles(best).real()))) {
            best_dist = dist;
            best = m;
        }
    }
    if (best < 0)
        throw ModeNotFoundError("extract_mode_data: mode not found within " +
                                std::to_string(window_hz) + " Hz of " +
                                std::to_string(f_target_hz) + " Hz");
    ModeData out;
    out.lambda = fit.poles(best);
    out.sigma = out.lambda.real();
    out.freq_hz = out.lambda.imag() / (2.0 * M_PI);
    out.residue = fit.residues[static_cast<size_t>(best)];
    return out;
}

/// Real state-space realization of a (proper) rational fit: each real pole
/// contributes p states, each conjugate pair 2p, with the residues placed in
/// the output map.  Refuses fits carrying an s*E term (improper).
inline StateSpace fit_realization(const RationalFit& fit) {
    if (fit.has_linear && fit.e.norm() > 0.0)
        throw DimensionError("fit_realization: fit has a linear s-term; not realizable");
    const int p = fit.rows();
    if (p != fit.cols())
        throw DimensionError("fit_realization: only square fits are realizable here");

    int nstates = 0;
    for (int m = 0; m < fit.order(); ++m)
        nstates += (fit.poles(m).imag() > 0.0) ? 2 * p : (fit.poles(m).imag() == 0.0 ? p : 0);

    Matrix A = Matrix::Zero(nstates, nstates);
    Matrix B = Matrix::Zero(nstates, p);
    Matrix C = Matrix::Zero(p, nstates);
    int at = 0;
    for (int m = 0; m < fit.order(); ++m) {
        const Complex a = fit.poles(m);
        if (a.imag() > 0.0) {
            // pair block: transfer 2 Re[R/(s-a)]
            A.block(at, at, p, p) = a.real() * Matrix::Identity(p, p);
            A.block(at, at + p, p, p) = a.imag() * Matrix::Identity(p, p);
            A.block(at + p, at, p, p) = -a.imag() * Matrix::Identity(p, p);
            A.block(at + p, at + p, p, p) = a.real() * Matrix::Identity(p, p);
            B.block(at, 0, p, p) = Matrix::Identity(p, p);
            C.block(0, at, p, p) = 2.0 * fit.residues[static_cast<size_t>(m)].real();
            C.block(0, at + p, p, p) = 2.0 * fit.residues[static_cast<size_t>(m)].imag();
            at += 2 * p;
        } else if (a.imag() == 0.0) {
            A.block(at, at, p, p) = a.real() * Matrix::Identity(p, p);
            B.block(at, 0, p, p) = Matrix::Identity(p, p);
            C.block(0, at, p, p) = fit.residues[static_cast<size_t>(m)].real();
            at += p;
        }
    }
    return StateSpace(A, B, C, fit.d);
}

}  // namespace gma
