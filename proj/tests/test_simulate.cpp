#include "gma/simulate.hpp"

#include <gtest/gtest.h>

#include <random>

#include "util.hpp"

using namespace gma;
using testutil::random_stable_matrix;

TEST(Simulate, ScalarExponentialDecay) {
    Matrix A(1, 1);
    A << -1.0;
    const StateSpace ss(A, Matrix::Zero(1, 1), Matrix::Identity(1, 1), Matrix::Zero(1, 1));
    Vector x0(1);
    x0 << 1.0;
    const SimulationResult r = simulate(ss, x0, 1.0, 1e-3);
    EXPECT_NEAR(r.states(0, r.states.cols() - 1), std::exp(-1.0), 1e-6);
}

TEST(Simulate, ExactnessIndependentOfStep) {
    // exact per-step propagation: halving dt must not change shared samples
    std::mt19937_64 rng(21);
    const Matrix A = random_stable_matrix(4, rng);
    const StateSpace ss(A, Matrix::Zero(4, 1), Matrix::Identity(4, 4), Matrix::Zero(4, 1));
    Vector x0 = Vector::Ones(4);
    const SimulationResult coarse = simulate(ss, x0, 1.0, 0.01);
    const SimulationResult fine = simulate(ss, x0, 1.0, 0.005);
    for (int k = 0; k < coarse.times.size(); ++k)
        EXPECT_LT((coarse.states.col(k) - fine.states.col(2 * k)).norm(), 1e-11);
}

TEST(Simulate, OscillatorSpectralPeak) {
    // lightly damped oscillator at 5 Hz: the DFT of the free response must
    // peak at the mode frequency within one grid bin
    const double f0 = 5.0, w0 = 2 * M_PI * f0, zeta = 0.02;
    Matrix A(2, 2);
    A << 0, 1, -w0 * w0, -2 * zeta * w0;
    const StateSpace ss(A, Matrix::Zero(2, 1), Matrix::Identity(2, 2), Matrix::Zero(2, 1));
    Vector x0(2);
    x0 << 1.0, 0.0;
    const double dt = 1e-2;
    const SimulationResult r = simulate(ss, x0, 8.0, dt);
    const auto peak = testutil::dft_peak(r.states.row(0).transpose(), dt);
    EXPECT_NEAR(peak.freq_hz, f0, peak.resolution_hz + 1e-12);
}

TEST(Simulate, SuperpositionHolds) {
    std::mt19937_64 rng(22);
    const Matrix A = random_stable_matrix(5, rng);
    const Matrix B = testutil::random_matrix(5, 2, rng);
    const StateSpace ss(A, B, Matrix::Identity(5, 5), Matrix::Zero(5, 2));
    Vector x0 = Vector::Ones(5);
    const auto u = [](double t) {
        Vector v(2);
        v << (t > 0.2 ? 1.0 : 0.0), 0.5;
        return v;
    };
    const SimulationResult both = simulate(ss, x0, u, 1.0, 1e-3);
    const SimulationResult free_resp = simulate(ss, x0, 1.0, 1e-3);
    const SimulationResult forced = simulate(ss, Vector::Zero(5), u, 1.0, 1e-3);
    const double scale = both.states.cwiseAbs().maxCoeff();
    EXPECT_LT((both.states - free_resp.states - forced.states).cwiseAbs().maxCoeff(),
              1e-9 * std::max(1.0, scale));
}

TEST(Simulate, ZeroOrderHoldStepResponse) {
    // first-order lag driven by a unit step: closed form (1 - e^{-t})
    Matrix A(1, 1), B(1, 1);
    A << -1.0;
    B << 1.0;
    const StateSpace ss(A, B, Matrix::Identity(1, 1), Matrix::Zero(1, 1));
    const auto u = [](double) { return Vector::Ones(1); };
    const SimulationResult r = simulate(ss, Vector::Zero(1), u, 2.0, 1e-3);
    for (int k = 0; k < r.times.size(); k += 200)
        EXPECT_NEAR(r.states(0, k), 1.0 - std::exp(-r.times(k)), 1e-9);
}

TEST(Simulate, StiffSystemStaysAccurate) {
    // widely split time constants: exact discretization has no stability limit
    Matrix A = Matrix::Zero(2, 2);
    A.diagonal() << -1.0, -1e6;
    const StateSpace ss(A, Matrix::Zero(2, 1), Matrix::Identity(2, 2), Matrix::Zero(2, 1));
    Vector x0 = Vector::Ones(2);
    const SimulationResult r = simulate(ss, x0, 1.0, 1e-2);  // dt >> fast time constant
    EXPECT_NEAR(r.states(0, r.states.cols() - 1), std::exp(-1.0), 1e-9);
    EXPECT_NEAR(r.states(1, r.states.cols() - 1), 0.0, 1e-12);
}

TEST(Simulate, InputValidation) {
    Matrix A(1, 1);
    A << -1.0;
    const StateSpace ss(A, Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1));
    Vector x0 = Vector::Ones(1);
    EXPECT_THROW(simulate(ss, x0, 1.0, 0.0), DimensionError);
    EXPECT_THROW(simulate(ss, x0, 1.0, -0.1), DimensionError);
    EXPECT_THROW(simulate(ss, Vector::Ones(2), 1.0, 0.1), DimensionError);
    const auto bad = [](double) {
        Vector v(1);
        v << std::numeric_limits<double>::quiet_NaN();
        return v;
    };
    EXPECT_THROW(simulate(ss, x0, bad, 1.0, 0.1), DimensionError);
}

TEST(PiecewiseConstantSignal, HoldsValues) {
    PiecewiseConstant sig;
    sig.times = {0.1, 0.5};
    Vector a(1), b(1);
    a << 1.0;
    b << -2.0;
    sig.values = {a, b};
    EXPECT_DOUBLE_EQ(sig(0.0)(0), 0.0);
    EXPECT_DOUBLE_EQ(sig(0.3)(0), 1.0);
    EXPECT_DOUBLE_EQ(sig(0.7)(0), -2.0);
}
