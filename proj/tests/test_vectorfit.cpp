#include "gma/vectorfit.hpp"

#include <gtest/gtest.h>

#include <random>

#include "util.hpp"

using namespace gma;

namespace {

/// Hand-built three-pair rational matrix used as ground truth.
RationalFit make_reference() {
    RationalFit ref;
    ref.poles = ComplexVector(6);
    ref.poles << Complex(-3.0, 2 * M_PI * 3.0), Complex(-3.0, -2 * M_PI * 3.0),
        Complex(-8.0, 2 * M_PI * 25.0), Complex(-8.0, -2 * M_PI * 25.0),
        Complex(-20.0, 2 * M_PI * 90.0), Complex(-20.0, -2 * M_PI * 90.0);
    ComplexMatrix r0(2, 2), r1(2, 2), r2(2, 2);
    r0 << Complex(4.0, 1.0), Complex(-1.0, 0.5), Complex(0.6, -2.0), Complex(3.0, 0.2);
    r1 << Complex(-2.0, 5.0), Complex(1.2, -0.4), Complex(0.0, 1.5), Complex(-4.0, -1.0);
    r2 << Complex(10.0, -3.0), Complex(2.0, 2.0), Complex(-1.0, 0.0), Complex(6.0, 4.0);
    ref.residues = {r0, r0.conjugate(), r1, r1.conjugate(), r2, r2.conjugate()};
    ref.d = Matrix(2, 2);
    ref.d << 0.5, 0.1, -0.2, 0.3;
    ref.e = Matrix::Zero(2, 2);
    return ref;
}

std::vector<FrequencySample> sample_logspaced(const RationalFit& f, double f_lo, double f_hi,
                                              int count) {
    std::vector<FrequencySample> out;
    for (int k = 0; k < count; ++k) {
        const double fh = f_lo * std::pow(f_hi / f_lo, double(k) / (count - 1));
        const double w = 2 * M_PI * fh;
        out.push_back({w, f.eval(Complex(0.0, w))});
    }
    return out;
}

/// Greatest relative pole mismatch after nearest-neighbour pairing.
double pole_mismatch(const ComplexVector& fitted, const ComplexVector& truth) {
    double worst = 0.0;
    for (int i = 0; i < truth.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < fitted.size(); ++j)
            best = std::min(best, std::abs(fitted(j) - truth(i)) / std::abs(truth(i)));
        worst = std::max(worst, best);
    }
    return worst;
}

}  // namespace

TEST(VectorFit, SingleRealPole) {
    // samples of 1/(s+1), order 1: pole and residue recovered to 1e-8
    RationalFit ref;
    ref.poles = ComplexVector(1);
    ref.poles << Complex(-1.0, 0.0);
    ref.residues = {ComplexMatrix::Ones(1, 1)};
    ref.d = Matrix::Zero(1, 1);
    ref.e = Matrix::Zero(1, 1);
    const auto samples = sample_logspaced(ref, 1e-3, 1e2, 50);
    const RationalFit fit = vector_fit(samples, 1);
    ASSERT_EQ(fit.order(), 1);
    EXPECT_LT(std::abs(fit.poles(0) - Complex(-1.0, 0.0)), 1e-8);
    EXPECT_LT(std::abs(fit.residues[0](0, 0) - Complex(1.0, 0.0)), 1e-8);
    EXPECT_TRUE(fit.converged);
}

TEST(VectorFit, SixPoleRoundTrip) {
    const RationalFit ref = make_reference();
    const auto samples = sample_logspaced(ref, 0.5, 150.0, 120);
    const RationalFit fit = vector_fit(samples, 6);
    ASSERT_EQ(fit.order(), 6);
    EXPECT_LT(pole_mismatch(fit.poles, ref.poles), 1e-6);
    EXPECT_LT(fit.rms, 1e-9);
    EXPECT_TRUE(fit.converged);
    EXPECT_LT((fit.d - ref.d).norm(), 1e-7);
}

TEST(VectorFit, ConjugateClosure) {
    const RationalFit ref = make_reference();
    const auto samples = sample_logspaced(ref, 0.5, 150.0, 90);
    const RationalFit fit = vector_fit(samples, 6);
    for (int m = 0; m < fit.order(); ++m) {
        if (fit.poles(m).imag() > 0.0) {
            ASSERT_LT(m + 1, fit.order());
            EXPECT_EQ(fit.poles(m + 1), std::conj(fit.poles(m)));
            EXPECT_EQ(fit.residues[m + 1], fit.residues[m].conjugate());
        }
    }
    const Complex s(3.0, 17.0);
    EXPECT_LT((fit.eval(std::conj(s)) - fit.eval(s).conjugate()).norm(), 1e-12);
}

TEST(VectorFit, ReportedRmsMatchesRecomputation) {
    const RationalFit ref = make_reference();
    const auto samples = sample_logspaced(ref, 0.5, 150.0, 60);
    const RationalFit fit = vector_fit(samples, 4);  // deliberately under-fitted
    double acc = 0.0;
    for (const auto& s : samples) acc += (fit.eval(Complex(0, s.omega)) - s.value).squaredNorm();
    const double recomputed = std::sqrt(acc / (samples.size() * 4.0));
    EXPECT_NEAR(fit.rms, recomputed, 1e-12 * std::max(1.0, recomputed));
}

TEST(VectorFit, UnderfitReportsLargeResidualWithoutThrowing) {
    const RationalFit ref = make_reference();
    const auto samples = sample_logspaced(ref, 0.5, 150.0, 80);
    const RationalFit fit = vector_fit(samples, 2);
    EXPECT_GT(fit.rms, 1e-3);
}

TEST(VectorFit, ToleratesSmallNoise) {
    const RationalFit ref = make_reference();
    auto samples = sample_logspaced(ref, 0.5, 150.0, 160);
    std::mt19937_64 rng(42);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (auto& s : samples)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                s.value(i, j) *= 1.0 + noise(rng);
    const RationalFit fit = vector_fit(samples, 6);
    EXPECT_LT(pole_mismatch(fit.poles, ref.poles), 1e-2);
}

TEST(VectorFit, OrderZeroRecoversConstant) {
    Matrix d(2, 2);
    d << 1.5, -0.25, 0.75, 2.0;
    std::vector<FrequencySample> samples;
    for (double w : {0.0, 1.0, 10.0, 100.0}) samples.push_back({w, d.cast<Complex>()});
    const RationalFit fit = vector_fit(samples, 0);
    EXPECT_EQ(fit.order(), 0);
    EXPECT_LT((fit.d - d).norm(), 1e-12);
    EXPECT_LT(fit.rms, 1e-12);
}

TEST(VectorFit, InputValidation) {
    const RationalFit ref = make_reference();
    auto samples = sample_logspaced(ref, 0.5, 150.0, 10);
    EXPECT_THROW(vector_fit(samples, 6), DimensionError);  // needs >= 12 distinct
    EXPECT_THROW(vector_fit({}, 2), DimensionError);
    auto bad = samples;
    bad[3].value = ComplexMatrix::Zero(1, 1);
    EXPECT_THROW(vector_fit(bad, 2), DimensionError);
    auto neg = samples;
    neg[0].omega = -1.0;
    EXPECT_THROW(vector_fit(neg, 2), DimensionError);
}

TEST(ExtractModeData, PicksNearestPoleInWindow) {
    const RationalFit ref = make_reference();
    const auto samples = sample_logspaced(ref, 0.5, 150.0, 120);
    const RationalFit fit = vector_fit(samples, 6);
    const ModeData m = extract_mode_data(fit, 24.0, 5.0);
    EXPECT_NEAR(m.freq_hz, 25.0, 0.1);
    EXPECT_NEAR(m.sigma, -8.0, 0.1);
    EXPECT_LT((m.residue - ref.residues[2]).norm() / ref.residues[2].norm(), 1e-4);
}

TEST(ExtractModeData, MissingModeThrows) {
    const RationalFit ref = make_reference();
    const auto samples = sample_logspaced(ref, 0.5, 150.0, 120);
    const RationalFit fit = vector_fit(samples, 6);
    EXPECT_THROW(extract_mode_data(fit, 55.0, 2.0), ModeNotFoundError);
    EXPECT_THROW(extract_mode_data(fit, 10.0, 0.0), DimensionError);
}

TEST(FitRealization, MatchesRationalForm) {
    const RationalFit ref = make_reference();
    const auto samples = sample_logspaced(ref, 0.5, 150.0, 120);
    const RationalFit fit = vector_fit(samples, 6);
    const StateSpace ss = fit_realization(fit);
    EXPECT_EQ(ss.n(), 12);  // three conjugate pairs, two states per pair per port
    for (double w : {1.0, 30.0, 400.0}) {
        const Complex s(0.0, w);
        ComplexMatrix M = -ss.A.cast<Complex>();
        M.diagonal().array() += s;
        const ComplexMatrix G =
            ss.C.cast<Complex>() * M.inverse() * ss.B.cast<Complex>() + ss.D.cast<Complex>();
        EXPECT_LT((G - fit.eval(s)).norm(), 1e-9 * (1.0 + fit.eval(s).norm()));
    }
}
