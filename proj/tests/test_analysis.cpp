#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "cbc/analysis.hpp"

namespace cbc {
namespace {

constexpr double kPi = std::numbers::pi;

// Independent bracketing root find of f1(G(eta), mu(eta)) for centre (0, 0.3), radius 0.1.
constexpr double kUpperA = 0.39341092151094414;
constexpr double kUpperMu = -0.0356987358666415;
constexpr double kLowerA = 0.20048596882050534;
constexpr double kLowerMu = -0.00984670495173738;

class ReferenceTuning : public ::testing::Test {
protected:
    OscillatorModel model = make_vdp_model({1.0, 0.0}, 0.1);
    ControllerGains gains{};
    ContinuationCenter center{0.0, 0.3, 0.1};

    FixedPointSolution upper() const { return pick(true); }
    FixedPointSolution lower() const { return pick(false); }

private:
    FixedPointSolution pick(bool want_upper) const {
        auto fps = controlled_fixed_points(model, gains, center);
        EXPECT_EQ(fps.size(), 2u);
        std::sort(fps.begin(), fps.end(), [](const auto& x, const auto& y) { return x.a < y.a; });
        return want_upper ? fps.back() : fps.front();
    }
};

TEST_F(ReferenceTuning, FixedPointsAreTheCircleBranchIntersections) {
    const FixedPointSolution up = upper();
    const FixedPointSolution lo = lower();
    EXPECT_NEAR(up.a, kUpperA, 1e-9);
    EXPECT_NEAR(up.mu, kUpperMu, 1e-9);
    EXPECT_NEAR(lo.a, kLowerA, 1e-9);
    EXPECT_NEAR(lo.mu, kLowerMu, 1e-9);
    for (const auto& fp : {up, lo}) {
        EXPECT_EQ(fp.alpha, 0.0);
        EXPECT_EQ(fp.y1, 0.0);
        EXPECT_DOUBLE_EQ(fp.y2, fp.a / 2);
        EXPECT_NEAR(fp.y3, (1.0 - gains.omega_0) / gains.ki2, 1e-14);
        EXPECT_LT(std::abs(vdp_slow_functions(fp.a, fp.mu, {1.0, 0.0}).f1), 1e-12);
        EXPECT_NEAR(std::hypot(fp.mu - center.mu0, fp.a - center.g0), center.delta, 1e-15);
    }
}

TEST_F(ReferenceTuning, DistantCentreHasNoIntersection) {
    EXPECT_THROW((void)controlled_fixed_points(model, gains, {0.3, 0.3, 0.05}), EmptyIntersection);
}

TEST_F(ReferenceTuning, CentreOnBranchGivesTwoStraddlingPoints) {
    const double a0 = 1.2;
    const double mu0 = (a0 * a0 * a0 * a0 - 2 * a0 * a0) / 8;
    const auto fps = controlled_fixed_points(model, gains, {mu0, a0, 0.02});
    ASSERT_EQ(fps.size(), 2u);
    const double s0 = fps[0].a - a0;
    const double s1 = fps[1].a - a0;
    EXPECT_LT(s0 * s1, 0.0);
}

TEST_F(ReferenceTuning, MatrixEntriesFromDemodulatorAndIntegrator) {
    for (const auto& fp : {upper(), lower()}) {
        const Matrix6 M = characteristic_matrix(fp, gains, model);
        EXPECT_DOUBLE_EQ(M(2, 1), fp.a * gains.omega_c / 2);
        EXPECT_DOUBLE_EQ(M(4, 2), gains.r);
        EXPECT_DOUBLE_EQ(M(5, 5), -gains.ki3 * (fp.mu - center.mu0));
    }
}

// Central-difference Jacobian of the averaged field in (a, alpha, y1, y2, y3, eta).
Matrix6 fd_jacobian(const FixedPointSolution& fp, const ControllerGains& g, const OscillatorModel& m) {
    const double h = 1e-7;
    const std::array<double, 6> x0{fp.a, fp.alpha, fp.y1, fp.y2, fp.y3, fp.eta};
    auto field = [&](const std::array<double, 6>& x) {
        const SlowState d = slow_flow_rhs({x[0], x[1], x[2], x[3], x[4], x[5], 0.0}, g, fp.center, m);
        return std::array<double, 6>{d.a, d.alpha, d.y1, d.y2, d.y3, d.eta};
    };
    Matrix6 J;
    for (int j = 0; j < 6; ++j) {
        auto xp = x0, xm = x0;
        xp[j] += h;
        xm[j] -= h;
        const auto fp_ = field(xp), fm_ = field(xm);
        for (int i = 0; i < 6; ++i) J(i, j) = (fp_[i] - fm_[i]) / (2 * h);
    }
    return J;
}

TEST(CharacteristicMatrix, MatchesFiniteDifferenceJacobian) {
    // rho != 0 so that the phase-amplitude coupling entries are exercised.
    const OscillatorModel m = make_vdp_model({1.0, 0.7}, 0.1);
    const ControllerGains g{0.2, 0.1, -0.1, 0.1, 0.01, 0.9};
    for (const ContinuationCenter c : {ContinuationCenter{0.0, 0.3, 0.1}, ContinuationCenter{-0.125, 1.0, 0.1}}) {
        for (const auto& fp : controlled_fixed_points(m, g, c)) {
            const Matrix6 M = characteristic_matrix(fp, g, m);
            const Matrix6 J = fd_jacobian(fp, g, m);
            for (int i = 0; i < 6; ++i) {
                for (int j = 0; j < 6; ++j) {
                    EXPECT_NEAR(M(i, j), J(i, j), 1e-6 * std::max(1.0, std::abs(M(i, j))))
                        << "entry (" << i + 1 << "," << j + 1 << ") a=" << fp.a;
                }
            }
        }
    }
}

TEST_F(ReferenceTuning, SpectrumContainsFilterPoleAndFeedbackPole) {
    const FixedPointSolution fp = upper();
    const Spectrum6 ev = eigenvalues(characteristic_matrix(fp, gains, model));
    const PerturbativeEigs pe = perturbative_eigs(fp, gains, model);
    EXPECT_NEAR(pe.lambda3, -0.0467, 1e-4);
    // Within O(Delta): Delta = 0.1 moves these by a few 1e-3.
    auto closest = [&](double target) {
        double d = 1e9;
        for (const Complex& l : ev) d = std::min(d, std::abs(l - target));
        return d;
    };
    EXPECT_LT(closest(pe.lambda3), 0.005);
    EXPECT_LT(closest(-gains.omega_c), gains.omega_c);
}

TEST(CubicSpectra, PllCubicRespectsAmplitudeBound) {
    const ControllerGains g{};
    for (const Complex& r : cubic_roots(pll_cubic(g, 0.3))) EXPECT_LT(r.real(), 0.0);
    bool unstable = false;
    for (const Complex& r : cubic_roots(pll_cubic(g, 0.7))) unstable |= r.real() > 0.0;
    EXPECT_TRUE(unstable);
}

TEST_F(ReferenceTuning, FrozenArclengthControllerGivesZeroRoot) {
    ControllerGains g = gains;
    g.ki3 = 0.0;
    const Cubic c = arclength_cubic(upper(), g, model);
    EXPECT_EQ(c.c0, 0.0);
    double smallest = 1e9;
    for (const Complex& r : cubic_roots(c)) smallest = std::min(smallest, std::abs(r));
    EXPECT_LT(smallest, 1e-14);
}

TEST(CubicRoots, KnownFactorization) {
    // 2 (l + 1)(l - 2)(l + 0.5) = 2 l^3 - l^2 - 5 l - 2
    const CubicRoots r = cubic_roots({2.0, -1.0, -5.0, -2.0});
    EXPECT_LT(spectral_distance<3>(r, {Complex(-1, 0), Complex(2, 0), Complex(-0.5, 0)}), 1e-12);
    EXPECT_THROW((void)cubic_roots({0.0, 1.0, 1.0, 1.0}), ValidationError);
}

TEST(PllStability, AmplitudeBound) {
    ControllerGains g{};
    EXPECT_NEAR(pll_stability(g, 0.3).a_max, 0.6, 1e-12);
    g.kd1 = 0.2;
    EXPECT_NEAR(pll_stability(g, 0.3).a_max, 2.2, 1e-12);
    g = {0.1, 0.05, 0.1, 0.05, 0.01, 0.9};
    EXPECT_NEAR(pll_stability(g, 0.3).a_max, 2.4, 1e-12);
}

TEST(PllStability, FourthConditionIsTheAmplitudeBound) {
    const ControllerGains g{};
    const PllStability below = pll_stability(g, 0.59);
    const PllStability above = pll_stability(g, 0.61);
    EXPECT_TRUE(below.all());
    EXPECT_TRUE(above.flags[0] && above.flags[1] && above.flags[2]);
    EXPECT_FALSE(above.flags[3]);
}

TEST_F(ReferenceTuning, DirectionProductSelectsStablePoint) {
    const PerturbativeEigs up = perturbative_eigs(upper(), gains, model);
    EXPECT_NEAR(up.direction_product, 0.01954194528652692, 1e-9);
    EXPECT_LT(up.lambda1, 0.0);
    EXPECT_DOUBLE_EQ(up.lambda2, -gains.omega_c);

    const PerturbativeEigs lo = perturbative_eigs(lower(), gains, model);
    EXPECT_NEAR(lo.direction_product, -0.009880614429354317, 1e-9);
    EXPECT_GT(lo.lambda1, 0.0);
    EXPECT_DOUBLE_EQ(lo.lambda2, -gains.omega_c);

    ControllerGains flipped = gains;
    flipped.ki3 = -0.1;
    EXPECT_LT(perturbative_eigs(lower(), flipped, model).lambda1, 0.0);
    EXPECT_GT(perturbative_eigs(upper(), flipped, model).lambda1, 0.0);
}

TEST_F(ReferenceTuning, DegenerateDenominatorIsReported) {
    const FixedPointSolution fp = upper();
    ControllerGains g = gains;
    g.kd1 = 2.0 * model.epsilon() * slow_function_derivatives(model, fp.a, fp.mu).f1a;
    EXPECT_THROW((void)perturbative_eigs(fp, g, model), DegenerateDenominator);
    EXPECT_FALSE(stability_report(fp, g, model).perturbative.has_value());
}

TEST_F(ReferenceTuning, StabilityReportAgreesWithTimeSimulationOutcome) {
    const StabilityReport up = stability_report(upper(), gains, model);
    const StabilityReport lo = stability_report(lower(), gains, model);
    EXPECT_TRUE(up.stable);
    EXPECT_FALSE(lo.stable);
    EXPECT_NEAR(up.a_max, 0.6, 1e-12);
}

// Random non-invasive fixed points: pick a branch point and a circle through it.
struct RandomCase {
    OscillatorModel model;
    ControllerGains gains;
    FixedPointSolution fp;
};

RandomCase random_case(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double rho = 2.0 * u(rng) - 1.0;
    OscillatorModel m = make_vdp_model({1.0, rho}, 0.05 + 0.2 * u(rng));
    ControllerGains g{0.02 + 0.3 * u(rng), 0.02 + 0.2 * u(rng), (u(rng) < 0.5 ? -1 : 1) * (0.02 + 0.2 * u(rng)),
                      0.02 + 0.2 * u(rng), 0.005 + 0.05 * u(rng), 0.8 + 0.3 * u(rng)};
    const double a = 0.15 + 1.6 * u(rng);
    const double mu = (a * a * a * a - 2 * a * a) / 8;
    const double delta = 0.02 + 0.15 * u(rng);
    const double eta = 2 * kPi * u(rng);
    const ContinuationCenter c{mu - delta * std::cos(eta), a - delta * std::sin(eta), delta};
    return {m, g, make_fixed_point(m, g, c, eta)};
}

TEST(Properties, SpectrumFactorsIntoTwoCubics) {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 100; ++i) {
        const RandomCase rc = random_case(rng);
        const CubicSpectra cs = cubic_spectra(rc.fp, rc.gains, rc.model);
        const Spectrum6 ev = eigenvalues(characteristic_matrix(rc.fp, rc.gains, rc.model));
        const Spectrum6 joined{cs.pll[0], cs.pll[1], cs.pll[2], cs.arclength[0], cs.arclength[1], cs.arclength[2]};
        EXPECT_LT(spectral_distance<6>(ev, joined), 1e-8) << "case " << i;
    }
}

TEST(Properties, RouthHurwitzMatchesPllRoots) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    while (checked < 100) {
        const ControllerGains g{0.01 + 0.5 * u(rng), 0.01 + 0.5 * u(rng), 0.1, 0.01 + 0.5 * u(rng),
                                0.001 + 0.1 * u(rng), 1.0};
        const PllStability s = pll_stability(g, 1.0);
        const double a = 2.0 * s.a_max * u(rng);
        double max_re = -1e9;
        for (const Complex& r : cubic_roots(pll_cubic(g, a))) max_re = std::max(max_re, r.real());
        if (std::abs(max_re) < 1e-10) continue;
        EXPECT_EQ(max_re < 0.0, pll_stability(g, a).all()) << "a=" << a << " a_max=" << s.a_max;
        ++checked;
    }
}

// Keep the fixed point and its bearing from the centre, shrink the radius.
double lambda1_gap(const OscillatorModel& m, const ControllerGains& g, const FixedPointSolution& ref,
                   double delta) {
    const ContinuationCenter c{ref.mu - delta * std::cos(ref.eta), ref.a - delta * std::sin(ref.eta), delta};
    const FixedPointSolution fp = make_fixed_point(m, g, c, ref.eta);
    const double approx = perturbative_eigs(fp, g, m).lambda1;
    double gap = 1e9;
    for (const Complex& r : cubic_roots(arclength_cubic(fp, g, m))) gap = std::min(gap, std::abs(r - approx));
    return gap;
}

TEST_F(ReferenceTuning, PerturbativeEigenvalueErrorIsQuadraticInRadius) {
    // Asymptotic regime: the radius is small against the pole spacing omega_c.
    const FixedPointSolution fp = lower();
    const double r1 = lambda1_gap(model, gains, fp, 0.05) / lambda1_gap(model, gains, fp, 0.025);
    const double r2 = lambda1_gap(model, gains, fp, 0.025) / lambda1_gap(model, gains, fp, 0.0125);
    EXPECT_GT(r1, 3.5);
    EXPECT_LT(r1, 4.5);
    EXPECT_GT(r2, 3.5);
    EXPECT_LT(r2, 4.5);

    // Near the upper point lambda1 and lambda2 form a complex pair until the radius is much smaller.
    const FixedPointSolution up = upper();
    const double r3 = lambda1_gap(model, gains, up, 0.003125) / lambda1_gap(model, gains, up, 0.0015625);
    EXPECT_GT(r3, 3.5);
    EXPECT_LT(r3, 4.5);
}

TEST(Properties, LargeDerivativeGainStabilizesUnstableCycle) {
    const OscillatorModel m = make_vdp_model({1.0, 0.0}, 0.1);
    for (double mu : {-0.1, -0.05, -0.01}) {
        const auto eq = uncontrolled_fixed_points(m, mu, 3.0);
        ASSERT_EQ(eq.size(), 2u);
        const double lambda_u = eq.front().lambda_u;
        ASSERT_GT(lambda_u, 0.0);
        ControllerGains g{};
        g.kd1 = 2.0 * lambda_u * 1.01;
        FixedPointSolution fp;
        fp.a = eq.front().a;
        fp.mu = mu;
        fp.center = {mu, eq.front().a, 0.1};
        EXPECT_LT(perturbative_eigs(fp, g, m).lambda3, 0.0);
        g.kd1 = 2.0 * lambda_u * 0.99;
        EXPECT_GT(perturbative_eigs(fp, g, m).lambda3, 0.0);
    }
}

}  // namespace
}  // namespace cbc
