#include "nht/trapping.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace nht {
namespace {

constexpr double kPi = std::numbers::pi;

Vec torus_gamma_point(double y = 1.0, double zc = 2.0, double xi_z = 1.0) {
    Vec z(6);
    z << 0, y, zc, 0, 0, xi_z;
    return z;
}

TEST(EscapeFunction, HFMatchesDerivativeAlongFlow) {
    ModelBundle b = torus_bundle();
    EscapeFunction F(b.model, Expr::parse("x"));
    HamiltonianField H(b.model, false);
    CharSampler s(b, 4);
    for (int i = 0; i < 20; ++i) {
        Vec z = *s.sample();
        Vec X = H(z);
        const double h = 1e-5;
        Vec a = z + h * X, c = z - h * X;
        double fd = (F.F(a.data()) - F.F(c.data())) / (2 * h);
        EXPECT_NEAR(F.HF(z.data()), fd, 1e-7 * (1 + std::fabs(fd)));
    }
}

TEST(Escape, NoViolationsOnBuiltins) {
    EscapeOptions o;
    o.n_samples = 1500;
    o.eps1 = 1e-12;
    for (const ModelBundle& b :
         {torus_bundle(), scattering_bundle({}), kerr_ds_bundle({1, 0.3, 0})}) {
        auto rep = verify_escape_condition(b, o);
        EXPECT_FALSE(rep.degenerate) << b.model.id;
        EXPECT_GT(rep.checked, o.n_samples * 9 / 10) << b.model.id;
        EXPECT_TRUE(rep.violations.empty()) << b.model.id << " " << rep.violations.size();
    }
}

TEST(Escape, UnpatchedThetaSeedFailsOnScattering) {
    // a single global seed f = theta violates the sign condition on half the quadrants
    ModelBundle b = scattering_bundle({});
    b.patches.clear();
    EscapeOptions o;
    o.n_samples = 400;
    auto rep = verify_escape_condition(b, o);
    EXPECT_FALSE(rep.violations.empty());
}

TEST(Escape, ConstantOfMotionSeedIsDegenerate) {
    ModelBundle b = torus_bundle();
    b.seed = {Expr::parse("xi_z")};
    b.patches.clear();
    EscapeOptions o;
    o.n_samples = 300;
    auto rep = verify_escape_condition(b, o);
    EXPECT_TRUE(rep.degenerate);
    EXPECT_NE(rep.diagnosis.find("constant-of-motion"), std::string::npos);
}

TEST(Locate, KerrPhotonSphere) {
    ModelBundle b = kerr_ds_bundle({1, 0, 0});
    LocateOptions o;
    o.n_seeds = 60;
    auto rep = locate_invariant_set(b, o);
    ASSERT_FALSE(rep.points.empty());
    for (const auto& z : rep.points) EXPECT_NEAR(z[1], 3.0, 1e-6);
}

TEST(Locate, ScatteringSetsSitOnCriticalAngles) {
    ModelBundle b = scattering_bundle({});
    LocateOptions o;
    o.n_seeds = 80;
    auto rep = locate_invariant_set(b, o);
    ASSERT_GT(rep.points.size(), 4u);
    for (const auto& z : rep.points) {
        // Gamma: cos 2theta = -1, eta = 0. R: |sin 2theta| = 1, sigma = 0
        double th = z[1];
        bool on_gamma = std::fabs(std::cos(2 * th) + 1) < 1e-8 && std::fabs(z[5]) < 1e-8;
        bool on_r = std::fabs(std::fabs(std::sin(2 * th)) - 1) < 1e-8 && std::fabs(z[4]) < 1e-8;
        EXPECT_TRUE(on_gamma || on_r) << z.transpose();
    }
}

TEST(Locate, TorusComponents) {
    ModelBundle b = torus_bundle();
    LocateOptions o;
    o.n_seeds = 40;
    auto rep = locate_invariant_set(b, o);
    ASSERT_FALSE(rep.points.empty());
    for (const auto& z : rep.points) {
        EXPECT_NEAR(std::sin(z[0]), 0.0, 1e-10);
        EXPECT_NEAR(z[3], 0.0, 1e-10);
    }
}

TEST(Linearization, ScatteringGammaEigenvalues) {
    ModelBundle b = scattering_bundle({});
    auto rep = locate_invariant_set(b, {});
    const Vec* g = nullptr;
    for (const auto& q : rep.points)
        if (std::fabs(std::cos(2 * q[1]) + 1) < 1e-8) g = &q;
    ASSERT_NE(g, nullptr);
    auto L = normal_linearization(b, *g);
    ASSERT_TRUE(L.valid) << L.error;
    ASSERT_EQ(L.eigenvalues.size(), 2u);
    EXPECT_NEAR(L.eigenvalues[0].real(), std::sqrt(2.0), 1e-6);
    EXPECT_NEAR(L.eigenvalues[1].real(), -std::sqrt(2.0), 1e-6);
    EXPECT_NEAR(L.eigenvalues[0].imag(), 0.0, 1e-12);
}

TEST(Linearization, ScatteringRadialSpectrumAndLabels) {
    ModelBundle b = scattering_bundle({});
    LocateOptions o;
    o.n_seeds = 200;
    auto rep = locate_invariant_set(b, o);
    auto cls = classify_invariant_set(b, rep.points);
    int radial = 0;
    for (std::size_t i = 0; i < rep.points.size(); ++i) {
        const Vec& z = rep.points[i];
        const auto& s = cls.samples[i];
        if (std::fabs(z[4]) > 1e-8) continue;  // sigma = 0 on R
        ++radial;
        const double sg = std::sin(2 * z[1]) > 0 ? 1.0 : -1.0;
        ASSERT_TRUE(s.lin.valid);
        std::vector<double> ev{s.lin.eigenvalues[0].real(), s.lin.eigenvalues[1].real()};
        std::sort(ev.begin(), ev.end());
        std::vector<double> want{sg * 2, sg * 1};
        std::sort(want.begin(), want.end());
        EXPECT_NEAR(ev[0], want[0], 1e-6);
        EXPECT_NEAR(ev[1], want[1], 1e-6);
        EXPECT_GT(sg * s.frequency_weight, 0.0);
        const bool source = std::sin(2 * z[1]) * z[5] > 0;
        EXPECT_EQ(s.label, source ? "radial-source" : "radial-sink") << z.transpose();
    }
    EXPECT_GT(radial, 8);
    for (const auto& c : cls.components) EXPECT_TRUE(c.diagnosis.empty());
}

TEST(Linearization, TorusDiagonal) {
    ModelBundle b = torus_bundle();
    auto L = normal_linearization(b, torus_gamma_point());
    ASSERT_TRUE(L.valid);
    EXPECT_NEAR(L.eigenvalues[0].real(), 1.0, 1e-10);
    EXPECT_NEAR(L.eigenvalues[1].real(), -1.0, 1e-10);
    EXPECT_NEAR(L.A(0, 1), 0.0, 1e-12);
    EXPECT_NEAR(L.A(1, 0), 0.0, 1e-12);
}

// Schwarzschild: radial motion near r = 3 with xi_r = 0. The (r, xi_r) block of the
// Hamilton field is [[0, 2 g^rr], [-d_r^2 p, 0]], rescaled by 1/xi_t.
TEST(Linearization, SchwarzschildPhotonSphereRate) {
    ModelBundle b = kerr_ds_bundle({1, 0, 0});
    const double r = 3, xt = 0.4;
    const double L2 = 27 * xt * xt;  // Char at r = 3 with xi_r = 0
    auto V = [&](double rr) { return -xt * xt * rr / (rr - 2) + L2 / (rr * rr); };
    const double h = 1e-3;
    const double d2 = (V(r + h) - 2 * V(r) + V(r - h)) / (h * h);
    const double grr = 1 - 2 / r;
    const double nu = std::sqrt(2 * grr * -d2) / xt;
    Vec z(8);
    z << 0, r, kPi / 2, 0.3, xt, 0, 0, std::sqrt(L2);
    const double nrm = z.tail(4).norm();
    z.tail(4) /= nrm;
    auto lin = normal_linearization(b, z);
    ASSERT_TRUE(lin.valid) << lin.error;
    EXPECT_NEAR(nu, 2 / std::sqrt(3.0), 1e-5);
    EXPECT_NEAR(lin.eigenvalues[0].real(), 2 / std::sqrt(3.0), 1e-8);
    EXPECT_NEAR(lin.eigenvalues[1].real(), -2 / std::sqrt(3.0), 1e-8);
}

TEST(Linearization, FallbackFrameAgreesWithExpressionFrame) {
    ModelBundle b = torus_bundle();
    ModelBundle fb = b;
    fb.frames.clear();
    fb.seed = {Expr::parse("x"), Expr::parse("xi_x/abs(xi_z)")};
    Vec z = torus_gamma_point(0.5, 0.5);
    auto L1 = normal_linearization(b, z);
    auto L2 = normal_linearization(fb, z);
    ASSERT_TRUE(L2.valid) << L2.error;
    EXPECT_EQ(L2.frame, -1);
    EXPECT_NEAR(L2.eigenvalues[0].real(), L1.eigenvalues[0].real(), 1e-6);
    EXPECT_NEAR(L2.eigenvalues[1].real(), L1.eigenvalues[1].real(), 1e-6);
}

TEST(Classify, TorusIsTrappedWithZeroWeight) {
    ModelBundle b = torus_bundle();
    auto cls = classify_invariant_set(b, {torus_gamma_point(), torus_gamma_point(2.0, 1.0)});
    ASSERT_EQ(cls.components.size(), 1u);
    EXPECT_EQ(cls.components[0].kind, "trapped");
    EXPECT_EQ(cls.samples[0].g, 0.0);
}

TEST(Rates, TorusExact) {
    ModelBundle b = torus_bundle();
    std::vector<Vec> gamma{torus_gamma_point(), torus_gamma_point(3.0, 4.0),
                           torus_gamma_point(0.2, 5.0, -1.0)};
    auto cls = classify_invariant_set(b, gamma);
    RateOptions o;
    o.n_beta = 2;
    auto R = expansion_rates(b, gamma, cls.samples, o);
    EXPECT_TRUE(R.error.empty()) << R.error;
    EXPECT_NEAR(R.nu_u, 1.0, 1e-8);
    EXPECT_NEAR(R.nu_s, 1.0, 1e-8);
    EXPECT_TRUE(R.flow_constant);
    EXPECT_LE(R.normal_max_rel_diff, 1e-6);
    EXPECT_LE(R.beta_extrapolated, 1e-6);
}

TEST(Rates, ScatteringNormalBlockWithinTwoPercent) {
    ModelBundle b = scattering_bundle({});
    auto rep = locate_invariant_set(b, {});
    Vec g;
    for (const auto& q : rep.points)
        if (std::fabs(std::cos(2 * q[1]) + 1) < 1e-8) {
            g = q;
            break;
        }
    ASSERT_GT(g.size(), 0);
    auto c = normal_block_exponents(b, g, 10.0);
    ASSERT_EQ(c.exponents.size(), 2u);
    EXPECT_LE(c.max_rel_diff, 0.02);
    EXPECT_NEAR(c.exponents[0], std::sqrt(2.0), 0.02 * std::sqrt(2.0));
}

TEST(Rates, ExtrapolationRecoversSlope) {
    std::vector<double> T{25, 50, 100}, L;
    for (double t : T) L.push_back(0.01 * t + 2 * std::log(t) + 0.3);
    EXPECT_NEAR(extrapolated_rate(T, L), 0.01, 1e-12);
    L.clear();
    for (double t : T) L.push_back(std::log(t));
    EXPECT_NEAR(extrapolated_rate(T, L), 0.0, 1e-12);
}

TEST(Symplectic, TorusGammaIsSymplectic) {
    auto s = symplectic_check(torus_bundle(), torus_gamma_point());
    EXPECT_EQ(s.dim, 4);
    EXPECT_EQ(s.rank, 4);
    EXPECT_EQ(s.bracket_rank, 2);
    EXPECT_TRUE(s.symplectic);
}

TEST(Defining, KerrResidualsSmall) {
    KerrDSParams k{1, 0.3, 0};
    ModelBundle b = kerr_ds_bundle(k);
    LocateOptions lo;
    lo.n_seeds = 40;
    auto rep = locate_invariant_set(b, lo);
    ASSERT_FALSE(rep.points.empty());
    DefiningOptions o;
    o.n_samples = 150;
    o.rho_sign = 1;
    auto d = verify_defining_functions(b, rep.points, o);
    EXPECT_GT(d.u.checked, 100);
    EXPECT_LE(d.u.max_residual, 1e-6);
    EXPECT_LE(d.s.max_residual, 1e-6);
    EXPECT_GT(d.u.w_min, 0.0);
    EXPECT_GT(d.s.w_min, 0.0);
    for (double r : d.distance) EXPECT_LE(r, 0.1);
}

TEST(Defining, TorusWeightsTendToOne) {
    ModelBundle b = torus_bundle();
    DefiningOptions o;
    o.n_samples = 100;
    o.radius = 0.01;
    auto d = verify_defining_functions(b, {torus_gamma_point()}, o);
    EXPECT_NEAR(d.u.w_min, 1.0, 1e-3);
    EXPECT_NEAR(d.u.w_max, 1.0, 1e-3);
    EXPECT_NEAR(d.s.w_min, 1.0, 1e-3);
    EXPECT_NEAR(d.s.w_max, 1.0, 1e-3);
    EXPECT_LE(d.u.max_residual, 1e-10);
}

TEST(Defining, SymbolIsNotADefiningFunction) {
    ModelBundle b = torus_bundle();
    auto p = make_function(b.model.p, b.model);
    DefiningOptions o;
    o.n_samples = 50;
    auto d = verify_defining_functions(b, {torus_gamma_point()}, p, p, std::nullopt,
                                       std::nullopt, o);
    EXPECT_TRUE(d.u.invalid);
    EXPECT_TRUE(d.s.invalid);
}

TEST(Flowout, ZeroTimeAndCocycle) {
    ModelBundle b = torus_bundle();
    auto X = std::make_shared<HamiltonianField>(b.model, true);
    auto phi = make_function(Expr::parse("xi_x/abs(xi_z)"), b.model);
    Vec z(6);
    z << 0.3, 1, 2, 0.2, -0.2 * std::sin(0.3), 1;
    FlowoutFunction f0(phi, X, 0.0);
    EXPECT_EQ(f0(z), phi->value(z.data()));
    auto f1 = std::make_shared<FlowoutFunction>(phi, X, 0.7);
    FlowoutFunction f12(f1, X, 0.5);
    FlowoutFunction f2(phi, X, 1.2);
    EXPECT_NEAR(f12(z), f2(z), 1e-9);
    f2(z);
    EXPECT_EQ(f2.cache_size(), 1u);
    EXPECT_THROW(FlowoutFunction(phi, X, -1.0), std::invalid_argument);
}

TEST(Alpha, ProfileIsC2Step) {
    const double a = 1.0, e = 0.25;
    EXPECT_EQ(alpha_profile(0.5, a, e), 1.0);
    EXPECT_EQ(alpha_profile(a, a, e), 0.0);
    EXPECT_NEAR(alpha_profile(a - e / 2, a, e), 0.5, 1e-15);
    double prev = 1.0;
    for (double F = a - e; F <= a; F += e / 100) {
        double h = alpha_profile(F, a, e);
        EXPECT_LE(h, prev + 1e-15);
        prev = h;
        const double d = 1e-6;
        double fd = (alpha_profile(F + d, a, e) - alpha_profile(F - d, a, e)) / (2 * d);
        EXPECT_NEAR(alpha_profile_derivative(F, a, e), fd, 1e-5);
    }
    EXPECT_NEAR(alpha_profile_derivative(a - e + 1e-9, a, e), 0.0, 1e-12);
}

TEST(Alpha, NonIncreasingAlongEscapingFlow) {
    ModelBundle b = torus_bundle();
    EscapeFunction F(b.model, Expr::parse("x"));
    CharSampler s(b, 2);
    std::vector<Vec> pts;
    for (int i = 0; i < 200; ++i) {
        Vec z = *s.sample();
        if (std::cos(z[0]) > 0.2) pts.push_back(z);  // H(F) >= 0 on this patch
    }
    auto rep = build_alpha(F, 0.5, 0.2, pts);
    EXPECT_EQ(rep.violations, 0);
    EXPECT_THROW(build_alpha(F, 0.1, 0.2, pts), std::invalid_argument);
}

TEST(Propagation, BoundFormula) {
    auto p = propagation_time_bound({0.1, 0.4, 0.2}, {2.0, 0.5, 1.0}, 0.1);
    ASSERT_TRUE(p.available);
    EXPECT_DOUBLE_EQ(p.tau, (0.4 + 0.1) / 0.5);
    auto bad = propagation_time_bound({0.1}, {0.0, 1.0}, 0.1);
    EXPECT_FALSE(bad.available);
}

TEST(DualCoefficients, TorusEqualsOne) {
    ModelBundle b = torus_bundle();
    auto d = symplectic_dual_coefficients(b.model, {b.phi_u}, b.phi_s,
                                          {torus_gamma_point(), torus_gamma_point(2, 3)});
    ASSERT_TRUE(d.valid) << d.error;
    for (const auto& f : d.f) EXPECT_NEAR(f[0], 1.0, 1e-9);
    EXPECT_LE(d.max_residual, 1e-12);
}

TEST(DualCoefficients, SingularPairing) {
    ModelBundle b = torus_bundle();
    auto d = symplectic_dual_coefficients(b.model, {b.phi_s}, b.phi_s, {torus_gamma_point()});
    EXPECT_FALSE(d.valid);
    EXPECT_NE(d.error.find("singular"), std::string::npos);
}

TEST(Certify, TorusAllR) {
    CertifyOptions o;
    o.escape.n_samples = 500;
    o.locate.n_seeds = 40;
    o.defining.n_samples = 50;
    auto c = certify_nht(torus_bundle(), o);
    EXPECT_EQ(c.verdict, "NHT-certified, all r");
    EXPECT_TRUE(c.all_r);
    EXPECT_EQ(c.g_max, 0.0);
}

TEST(Certify, RadialOnlyRegionHasNoTrappedComponent) {
    ModelBundle b = scattering_bundle({});
    b.domain["theta"] = {0.5, 1.0, false};
    CertifyOptions o;
    o.check_escape = false;
    o.locate.n_seeds = 60;
    auto c = certify_nht(b, o);
    EXPECT_EQ(c.verdict, "no trapped component");
    ASSERT_FALSE(c.classes.components.empty());
    for (const auto& comp : c.classes.components)
        EXPECT_EQ(comp.kind.rfind("radial", 0), 0u) << comp.kind;
}

}  // namespace
}  // namespace nht
