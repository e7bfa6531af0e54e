#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cantibec/calibration.hpp"

using namespace cantibec;

namespace {
const PhysicalConstants k{};
const double c4 = k.casimir_polder_c4();
const double c4d = dielectric_c4(c4, sin_permittivity, sin_phi);
const double h = k.planck();

CombinedPotential slab(double zc, double cm = 200, double cd = 10) {
    return cantilever_slab(coupling_trap(two_pi * 10e3), zc, 450e-9, {c4, cm * c4, 4}, {c4d, cd * c4d, 4});
}

struct Curves {
    LossCurve met, diel;
};

Curves curves(double zc) {
    const auto s = slab(zc);
    const auto state = thermodynamics_reduced(2000, 0.8, s.trap);
    LossModelConfig cfg;
    cfg.hold_time = 1e-3;
    std::vector<double> pm, pd;
    for (double x = 0.4e-6; x <= 3.0e-6 + 1e-12; x += 20e-9) {
        pm.push_back(zc + x);
        pd.push_back(zc - 450e-9 - x);
    }
    std::reverse(pd.begin(), pd.end());
    return {synthetic_loss_curve(s, metallized_side, pm, state, cfg),
            synthetic_loss_curve(s, dielectric_side, pd, state, cfg)};
}
} // namespace

TEST(Patch, NoDipolesNoField) {
    AdsorbatePatch p;
    p.dipole_count = 0.0;
    const auto f = adsorbate_potential(p, 1e-6);
    EXPECT_EQ(f.potential, 0.0);
    EXPECT_EQ(f.equivalent_c4, 0.0);
}

TEST(Patch, FarFieldFallsAsSixthPower) {
    AdsorbatePatch p;
    p.patch_length = 1e-6;
    const double u1 = adsorbate_potential(p, 100e-6).potential;
    const double u2 = adsorbate_potential(p, 200e-6).potential;
    EXPECT_NEAR(std::log(u2 / u1) / std::log(2.0), -6.0, 0.01);
}

TEST(Patch, NearFieldScale) {
    const auto f = adsorbate_potential(AdsorbatePatch{}, 1.5e-6);
    const double ratio = f.equivalent_c4 / (200 * c4);
    EXPECT_GT(ratio, 1.0 / 3.0);
    EXPECT_LT(ratio, 3.0);
    EXPECT_LT(f.potential, 0.0);
}

TEST(Patch, RejectsBadInput) {
    EXPECT_THROW(adsorbate_potential(AdsorbatePatch{}, 0.0), DomainError);
    AdsorbatePatch p;
    p.patch_width = -1.0;
    EXPECT_THROW(adsorbate_potential(p, 1e-6), DomainError);
}

TEST(Onset, InterpolatesCrossing) {
    const std::vector<double> u = {0.0, 1.0, 2.0, 3.0};
    const std::vector<double> chi = {0.0, 0.01, 0.03, 0.5};
    EXPECT_NEAR(onset_coordinate(u, chi), 1.5, 1e-12);
}

TEST(Onset, ToleratesNoise) {
    const std::vector<double> u = {0.0, 1.0, 2.0, 3.0, 4.0};
    const std::vector<double> chi = {0.0, 0.03, 0.01, 0.2, 0.6};
    EXPECT_NEAR(onset_coordinate(u, chi), 1.0, 1e-12); // pooled 0.02 at u = 1, 2
}

TEST(Onset, UncoveredThrows) {
    const std::vector<double> u = {0.0, 1.0};
    const std::vector<double> chi = {0.5, 0.6};
    EXPECT_THROW(onset_coordinate(u, chi), DomainError);
}

TEST(Beta, IdenticalSidesGiveOne) {
    const auto s = cantilever_slab(coupling_trap(two_pi * 10e3), 0.0, 450e-9, {c4, 200 * c4, 4}, {c4, 200 * c4, 4});
    EXPECT_NEAR(predicted_beta(s, h * 50e3), 1.0, 1e-9);
}

TEST(Beta, GrowsWithMetallizedAdsorbate) {
    const double b1 = predicted_beta(slab(0.0, 100), h * 50e3);
    const double b2 = predicted_beta(slab(0.0, 200), h * 50e3);
    const double b3 = predicted_beta(slab(0.0, 400), h * 50e3);
    EXPECT_LT(b1, b2);
    EXPECT_LT(b2, b3);
}

TEST(Calibrate, ClosedLoop) {
    const double zc = 0.3e-6;
    const auto c = curves(zc);
    const double beta = predicted_beta(slab(zc), h * 50e3);
    const auto r = calibrate(c.met, c.diel, beta);
    EXPECT_NEAR(r.z_c, zc, 50e-9);
    EXPECT_NEAR(r.c_ad_metallized / (200 * c4), 1.0, 0.1);
    EXPECT_NEAR(r.c_ad_dielectric / (10 * c4d), 1.0, 0.1);
    EXPECT_NEAR(r.predicted_beta / beta, 1.0, 0.02);
    EXPECT_GT(r.d_uncertainty, 0.0);
}

TEST(Calibrate, UnreachableBeta) {
    const auto c = curves(0.0);
    try {
        calibrate(c.met, c.diel, 1e4);
        FAIL() << "expected unreachable";
    } catch (const PhysicsError& e) {
        EXPECT_EQ(e.category(), "unreachable");
    }
}

TEST(Calibrate, CubicAdsorbateMovesFaceModestly) {
    const auto c = curves(0.0);
    const double beta = predicted_beta(slab(0.0), h * 50e3);
    CalibrationOptions o;
    const auto r4 = calibrate(c.met, c.diel, beta, o);
    o.exponent_metallized = 3;
    const auto r3 = calibrate(c.met, c.diel, beta, o);
    EXPECT_LT(std::abs(r3.z_c - r4.z_c), 160e-9);
}

TEST(Calibrate, RejectsBadOptions) {
    const auto c = curves(0.0);
    CalibrationOptions o;
    o.exponent_dielectric = 5;
    EXPECT_THROW(calibrate(c.met, c.diel, 3.0, o), DomainError);
    EXPECT_THROW(calibrate(c.met, c.diel, -1.0), DomainError);
}
