#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "cantibec/surface_loss.hpp"

using namespace cantibec;

namespace {
const PhysicalConstants k{};
const double c4 = k.casimir_polder_c4();
const double c4d = dielectric_c4(c4, sin_permittivity, sin_phi);

CombinedPotential slab() {
    return cantilever_slab(coupling_trap(two_pi * 10e3), 0.0, 450e-9, {c4, 200 * c4, 4}, {c4d, 10 * c4d, 4});
}

std::vector<double> grid() {
    std::vector<double> ds;
    for (double d = 0.9e-6; d <= 2.6e-6 + 1e-12; d += 20e-9) ds.push_back(d);
    return ds;
}
} // namespace

TEST(SurfaceLoss, EvaporationFactorArithmetic) {
    EXPECT_DOUBLE_EQ(evaporation_factor(4.0), std::pow(2.0, -2.5) * (1.0 - 0.25 + 1.5 / 16.0));
    EXPECT_NEAR(evaporation_factor(4.0), 0.149155, 5e-7);
}

TEST(SurfaceLoss, CutoffBoundsRate) {
    const double tau = 0.4e-3;
    for (double eta = -1.0; eta < 20.0; eta += 0.05) {
        EXPECT_LE(evaporation_rate(eta, tau, true), 1.0 / (mixing_cutoff * tau) * (1.0 + 1e-12));
    }
    EXPECT_THROW(evaporation_rate(-0.5, tau, false), DomainError);
    EXPECT_EQ(evaporation_rate(INFINITY, tau, false), 0.0);
}

TEST(SurfaceLoss, ZeroHoldIsTruncation) {
    const auto state = thermodynamics_reduced(2000, 0.8, coupling_trap(two_pi * 10e3));
    TrapCharacterization t;
    t.exists = true;
    LossModelConfig cfg;
    cfg.hold_time = 0.0;
    for (double eta : {0.5, 2.0, 5.0}) {
        t.depth = eta * k.boltzmann * state.temperature;
        EXPECT_EQ(remaining_fraction(t, state, cfg), -std::expm1(-eta));
    }
}

TEST(SurfaceLoss, VanishedAndUnboundedTraps) {
    const auto state = thermodynamics_reduced(2000, 0.8, coupling_trap(two_pi * 10e3));
    TrapCharacterization gone;
    EXPECT_EQ(remaining_fraction(gone, state, {}), 0.0);
    TrapCharacterization open;
    open.exists = true;
    open.unbounded = true;
    EXPECT_EQ(remaining_fraction(open, state, {}), 1.0);
}

TEST(SurfaceLoss, CutoffContinuousInDepth) {
    const auto state = thermodynamics_reduced(2000, 0.8, coupling_trap(two_pi * 10e3));
    LossModelConfig cfg;
    cfg.rate_cutoff = true;
    cfg.hold_time = 1e-3;
    TrapCharacterization t;
    t.exists = true;
    const double kt = k.boltzmann * state.temperature;
    double previous = -1.0, jump = 0.0;
    for (double eta = 0.01; eta < 8.0; eta += 1e-4) {
        t.depth = eta * kt;
        const double chi = remaining_fraction(t, state, cfg);
        if (previous >= 0.0) jump = std::max(jump, std::abs(chi - previous));
        previous = chi;
    }
    EXPECT_LT(jump, 1e-3);
}

TEST(SurfaceLoss, BimodalCondensateTruncation) {
    const auto state = thermodynamics_reduced(2000, 0.5, coupling_trap(two_pi * 10e3));
    LossModelConfig cfg;
    cfg.bimodal = true;
    cfg.hold_time = 0.0;
    TrapCharacterization t;
    t.exists = true;
    t.depth = 0.5 * state.chemical_potential;
    const double chi = remaining_fraction(t, state, cfg);
    EXPECT_NEAR(chi * 2000, atoms_for_chemical_potential(t.depth, state.trap), 1e-6);
}

TEST(SurfaceLoss, CurveMonotoneInDistance) {
    const auto state = thermodynamics_reduced(2000, 0.8, coupling_trap(two_pi * 10e3));
    LossModelConfig cfg;
    const auto curve = loss_curve(slab(), metallized_side, grid(), state, cfg);
    EXPECT_EQ(curve.fractions.front(), 0.0);
    EXPECT_GT(curve.fractions.back(), 0.9);
    for (std::size_t i = 1; i < curve.fractions.size(); ++i) {
        EXPECT_GE(curve.fractions[i], curve.fractions[i - 1] - 1e-12);
    }
}

TEST(SurfaceLoss, TemperatureFitClosedLoop) {
    const auto state = thermodynamics_reduced(2000, 0.8, coupling_trap(two_pi * 10e3));
    LossModelConfig cfg;
    const auto curve = loss_curve(slab(), metallized_side, grid(), state, cfg);
    const auto fit = fit_temperature(curve, slab(), 50e-9, 20e-6);
    EXPECT_NEAR(fit.temperature / state.temperature, 1.0, 1e-3);
    EXPECT_TRUE(fit.constrained);
}

TEST(SurfaceLoss, FlatCurveIsUnconstrained) {
    const auto state = thermodynamics_reduced(2000, 0.8, coupling_trap(two_pi * 10e3));
    LossModelConfig cfg;
    std::vector<double> far;
    for (double d = 20e-6; d < 30e-6; d += 1e-6) far.push_back(d);
    const auto curve = loss_curve(slab(), metallized_side, far, state, cfg);
    EXPECT_FALSE(fit_temperature(curve, slab(), 50e-9, 20e-6).constrained);
}

TEST(SurfaceLoss, CsvFormat) {
    const auto state = thermodynamics_reduced(2000, 0.8, coupling_trap(two_pi * 10e3));
    const std::vector<double> ds = {1.0e-6, 2.0e-6};
    std::ostringstream os;
    write_csv(os, loss_curve(slab(), metallized_side, ds, state, {}));
    const auto text = os.str();
    EXPECT_EQ(text.substr(0, 13), "d_m,chi,flag\n");
    EXPECT_NE(text.find("2.00000000e-06,"), std::string::npos);
}
