#include <cmath>

#include <gtest/gtest.h>

#include "cantibec/potential.hpp"

using namespace cantibec;

namespace {
const PhysicalConstants k{};
const double c4 = k.casimir_polder_c4();
const double c4d = dielectric_c4(c4, sin_permittivity, sin_phi);

CombinedPotential slab(double f, double cm = 200.0, double cd = 10.0) {
    return cantilever_slab(coupling_trap(two_pi * f), 0.0, 450e-9, {c4, cm * c4, 4}, {c4d, cd * c4d, 4});
}
} // namespace

TEST(Potential, CasimirPolderCoefficient) {
    const double expected = 3.0 * k.hbar * k.light_speed * k.polarizability / (32.0 * pi * pi * k.vacuum_permittivity);
    EXPECT_DOUBLE_EQ(c4, expected);
    EXPECT_NEAR(c4d / c4, 0.6 * 0.77, 1e-15);
}

TEST(Potential, ZeroCoefficientsLeaveHarmonicTrap) {
    auto p = at_distance(slab(10e3, 0.0, 0.0), metallized_side, 1.5e-6);
    for (auto& s : p.sides) s.cp_coefficient = 0.0;
    const auto t = characterize_trap(p);
    ASSERT_TRUE(t.exists);
    EXPECT_TRUE(t.unbounded);
    EXPECT_NEAR(t.minimum, p.trap.center, 1e-15);
    EXPECT_NEAR(t.frequency, p.trap.omega_z0, 1e-6 * p.trap.omega_z0);
}

TEST(Potential, AtDistancePlacesTrap) {
    const auto p = at_distance(slab(10e3), dielectric_side, 2e-6);
    EXPECT_NEAR(p.sides[dielectric_side].distance(p.trap.center, 0.0), 2e-6, 1e-18);
    EXPECT_EQ(facing_side(p, p.trap.center).value(), dielectric_side);
}

TEST(Potential, InsideSlabIsDomainError) {
    const auto p = slab(10e3);
    EXPECT_THROW(evaluate_potential(p, -200e-9), DomainError);
}

TEST(Potential, SurfaceWeakensTrap) {
    const auto p = at_distance(slab(10.5e3), metallized_side, 1.5e-6);
    const auto t = characterize_trap(p);
    ASSERT_TRUE(t.exists);
    EXPECT_LT(t.frequency, p.trap.omega_z0);
    EXPECT_LT(t.minimum, p.trap.center); // pulled towards the face below
    EXPECT_GT(t.barrier, p.sides[0].position);
    EXPECT_LT(t.barrier, t.minimum);
    EXPECT_NEAR(t.depth, evaluate_potential(p, t.barrier) - evaluate_potential(p, t.minimum), 1e-9 * t.depth);
}

TEST(Potential, DepthDecreasesTowardsSurface) {
    const auto base = slab(10e3);
    double previous = INFINITY;
    for (double d = 3e-6; d > 1.3e-6; d -= 0.2e-6) {
        const auto t = characterize_trap(at_distance(base, metallized_side, d));
        ASSERT_TRUE(t.exists);
        EXPECT_LT(t.depth, previous);
        previous = t.depth;
    }
}

TEST(Potential, VanishingDistanceBracketsExistence) {
    const auto base = slab(10e3);
    const double d = vanishing_distance(base, metallized_side);
    EXPECT_FALSE(characterize_trap(at_distance(base, metallized_side, d)).exists);
    EXPECT_TRUE(characterize_trap(at_distance(base, metallized_side, d + 2e-9)).exists);
}

TEST(Potential, EffectiveThicknessWindows) {
    EXPECT_NEAR(effective_thickness(slab(10e3, 0.0, 0.0)), 1.4e-6, 0.2e-6);
    EXPECT_NEAR(effective_thickness(slab(10e3)), 2.2e-6, 0.3e-6);
}

TEST(Potential, DistanceForDepthRoundTrip) {
    const auto base = slab(10e3);
    const double target = k.planck() * 50e3;
    const double d = distance_for_depth(base, dielectric_side, target);
    const auto t = characterize_trap(at_distance(base, dielectric_side, d));
    EXPECT_NEAR(t.depth / target, 1.0, 1e-6);
}

TEST(Potential, DerivativesMatchFiniteDifferences) {
    const auto p = at_distance(slab(10.5e3), metallized_side, 1.5e-6);
    for (double x : {0.7e-6, 1.0e-6, 1.5e-6, 2.2e-6}) {
        const double z = p.sides[0].position + x;
        const double hh = 1e-11;
        const double fd = (evaluate_potential(p, z + hh) - evaluate_potential(p, z - hh)) / (2 * hh);
        const double d1 = potential_derivative(p, z, 0.0, 1);
        EXPECT_NEAR(fd, d1, 1e-6 * std::max(std::abs(d1), p.trap.mass * p.trap.omega_z0 * p.trap.omega_z0 * 1e-9));
    }
}

TEST(Potential, DisplacementMovesSurface) {
    const auto p = at_distance(slab(10.5e3), metallized_side, 1.5e-6);
    const double z = p.trap.center;
    // moving the face up by a equals moving the atom down by a, up to the trap term
    const double a = 50e-9;
    const double surface_only = evaluate_potential(p, z, a) - evaluate_potential(p, z, 0.0);
    EXPECT_LT(surface_only, 0.0);
}
