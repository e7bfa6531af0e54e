#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "cantibec/dynamics.hpp"

using namespace cantibec;

namespace {
const PhysicalConstants k{};
const double c4 = k.casimir_polder_c4();
const double c4d = dielectric_c4(c4, sin_permittivity, sin_phi);

CombinedPotential slab(double f) {
    return cantilever_slab(coupling_trap(two_pi * f), 0.0, 450e-9, {c4, 200 * c4, 4}, {c4d, 10 * c4d, 4});
}

CombinedPotential reference() { return at_distance(slab(10.5e3), metallized_side, 1.5e-6); }

DynamicsSetup coupling_setup() {
    DynamicsSetup s;
    s.potential = at_distance(slab(10.9e3), metallized_side, 1.4e-6);
    s.reduced_temperature = 1.0;
    s.cantilever.resonance = two_pi * 9680.0;
    s.hold_time = 3e-3;
    s.ensemble.particle_count = 400;
    return s;
}
} // namespace

TEST(Dynamics, ZeroAmplitudeNoModulation) {
    const auto m = modulation_transfer(reference(), 0.0);
    EXPECT_EQ(m.delta_z_t, 0.0);
    EXPECT_EQ(m.delta_omega_z, 0.0);
    EXPECT_EQ(m.delta_depth, 0.0);
}

TEST(Dynamics, ModulationGrowsWithAmplitude) {
    const double a50 = std::abs(modulation_transfer(reference(), 50e-9).delta_z_t);
    const double a120 = std::abs(modulation_transfer(reference(), 120e-9).delta_z_t);
    EXPECT_GT(a120, a50);
    EXPECT_GT(a50, 0.0);
}

TEST(Dynamics, OverDrivenReported) {
    const auto p = at_distance(slab(10.5e3), metallized_side, 1.3e-6);
    try {
        modulation_transfer(p, 600e-9);
        FAIL() << "expected over-driven";
    } catch (const PhysicsError& e) {
        EXPECT_EQ(e.category(), "over-driven");
    }
}

TEST(Dynamics, EnsembleDeterministicAndInsideBarrier) {
    const auto p = reference();
    const auto t = characterize_trap(p);
    const auto state = thermodynamics_reduced(2000, 0.5, p.trap);
    EnsembleConfig cfg;
    cfg.particle_count = 500;
    const auto a = sample_ensemble(p, state, t, cfg);
    const auto b = sample_ensemble(p, state, t, cfg);
    ASSERT_EQ(a.particles.size(), 500u);
    for (std::size_t i = 0; i < a.particles.size(); ++i) {
        EXPECT_EQ(a.particles[i].z, b.particles[i].z);
        EXPECT_EQ(a.particles[i].v, b.particles[i].v);
        EXPECT_GT(a.particles[i].z, t.barrier);
    }
    EXPECT_NEAR(double(a.thermal_count) / 500.0, 0.125, 0.03);
}

TEST(Dynamics, ZeroTemperatureHasNoThermalParticles) {
    const auto p = reference();
    const auto state = thermodynamics(2000, 0.0, p.trap);
    EnsembleConfig cfg;
    cfg.particle_count = 200;
    const auto e = sample_ensemble(p, state, characterize_trap(p), cfg);
    EXPECT_EQ(e.thermal_count, 0u);
    for (const auto& pt : e.particles) EXPECT_EQ(pt.v, 0.0);
}

TEST(Dynamics, UndrivenCondensateSurvives) {
    const auto p = reference();
    const auto state = thermodynamics(2000, 0.0, p.trap);
    EnsembleConfig cfg;
    cfg.particle_count = 200;
    const auto e = sample_ensemble(p, state, characterize_trap(p), cfg);
    const auto ev = evolve_ensemble(p, Drive{0.0, two_pi * 10e3}, e, 2e-3, cfg);
    EXPECT_EQ(ev.survivors, 200u);
    EXPECT_NEAR(ev.background, std::exp(-2e-3 / lifetime_budget(characterize_trap(p).frequency).lifetime), 1e-12);
}

TEST(Dynamics, HarmonicVerletConservesEnergy) {
    const double w = two_pi * 1e3, dt = 1.0 / (64.0 * 1e3);
    Particle pt{1e-6, 0.0};
    auto accel = [&](double z, double) { return -w * w * z; };
    double a = accel(pt.z, 0.0);
    auto e = [&] { return 0.5 * pt.v * pt.v + 0.5 * w * w * pt.z * pt.z; };
    const double e0 = e();
    double worst = 0.0;
    for (int i = 0; i < 64000; ++i) {
        velocity_verlet_step(pt, a, i * dt, dt, accel);
        worst = std::max(worst, std::abs(e() / e0 - 1.0));
    }
    EXPECT_LT(worst, 3e-3); // bounded oscillation, no secular growth
}

TEST(Dynamics, TimeStepLimit) {
    const auto p = reference();
    const auto state = thermodynamics(2000, 0.0, p.trap);
    EnsembleConfig cfg;
    cfg.particle_count = 10;
    const auto e = sample_ensemble(p, state, characterize_trap(p), cfg);
    cfg.time_step = 1.0 / (10.0 * 10.5e3);
    EXPECT_THROW(evolve_ensemble(p, Drive{}, e, 1e-3, cfg), DomainError);
}

TEST(Dynamics, ContrastAndSnr) {
    const auto c = contrast_and_snr(600.0, 800.0, 32.0);
    EXPECT_DOUBLE_EQ(c.contrast, 0.25);
    EXPECT_DOUBLE_EQ(c.snr, 6.25);
    EXPECT_FALSE(c.negative);
    EXPECT_TRUE(contrast_and_snr(810.0, 800.0, 32.0).negative);
}

TEST(Dynamics, ResonantDriveLosesMoreThanDetuned) {
    const auto s = coupling_setup();
    const std::vector<double> w = {s.cantilever.resonance, s.cantilever.resonance + two_pi * 30.0};
    const auto r = resonance_scan(s, w, false);
    EXPECT_LT(r.observable[0], r.observable[1]);
}

TEST(Dynamics, ScanIdenticalAcrossWorkerCounts) {
    const auto s = coupling_setup();
    const std::vector<double> a = {40e-9, 80e-9};
    auto run = [&](unsigned n) {
        ScopedWorkers guard(n);
        std::ostringstream os;
        write_csv(os, amplitude_scan(s, a));
        return os.str();
    };
    EXPECT_EQ(run(1), run(3));
}

TEST(Dynamics, CsvCarriesFitBlock) {
    ScanResult r;
    r.kind = "resonance";
    r.abscissa = {1.0};
    r.observable = {2.0};
    r.stderr_ = {0.1};
    r.flags = {0};
    numerics::LorentzianFit f;
    f.center = 3.0;
    f.fwhm = 0.5;
    r.fit = f;
    std::ostringstream os;
    write_csv(os, r);
    EXPECT_EQ(os.str().substr(0, 27), "abscissa,observable,stderr\n");
    EXPECT_NE(os.str().find("# fit_center=3.00000000e+00, fit_fwhm=5.00000000e-01"), std::string::npos);
}

TEST(Dynamics, ConstantDepthSchedule) {
    const std::vector<double> w = {two_pi * 6e3, two_pi * 9e3};
    const double depth = k.planck() * 70e3;
    const auto base = slab(10e3);
    const auto ds = constant_depth_schedule(base, metallized_side, w, depth);
    for (std::size_t i = 0; i < w.size(); ++i) {
        auto p = base;
        p.trap = coupling_trap(w[i]);
        EXPECT_NEAR(characterize_trap(at_distance(p, metallized_side, ds[i])).depth / depth, 1.0, 1e-5);
    }
    EXPECT_GT(ds[0], ds[1]);
}

TEST(Dynamics, CoherentStateDisplacement) {
    const double x = coherent_state_displacement(100, two_pi * 100.0, 1.0, 4e-3);
    EXPECT_NEAR(x, 3.833e-7, 0.001e-7);
    EXPECT_NEAR(coherent_state_displacement(100, two_pi * 100.0, 2.0, 4e-3), 2.0 * x, 1e-20);
}

TEST(Dynamics, AmplitudeForAlphaScaling) {
    const double a1 = amplitude_for_alpha(0.1, two_pi * 10e3, 2000, 20e-3, 1.0);
    EXPECT_NEAR(amplitude_for_alpha(0.1, two_pi * 10e3, 2000, 20e-3, 2.0), 2.0 * a1, 1e-24);
    EXPECT_NEAR(amplitude_for_alpha(0.2, two_pi * 10e3, 2000, 20e-3, 1.0), 0.5 * a1, 1e-24);
    EXPECT_THROW(amplitude_for_alpha(0.0, 1.0, 1.0, 1.0), DomainError);
}
