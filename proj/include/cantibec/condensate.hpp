#ifndef CANTIBEC_CONDENSATE_HPP
#define CANTIBEC_CONDENSATE_HPP

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cantibec/constants.hpp"
#include "cantibec/errors.hpp"
#include "cantibec/numerics.hpp"
#include "cantibec/potential.hpp"

namespace cantibec {

struct CondensateState {
    double total_atoms = 0.0;
    double temperature = 0.0; // K
    HarmonicTrap trap;

    double critical_temperature = 0.0;
    double condensate_atoms = 0.0;
    double thermal_atoms = 0.0;
    double chemical_potential = 0.0;  // J
    double tf_radius_z = 0.0;         // m
    double mean_density = 0.0;        // m^-3, condensed fraction
    double mean_square_density = 0.0; // m^-6, condensed fraction
    double radial_energy_ratio = 1.0; // E_kin,perp / E_pot,perp
};

// k_B T_c = 0.94 hbar omega_bar N^(1/3)
inline double critical_temperature(double atoms, const HarmonicTrap& trap, const PhysicalConstants& k = {}) {
    return 0.94 * k.hbar * trap.mean_frequency() * std::cbrt(atoms) / k.boltzmann;
}

// Thomas-Fermi chemical potential mu_c = (hbar omega_bar / 2) (15 N a_s / a_bar)^(2/5).
inline double chemical_potential(double condensate_atoms, const HarmonicTrap& trap,
                                 const PhysicalConstants& k = {}) {
    if (condensate_atoms <= 0.0) return 0.0;
    const double wbar = trap.mean_frequency();
    const double abar = std::sqrt(k.hbar / (trap.mass * wbar));
    return 0.5 * k.hbar * wbar * std::pow(15.0 * condensate_atoms * k.scattering_length / abar, 0.4);
}

// Inverse of chemical_potential in the atom number.
inline double atoms_for_chemical_potential(double mu, const HarmonicTrap& trap, const PhysicalConstants& k = {}) {
    if (mu <= 0.0) return 0.0;
    const double wbar = trap.mean_frequency();
    const double abar = std::sqrt(k.hbar / (trap.mass * wbar));
    return std::pow(2.0 * mu / (k.hbar * wbar), 2.5) * abar / (15.0 * k.scattering_length);
}

// Radial kinetic-to-potential energy ratio of the condensate from a
// Gaussian variational ansatz in the radial plane, with the axial profile
// treated in the Thomas-Fermi approximation and optimised analytically.
//
// Per particle, for radial width sigma and axial half-length Z:
//   E = hbar^2/(2 m sigma^2) + m w_perp^2 sigma^2 / 2
//       + m w_ax^2 Z^2 / 10 + A / Z,      A = 3 N g / (20 pi sigma^2)
// with Z^3 = 5 A / (m w_ax^2) at the axial optimum.
inline double radial_energy_ratio(double condensate_atoms, const HarmonicTrap& trap,
                                  const PhysicalConstants& k = {}) {
    if (condensate_atoms < 0.0) throw DomainError("condensate atom number must be >= 0");
    if (condensate_atoms == 0.0) return 1.0;
    const double m = trap.mass;
    const double w_perp = std::sqrt(trap.omega_y * trap.omega_z0);
    const double w_ax = trap.omega_x;
    const double g = k.interaction_strength();
    const double a_perp = std::sqrt(k.hbar / (m * w_perp));
    const double scale = k.hbar * w_perp;

    auto energy = [&](double log_width) {
        const double s = a_perp * std::exp(log_width);
        const double a = 3.0 * condensate_atoms * g / (20.0 * pi * s * s);
        const double z = std::cbrt(5.0 * a / (m * w_ax * w_ax));
        const double e = k.hbar * k.hbar / (2.0 * m * s * s) + 0.5 * m * w_perp * w_perp * s * s +
                         0.1 * m * w_ax * w_ax * z * z + a / z;
        return e / scale;
    };
    const auto best = numerics::golden_section(energy, -2.0, 6.0, 1e-8, 1.0);
    const double s = a_perp * std::exp(best.x);
    const double kinetic = k.hbar * k.hbar / (2.0 * m * s * s);
    const double potential = 0.5 * m * w_perp * w_perp * s * s;
    const double ratio = kinetic / potential;
    if (!(ratio > 0.0) || !std::isfinite(ratio)) {
        throw PhysicsError("non-convergence", "radial energy minimisation failed");
    }
    return ratio;
}

// Bimodal equilibrium state of N atoms at temperature T.
inline CondensateState thermodynamics(double atoms, double temperature, const HarmonicTrap& trap,
                                      const PhysicalConstants& k = {}) {
    if (!(atoms >= 1.0)) throw DomainError("atom number must be >= 1");
    if (!(temperature >= 0.0)) throw DomainError("temperature must be >= 0");
    trap.validate();

    CondensateState s;
    s.total_atoms = atoms;
    s.temperature = temperature;
    s.trap = trap;
    s.critical_temperature = critical_temperature(atoms, trap, k);
    const double reduced = temperature / s.critical_temperature;
    s.thermal_atoms = std::min(atoms, atoms * reduced * reduced * reduced);
    s.condensate_atoms = atoms - s.thermal_atoms;
    s.chemical_potential = chemical_potential(s.condensate_atoms, trap, k);
    s.tf_radius_z = std::sqrt(2.0 * s.chemical_potential / (trap.mass * trap.omega_z0 * trap.omega_z0));
    const double peak = s.chemical_potential / k.interaction_strength();
    s.mean_density = 4.0 / 7.0 * peak;
    s.mean_square_density = 8.0 / 21.0 * peak * peak;
    s.radial_energy_ratio = radial_energy_ratio(s.condensate_atoms, trap, k);
    return s;
}

inline CondensateState thermodynamics_reduced(double atoms, double t_over_tc, const HarmonicTrap& trap,
                                              const PhysicalConstants& k = {}) {
    return thermodynamics(atoms, t_over_tc * critical_temperature(atoms, trap, k), trap, k);
}

struct Mode {
    std::string label;
    double frequency; // rad/s
};

// Collective modes probed by the cantilever: Kohn (c.o.m.), the m_l = 0
// mode at 2 omega_z and the |m_l| = 2 quadrupole mode.
inline std::vector<Mode> mode_spectrum(const CondensateState& s) {
    const double wz = s.trap.omega_z0;
    return {
        {"com", wz},
        {"m0", 2.0 * wz},
        {"quadrupole", wz * std::sqrt(2.0 * (1.0 + s.radial_energy_ratio))},
    };
}

// gamma = L <n^2>
inline double three_body_rate(const CondensateState& s, const PhysicalConstants& k = {}) {
    return k.three_body_coefficient * s.mean_square_density;
}

// Mean density of the thermal component, <n> = N_th omega_bar^3 (m / 4 pi k_B T)^(3/2).
inline double thermal_mean_density(const CondensateState& s, const PhysicalConstants& k = {}) {
    if (s.temperature <= 0.0 || s.thermal_atoms <= 0.0) return 0.0;
    const double wbar = s.trap.mean_frequency();
    return s.thermal_atoms * wbar * wbar * wbar *
           std::pow(s.trap.mass / (4.0 * pi * k.boltzmann * s.temperature), 1.5);
}

// tau_el = 1 / (sqrt(2) <n> sigma_el v_bar); nullopt marks a collisionless gas.
inline std::optional<double> elastic_collision_time(double mean_density, double temperature, double mass,
                                                    const PhysicalConstants& k = {}) {
    if (temperature <= 0.0 || mean_density <= 0.0) return std::nullopt;
    const double sigma = 8.0 * pi * k.scattering_length * k.scattering_length;
    const double vbar = std::sqrt(8.0 * k.boltzmann * temperature / (pi * mass));
    return 1.0 / (std::sqrt(2.0) * mean_density * sigma * vbar);
}

// Collision time of the thermal atoms, which drive evaporation.
inline std::optional<double> elastic_collision_time(const CondensateState& s, const PhysicalConstants& k = {}) {
    return elastic_collision_time(thermal_mean_density(s, k), s.temperature, s.trap.mass, k);
}

struct Lifetime {
    double lifetime = 0.0; // s
    bool extrapolated = false;
};

// Near-surface trap lifetime, power-law interpolated through 18 ms at
// 10 kHz and 55 ms at 5 kHz. Position noise heating scales as omega_z^4 and
// frequency noise as omega_z^2; neither is modelled separately here.
inline Lifetime lifetime_budget(double omega_z) {
    if (!(omega_z > 0.0)) throw DomainError("trap frequency must be positive");
    constexpr double f_hi = 10e3, tau_hi = 18e-3;
    constexpr double f_lo = 5e3, tau_lo = 55e-3;
    const double f = omega_z / two_pi;
    const double exponent = std::log(tau_lo / tau_hi) / std::log(f_lo / f_hi);
    return {tau_hi * std::pow(f / f_hi, exponent), f < 3e3 || f > 14e3};
}

} // namespace cantibec

#endif
