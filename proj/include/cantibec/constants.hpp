#ifndef CANTIBEC_CONSTANTS_HPP
#define CANTIBEC_CONSTANTS_HPP

#include <numbers>
#include <string>

#include "cantibec/errors.hpp"

namespace cantibec {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// CODATA values plus the 87Rb parameters used throughout. Every field can be
// overridden from a scenario file.
struct PhysicalConstants {
    double hbar = 1.054571817e-34;              // J s
    double boltzmann = 1.380649e-23;            // J/K
    double light_speed = 299792458.0;           // m/s
    double vacuum_permittivity = 8.8541878128e-12; // F/m
    double rb87_mass = 1.443160648e-25;         // kg
    double scattering_length = 5.4e-9;          // m
    double polarizability = 5.26e-39;           // F m^2, ground state static
    double three_body_coefficient = 1.8e-41;    // m^6/s

    double planck() const { return two_pi * hbar; }

    // Retarded Casimir-Polder coefficient of a perfect conductor.
    double casimir_polder_c4() const {
        return 3.0 * hbar * light_speed * polarizability /
               (32.0 * pi * pi * vacuum_permittivity);
    }

    // Two-body s-wave coupling g = 4 pi hbar^2 a_s / m.
    double interaction_strength() const {
        return 4.0 * pi * hbar * hbar * scattering_length / rb87_mass;
    }

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0)) {
                throw DomainError(std::string("physical constant must be positive: ") + name);
            }
        };
        positive(hbar, "hbar");
        positive(boltzmann, "boltzmann");
        positive(light_speed, "light_speed");
        positive(vacuum_permittivity, "vacuum_permittivity");
        positive(rb87_mass, "rb87_mass");
        positive(scattering_length, "scattering_length");
        positive(polarizability, "polarizability");
        positive(three_body_coefficient, "three_body_coefficient");
    }
};

// C4 of a dielectric half-space: C4 (eps-1)/(eps+1) Phi(eps).
inline double dielectric_c4(double conductor_c4, double permittivity, double phi) {
    return conductor_c4 * (permittivity - 1.0) / (permittivity + 1.0) * phi;
}

// SiN values used for the uncoated cantilever face.
inline constexpr double sin_permittivity = 4.0;
inline constexpr double sin_phi = 0.77;

} // namespace cantibec

#endif
