#ifndef CANTIBEC_CANTILEVER_HPP
#define CANTIBEC_CANTILEVER_HPP

#include <cmath>

#include "cantibec/constants.hpp"
#include "cantibec/errors.hpp"

namespace cantibec {

struct Cantilever {
    double resonance = two_pi * 10e3;   // omega_m, rad/s
    double quality = 3100.0;            // Q = omega_m / (2 kappa)
    double effective_mass = 5e-12;      // kg
    double environment_temperature = 300.0; // K
    double drive_efficiency = 80e-9;    // m per Vpp at resonance

    // amplitude decay rate
    double kappa() const { return resonance / (2.0 * quality); }

    void validate() const {
        if (!(resonance > 0.0)) throw DomainError("cantilever resonance must be positive");
        if (!(quality > 0.5)) throw DomainError("quality factor must exceed 1/2");
        if (!(effective_mass > 0.0)) throw DomainError("effective mass must be positive");
        if (!(environment_temperature >= 0.0)) throw DomainError("temperature must be >= 0");
        if (!(drive_efficiency >= 0.0)) throw DomainError("drive efficiency must be >= 0");
    }
};

// Damped driven response, normalised so that a(omega_m) = efficiency * Vpp:
//   a = a_res (omega_m^2 / Q) / sqrt((omega_m^2 - w^2)^2 + (w omega_m / Q)^2)
// The FWHM of a^2 is exactly omega_m / Q.
inline double driven_amplitude(const Cantilever& c, double drive_vpp, double omega_p) {
    if (!(drive_vpp >= 0.0)) throw DomainError("drive voltage must be >= 0");
    const double wm2 = c.resonance * c.resonance;
    const double detune = wm2 - omega_p * omega_p;
    const double damping = omega_p * c.resonance / c.quality;
    const double a_res = c.drive_efficiency * drive_vpp;
    return a_res * (wm2 / c.quality) / std::sqrt(detune * detune + damping * damping);
}

// Frequency of maximal driven amplitude, omega_m sqrt(1 - 1/(2 Q^2)).
inline double peak_response_frequency(const Cantilever& c) {
    return c.resonance * std::sqrt(1.0 - 0.5 / (c.quality * c.quality));
}

// r.m.s. thermal amplitude sqrt(k_B T / (M omega_m^2)).
inline double thermal_amplitude(const Cantilever& c, const PhysicalConstants& k = {}) {
    return std::sqrt(k.boltzmann * c.environment_temperature /
                     (c.effective_mass * c.resonance * c.resonance));
}

// Zero-point amplitude sqrt(hbar / (2 M omega_m)).
inline double ground_state_amplitude(const Cantilever& c, const PhysicalConstants& k = {}) {
    return std::sqrt(k.hbar / (2.0 * c.effective_mass * c.resonance));
}

} // namespace cantibec

#endif
