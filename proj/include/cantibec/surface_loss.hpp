#ifndef CANTIBEC_SURFACE_LOSS_HPP
#define CANTIBEC_SURFACE_LOSS_HPP

// Loss of atoms held in front of the undriven cantilever: sudden loss of
// the Boltzmann tail above the reduced trap depth followed by 1D
// evaporation during the hold time.

#include <algorithm>
#include <cmath>
#include <optional>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "cantibec/condensate.hpp"
#include "cantibec/constants.hpp"
#include "cantibec/csv.hpp"
#include "cantibec/errors.hpp"
#include "cantibec/numerics.hpp"
#include "cantibec/parallel.hpp"
#include "cantibec/potential.hpp"

namespace cantibec {

struct LossModelConfig {
    bool bimodal = false;
    bool rate_cutoff = false;
    double hold_time = 1e-3; // s

    void validate() const {
        if (!(hold_time >= 0.0)) throw DomainError("hold time must be >= 0");
    }
};

// f(eta) = 2^(-5/2) (1 - 1/eta + 3/(2 eta^2))
inline double evaporation_factor(double eta) {
    return std::pow(2.0, -2.5) * (1.0 - 1.0 / eta + 1.5 / (eta * eta));
}

// Offset of the cross-dimensional mixing cutoff, in units of tau_el.
inline constexpr double mixing_cutoff = 2.7;

// Evaporation rate Gamma(eta). The raw law f(eta) e^-eta / tau_el holds
// for eta >= 4; with the cutoff the inverse rate gains 2.7 tau_el.
inline double evaporation_rate(double eta, double tau_el, bool cutoff) {
    if (!(tau_el > 0.0)) throw DomainError("elastic collision time must be positive");
    if (std::isinf(eta) && eta > 0.0) return 0.0;
    if (eta <= 0.0) {
        if (!cutoff) throw DomainError("raw evaporation law undefined for eta <= 0; enable the cutoff");
        return 1.0 / (mixing_cutoff * tau_el);
    }
    const double f = evaporation_factor(eta);
    if (!(f > 0.0)) {
        if (!cutoff) throw DomainError("raw evaporation law needs f(eta) > 0");
        return 1.0 / (mixing_cutoff * tau_el);
    }
    const double raw = f * std::exp(-eta);
    if (!cutoff) return raw / tau_el;
    return 1.0 / (tau_el * (1.0 / raw + mixing_cutoff));
}

namespace detail {
// (1 - e^-eta) e^(-Gamma t_h) for one thermal population.
inline double truncated_survival(double eta, std::optional<double> tau_el, const LossModelConfig& cfg) {
    if (!(eta > 0.0)) return 0.0;
    if (std::isinf(eta)) return 1.0;
    double survive = -std::expm1(-eta);
    if (tau_el && cfg.hold_time > 0.0) {
        survive *= std::exp(-evaporation_rate(eta, *tau_el, cfg.rate_cutoff) * cfg.hold_time);
    }
    return survive;
}
} // namespace detail

// Fraction chi of atoms remaining after the hold time.
inline double remaining_fraction(const TrapCharacterization& c, const CondensateState& s,
                                 const LossModelConfig& cfg, const PhysicalConstants& k = {}) {
    cfg.validate();
    if (!c.exists) return 0.0;
    if (c.unbounded) return 1.0;
    const double u0 = c.depth;
    const auto tau = elastic_collision_time(s, k);
    const double kt = k.boltzmann * s.temperature;

    if (!cfg.bimodal) {
        const double eta = kt > 0.0 ? u0 / kt : (u0 > 0.0 ? INFINITY : 0.0);
        return detail::truncated_survival(eta, tau, cfg);
    }

    // Bimodal: thermal atoms see U_0 - mu_c, the condensate is truncated to
    // the atom number whose chemical potential equals U_0.
    const double mu = s.chemical_potential;
    double thermal_left = 0.0;
    double condensate_left = s.condensate_atoms;
    if (u0 >= mu) {
        const double eta = kt > 0.0 ? (u0 - mu) / kt : (u0 > mu ? INFINITY : 0.0);
        thermal_left = s.thermal_atoms * detail::truncated_survival(eta, tau, cfg);
    } else {
        condensate_left = std::min(s.condensate_atoms, atoms_for_chemical_potential(u0, s.trap, k));
    }
    return std::clamp((thermal_left + condensate_left) / s.total_atoms, 0.0, 1.0);
}

struct LossCurve {
    std::vector<double> distances; // m
    std::vector<double> fractions;
    std::vector<std::uint8_t> flags; // 1: trap vanished at this point
    // metadata
    HarmonicTrap trap;
    CondensateState state;
    LossModelConfig config;
    std::size_t side = metallized_side;

    void validate() const {
        if (distances.size() != fractions.size() || (!flags.empty() && flags.size() != distances.size())) {
            throw DomainError("loss curve columns differ in length");
        }
        for (double chi : fractions) {
            if (!(chi >= 0.0 && chi <= 1.0)) throw DomainError("remaining fraction outside [0, 1]");
        }
    }
};

// Characterizations along a distance grid in front of `side`. They do not
// depend on the cloud, so fits reuse them.
inline std::vector<TrapCharacterization> characterize_along(const CombinedPotential& base, std::size_t side,
                                                           std::span<const double> distances) {
    std::vector<TrapCharacterization> out(distances.size());
    parallel_for(distances.size(), [&](std::size_t i) {
        out[i] = characterize_trap(at_distance(base, side, distances[i]));
    });
    return out;
}

inline LossCurve loss_curve_from(std::span<const TrapCharacterization> chars, std::span<const double> distances,
                                 const CombinedPotential& base, std::size_t side, const CondensateState& state,
                                 const LossModelConfig& cfg, const PhysicalConstants& k = {}) {
    LossCurve curve;
    curve.distances.assign(distances.begin(), distances.end());
    curve.trap = base.trap;
    curve.state = state;
    curve.config = cfg;
    curve.side = side;
    for (const auto& c : chars) {
        curve.fractions.push_back(remaining_fraction(c, state, cfg, k));
        curve.flags.push_back(c.exists ? 0 : 1);
    }
    return curve;
}

inline LossCurve loss_curve(const CombinedPotential& base, std::size_t side, std::span<const double> distances,
                            const CondensateState& state, const LossModelConfig& cfg,
                            const PhysicalConstants& k = {}) {
    for (std::size_t i = 1; i < distances.size(); ++i) {
        if (!(distances[i] > distances[i - 1])) throw DomainError("loss-curve distances must increase");
    }
    const auto chars = characterize_along(base, side, distances);
    return loss_curve_from(chars, distances, base, side, state, cfg, k);
}

struct TemperatureFit {
    double temperature = 0.0;
    double residual = 0.0;
    bool constrained = true;
};

// Least-squares temperature of a measured loss curve. The atom number and
// trap come from the curve metadata; T is searched on a log scale in
// [t_min, t_max] by golden section.
inline TemperatureFit fit_temperature(const LossCurve& measured, const CombinedPotential& base,
                                      double t_min, double t_max, const PhysicalConstants& k = {}) {
    measured.validate();
    if (measured.distances.size() < 5) throw DomainError("temperature fit needs at least 5 points");
    if (!(t_min > 0.0 && t_max > t_min)) throw DomainError("invalid temperature search range");
    const auto chars = characterize_along(base, measured.side, measured.distances);
    const double atoms = measured.state.total_atoms;

    auto residual = [&](double log_t) {
        const auto state = thermodynamics(atoms, std::exp(log_t), measured.trap, k);
        double sum = 0.0;
        for (std::size_t i = 0; i < chars.size(); ++i) {
            const double r = remaining_fraction(chars[i], state, measured.config, k) - measured.fractions[i];
            sum += r * r;
        }
        return sum;
    };
    // coarse scan to pick the basin, then golden section inside it
    const double lo = std::log(t_min), hi = std::log(t_max);
    constexpr int coarse = 40;
    std::vector<double> values(coarse + 1);
    std::size_t best = 0;
    for (int i = 0; i <= coarse; ++i) {
        values[std::size_t(i)] = residual(lo + (hi - lo) * i / coarse);
        if (values[std::size_t(i)] < values[best]) best = std::size_t(i);
    }
    const double step = (hi - lo) / coarse;
    const double a = lo + step * (double(best) - 1.0);
    const double b = lo + step * (double(best) + 1.0);
    const auto m = numerics::golden_section(residual, std::max(a, lo), std::min(b, hi), 1e-10, 1.0);

    TemperatureFit fit;
    fit.temperature = std::exp(m.x);
    fit.residual = m.value;
    const auto [vmin, vmax] = std::minmax_element(values.begin(), values.end());
    fit.constrained = (*vmax - *vmin) > 1e-9 * std::max(1.0, *vmax);
    return fit;
}

inline void write_csv(std::ostream& os, const LossCurve& curve) {
    os << "d_m,chi,flag\n";
    for (std::size_t i = 0; i < curve.distances.size(); ++i) {
        os << csv::number(curve.distances[i]) << ',' << csv::number(curve.fractions[i]) << ','
           << (curve.flags.empty() ? 0 : int(curve.flags[i])) << '\n';
    }
}

} // namespace cantibec

#endif
