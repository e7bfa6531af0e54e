#ifndef CANTIBEC_POTENTIAL_HPP
#define CANTIBEC_POTENTIAL_HPP

// One-dimensional trapping potential perpendicular to the cantilever:
// a harmonic magnetic trap plus attractive power-law surface potentials
// (Casimir-Polder and adsorbate terms) of one or two cantilever faces.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "cantibec/constants.hpp"
#include "cantibec/errors.hpp"
#include "cantibec/numerics.hpp"

namespace cantibec {

struct HarmonicTrap {
    double omega_x = two_pi * 800.0;   // rad/s
    double omega_y = two_pi * 10.4e3;  // rad/s
    double omega_z0 = two_pi * 10.5e3; // rad/s, along the surface normal
    double center = 0.0;               // z_t0, m
    double mass = PhysicalConstants{}.rb87_mass;

    double mean_frequency() const { return std::cbrt(omega_x * omega_y * omega_z0); }

    void validate() const {
        if (!(omega_x > 0.0 && omega_y > 0.0 && omega_z0 > 0.0)) {
            throw DomainError("trap frequencies must be positive");
        }
        if (!(mass > 0.0)) throw DomainError("atom mass must be positive");
        if (!std::isfinite(center)) throw DomainError("trap center must be finite");
    }
};

// The trap family used for the coupling experiments: the axial frequency
// stays at its magnetic value while both radial frequencies follow omega_z.
inline HarmonicTrap coupling_trap(double omega_z0, double center = 0.0,
                                  double omega_x = two_pi * 800.0,
                                  double radial_aspect = 10.4 / 10.5) {
    HarmonicTrap t;
    t.omega_x = omega_x;
    t.omega_y = omega_z0 * radial_aspect;
    t.omega_z0 = omega_z0;
    t.center = center;
    return t;
}

// One cantilever face. `orientation` is +1 when the surface lies above the
// atoms (atoms at smaller z) and -1 when it lies below them.
struct SurfaceSide {
    double position = 0.0;
    int orientation = -1;
    double cp_coefficient = 0.0;        // C4_eff, J m^4
    double adsorbate_coefficient = 0.0; // J m^n
    int adsorbate_exponent = 4;

    // Atom-surface distance, positive on the vacuum side of this face.
    double distance(double z, double displacement) const {
        return double(orientation) * (position + displacement - z);
    }

    bool is_null() const { return cp_coefficient == 0.0 && adsorbate_coefficient == 0.0; }

    // k-th derivative of U_s with respect to the distance x (k = 0..3).
    double derivative_in_distance(int k, double x) const {
        const int n = adsorbate_exponent;
        // d^k/dx^k (-C x^-p) = -C (-p)(-p-1)...(-p-k+1) x^(-p-k)
        auto term = [&](double c, int p) {
            if (c == 0.0) return 0.0;
            double factor = -c;
            for (int i = 0; i < k; ++i) factor *= double(-p - i);
            return factor * numerics::ipow(x, -(p + k));
        };
        return term(cp_coefficient, 4) + term(adsorbate_coefficient, n);
    }

    void validate() const {
        if (orientation != 1 && orientation != -1) throw DomainError("surface orientation must be +1 or -1");
        if (!(cp_coefficient >= 0.0)) throw DomainError("cp_coefficient must be >= 0");
        if (!(adsorbate_coefficient >= 0.0)) throw DomainError("adsorbate_coefficient must be >= 0");
        if (adsorbate_exponent != 3 && adsorbate_exponent != 4) {
            throw DomainError("adsorbate_exponent must be 3 or 4");
        }
    }
};

struct CombinedPotential {
    HarmonicTrap trap;
    std::vector<SurfaceSide> sides;
    double thickness = 0.0;
    double tunneling_depth_reduction = 0.0; // J

    void validate() const {
        trap.validate();
        if (sides.empty() || sides.size() > 2) throw DomainError("potential needs one or two surface sides");
        for (const auto& s : sides) s.validate();
        if (sides.size() == 2) {
            if (sides[0].orientation == sides[1].orientation) {
                throw DomainError("two-sided slab needs opposite orientations");
            }
            if (std::abs(std::abs(sides[0].position - sides[1].position) - thickness) >
                1e-12 * std::max(1.0, std::abs(sides[0].position))) {
                throw DomainError("surface positions must differ by the slab thickness");
            }
        }
        if (!(tunneling_depth_reduction >= 0.0)) throw DomainError("tunneling depth reduction must be >= 0");
    }
};

// Per-face coefficients, used by the slab factory below.
struct FaceCoefficients {
    double cp_coefficient = 0.0;
    double adsorbate_coefficient = 0.0;
    int adsorbate_exponent = 4;
};

inline constexpr std::size_t metallized_side = 0;
inline constexpr std::size_t dielectric_side = 1;

// Cantilever slab occupying [surface - thickness, surface]. The metallized
// face is the upper one (atoms above it); the dielectric face is below.
inline CombinedPotential cantilever_slab(const HarmonicTrap& trap, double metallized_surface,
                                         double thickness, const FaceCoefficients& metallized,
                                         const FaceCoefficients& dielectric) {
    CombinedPotential p;
    p.trap = trap;
    p.thickness = thickness;
    p.sides.push_back({metallized_surface, -1, metallized.cp_coefficient,
                       metallized.adsorbate_coefficient, metallized.adsorbate_exponent});
    p.sides.push_back({metallized_surface - thickness, +1, dielectric.cp_coefficient,
                       dielectric.adsorbate_coefficient, dielectric.adsorbate_exponent});
    p.validate();
    return p;
}

// Copy of `p` with the magnetic trap centre placed at distance d in front of
// the given face (d = z_t0 - z_c, measured along the face normal).
inline CombinedPotential at_distance(const CombinedPotential& p, std::size_t side, double d) {
    CombinedPotential q = p;
    const SurfaceSide& s = q.sides.at(side);
    q.trap.center = s.position - double(s.orientation) * d;
    return q;
}

// Index of the face whose vacuum half-space contains z, if any.
inline std::optional<std::size_t> facing_side(const CombinedPotential& p, double z, double displacement = 0.0) {
    for (std::size_t i = 0; i < p.sides.size(); ++i) {
        if (p.sides[i].distance(z, displacement) > 0.0) return i;
    }
    return std::nullopt;
}

// U(z) for a rigid cantilever displacement. Each face acts only on its own
// vacuum half-space; the slab screens the opposite face.
inline double evaluate_potential(const CombinedPotential& p, double z, double displacement = 0.0) {
    const double dz = z - p.trap.center;
    double u = 0.5 * p.trap.mass * p.trap.omega_z0 * p.trap.omega_z0 * dz * dz;
    bool outside = false;
    for (const auto& s : p.sides) {
        const double x = s.distance(z, displacement);
        if (x > 0.0) {
            outside = true;
            u += s.derivative_in_distance(0, x);
        }
    }
    if (!outside) throw DomainError("potential evaluated inside the cantilever");
    if (!std::isfinite(u)) throw DomainError("potential evaluated at the surface singularity");
    return u;
}

// Analytic derivative d^order U / dz^order, order in 1..3.
inline double potential_derivative(const CombinedPotential& p, double z, double displacement, int order) {
    if (order < 1 || order > 3) throw DomainError("derivative order must be 1, 2 or 3");
    const double k = p.trap.mass * p.trap.omega_z0 * p.trap.omega_z0;
    double u = order == 1 ? k * (z - p.trap.center) : (order == 2 ? k : 0.0);
    bool outside = false;
    for (const auto& s : p.sides) {
        const double x = s.distance(z, displacement);
        if (x > 0.0) {
            outside = true;
            // dx/dz = -orientation
            const double chain = numerics::ipow(-double(s.orientation), order);
            u += chain * s.derivative_in_distance(order, x);
        }
    }
    if (!outside) throw DomainError("potential derivative evaluated inside the cantilever");
    if (!std::isfinite(u)) throw DomainError("potential derivative evaluated at the surface singularity");
    return u;
}

struct TrapCharacterization {
    bool exists = false;
    bool unbounded = false; // no barrier: the depth is infinite
    double minimum = std::numeric_limits<double>::quiet_NaN();   // z_t
    double frequency = std::numeric_limits<double>::quiet_NaN(); // omega_z, rad/s
    double barrier = std::numeric_limits<double>::quiet_NaN();   // z_b
    double depth = std::numeric_limits<double>::quiet_NaN();     // U_0, J
    std::optional<std::size_t> side; // face the trap is deformed by
};

namespace detail {
inline constexpr double scan_step = 10e-9;
inline constexpr double scan_start = 1e-9;
inline constexpr double root_tolerance = 1e-12;
} // namespace detail

// Locate the trap minimum, the surface-side barrier and the resulting depth
// of the deformed trap for a given rigid cantilever displacement.
//
// The search runs along the normal of the face in front of the trap, in the
// distance coordinate x. Roots of dU/dx are bracketed on a 10 nm grid and
// refined by bisection to 1e-12 m.
inline TrapCharacterization characterize_trap(const CombinedPotential& p, double displacement = 0.0) {
    TrapCharacterization out;
    const auto side = facing_side(p, p.trap.center, displacement);
    if (!side) return out;
    const SurfaceSide& s = p.sides[*side];
    const double omega0 = p.trap.omega_z0;
    const double m = p.trap.mass;

    if (s.is_null()) {
        out.exists = true;
        out.unbounded = true;
        out.minimum = p.trap.center;
        out.frequency = omega0;
        out.depth = std::numeric_limits<double>::infinity();
        out.side = side;
        return out;
    }

    const double surface = s.position + displacement;
    const double o = double(s.orientation);
    auto z_of = [&](double x) { return surface - o * x; };
    auto slope = [&](double x) { return -o * potential_derivative(p, z_of(x), displacement, 1); };

    const double d_eff = s.distance(p.trap.center, displacement);
    const double x_hi = d_eff + detail::scan_step;
    std::vector<double> xs;
    for (double x = detail::scan_start; x < x_hi; x += detail::scan_step) xs.push_back(x);
    xs.push_back(x_hi);
    std::vector<double> g(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) g[i] = slope(xs[i]);

    // minimum: last - to + crossing of dU/dx
    std::optional<std::size_t> kmin;
    for (std::size_t i = xs.size() - 1; i-- > 0;) {
        if (g[i] < 0.0 && g[i + 1] >= 0.0) {
            kmin = i;
            break;
        }
    }
    if (!kmin) return out;
    const double x_t = numerics::bisect(slope, xs[*kmin], xs[*kmin + 1], detail::root_tolerance);

    // barrier: nearest + to - crossing towards the surface
    std::optional<std::pair<double, double>> bracket;
    for (std::size_t j = *kmin; j-- > 0;) {
        if (g[j] > 0.0 && g[j + 1] <= 0.0) {
            bracket = std::make_pair(xs[j], xs[j + 1]);
            break;
        }
    }
    if (!bracket && g.front() <= 0.0) {
        // barrier closer than the grid start
        double x = xs.front();
        while (x > 1e-13) {
            const double lo = 0.5 * x;
            if (slope(lo) > 0.0) {
                bracket = std::make_pair(lo, x);
                break;
            }
            x = lo;
        }
    }

    out.exists = true;
    out.side = side;
    out.minimum = z_of(x_t);
    const double curvature = potential_derivative(p, out.minimum, displacement, 2);
    if (!(curvature > 0.0)) {
        return TrapCharacterization{};
    }
    out.frequency = std::sqrt(curvature / m);
    if (!bracket) {
        out.unbounded = true;
        out.depth = std::numeric_limits<double>::infinity();
        return out;
    }
    const double x_b = numerics::bisect(slope, bracket->first, bracket->second, detail::root_tolerance);
    out.barrier = z_of(x_b);
    const double raw = evaluate_potential(p, out.barrier, displacement) -
                       evaluate_potential(p, out.minimum, displacement) - p.tunneling_depth_reduction;
    out.depth = std::max(raw, 0.0);
    return out;
}

namespace detail {
inline bool trap_exists_at(const CombinedPotential& p, std::size_t side, double d) {
    return characterize_trap(at_distance(p, side, d)).exists;
}

// Smallest distance, found by doubling, at which the trap exists.
inline double existing_distance(const CombinedPotential& p, std::size_t side) {
    double d = 5e-6;
    while (!trap_exists_at(p, side, d)) {
        d *= 2.0;
        if (d > 1e-2) throw PhysicsError("non-convergence", "trap does not form at any distance below 1 cm");
    }
    return d;
}
} // namespace detail

// Largest trap-surface distance d at which the deformed trap has vanished
// in front of the selected face.
inline double vanishing_distance(const CombinedPotential& p, std::size_t side, double tolerance = 1e-11) {
    const SurfaceSide& s = p.sides.at(side);
    if (s.is_null()) throw PhysicsError("never-vanishes", "selected face has no surface potential");
    double lo = detail::scan_start;
    if (detail::trap_exists_at(p, side, lo)) {
        throw PhysicsError("never-vanishes", "trap survives at the contact resolution limit");
    }
    double hi = detail::existing_distance(p, side);
    while (hi - lo > tolerance) {
        const double mid = 0.5 * (lo + hi);
        if (detail::trap_exists_at(p, side, mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return lo;
}

// Width of the region around the cantilever in which no trap exists: both
// vanishing distances plus the slab thickness.
inline double effective_thickness(const CombinedPotential& p) {
    if (p.sides.size() != 2) throw DomainError("effective thickness needs a two-sided slab");
    return vanishing_distance(p, 0) + p.thickness + vanishing_distance(p, 1);
}

// Distance in front of `side` at which the trap depth equals `depth`.
inline double distance_for_depth(const CombinedPotential& p, std::size_t side, double depth,
                                 double tolerance = 1e-12) {
    if (!(depth > 0.0)) throw DomainError("target depth must be positive");
    const double lo = vanishing_distance(p, side);
    auto depth_at = [&](double d) {
        const auto c = characterize_trap(at_distance(p, side, d));
        return c.exists ? c.depth : 0.0;
    };
    double hi = std::max(2.0 * lo, lo + 1e-7);
    while (depth_at(hi) < depth) {
        hi = lo + 2.0 * (hi - lo);
        if (hi > 1e-3) throw PhysicsError("unreachable", "no distance reaches the requested trap depth");
    }
    return numerics::bisect([&](double d) { return depth_at(d) - depth; }, lo, hi, tolerance);
}

} // namespace cantibec

#endif
