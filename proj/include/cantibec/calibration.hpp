#ifndef CANTIBEC_CALIBRATION_HPP
#define CANTIBEC_CALIBRATION_HPP

// Cantilever position and adsorbate strengths from two-sided loss curves
// plus the measured coupling asymmetry beta, and the field of an adsorbate
// patch modelled as a line of perpendicular dipoles.
//
// Loss curves passed to `calibrate` carry lab positions z_t0 of the trap
// centre in `distances`; the face positions follow from z_c.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cantibec/constants.hpp"
#include "cantibec/csv.hpp"
#include "cantibec/dynamics.hpp"
#include "cantibec/errors.hpp"
#include "cantibec/numerics.hpp"
#include "cantibec/potential.hpp"
#include "cantibec/surface_loss.hpp"

namespace cantibec {

// ---------------------------------------------------------------------------
// Adsorbate patch

struct AdsorbatePatch {
    double dipole_count = 8e6;
    double dipole_moment = 1e-29; // C m
    double patch_length = 10e-6;  // m
    double patch_width = 1e-6;    // m
    double patch_center = 0.0;    // lateral offset of the patch centre, m

    void validate() const {
        if (!(dipole_count >= 0.0)) throw DomainError("dipole_count must be >= 0");
        if (!(dipole_moment > 0.0)) throw DomainError("dipole_moment must be positive");
        if (!(patch_length > 0.0)) throw DomainError("patch_length must be positive");
        if (!(patch_width > 0.0)) throw DomainError("patch_width must be positive");
        if (!std::isfinite(patch_center)) throw DomainError("patch_center must be finite");
    }

    // mean spacing of the dipoles on the patch
    double spacing() const { return std::sqrt(patch_length * patch_width / dipole_count); }
};

struct AdsorbateField {
    double potential = 0.0;      // U_ad, J
    double equivalent_c4 = 0.0;  // -U_ad d^4, J m^4
    double field_squared = 0.0;  // |E|^2, V^2/m^2
    std::size_t nodes = 0;
    bool continuum_flag = false; // d within 10 dipole spacings
    bool line_flag = false;      // d not large compared with the patch width
};

namespace detail {

// |E|^2 at height d above the centre line, midpoint rule with n panels.
inline double dipole_line_field_squared(const AdsorbatePatch& patch, double d, std::size_t n,
                                        const PhysicalConstants& k) {
    const double coulomb = 1.0 / (4.0 * pi * k.vacuum_permittivity);
    const double lambda = patch.dipole_count * patch.dipole_moment / patch.patch_length;
    const double x0 = patch.patch_center - 0.5 * patch.patch_length;
    const double h = patch.patch_length / double(n);
    double ez = 0.0, ex = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = x0 + (double(i) + 0.5) * h; // dipole position, atom at x = 0
        const double r2 = x * x + d * d;
        const double r = std::sqrt(r2);
        const double r3 = r2 * r;
        const double r5 = r3 * r2;
        ez += 3.0 * d * d / r5 - 1.0 / r3;
        ex += -3.0 * x * d / r5;
    }
    ez *= coulomb * lambda * h;
    ex *= coulomb * lambda * h;
    return ez * ez + ex * ex;
}

} // namespace detail

// Field of the dipole line by midpoint quadrature, doubling the panel count
// until the relative change drops below rel_tol.
inline AdsorbateField adsorbate_potential(const AdsorbatePatch& patch, double d, const PhysicalConstants& k = {},
                                          double rel_tol = 1e-10) {
    patch.validate();
    if (!(d > 0.0)) throw DomainError("distance must be positive");
    AdsorbateField out;
    if (patch.dipole_count == 0.0) return out;
    out.continuum_flag = d < 10.0 * patch.spacing();
    out.line_flag = d < 3.0 * patch.patch_width;
    // enough panels to resolve the kernel width d
    std::size_t n = std::max<std::size_t>(64, std::size_t(std::ceil(8.0 * patch.patch_length / d)));
    double e2 = detail::dipole_line_field_squared(patch, d, n, k);
    for (int iter = 0; iter < 24; ++iter) {
        const double next = detail::dipole_line_field_squared(patch, d, 2 * n, k);
        n *= 2;
        const bool done = std::abs(next - e2) <= rel_tol * std::abs(next);
        e2 = next;
        if (done) break;
    }
    out.nodes = n;
    out.field_squared = e2;
    out.potential = -0.5 * k.polarizability * e2;
    out.equivalent_c4 = -out.potential * d * d * d * d;
    return out;
}

// ---------------------------------------------------------------------------
// Coupling asymmetry

inline constexpr double default_transfer_amplitude = 5e-9;

// |delta z_t| / a in front of `side` at the distance where U_0 = depth.
inline double transfer_ratio(const CombinedPotential& p, std::size_t side, double depth,
                             double amplitude = default_transfer_amplitude) {
    const double d = distance_for_depth(p, side, depth);
    const auto m = modulation_transfer(at_distance(p, side, d), amplitude);
    return std::abs(m.delta_z_t) / amplitude;
}

// Ratio of the trap-position modulation on the two sides at matched depth.
inline double predicted_beta(const CombinedPotential& p_met, std::size_t side_met, const CombinedPotential& p_diel,
                             std::size_t side_diel, double depth, double amplitude = default_transfer_amplitude) {
    const double met = transfer_ratio(p_met, side_met, depth, amplitude);
    const double diel = transfer_ratio(p_diel, side_diel, depth, amplitude);
    if (!(diel > 0.0)) throw PhysicsError("non-convergence", "dielectric side shows no modulation");
    return met / diel;
}

inline double predicted_beta(const CombinedPotential& slab, double depth,
                             double amplitude = default_transfer_amplitude) {
    return predicted_beta(slab, metallized_side, slab, dielectric_side, depth, amplitude);
}

// ---------------------------------------------------------------------------
// Onset estimator

inline constexpr double onset_threshold = 0.02;

// Onset of a loss curve in the coordinate u along which chi increases:
// isotonic fit, then the chi = threshold crossing interpolated between the
// last point below and the first point at or above it.
inline double onset_coordinate(std::span<const double> u, std::span<const double> chi,
                               double threshold = onset_threshold) {
    if (u.size() != chi.size() || u.size() < 2) throw DomainError("onset needs at least two points");
    std::vector<std::size_t> order(u.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return u[a] < u[b]; });
    std::vector<double> us, ys;
    for (auto i : order) {
        us.push_back(u[i]);
        ys.push_back(chi[i]);
    }
    const auto fit = numerics::isotonic_increasing(ys);
    std::optional<std::size_t> below;
    for (std::size_t i = 0; i < fit.size(); ++i) {
        if (fit[i] < threshold) below = i;
    }
    if (!below || *below + 1 >= fit.size()) {
        throw DomainError("loss curve does not cover its onset");
    }
    const std::size_t i = *below;
    const double t = (threshold - fit[i]) / (fit[i + 1] - fit[i]);
    return us[i] + t * (us[i + 1] - us[i]);
}

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationOptions {
    double thickness = 450e-9;               // m
    double cp_metallized = PhysicalConstants{}.casimir_polder_c4();
    double cp_dielectric = dielectric_c4(PhysicalConstants{}.casimir_polder_c4(), sin_permittivity, sin_phi);
    int exponent_metallized = 4;
    int exponent_dielectric = 4;
    HarmonicTrap beta_trap = coupling_trap(two_pi * 10e3);
    double beta_depth = PhysicalConstants{}.planck() * 50e3; // J
    double transfer_amplitude = default_transfer_amplitude;
    double beta_tolerance = 0.02;                 // relative, checked at convergence
    double coefficient_tolerance = 1e-7;          // relative, bisection stop
    double dielectric_max = 200.0;                // upper bracket, in units of cp_dielectric (per um^(n-4))
    double metallized_max = 1e5;                  // upper bracket, in units of cp_metallized (per um^(n-4))
    double positioning_uncertainty = 6e-9;        // m, r.m.s.
    double beta_uncertainty = 0.0;                // absolute; 0 skips the beta term
    double threshold = onset_threshold;

    void validate() const {
        if (!(thickness > 0.0)) throw DomainError("thickness must be positive");
        if (!(cp_metallized >= 0.0 && cp_dielectric >= 0.0)) throw DomainError("C4 coefficients must be >= 0");
        for (int n : {exponent_metallized, exponent_dielectric}) {
            if (n != 3 && n != 4) throw DomainError("adsorbate exponent must be 3 or 4");
        }
        if (!(beta_depth > 0.0)) throw DomainError("beta depth must be positive");
        if (!(beta_tolerance > 0.0)) throw DomainError("beta tolerance must be positive");
        if (!(dielectric_max > 0.0 && metallized_max > 0.0)) throw DomainError("coefficient brackets must be positive");
        if (!(threshold > 0.0 && threshold < 1.0)) throw DomainError("onset threshold must lie in (0, 1)");
    }
};

struct CalibrationResult {
    double z_c = 0.0;               // m, metallized face
    double c_ad_metallized = 0.0;   // J m^n
    double c_ad_dielectric = 0.0;   // J m^n
    double predicted_beta = 0.0;
    std::size_t iterations = 0;
    double d_uncertainty = 0.0;     // m
    double onset_metallized = 0.0;  // lab position, m
    double onset_dielectric = 0.0;  // lab position, m
};

namespace detail {

// Coordinate along which the remaining fraction increases, and the face
// position in that coordinate.
inline double increasing_coordinate(std::size_t side, double z) { return side == metallized_side ? z : -z; }

inline double face_coordinate(std::size_t side, double z_c, double thickness) {
    return side == metallized_side ? z_c : -(z_c - thickness);
}

class Calibrator {
public:
    Calibrator(const LossCurve& met, const LossCurve& diel, double beta, const CalibrationOptions& o)
        : met_(met), diel_(diel), beta_(beta), o_(o) {
        o_.validate();
        met_.validate();
        diel_.validate();
        if (!(beta > 0.0)) throw DomainError("measured beta must be positive");
        u_met_ = coordinates(met_, metallized_side);
        u_diel_ = coordinates(diel_, dielectric_side);
        onset_met_ = onset_coordinate(u_met_, met_.fractions, o_.threshold);
        onset_diel_ = onset_coordinate(u_diel_, diel_.fractions, o_.threshold);
    }

    CalibrationResult run() {
        const double c_unit = (o_.cp_dielectric > 0.0 ? o_.cp_dielectric : o_.cp_metallized) *
                              std::pow(1e-6, o_.exponent_dielectric - 4);
        auto beta_at = [&](double c_diel) {
            const auto s = solve_positions(c_diel);
            return std::pair{beta_for(s.first, c_diel), s};
        };
        const auto [beta_lo_c, s_lo] = beta_at(0.0);
        const double c_hi = o_.dielectric_max * c_unit;
        const auto [beta_hi_c, s_hi] = beta_at(c_hi);
        // beta falls as the dielectric side gets stronger
        if (!(beta_ <= beta_lo_c && beta_ >= beta_hi_c)) {
            char buf[200];
            std::snprintf(buf, sizeof buf, "measured beta %.4g outside attainable range [%.4g, %.4g]", beta_,
                          beta_hi_c, beta_lo_c);
            throw PhysicsError("unreachable", buf);
        }
        double lo = 0.0, hi = c_hi;
        double f_lo = beta_lo_c - beta_;
        std::size_t iterations = 2;
        double c = 0.0, beta_now = beta_lo_c;
        std::pair<double, double> pos = s_lo;
        if (f_lo == 0.0) {
            c = 0.0;
        } else if (beta_hi_c == beta_) {
            c = c_hi;
            beta_now = beta_hi_c;
            pos = s_hi;
        } else {
            while (hi - lo > o_.coefficient_tolerance * std::max(hi, c_unit)) {
                c = 0.5 * (lo + hi);
                const auto [b, s] = beta_at(c);
                ++iterations;
                beta_now = b;
                pos = s;
                if (b == beta_) break;
                if ((b - beta_ > 0.0) == (f_lo > 0.0)) {
                    lo = c;
                } else {
                    hi = c;
                }
                if (iterations > 200) throw PhysicsError("non-convergence", "calibration bisection stalled");
            }
        }
        if (std::abs(beta_now - beta_) > o_.beta_tolerance * beta_) {
            throw PhysicsError("non-convergence", "predicted beta misses the measured value");
        }
        CalibrationResult r;
        r.z_c = pos.second;
        r.c_ad_metallized = pos.first;
        r.c_ad_dielectric = c;
        r.predicted_beta = beta_now;
        r.iterations = iterations;
        r.onset_metallized = onset_met_;
        r.onset_dielectric = -onset_diel_;
        r.d_uncertainty = uncertainty(r);
        return r;
    }

    // (C_ad metallized, z_c) for a given dielectric coefficient.
    std::pair<double, double> solve_positions(double c_diel) const {
        const double z_c = solve_face(c_diel);
        const double c_met = solve_metallized(z_c, c_diel);
        return {c_met, z_c};
    }

    double beta_for(double c_met, double c_diel) const {
        const auto slab = cantilever_slab(o_.beta_trap, 0.0, o_.thickness,
                                          {o_.cp_metallized, c_met, o_.exponent_metallized},
                                          {o_.cp_dielectric, c_diel, o_.exponent_dielectric});
        return predicted_beta(slab, o_.beta_depth, o_.transfer_amplitude);
    }

private:
    static std::vector<double> coordinates(const LossCurve& c, std::size_t side) {
        std::vector<double> u;
        for (double z : c.distances) u.push_back(increasing_coordinate(side, z));
        return u;
    }

    CombinedPotential model(const LossCurve& curve, double c_met, double c_diel) const {
        return cantilever_slab(curve.trap, 0.0, o_.thickness, {o_.cp_metallized, c_met, o_.exponent_metallized},
                               {o_.cp_dielectric, c_diel, o_.exponent_dielectric});
    }

    // Model onset, in u, for a face at u_face: the same estimator applied to
    // the model fractions at the measured positions. Fractions grow with u,
    // so only the bracketing pair is evaluated.
    double model_onset(const LossCurve& curve, std::span<const double> u, std::size_t side,
                       const CombinedPotential& p, double u_face) const {
        std::vector<double> us(u.begin(), u.end());
        std::sort(us.begin(), us.end());
        auto chi = [&](double uu) {
            const double d = uu - u_face;
            if (!(d > 0.0)) return 0.0;
            return remaining_fraction(characterize_trap(at_distance(p, side, d)), curve.state, curve.config);
        };
        // last index with chi < threshold
        std::size_t lo = 0, hi = us.size() - 1;
        if (chi(us[hi]) < o_.threshold) return INFINITY;
        if (chi(us[0]) >= o_.threshold) return -INFINITY;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            if (chi(us[mid]) < o_.threshold) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        const double a = chi(us[lo]), b = chi(us[hi]);
        return us[lo] + (o_.threshold - a) / (b - a) * (us[hi] - us[lo]);
    }

    // Face position u_face whose model onset equals the measured one.
    double match_face(const LossCurve& curve, std::span<const double> u, std::size_t side, const CombinedPotential& p,
                      double measured) const {
        // continuous onset distance as the starting guess
        auto chi_d = [&](double d) {
            return remaining_fraction(characterize_trap(at_distance(p, side, d)), curve.state, curve.config) -
                   o_.threshold;
        };
        const double lo_d = vanishing_distance(p, side);
        double hi_d = lo_d + 50e-9;
        while (chi_d(hi_d) < 0.0) {
            hi_d = lo_d + 2.0 * (hi_d - lo_d);
            if (hi_d > 1e-3) throw PhysicsError("non-convergence", "model never reaches the onset threshold");
        }
        const double d_on = numerics::bisect(chi_d, lo_d, hi_d, 1e-12);
        double spacing = 0.0;
        for (std::size_t i = 1; i < u.size(); ++i) spacing = std::max(spacing, std::abs(u[i] - u[i - 1]));
        auto f = [&](double u_face) { return model_onset(curve, u, side, p, u_face) - measured; };
        double a = measured - d_on - 2.0 * spacing, b = measured - d_on + 2.0 * spacing;
        for (int i = 0; f(a) > 0.0 && i < 40; ++i) a -= 2.0 * spacing;
        for (int i = 0; f(b) < 0.0 && i < 40; ++i) b += 2.0 * spacing;
        return numerics::bisect(f, a, b, 1e-13);
    }

    double solve_face(double c_diel) const {
        const auto p = model(diel_, 0.0, c_diel);
        const double u_face = match_face(diel_, u_diel_, dielectric_side, p, onset_diel_);
        // u_face = -(z_c - t)
        return o_.thickness - u_face;
    }

    double solve_metallized(double z_c, double c_diel) const {
        const double target = z_c; // metallized face coordinate
        auto face_for = [&](double c_met) {
            const auto p = model(met_, c_met, c_diel);
            return match_face(met_, u_met_, metallized_side, p, onset_met_);
        };
        // a stronger potential pushes the onset out, so the matched face sits lower
        const double unit = (o_.cp_metallized > 0.0 ? o_.cp_metallized : o_.cp_dielectric) *
                            std::pow(1e-6, o_.exponent_metallized - 4);
        double lo = 0.0, hi = o_.metallized_max * unit;
        const double g_lo = face_for(lo) - target;
        if (g_lo <= 0.0) return 0.0;
        if (face_for(hi) - target > 0.0) {
            throw PhysicsError("unreachable", "metallized onset needs an adsorbate coefficient above the bracket");
        }
        // bisect on log scale above a small floor
        double llo = std::log(unit * 1e-6), lhi = std::log(hi);
        if (face_for(std::exp(llo)) - target <= 0.0) {
            return numerics::bisect([&](double c) { return face_for(c) - target; }, lo, std::exp(llo),
                                    unit * 1e-12);
        }
        while (lhi - llo > o_.coefficient_tolerance * 1e-2) {
            const double mid = 0.5 * (llo + lhi);
            if (face_for(std::exp(mid)) - target > 0.0) {
                llo = mid;
            } else {
                lhi = mid;
            }
        }
        return std::exp(0.5 * (llo + lhi));
    }

    double uncertainty(const CalibrationResult& r) const {
        auto spacing_of = [](const std::vector<double>& u) {
            double s = 0.0;
            for (std::size_t i = 1; i < u.size(); ++i) s = std::max(s, std::abs(u[i] - u[i - 1]));
            return s;
        };
        // onset read-off: half the grid spacing on each side
        const double sm = 0.5 * spacing_of(u_met_), sd = 0.5 * spacing_of(u_diel_);
        double var = o_.positioning_uncertainty * o_.positioning_uncertainty + sd * sd + 0.25 * sm * sm;
        if (o_.beta_uncertainty > 0.0) {
            // z_c spread across the beta band
            auto z_for_beta = [&](double beta) -> std::optional<double> {
                CalibrationOptions o = o_;
                o.beta_uncertainty = 0.0;
                o.beta_tolerance = std::max(o.beta_tolerance, 1.0);
                try {
                    Calibrator c(met_, diel_, beta, o);
                    return c.run().z_c;
                } catch (const PhysicsError&) {
                    return std::nullopt;
                }
            };
            const auto up = z_for_beta(beta_ + o_.beta_uncertainty);
            const auto down = z_for_beta(std::max(beta_ - o_.beta_uncertainty, 1e-3));
            double spread = 0.0;
            if (up) spread = std::max(spread, std::abs(*up - r.z_c));
            if (down) spread = std::max(spread, std::abs(*down - r.z_c));
            var += spread * spread;
        }
        return std::sqrt(var);
    }

    LossCurve met_;
    LossCurve diel_;
    double beta_;
    CalibrationOptions o_;
    std::vector<double> u_met_;
    std::vector<double> u_diel_;
    double onset_met_ = 0.0;
    double onset_diel_ = 0.0;
};

} // namespace detail

inline CalibrationResult calibrate(const LossCurve& loss_met, const LossCurve& loss_diel, double beta_measured,
                                   const CalibrationOptions& options = {}) {
    detail::Calibrator c(loss_met, loss_diel, beta_measured, options);
    return c.run();
}

// Loss curves in lab coordinates for a slab whose metallized face sits at
// z_c; `positions` are trap-centre positions z_t0.
inline LossCurve synthetic_loss_curve(const CombinedPotential& slab, std::size_t side,
                                      std::span<const double> positions, const CondensateState& state,
                                      const LossModelConfig& cfg) {
    std::vector<double> d(positions.size());
    const SurfaceSide& s = slab.sides.at(side);
    for (std::size_t i = 0; i < positions.size(); ++i) d[i] = -double(s.orientation) * (positions[i] - s.position);
    std::vector<TrapCharacterization> chars(positions.size());
    parallel_for(positions.size(), [&](std::size_t i) {
        chars[i] = d[i] > 0.0 ? characterize_trap(at_distance(slab, side, d[i])) : TrapCharacterization{};
    });
    auto curve = loss_curve_from(chars, d, slab, side, state, cfg);
    curve.distances.assign(positions.begin(), positions.end());
    return curve;
}

inline void write_report(std::ostream& os, const CalibrationResult& r, const PhysicalConstants& k = {}) {
    const double c4 = k.casimir_polder_c4();
    os << "z_c_m = " << csv::exact(r.z_c) << '\n'
       << "c_ad_metallized_jm4 = " << csv::exact(r.c_ad_metallized) << '\n'
       << "c_ad_metallized_over_c4 = " << csv::exact(r.c_ad_metallized / c4) << '\n'
       << "c_ad_dielectric_jm4 = " << csv::exact(r.c_ad_dielectric) << '\n'
       << "c_ad_dielectric_over_c4d = "
       << csv::exact(r.c_ad_dielectric / dielectric_c4(c4, sin_permittivity, sin_phi)) << '\n'
       << "predicted_beta = " << csv::exact(r.predicted_beta) << '\n'
       << "iterations = " << r.iterations << '\n'
       << "d_uncertainty_m = " << csv::exact(r.d_uncertainty) << '\n'
       << "onset_metallized_m = " << csv::exact(r.onset_metallized) << '\n'
       << "onset_dielectric_m = " << csv::exact(r.onset_dielectric) << '\n';
}

} // namespace cantibec

#endif
