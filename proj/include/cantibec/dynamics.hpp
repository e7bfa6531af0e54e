#ifndef CANTIBEC_DYNAMICS_HPP
#define CANTIBEC_DYNAMICS_HPP

// Atom-cantilever coupling through the time-dependent surface potential.
//
// The cloud is represented by non-interacting classical test particles:
// a truncated Boltzmann sample for the thermal fraction and zero-velocity
// particles on the Thomas-Fermi profile for the condensate. Each particle is
// integrated with velocity Verlet in U(z, t), where the cantilever moves
// the surface rigidly by a sin(omega_p t). A particle is lost when it passes
// the instantaneous barrier moving towards the surface.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "cantibec/cantilever.hpp"
#include "cantibec/condensate.hpp"
#include "cantibec/constants.hpp"
#include "cantibec/csv.hpp"
#include "cantibec/errors.hpp"
#include "cantibec/numerics.hpp"
#include "cantibec/parallel.hpp"
#include "cantibec/potential.hpp"

namespace cantibec {

// ---------------------------------------------------------------------------
// Quasi-static modulation transfer

struct ModulationTransfer {
    double delta_z_t = 0.0;     // m
    double delta_omega_z = 0.0; // rad/s
    double delta_depth = 0.0;   // J
};

// Half-difference of trap minimum, frequency and depth between the two
// extreme cantilever displacements +a and -a.
inline ModulationTransfer modulation_transfer(const CombinedPotential& p, double amplitude) {
    if (amplitude == 0.0) return {};
    const auto plus = characterize_trap(p, amplitude);
    const auto minus = characterize_trap(p, -amplitude);
    if (!plus.exists || !minus.exists) {
        throw PhysicsError("over-driven", "trap vanishes at an extreme cantilever displacement");
    }
    ModulationTransfer m;
    m.delta_z_t = 0.5 * (plus.minimum - minus.minimum);
    m.delta_omega_z = 0.5 * (plus.frequency - minus.frequency);
    if (!plus.unbounded && !minus.unbounded) m.delta_depth = 0.5 * (plus.depth - minus.depth);
    return m;
}

// ---------------------------------------------------------------------------
// Ensemble

struct EnsembleConfig {
    std::size_t particle_count = 2000;
    double time_step = 0.0; // s; 0 selects 1/(64 f_max)
    std::uint64_t seed = 1;
    std::size_t energy_samples = 64;

    void validate() const {
        if (particle_count < 1) throw DomainError("particle_count must be >= 1");
        if (!(time_step >= 0.0)) throw DomainError("time_step must be >= 0");
    }
};

struct Particle {
    double z = 0.0; // m
    double v = 0.0; // m/s
};

struct Ensemble {
    std::vector<Particle> particles;
    std::size_t thermal_count = 0; // the first thermal_count particles are thermal
    TrapCharacterization trap;     // undisplaced characterization used for sampling
};

namespace detail {

// Inverse-CDF sampler over a tabulated nonnegative weight.
class TabulatedSampler {
public:
    TabulatedSampler(std::vector<double> xs, std::span<const double> weights) : xs_(std::move(xs)) {
        cdf_.assign(xs_.size(), 0.0);
        for (std::size_t i = 1; i < xs_.size(); ++i) {
            cdf_[i] = cdf_[i - 1] + 0.5 * (weights[i] + weights[i - 1]) * (xs_[i] - xs_[i - 1]);
        }
        if (!(cdf_.back() > 0.0)) throw PhysicsError("non-convergence", "empty sampling density");
        for (double& c : cdf_) c /= cdf_.back();
    }

    double operator()(double u) const { return numerics::linear_interpolate(cdf_, xs_, u); }

private:
    std::vector<double> xs_;
    std::vector<double> cdf_;
};

} // namespace detail

// Draws the classical surrogate of the cloud for a characterized trap.
// Particle i uses its own random stream derived from (seed, i).
inline Ensemble sample_ensemble(const CombinedPotential& p, const CondensateState& state,
                                const TrapCharacterization& trap, const EnsembleConfig& cfg,
                                const PhysicalConstants& k = {}) {
    cfg.validate();
    if (!trap.exists) throw DomainError("cannot sample a cloud in a vanished trap");
    const double m = p.trap.mass;
    const std::size_t n = cfg.particle_count;
    Ensemble e;
    e.trap = trap;
    e.thermal_count = std::size_t(std::llround(double(n) * state.thermal_atoms / state.total_atoms));
    e.particles.resize(n);

    const double u_min = evaluate_potential(p, trap.minimum);
    const double u_top = trap.unbounded ? INFINITY : evaluate_potential(p, trap.barrier);
    const double kt = k.boltzmann * state.temperature;

    // Thermal positions: marginal of exp(-E/kT) restricted to E < U(z_b).
    std::optional<detail::TabulatedSampler> sampler;
    if (e.thermal_count > 0) {
        if (!(kt > 0.0)) throw DomainError("thermal particles need T > 0");
        const SurfaceSide& s = p.sides[*trap.side];
        const double o = double(s.orientation);
        auto z_of = [&](double x) { return s.position - o * x; };
        const double x_t = s.distance(trap.minimum, 0.0);
        const double sigma = std::sqrt(kt / (m * trap.frequency * trap.frequency));
        double x_near, x_far;
        if (trap.unbounded) {
            x_near = std::max(x_t - 12.0 * sigma, 0.5 * x_t);
            x_far = x_t + 12.0 * sigma;
        } else {
            x_near = s.distance(trap.barrier, 0.0);
            double hi = x_t + std::max(sigma, x_t - x_near);
            while (evaluate_potential(p, z_of(hi)) < u_top) hi = x_t + 2.0 * (hi - x_t);
            x_far = numerics::bisect([&](double x) { return evaluate_potential(p, z_of(x)) - u_top; }, x_t, hi,
                                     1e-12);
            x_far = std::min(x_far, x_t + 12.0 * sigma);
        }
        constexpr std::size_t nodes = 4097;
        std::vector<double> xs(nodes), w(nodes);
        for (std::size_t i = 0; i < nodes; ++i) {
            xs[i] = x_near + (x_far - x_near) * double(i) / double(nodes - 1);
            const double u = evaluate_potential(p, z_of(xs[i]));
            double weight = std::exp(-(u - u_min) / kt);
            if (!trap.unbounded) {
                weight *= u < u_top ? std::erf(std::sqrt((u_top - u) / kt)) : 0.0;
            }
            w[i] = weight;
        }
        // sample in z directly
        std::vector<double> zs(nodes);
        for (std::size_t i = 0; i < nodes; ++i) zs[i] = z_of(xs[i]);
        if (zs.front() > zs.back()) {
            std::reverse(zs.begin(), zs.end());
            std::reverse(w.begin(), w.end());
        }
        sampler.emplace(std::move(zs), w);
    }

    const double radius = state.tf_radius_z;
    parallel_for(n, [&](std::size_t i) {
        std::mt19937_64 rng(numerics::stream_seed(cfg.seed, i));
        Particle& pt = e.particles[i];
        if (i < e.thermal_count) {
            pt.z = (*sampler)(numerics::uniform_open(rng));
            const double u = evaluate_potential(p, pt.z);
            const double sv = std::sqrt(kt / m);
            if (trap.unbounded) {
                std::normal_distribution<double> normal(0.0, sv);
                pt.v = normal(rng);
            } else {
                const double vmax = std::sqrt(std::max(0.0, 2.0 * (u_top - u) / m));
                const double span = std::erf(vmax / (sv * std::sqrt(2.0)));
                const double q = (2.0 * numerics::uniform_open(rng) - 1.0) * span;
                pt.v = span > 0.0 ? sv * std::sqrt(2.0) * boost::math::erf_inv(q) : 0.0;
            }
        } else {
            pt.v = 0.0;
            pt.z = trap.minimum;
            if (radius > 0.0) {
                for (int attempt = 0; attempt < 10000; ++attempt) {
                    const double zeta = 2.0 * numerics::uniform_open(rng) - 1.0;
                    const double accept = (1.0 - zeta * zeta) * (1.0 - zeta * zeta);
                    if (numerics::uniform_open(rng) >= accept) continue;
                    const double z = trap.minimum + zeta * radius;
                    if (!trap.unbounded) {
                        const auto f = facing_side(p, z);
                        if (!f || evaluate_potential(p, z) >= u_top) continue;
                        const SurfaceSide& s = p.sides[*trap.side];
                        if (s.distance(z, 0.0) <= s.distance(trap.barrier, 0.0)) continue;
                    }
                    pt.z = z;
                    break;
                }
            }
        }
    });
    return e;
}

// ---------------------------------------------------------------------------
// Integration

// One velocity-Verlet step. `accel(z, t)` returns the acceleration; the
// acceleration at the start of the step is passed in and updated.
template <class Accel>
void velocity_verlet_step(Particle& p, double& acceleration, double t, double dt, Accel&& accel) {
    p.v += 0.5 * dt * acceleration;
    p.z += dt * p.v;
    acceleration = accel(p.z, t + dt);
    p.v += 0.5 * dt * acceleration;
}

struct Drive {
    double amplitude = 0.0; // m
    double omega = 0.0;     // rad/s
};

inline Drive drive_from_cantilever(const Cantilever& c, double drive_vpp, double omega_p) {
    return {driven_amplitude(c, drive_vpp, omega_p), omega_p};
}

namespace detail {

// Single-face fast path of the force and energy for the dynamics.
struct FaceField {
    double stiffness;  // m omega_z0^2
    double center;     // z_t0
    double surface;    // undisplaced face position
    double orientation;
    double c4;
    double cad;
    int n;

    static FaceField from(const CombinedPotential& p, std::size_t side) {
        const SurfaceSide& s = p.sides[side];
        return {p.trap.mass * p.trap.omega_z0 * p.trap.omega_z0, p.trap.center, s.position,
                double(s.orientation), s.cp_coefficient, s.adsorbate_coefficient, s.adsorbate_exponent};
    }

    double distance(double z, double disp) const { return orientation * (surface + disp - z); }

    double slope(double z, double disp) const {
        const double x = distance(z, disp);
        const double inv = 1.0 / x;
        const double inv2 = inv * inv;
        const double inv4 = inv2 * inv2;
        double dudx = 4.0 * c4 * inv4 * inv;
        if (cad != 0.0) dudx += n == 4 ? 4.0 * cad * inv4 * inv : 3.0 * cad * inv4;
        return stiffness * (z - center) - orientation * dudx;
    }

    double energy(double z, double disp) const {
        const double x = distance(z, disp);
        const double inv = 1.0 / x;
        const double inv2 = inv * inv;
        const double inv4 = inv2 * inv2;
        double u = -c4 * inv4;
        if (cad != 0.0) u -= n == 4 ? cad * inv4 : cad * inv2 * inv;
        const double dz = z - center;
        return 0.5 * stiffness * dz * dz + u;
    }
};

// Barrier distance from the face as a function of the displacement,
// tabulated over [-a, a].
class BarrierTable {
public:
    BarrierTable(const CombinedPotential& p, std::size_t side, double amplitude, bool unbounded) {
        if (unbounded) {
            unbounded_ = true;
            return;
        }
        const std::size_t nodes = amplitude > 0.0 ? 129 : 1;
        disp_.resize(nodes);
        x_.resize(nodes);
        for (std::size_t i = 0; i < nodes; ++i) {
            disp_[i] = nodes == 1 ? 0.0 : -amplitude + 2.0 * amplitude * double(i) / double(nodes - 1);
            const auto c = characterize_trap(p, disp_[i]);
            if (!c.exists) throw PhysicsError("over-driven", "trap vanishes during the cantilever cycle");
            if (c.unbounded) {
                x_[i] = 0.0;
            } else {
                x_[i] = p.sides[side].distance(c.barrier, disp_[i]);
            }
        }
    }

    double operator()(double disp) const {
        if (unbounded_) return 0.0;
        if (disp_.size() == 1) return x_.front();
        return numerics::linear_interpolate(disp_, x_, disp);
    }

private:
    bool unbounded_ = false;
    std::vector<double> disp_;
    std::vector<double> x_;
};

} // namespace detail

inline double default_time_step(double omega_max) { return 1.0 / (64.0 * omega_max / two_pi); }

// Largest admissible step: 50 steps per period of the fastest frequency.
inline double max_time_step(double omega_max) { return 1.0 / (50.0 * omega_max / two_pi); }

struct Evolution {
    std::size_t initial = 0;
    std::size_t survivors = 0;
    double dynamic_survival = 1.0; // survivors / initial
    double background = 1.0;       // exp(-t_h / lifetime)
    double survivor_fraction = 1.0;
    bool lifetime_extrapolated = false;
    std::vector<double> times;       // s
    std::vector<double> mean_energy; // J, over particles alive at that time
};

inline Evolution evolve_ensemble(const CombinedPotential& p, const Drive& drive, const Ensemble& ensemble,
                                 double hold_time, const EnsembleConfig& cfg) {
    cfg.validate();
    if (!(hold_time >= 0.0)) throw DomainError("hold time must be >= 0");
    const TrapCharacterization& trap = ensemble.trap;
    if (!trap.exists || !trap.side) throw DomainError("ensemble was sampled in a vanished trap");
    const double omega_max = std::max({trap.frequency, p.trap.omega_z0, std::abs(drive.omega)});
    double dt = cfg.time_step > 0.0 ? cfg.time_step : default_time_step(omega_max);
    if (dt > max_time_step(omega_max) * (1.0 + 1e-12)) {
        throw DomainError("time step exceeds 1/50 of the fastest period");
    }
    const std::size_t steps = hold_time > 0.0 ? std::size_t(std::ceil(hold_time / dt - 1e-9)) : 0;
    if (steps > 0) dt = hold_time / double(steps);

    const std::size_t side = *trap.side;
    const auto field = detail::FaceField::from(p, side);
    const detail::BarrierTable barrier(p, side, std::abs(drive.amplitude), trap.unbounded);
    const double m = p.trap.mass;
    auto disp = [&](double t) { return drive.amplitude * std::sin(drive.omega * t); };
    auto disp_rate = [&](double t) { return drive.amplitude * drive.omega * std::cos(drive.omega * t); };
    auto accel = [&](double z, double t) { return -field.slope(z, disp(t)) / m; };

    const std::size_t samples = std::max<std::size_t>(cfg.energy_samples, 1);
    const std::size_t stride = std::max<std::size_t>(1, steps / samples);
    std::vector<std::size_t> sample_steps;
    for (std::size_t s = 0; s <= steps; s += stride) sample_steps.push_back(s);

    const std::size_t n = ensemble.particles.size();
    std::vector<std::uint8_t> alive(n, 1);
    std::vector<double> energies(n * sample_steps.size(), std::nan(""));

    parallel_for(n, [&](std::size_t i) {
        Particle pt = ensemble.particles[i];
        double a = accel(pt.z, 0.0);
        std::size_t next_sample = 0;
        for (std::size_t step = 0;; ++step) {
            const double t = double(step) * dt;
            if (next_sample < sample_steps.size() && sample_steps[next_sample] == step) {
                energies[i * sample_steps.size() + next_sample] =
                    0.5 * m * pt.v * pt.v + field.energy(pt.z, disp(t));
                ++next_sample;
            }
            if (step == steps) break;
            velocity_verlet_step(pt, a, t, dt, accel);
            const double t1 = t + dt;
            const double d1 = disp(t1);
            const double x = field.distance(pt.z, d1);
            const double x_rate = field.orientation * (disp_rate(t1) - pt.v);
            if (x <= 0.0 || (x < barrier(d1) && x_rate < 0.0)) {
                alive[i] = 0;
                break;
            }
        }
    });

    Evolution ev;
    ev.initial = n;
    for (auto a : alive) ev.survivors += a;
    ev.dynamic_survival = n > 0 ? double(ev.survivors) / double(n) : 1.0;
    const auto life = lifetime_budget(trap.frequency);
    ev.lifetime_extrapolated = life.extrapolated;
    ev.background = std::exp(-hold_time / life.lifetime);
    ev.survivor_fraction = ev.dynamic_survival * ev.background;
    for (std::size_t s = 0; s < sample_steps.size(); ++s) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = energies[i * sample_steps.size() + s];
            if (!std::isnan(e)) {
                sum += e;
                ++count;
            }
        }
        ev.times.push_back(double(sample_steps[s]) * dt);
        ev.mean_energy.push_back(count > 0 ? sum / double(count) : std::nan(""));
    }
    return ev;
}

inline Evolution evolve_ensemble(const CombinedPotential& p, const Cantilever& c, double drive_vpp,
                                 double omega_p, const Ensemble& ensemble, double hold_time,
                                 const EnsembleConfig& cfg) {
    return evolve_ensemble(p, drive_from_cantilever(c, drive_vpp, omega_p), ensemble, hold_time, cfg);
}

// ---------------------------------------------------------------------------
// Observables and scans

struct ContrastSnr {
    double contrast = 0.0;
    double snr = 0.0;
    bool negative = false; // N_a > N_r, attributed to noise
};

inline ContrastSnr contrast_and_snr(double atoms_driven, double atoms_reference, double sigma) {
    if (!(atoms_reference > 0.0)) throw DomainError("reference atom number must be positive");
    if (!(sigma > 0.0)) throw DomainError("noise sigma must be positive");
    const double diff = atoms_reference - atoms_driven;
    return {diff / atoms_reference, diff / sigma, atoms_driven > atoms_reference};
}

struct ScanResult {
    std::string kind;
    std::string abscissa_unit;
    std::string observable_name;
    std::vector<double> abscissa;
    std::vector<double> observable;
    std::vector<double> stderr_;
    std::vector<std::uint8_t> flags;
    std::optional<numerics::LorentzianFit> fit;
    std::optional<numerics::LinearFit> linear_fit;
    std::map<std::string, std::string> metadata;

    void validate() const {
        if (abscissa.size() != observable.size() || abscissa.size() != stderr_.size()) {
            throw DomainError("scan columns differ in length");
        }
    }
};

inline void write_csv(std::ostream& os, const ScanResult& r) {
    r.validate();
    os << "abscissa,observable,stderr\n";
    for (std::size_t i = 0; i < r.abscissa.size(); ++i) {
        os << csv::number(r.abscissa[i]) << ',' << csv::number(r.observable[i]) << ','
           << csv::number(r.stderr_[i]) << '\n';
    }
    os << "# kind=" << r.kind << ", abscissa_unit=" << r.abscissa_unit << ", observable=" << r.observable_name
       << '\n';
    if (r.fit) {
        os << "# fit_center=" << csv::number(r.fit->center) << ", fit_fwhm=" << csv::number(r.fit->fwhm)
           << ", fit_depth=" << csv::number(r.fit->depth) << ", fit_baseline=" << csv::number(r.fit->baseline)
           << '\n';
    }
    if (r.linear_fit) {
        os << "# linear_slope=" << csv::number(r.linear_fit->slope)
           << ", linear_intercept=" << csv::number(r.linear_fit->intercept)
           << ", linear_r2=" << csv::number(r.linear_fit->r_squared) << ", linear_points=" << r.linear_fit->points
           << '\n';
    }
    for (const auto& [key, value] : r.metadata) os << "# " << key << '=' << value << '\n';
}

enum class Observable { atoms, contrast, snr };

inline const char* to_string(Observable o) {
    switch (o) {
    case Observable::atoms: return "atoms";
    case Observable::contrast: return "contrast";
    case Observable::snr: return "snr";
    }
    return "?";
}

// Everything a coupling run needs besides the scanned variable.
struct DynamicsSetup {
    CombinedPotential potential; // trap already placed in front of a face
    double atoms = 2000.0;
    double reduced_temperature = 0.5; // T / T_c
    Cantilever cantilever;
    double drive_vpp = 1.5;
    double hold_time = 3e-3;
    EnsembleConfig ensemble;
    double noise_sigma = 32.0;
    bool background_loss = true;
    PhysicalConstants constants;
};

namespace detail {

struct PreparedTrap {
    TrapCharacterization trap;
    CondensateState state;
    Ensemble ensemble;
};

inline PreparedTrap prepare(const CombinedPotential& p, const DynamicsSetup& setup) {
    PreparedTrap out;
    out.trap = characterize_trap(p);
    if (!out.trap.exists) throw PhysicsError("over-driven", "no trap at the configured distance");
    out.state = thermodynamics_reduced(setup.atoms, setup.reduced_temperature, p.trap, setup.constants);
    out.ensemble = sample_ensemble(p, out.state, out.trap, setup.ensemble, setup.constants);
    return out;
}

struct PointOutcome {
    double reference = 0.0; // N_r
    double driven = 0.0;    // N_a
    double stderr_atoms = 0.0;
};

inline PointOutcome run_point(const CombinedPotential& p, const PreparedTrap& prep, const Drive& drive,
                              const DynamicsSetup& setup) {
    const auto ev = evolve_ensemble(p, drive, prep.ensemble, setup.hold_time, setup.ensemble);
    const double background = setup.background_loss ? ev.background : 1.0;
    PointOutcome o;
    o.reference = setup.atoms * background;
    o.driven = o.reference * ev.dynamic_survival;
    const double s = ev.dynamic_survival;
    o.stderr_atoms = o.reference * std::sqrt(std::max(s * (1.0 - s), 0.0) / double(ev.initial));
    return o;
}

inline double observe(const PointOutcome& o, Observable which, double sigma, double* err) {
    switch (which) {
    case Observable::atoms:
        *err = o.stderr_atoms;
        return o.driven;
    case Observable::contrast:
        *err = o.stderr_atoms / o.reference;
        return contrast_and_snr(o.driven, o.reference, sigma).contrast;
    case Observable::snr:
        *err = o.stderr_atoms / sigma;
        return contrast_and_snr(o.driven, o.reference, sigma).snr;
    }
    return 0.0;
}

} // namespace detail

// Remaining atoms N_a versus drive frequency, with an optional Lorentzian
// dip fit. The fit is dropped when the dip is not resolved above the
// ensemble noise.
inline ScanResult resonance_scan(const DynamicsSetup& setup, std::span<const double> omega_p, bool fit = true,
                                 Observable which = Observable::atoms) {
    const auto prep = detail::prepare(setup.potential, setup);
    ScanResult r;
    r.kind = "resonance";
    r.abscissa_unit = "rad/s";
    r.observable_name = to_string(which);
    r.abscissa.assign(omega_p.begin(), omega_p.end());
    r.observable.resize(omega_p.size());
    r.stderr_.resize(omega_p.size());
    r.flags.assign(omega_p.size(), 0);
    std::vector<detail::PointOutcome> outcomes(omega_p.size());
    for (std::size_t i = 0; i < omega_p.size(); ++i) {
        const Drive drive = drive_from_cantilever(setup.cantilever, setup.drive_vpp, omega_p[i]);
        outcomes[i] = detail::run_point(setup.potential, prep, drive, setup);
        r.observable[i] = detail::observe(outcomes[i], which, setup.noise_sigma, &r.stderr_[i]);
    }
    if (fit) {
        // fit the dip in N_a regardless of the reported observable
        std::vector<double> atoms(outcomes.size());
        double noise = 0.0;
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            atoms[i] = outcomes[i].driven;
            noise = std::max(noise, outcomes[i].stderr_atoms);
        }
        const auto f = numerics::fit_lorentzian_dip(r.abscissa, atoms);
        const double lo = r.abscissa.front(), hi = r.abscissa.back();
        const bool resolved = f.converged && f.depth > 3.0 * noise && f.depth > 0.0 && f.center >= lo &&
                              f.center <= hi && f.fwhm < (hi - lo);
        if (resolved) {
            r.fit = f;
        } else {
            r.metadata["fit"] = "rejected";
        }
    }
    r.metadata["omega_m"] = csv::number(setup.cantilever.resonance);
    r.metadata["trap_omega_z"] = csv::number(prep.trap.frequency);
    r.metadata["trap_depth_j"] = csv::number(prep.trap.depth);
    return r;
}

// Default contrast above which a point counts as saturated.
inline constexpr double contrast_saturation = 0.9;

// Contrast versus on-resonance cantilever amplitude, with a linear fit over
// the points below saturation.
inline ScanResult amplitude_scan(const DynamicsSetup& setup, std::span<const double> amplitudes,
                                 Observable which = Observable::contrast,
                                 double saturation = contrast_saturation) {
    const auto prep = detail::prepare(setup.potential, setup);
    ScanResult r;
    r.kind = "amplitude";
    r.abscissa_unit = "m";
    r.observable_name = to_string(which);
    r.abscissa.assign(amplitudes.begin(), amplitudes.end());
    r.observable.resize(amplitudes.size());
    r.stderr_.resize(amplitudes.size());
    r.flags.assign(amplitudes.size(), 0);
    std::vector<double> fit_x, fit_y;
    for (std::size_t i = 0; i < amplitudes.size(); ++i) {
        const Drive drive{amplitudes[i], setup.cantilever.resonance};
        const auto o = detail::run_point(setup.potential, prep, drive, setup);
        r.observable[i] = detail::observe(o, which, setup.noise_sigma, &r.stderr_[i]);
        const double c = contrast_and_snr(o.driven, o.reference, setup.noise_sigma).contrast;
        if (c < saturation) {
            fit_x.push_back(amplitudes[i]);
            fit_y.push_back(r.observable[i]);
        } else {
            r.flags[i] = 1;
        }
    }
    if (fit_x.size() >= 2) r.linear_fit = numerics::linear_regression(fit_x, fit_y);
    r.metadata["trap_depth_j"] = csv::number(prep.trap.depth);
    return r;
}

// Coupling versus trap-surface distance at fixed on-resonance amplitude.
inline ScanResult distance_scan(const DynamicsSetup& setup, std::size_t side, std::span<const double> distances,
                                double amplitude, Observable which = Observable::contrast) {
    ScanResult r;
    r.kind = "distance";
    r.abscissa_unit = "m";
    r.observable_name = to_string(which);
    r.abscissa.assign(distances.begin(), distances.end());
    r.observable.assign(distances.size(), 0.0);
    r.stderr_.assign(distances.size(), 0.0);
    r.flags.assign(distances.size(), 0);
    for (std::size_t i = 0; i < distances.size(); ++i) {
        const auto p = at_distance(setup.potential, side, distances[i]);
        try {
            const auto prep = detail::prepare(p, setup);
            const auto o = detail::run_point(p, prep, {amplitude, setup.cantilever.resonance}, setup);
            r.observable[i] = detail::observe(o, which, setup.noise_sigma, &r.stderr_[i]);
        } catch (const PhysicsError&) {
            r.flags[i] = 1;
            r.observable[i] = std::nan("");
        }
    }
    return r;
}

// Atomic response versus trap frequency for a fixed cantilever drive. The
// trap follows `coupling_trap` (fixed axial frequency) and each point sits
// at its own distance from the face; T / T_c is held constant. `omega_z`
// holds the unperturbed set frequencies; the abscissa reports the perturbed
// frequency at each scheduled distance (the set value where the trap is gone).
inline ScanResult spectrum_scan(const DynamicsSetup& setup, std::size_t side, std::span<const double> omega_z,
                                std::span<const double> distances, double amplitude,
                                Observable which = Observable::snr) {
    if (omega_z.size() != distances.size()) throw DomainError("spectrum scan needs one distance per frequency");
    ScanResult r;
    r.kind = "spectrum";
    r.abscissa_unit = "rad/s";
    r.observable_name = to_string(which);
    r.abscissa.assign(omega_z.begin(), omega_z.end());
    r.observable.assign(omega_z.size(), 0.0);
    r.stderr_.assign(omega_z.size(), 0.0);
    r.flags.assign(omega_z.size(), 0);
    const double radial_aspect = setup.potential.trap.omega_y / setup.potential.trap.omega_z0;
    for (std::size_t i = 0; i < omega_z.size(); ++i) {
        CombinedPotential p = setup.potential;
        p.trap = coupling_trap(omega_z[i], p.trap.center, setup.potential.trap.omega_x, radial_aspect);
        p = at_distance(p, side, distances[i]);
        try {
            const auto prep = detail::prepare(p, setup);
            r.abscissa[i] = prep.trap.frequency;
            const auto o = detail::run_point(p, prep, {amplitude, setup.cantilever.resonance}, setup);
            r.observable[i] = detail::observe(o, which, setup.noise_sigma, &r.stderr_[i]);
        } catch (const PhysicsError&) {
            r.flags[i] = 1;
            r.observable[i] = std::nan("");
        }
    }
    r.metadata["omega_m"] = csv::number(setup.cantilever.resonance);
    return r;
}

// Distances that keep the trap depth fixed along a frequency grid.
inline std::vector<double> constant_depth_schedule(const CombinedPotential& base, std::size_t side,
                                                   std::span<const double> omega_z, double depth) {
    std::vector<double> out(omega_z.size());
    const double radial_aspect = base.trap.omega_y / base.trap.omega_z0;
    parallel_for(omega_z.size(), [&](std::size_t i) {
        CombinedPotential p = base;
        p.trap = coupling_trap(omega_z[i], p.trap.center, base.trap.omega_x, radial_aspect);
        out[i] = distance_for_depth(p, side, depth);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Detection estimates

// Displacement after time of flight t of a c.o.m. coherent state |alpha>
// of N atoms released from a trap of frequency omega: sqrt(2 hbar omega / (m N)) alpha t.
inline double coherent_state_displacement(double atoms, double omega_z, double alpha, double tof,
                                          const PhysicalConstants& k = {}) {
    if (!(atoms >= 1.0)) throw DomainError("atom number must be >= 1");
    return std::sqrt(2.0 * k.hbar * omega_z / (k.rb87_mass * atoms)) * alpha * tof;
}

// r.m.s. cantilever amplitude that drives the c.o.m. mode of N atoms to
// coherent amplitude alpha within t_h on resonance, assuming the trap
// centre follows the cantilever with ratio transfer = delta z_t / a.
// A resonant drive grows the c.o.m. amplitude as delta_z_t omega t / 2 and
// |alpha| = amplitude / (2 x_zpf) with x_zpf = sqrt(hbar / (2 N m omega)).
inline double amplitude_for_alpha(double transfer, double omega_z, double atoms, double hold_time,
                                  double alpha = 1.0, const PhysicalConstants& k = {}) {
    if (!(transfer > 0.0 && omega_z > 0.0 && atoms >= 1.0 && hold_time > 0.0)) {
        throw DomainError("amplitude_for_alpha needs positive inputs");
    }
    const double x_zpf = std::sqrt(k.hbar / (2.0 * atoms * k.rb87_mass * omega_z));
    const double peak = 2.0 * x_zpf * alpha / (transfer * omega_z * hold_time / 2.0);
    return peak / std::sqrt(2.0);
}

struct DetectionEstimate {
    double displacement = 0.0;     // m, after time of flight
    double amplitude_for_alpha = 0.0; // m r.m.s.
};

inline DetectionEstimate detection_estimates(double atoms, double omega_z, double alpha, double tof,
                                             double transfer, double coupling_omega, double hold_time,
                                             const PhysicalConstants& k = {}) {
    DetectionEstimate e;
    e.displacement = coherent_state_displacement(atoms, omega_z, alpha, tof, k);
    e.amplitude_for_alpha = amplitude_for_alpha(transfer, coupling_omega, atoms, hold_time, 1.0, k);
    return e;
}

} // namespace cantibec

#endif
