#ifndef CANTIBEC_SCENARIO_HPP
#define CANTIBEC_SCENARIO_HPP

// Scenario files: flat `key = value` lines grouped under `[section]`
// headers, '#' starts a comment. Unit suffixes in key names (_hz, _nm,
// _um, _nk, _ms, _khz, _vpp) are converted to SI once, in the builders
// below. `run_scenario` dispatches on scenario.kind and writes a CSV plus a
// key-value report into the output directory.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cantibec/calibration.hpp"
#include "cantibec/cantilever.hpp"
#include "cantibec/condensate.hpp"
#include "cantibec/constants.hpp"
#include "cantibec/csv.hpp"
#include "cantibec/dynamics.hpp"
#include "cantibec/errors.hpp"
#include "cantibec/potential.hpp"
#include "cantibec/surface_loss.hpp"

namespace cantibec {

inline constexpr const char* version = "0.1.0";

// ---------------------------------------------------------------------------
// Schema

enum class ValueType { number, integer, boolean, text };
enum class Constraint { any, positive, nonnegative, fraction, choice, exponent };

struct KeyDef {
    const char* section;
    const char* key;
    ValueType type;
    const char* fallback; // default; empty for required text keys
    Constraint constraint;
    const char* choices;  // '|'-separated for Constraint::choice
    const char* doc;
};

inline const std::vector<KeyDef>& schema() {
    using V = ValueType;
    using C = Constraint;
    static const std::vector<KeyDef> keys = {
        {"scenario", "name", V::text, "scenario", C::any, "", "label copied into reports"},
        {"scenario", "kind", V::text, "", C::choice,
         "potential|loss-curve|resonance|amplitude|distance|spectrum|calibrate|estimates", "operation to run (required)"},
        {"scenario", "output", V::text, "out", C::any, "", "output directory, relative to the working directory"},

        {"constants", "hbar_js", V::number, "1.054571817e-34", C::positive, "", "reduced Planck constant"},
        {"constants", "boltzmann_jk", V::number, "1.380649e-23", C::positive, "", "Boltzmann constant"},
        {"constants", "light_speed_ms", V::number, "299792458", C::positive, "", "speed of light"},
        {"constants", "vacuum_permittivity_fm", V::number, "8.8541878128e-12", C::positive, "", "epsilon_0"},
        {"constants", "mass_kg", V::number, "1.443160648e-25", C::positive, "", "atomic mass"},
        {"constants", "scattering_length_nm", V::number, "5.4", C::positive, "", "s-wave scattering length"},
        {"constants", "polarizability_fm2", V::number, "5.26e-39", C::positive, "", "static polarizability"},
        {"constants", "three_body_m6s", V::number, "1.8e-41", C::positive, "", "three-body loss coefficient L"},

        {"trap", "omega_x_hz", V::number, "800", C::positive, "", "axial trap frequency / 2pi"},
        {"trap", "omega_z_hz", V::number, "10500", C::positive, "",
         "unperturbed frequency along the surface normal / 2pi"},
        {"trap", "radial_ratio", V::number, "0.9904761904761905", C::positive, "", "omega_y / omega_z"},
        {"trap", "side", V::text, "metallized", C::choice, "metallized|dielectric", "face the trap is placed in front of"},
        {"trap", "d_um", V::number, "1.5", C::positive, "", "trap centre to face distance"},
        {"trap", "depth_khz", V::number, "0", C::nonnegative, "",
         "if > 0, place the trap where U_0/h equals this value (overrides d_um)"},

        {"surface", "thickness_nm", V::number, "450", C::positive, "", "cantilever thickness"},
        {"surface", "cp_metallized_c4", V::number, "1", C::nonnegative, "", "metallized C4 in units of C4"},
        {"surface", "cp_dielectric_c4d", V::number, "1", C::nonnegative, "", "dielectric C4 in units of C4,d"},
        {"surface", "permittivity", V::number, "4", C::positive, "", "dielectric permittivity"},
        {"surface", "phi", V::number, "0.77", C::positive, "", "dielectric C4 reduction factor"},
        {"surface", "ad_metallized_c4", V::number, "200", C::nonnegative, "",
         "metallized adsorbate coefficient in C4 (times 1 um^(n-4))"},
        {"surface", "ad_metallized_exponent", V::integer, "4", C::exponent, "", "3 or 4"},
        {"surface", "ad_dielectric_c4d", V::number, "10", C::nonnegative, "",
         "dielectric adsorbate coefficient in C4,d (times 1 um^(n-4))"},
        {"surface", "ad_dielectric_exponent", V::integer, "4", C::exponent, "", "3 or 4"},
        {"surface", "tunneling_khz", V::number, "0", C::nonnegative, "", "trap-depth reduction for tunnelling"},

        {"condensate", "atoms", V::number, "2000", C::positive, "", "total atom number"},
        {"condensate", "t_over_tc", V::number, "0.5", C::nonnegative, "", "T / T_c, used when temperature_nk = 0"},
        {"condensate", "temperature_nk", V::number, "0", C::nonnegative, "", "absolute temperature; 0 selects t_over_tc"},
        {"condensate", "bimodal", V::boolean, "false", C::any, "", "bimodal loss model"},
        {"condensate", "rate_cutoff", V::boolean, "false", C::any, "", "evaporation-rate cutoff"},

        {"cantilever", "omega_m_hz", V::number, "10000", C::positive, "", "mechanical resonance / 2pi"},
        {"cantilever", "quality", V::number, "3100", C::positive, "", "quality factor"},
        {"cantilever", "mass_ng", V::number, "5", C::positive, "", "effective mass"},
        {"cantilever", "temperature_k", V::number, "300", C::nonnegative, "", "environment temperature"},
        {"cantilever", "efficiency_nm_per_vpp", V::number, "80", C::nonnegative, "", "drive efficiency on resonance"},
        {"cantilever", "drive_vpp", V::number, "1.5", C::nonnegative, "", "piezo drive"},

        {"scan", "hold_ms", V::number, "1", C::nonnegative, "", "hold time"},
        {"scan", "d_start_um", V::number, "0.5", C::positive, "", "distance grid start"},
        {"scan", "d_stop_um", V::number, "3", C::positive, "", "distance grid stop (inclusive)"},
        {"scan", "d_step_um", V::number, "0.02", C::positive, "", "distance grid step"},
        {"scan", "f_start_hz", V::number, "9980", C::positive, "", "frequency grid start (drive or trap)"},
        {"scan", "f_stop_hz", V::number, "10020", C::positive, "", "frequency grid stop (inclusive)"},
        {"scan", "f_step_hz", V::number, "1", C::positive, "", "frequency grid step"},
        {"scan", "a_start_nm", V::number, "0", C::nonnegative, "", "amplitude grid start"},
        {"scan", "a_stop_nm", V::number, "120", C::nonnegative, "", "amplitude grid stop (inclusive)"},
        {"scan", "a_step_nm", V::number, "10", C::positive, "", "amplitude grid step"},
        {"scan", "amplitude_nm", V::number, "0", C::nonnegative, "",
         "fixed cantilever amplitude; 0 uses drive_vpp on resonance"},
        {"scan", "observable", V::text, "auto", C::choice, "auto|atoms|contrast|snr", "reported observable"},
        {"scan", "fit", V::boolean, "true", C::any, "", "Lorentzian fit of resonance scans"},
        {"scan", "noise_sigma", V::number, "32", C::positive, "", "atom-number noise sigma"},
        {"scan", "beta", V::number, "0", C::nonnegative, "", "measured beta; 0 uses the surface model's own"},
        {"scan", "beta_uncertainty", V::number, "0", C::nonnegative, "", "beta band for the distance uncertainty"},
        {"scan", "beta_depth_khz", V::number, "50", C::positive, "", "matched trap depth for beta"},
        {"scan", "positioning_nm", V::number, "6", C::nonnegative, "", "trap positioning reproducibility"},
        {"scan", "met_curve", V::text, "", C::any, "", "CSV (z_m,chi) of the metallized loss curve; empty synthesises"},
        {"scan", "diel_curve", V::text, "", C::any, "", "CSV (z_m,chi) of the dielectric loss curve; empty synthesises"},
        {"scan", "detect_atoms", V::number, "100", C::positive, "", "atom number for the detection estimate"},
        {"scan", "detect_omega_hz", V::number, "100", C::positive, "", "detection trap frequency"},
        {"scan", "alpha", V::number, "1", C::nonnegative, "", "coherent-state amplitude"},
        {"scan", "tof_ms", V::number, "4", C::nonnegative, "", "time of flight"},
        {"scan", "coherent_hold_ms", V::number, "20", C::positive, "", "hold for the alpha = 1 amplitude estimate"},

        {"ensemble", "particles", V::integer, "2000", C::positive, "", "test particles"},
        {"ensemble", "time_step_ns", V::number, "0", C::nonnegative, "", "integrator step; 0 picks 1/64 of the fastest period"},
        {"ensemble", "seed", V::integer, "1", C::nonnegative, "", "random seed"},
        {"ensemble", "energy_samples", V::integer, "64", C::positive, "", "energy-history samples"},
    };
    return keys;
}

inline const std::vector<std::string>& schema_sections() {
    static const std::vector<std::string> s = {"scenario", "condensate", "constants", "trap", "surface",
                                               "cantilever", "scan", "ensemble"};
    return s;
}

inline void write_schema(std::ostream& os) {
    os << "# cantibec scenario schema " << version << "\n";
    os << "# section.key  type  default  constraint  description\n";
    for (const auto& k : schema()) {
        const char* type = k.type == ValueType::number    ? "number"
                           : k.type == ValueType::integer ? "integer"
                           : k.type == ValueType::boolean ? "boolean"
                                                          : "text";
        std::string constraint;
        switch (k.constraint) {
        case Constraint::any: constraint = "-"; break;
        case Constraint::positive: constraint = ">0"; break;
        case Constraint::nonnegative: constraint = ">=0"; break;
        case Constraint::fraction: constraint = "[0,1]"; break;
        case Constraint::choice: constraint = std::string("{") + k.choices + "}"; break;
        case Constraint::exponent: constraint = "{3,4}"; break;
        }
        os << k.section << '.' << k.key << "  " << type << "  " << (*k.fallback ? k.fallback : "(required)")
           << "  " << constraint << "  " << k.doc << '\n';
    }
}

// ---------------------------------------------------------------------------
// Scenario values

struct Scenario {
    std::map<std::string, std::string> values; // "section.key" -> canonical text

    bool operator==(const Scenario&) const = default;

    const std::string& text(const std::string& key) const {
        auto it = values.find(key);
        if (it == values.end()) throw ConfigError("unknown key", 0, key);
        return it->second;
    }
    double number(const std::string& key) const { return std::stod(text(key)); }
    long long integer(const std::string& key) const { return std::stoll(text(key)); }
    bool flag(const std::string& key) const { return text(key) == "true"; }
    std::string kind() const { return text("scenario.kind"); }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline const KeyDef* find_key(const std::string& section, const std::string& key) {
    for (const auto& k : schema()) {
        if (section == k.section && key == k.key) return &k;
    }
    return nullptr;
}

// Canonical text of a value; throws on malformed input.
inline std::string canonical(const KeyDef& def, const std::string& raw, std::size_t line, const std::string& name) {
    switch (def.type) {
    case ValueType::number: {
        double v = 0.0;
        const char* end = raw.data() + raw.size();
        auto [ptr, ec] = std::from_chars(raw.data(), end, v);
        if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
            throw ConfigError("expected a finite number, got '" + raw + "'", line, name);
        }
        return csv::exact(v);
    }
    case ValueType::integer: {
        long long v = 0;
        const char* end = raw.data() + raw.size();
        auto [ptr, ec] = std::from_chars(raw.data(), end, v);
        if (ec != std::errc() || ptr != end) throw ConfigError("expected an integer, got '" + raw + "'", line, name);
        return std::to_string(v);
    }
    case ValueType::boolean:
        if (raw != "true" && raw != "false") throw ConfigError("expected true or false, got '" + raw + "'", line, name);
        return raw;
    case ValueType::text:
        return raw;
    }
    return raw;
}

inline void check_constraint(const KeyDef& def, const std::string& value, std::size_t line) {
    const std::string name = std::string(def.key);
    auto num = [&] { return std::stod(value); };
    switch (def.constraint) {
    case Constraint::any: return;
    case Constraint::positive:
        if (!(num() > 0.0)) throw ConfigError("must be > 0, got " + value, line, name);
        return;
    case Constraint::nonnegative:
        if (!(num() >= 0.0)) throw ConfigError("must be >= 0, got " + value, line, name);
        return;
    case Constraint::fraction:
        if (!(num() >= 0.0 && num() <= 1.0)) throw ConfigError("must lie in [0, 1], got " + value, line, name);
        return;
    case Constraint::exponent:
        if (value != "3" && value != "4") throw ConfigError("must be 3 or 4, got " + value, line, name);
        return;
    case Constraint::choice: {
        std::string_view choices = def.choices;
        std::size_t pos = 0;
        while (pos <= choices.size()) {
            const auto bar = choices.find('|', pos);
            const auto item = choices.substr(pos, bar == std::string_view::npos ? std::string_view::npos : bar - pos);
            if (item == value) return;
            if (bar == std::string_view::npos) break;
            pos = bar + 1;
        }
        if (value.empty()) throw ConfigError("missing required key", line, name);
        throw ConfigError("must be one of " + std::string(def.choices) + ", got '" + value + "'", line, name);
    }
    }
}

} // namespace detail

inline Scenario default_scenario() {
    Scenario s;
    for (const auto& k : schema()) s.values[std::string(k.section) + '.' + k.key] = k.fallback;
    return s;
}

// Cross-key checks; each error names one key.
inline void validate(const Scenario& s, const std::map<std::string, std::size_t>& lines = {}) {
    auto line_of = [&](const std::string& key) {
        auto it = lines.find(key);
        return it == lines.end() ? std::size_t(0) : it->second;
    };
    for (const auto& k : schema()) {
        const std::string full = std::string(k.section) + '.' + k.key;
        detail::check_constraint(k, s.text(full), line_of(full));
    }
    const std::string kind = s.kind();
    auto grid = [&](const char* prefix, const char* unit) {
        const std::string a = std::string("scan.") + prefix + "_start_" + unit;
        const std::string b = std::string("scan.") + prefix + "_stop_" + unit;
        if (!(s.number(b) >= s.number(a))) {
            throw ConfigError("grid stop must not precede its start", line_of(b), b.substr(5));
        }
    };
    if (kind == "potential" || kind == "loss-curve" || kind == "distance" || kind == "calibrate") grid("d", "um");
    if (kind == "resonance" || kind == "spectrum") grid("f", "hz");
    if (kind == "amplitude") grid("a", "nm");
    if (s.number("condensate.atoms") < 1.0) {
        throw ConfigError("must be >= 1", line_of("condensate.atoms"), "atoms");
    }
    if (s.number("cantilever.quality") <= 0.5) {
        throw ConfigError("must exceed 0.5", line_of("cantilever.quality"), "quality");
    }
}

inline Scenario parse_config(std::string_view text) {
    Scenario s = default_scenario();
    std::map<std::string, std::size_t> lines;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = detail::trim(raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("malformed section header", line_no);
            section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
            bool known = false;
            for (const auto& name : schema_sections()) known = known || name == section;
            if (!known) throw ConfigError("unknown section [" + section + "]", line_no);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line_no);
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
        if (section.empty()) throw ConfigError("key outside any section", line_no, key);
        const KeyDef* def = detail::find_key(section, key);
        if (!def) throw ConfigError("unknown key in [" + section + "]", line_no, key);
        const std::string full = section + '.' + key;
        if (lines.count(full)) throw ConfigError("duplicate key", line_no, key);
        lines[full] = line_no;
        s.values[full] = detail::canonical(*def, value, line_no, key);
    }
    validate(s, lines);
    return s;
}

// Every key, in schema order, with canonical values; parse_config of the
// result reproduces the scenario exactly.
inline std::string serialize(const Scenario& s) {
    std::ostringstream os;
    os << "# cantibec scenario\n";
    std::string section;
    for (const auto& k : schema()) {
        if (section != k.section) {
            section = k.section;
            os << (os.tellp() > 20 ? "\n" : "") << '[' << section << "]\n";
        }
        os << k.key << " = " << s.text(section + '.' + k.key) << '\n';
    }
    return os.str();
}

inline std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string inputs_hash(const Scenario& s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(serialize(s))));
    return buf;
}

// ---------------------------------------------------------------------------
// Builders (SI units from here on)

inline PhysicalConstants constants_of(const Scenario& s) {
    PhysicalConstants k;
    k.hbar = s.number("constants.hbar_js");
    k.boltzmann = s.number("constants.boltzmann_jk");
    k.light_speed = s.number("constants.light_speed_ms");
    k.vacuum_permittivity = s.number("constants.vacuum_permittivity_fm");
    k.rb87_mass = s.number("constants.mass_kg");
    k.scattering_length = s.number("constants.scattering_length_nm") * 1e-9;
    k.polarizability = s.number("constants.polarizability_fm2");
    k.three_body_coefficient = s.number("constants.three_body_m6s");
    k.validate();
    return k;
}

inline HarmonicTrap trap_of(const Scenario& s, const PhysicalConstants& k) {
    HarmonicTrap t = coupling_trap(two_pi * s.number("trap.omega_z_hz"), 0.0, two_pi * s.number("trap.omega_x_hz"),
                                   s.number("trap.radial_ratio"));
    t.mass = k.rb87_mass;
    return t;
}

inline std::size_t side_of(const Scenario& s) {
    return s.text("trap.side") == "metallized" ? metallized_side : dielectric_side;
}

// Coefficient in J m^n from a value in C4 units (times 1 um^(n-4)).
inline double adsorbate_si(double value, double unit, int exponent) {
    return value * unit * std::pow(1e-6, exponent - 4);
}

// Slab with the metallized face at z = 0, trap centre at the origin.
inline CombinedPotential slab_of(const Scenario& s, const PhysicalConstants& k) {
    const double c4 = k.casimir_polder_c4();
    const double c4d = dielectric_c4(c4, s.number("surface.permittivity"), s.number("surface.phi"));
    const int n_met = int(s.integer("surface.ad_metallized_exponent"));
    const int n_diel = int(s.integer("surface.ad_dielectric_exponent"));
    auto p = cantilever_slab(trap_of(s, k), 0.0, s.number("surface.thickness_nm") * 1e-9,
                             {s.number("surface.cp_metallized_c4") * c4,
                              adsorbate_si(s.number("surface.ad_metallized_c4"), c4, n_met), n_met},
                             {s.number("surface.cp_dielectric_c4d") * c4d,
                              adsorbate_si(s.number("surface.ad_dielectric_c4d"), c4d, n_diel), n_diel});
    p.tunneling_depth_reduction = s.number("surface.tunneling_khz") * 1e3 * k.planck();
    return p;
}

inline double distance_of(const Scenario& s, const CombinedPotential& slab, const PhysicalConstants& k) {
    const double depth = s.number("trap.depth_khz") * 1e3 * k.planck();
    if (depth > 0.0) return distance_for_depth(slab, side_of(s), depth);
    return s.number("trap.d_um") * 1e-6;
}

inline double reduced_temperature_of(const Scenario& s, const HarmonicTrap& trap, const PhysicalConstants& k) {
    const double t_nk = s.number("condensate.temperature_nk");
    if (t_nk > 0.0) return t_nk * 1e-9 / critical_temperature(s.number("condensate.atoms"), trap, k);
    return s.number("condensate.t_over_tc");
}

inline CondensateState state_of(const Scenario& s, const HarmonicTrap& trap, const PhysicalConstants& k) {
    return thermodynamics_reduced(s.number("condensate.atoms"), reduced_temperature_of(s, trap, k), trap, k);
}

inline LossModelConfig loss_config_of(const Scenario& s) {
    LossModelConfig c;
    c.bimodal = s.flag("condensate.bimodal");
    c.rate_cutoff = s.flag("condensate.rate_cutoff");
    c.hold_time = s.number("scan.hold_ms") * 1e-3;
    return c;
}

inline Cantilever cantilever_of(const Scenario& s) {
    Cantilever c;
    c.resonance = two_pi * s.number("cantilever.omega_m_hz");
    c.quality = s.number("cantilever.quality");
    c.effective_mass = s.number("cantilever.mass_ng") * 1e-12;
    c.environment_temperature = s.number("cantilever.temperature_k");
    c.drive_efficiency = s.number("cantilever.efficiency_nm_per_vpp") * 1e-9;
    c.validate();
    return c;
}

inline EnsembleConfig ensemble_of(const Scenario& s) {
    EnsembleConfig e;
    e.particle_count = std::size_t(s.integer("ensemble.particles"));
    e.time_step = s.number("ensemble.time_step_ns") * 1e-9;
    e.seed = std::uint64_t(s.integer("ensemble.seed"));
    e.energy_samples = std::size_t(s.integer("ensemble.energy_samples"));
    return e;
}

inline DynamicsSetup setup_of(const Scenario& s, const PhysicalConstants& k) {
    DynamicsSetup d;
    const auto slab = slab_of(s, k);
    d.potential = at_distance(slab, side_of(s), distance_of(s, slab, k));
    d.atoms = s.number("condensate.atoms");
    d.reduced_temperature = reduced_temperature_of(s, d.potential.trap, k);
    d.cantilever = cantilever_of(s);
    d.drive_vpp = s.number("cantilever.drive_vpp");
    d.hold_time = s.number("scan.hold_ms") * 1e-3;
    d.ensemble = ensemble_of(s);
    d.noise_sigma = s.number("scan.noise_sigma");
    d.constants = k;
    return d;
}

// Inclusive grid start, start + step, ... up to stop.
inline std::vector<double> grid(double start, double stop, double step, double scale) {
    if (!(step > 0.0)) throw DomainError("grid step must be positive");
    const auto count = std::size_t(std::floor((stop - start) / step + 1e-9)) + 1;
    if (count > 1000000) throw DomainError("grid has too many points");
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i) g[i] = (start + double(i) * step) * scale;
    return g;
}

inline std::vector<double> grid_of(const Scenario& s, const char* prefix, const char* unit, double scale) {
    const std::string p = std::string("scan.") + prefix;
    return grid(s.number(p + "_start_" + unit), s.number(p + "_stop_" + unit), s.number(p + "_step_" + unit), scale);
}

inline Observable observable_of(const Scenario& s, Observable fallback) {
    const auto& o = s.text("scan.observable");
    if (o == "atoms") return Observable::atoms;
    if (o == "contrast") return Observable::contrast;
    if (o == "snr") return Observable::snr;
    return fallback;
}

// ---------------------------------------------------------------------------
// Running

struct RunOutput {
    std::vector<std::string> files;
    std::map<std::string, std::string> report; // written to report.txt
};

namespace detail {

inline std::string footer(const Scenario& s) {
    return "# inputs_fnv1a=" + inputs_hash(s) + "\n# seed=" + s.text("ensemble.seed") + "\n# version=" + version +
           "\n";
}

inline void write_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << body;
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Loss curve CSV with columns z_m,chi[,flag]; '#' lines are skipped.
inline LossCurve read_curve(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    LossCurve c;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        std::istringstream row(line);
        std::string a, b;
        if (!std::getline(row, a, ',') || !std::getline(row, b, ',')) {
            throw ConfigError("malformed loss-curve row in " + path.string());
        }
        try {
            c.distances.push_back(std::stod(a));
            c.fractions.push_back(std::stod(b));
        } catch (const std::exception&) {
            throw ConfigError("non-numeric loss-curve row in " + path.string());
        }
    }
    return c;
}

inline std::string hz(double omega) { return csv::number(omega / two_pi); }

} // namespace detail

// Dynamics scans (resonance, amplitude, distance, spectrum). Values meant
// for report.txt are returned in metadata under "report.<key>"; they are not
// written to the CSV.
inline ScanResult scan_of(const Scenario& s) {
    const auto k = constants_of(s);
    const std::string kind = s.kind();
    const auto setup = setup_of(s, k);
    ScanResult r;
    double amplitude = s.number("scan.amplitude_nm") * 1e-9;
    if (amplitude == 0.0) amplitude = driven_amplitude(setup.cantilever, setup.drive_vpp, setup.cantilever.resonance);
    std::map<std::string, std::string> rep;
    if (kind == "resonance") {
        const auto w = grid_of(s, "f", "hz", two_pi);
        r = resonance_scan(setup, w, s.flag("scan.fit"), observable_of(s, Observable::atoms));
        if (r.fit) {
            rep["fit_center_hz"] = detail::hz(r.fit->center);
            rep["fit_fwhm_hz"] = detail::hz(r.fit->fwhm);
            rep["fit_offset_hz"] = detail::hz(r.fit->center - setup.cantilever.resonance);
        } else if (s.flag("scan.fit")) {
            rep["fit"] = "rejected";
        }
        rep["linear_fwhm_hz"] = detail::hz(setup.cantilever.resonance / setup.cantilever.quality);
    } else if (kind == "amplitude") {
        r = amplitude_scan(setup, grid_of(s, "a", "nm", 1e-9), observable_of(s, Observable::contrast));
        if (r.linear_fit) {
            rep["slope_per_m"] = csv::number(r.linear_fit->slope);
            rep["r_squared"] = csv::number(r.linear_fit->r_squared);
        }
    } else if (kind == "distance") {
        r = distance_scan(setup, side_of(s), grid_of(s, "d", "um", 1e-6), amplitude,
                          observable_of(s, Observable::contrast));
    } else if (kind == "spectrum") {
        const auto w = grid_of(s, "f", "hz", two_pi);
        const auto slab = slab_of(s, k);
        const double depth = s.number("trap.depth_khz") * 1e3 * k.planck();
        std::vector<double> ds;
        if (depth > 0.0) {
            ds = constant_depth_schedule(slab, side_of(s), w, depth);
        } else {
            ds.assign(w.size(), s.number("trap.d_um") * 1e-6);
        }
        auto base = setup;
        base.potential = slab;
        r = spectrum_scan(base, side_of(s), w, ds, amplitude, observable_of(s, Observable::snr));
    } else {
        throw ConfigError("not a dynamics scan: " + kind, 0, "kind");
    }
    rep["amplitude_m"] = csv::number(amplitude);
    for (const auto& [key, value] : rep) r.metadata["report." + key] = value;
    return r;
}

inline RunOutput run_scenario(const Scenario& s, const std::filesystem::path& out_dir) {
    validate(s);
    const auto k = constants_of(s);
    const std::string kind = s.kind();
    RunOutput out;
    auto& rep = out.report;
    rep["name"] = s.text("scenario.name");
    rep["kind"] = kind;
    rep["inputs_fnv1a"] = inputs_hash(s);
    rep["seed"] = s.text("ensemble.seed");
    rep["version"] = version;

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

    std::ostringstream csv_body;
    std::string csv_name = kind + ".csv";
    const double h = k.planck();

    if (kind == "potential") {
        const auto slab = slab_of(s, k);
        const auto side = side_of(s);
        const double d = distance_of(s, slab, k);
        const auto p = at_distance(slab, side, d);
        const auto& face = p.sides[side];
        csv_body << "x_m,u_j\n";
        for (double x : grid_of(s, "d", "um", 1e-6)) {
            const double z = face.position - double(face.orientation) * x;
            csv_body << csv::number(x) << ',' << csv::number(evaluate_potential(p, z)) << '\n';
        }
        const auto c = characterize_trap(p);
        rep["d_m"] = csv::number(d);
        rep["exists"] = c.exists ? "true" : "false";
        if (c.exists) {
            rep["shift_m"] = csv::number(double(face.orientation) * (c.minimum - p.trap.center));
            rep["omega_z_hz"] = detail::hz(c.frequency);
            rep["depth_khz"] = c.unbounded ? "inf" : csv::number(c.depth / h / 1e3);
            if (!c.unbounded) rep["barrier_distance_m"] = csv::number(face.distance(c.barrier, 0.0));
            const double a = s.number("scan.amplitude_nm") * 1e-9;
            if (a > 0.0) {
                const auto m = modulation_transfer(p, a);
                rep["delta_z_t_m"] = csv::number(std::abs(m.delta_z_t));
                rep["delta_omega_z_hz"] = detail::hz(std::abs(m.delta_omega_z));
                rep["delta_depth_khz"] = csv::number(std::abs(m.delta_depth) / h / 1e3);
            }
        }
    } else if (kind == "loss-curve") {
        const auto slab = slab_of(s, k);
        const auto side = side_of(s);
        const auto state = state_of(s, slab.trap, k);
        const auto ds = grid_of(s, "d", "um", 1e-6);
        const auto curve = loss_curve(slab, side, ds, state, loss_config_of(s), k);
        write_csv(csv_body, curve);
        rep["temperature_nk"] = csv::number(state.temperature * 1e9);
        rep["t_over_tc"] = csv::number(state.temperature / state.critical_temperature);
        rep["vanishing_distance_m"] = csv::number(vanishing_distance(slab, side));
        rep["effective_thickness_m"] = csv::number(effective_thickness(slab));
        try {
            rep["onset_m"] = csv::number(onset_coordinate(curve.distances, curve.fractions));
        } catch (const DomainError&) {
            rep["onset_m"] = "not-covered";
        }
    } else if (kind == "resonance" || kind == "amplitude" || kind == "distance" || kind == "spectrum") {
        auto r = scan_of(s);
        for (auto it = r.metadata.begin(); it != r.metadata.end();) {
            if (it->first.rfind("report.", 0) == 0) {
                rep[it->first.substr(7)] = it->second;
                it = r.metadata.erase(it);
            } else {
                ++it;
            }
        }
        write_csv(csv_body, r);
        std::size_t flagged = 0;
        for (auto f : r.flags) flagged += f;
        rep["flagged_points"] = std::to_string(flagged);
    } else if (kind == "calibrate") {
        const auto slab = slab_of(s, k);
        const auto state = state_of(s, slab.trap, k);
        const auto cfg = loss_config_of(s);
        CalibrationOptions o;
        o.thickness = slab.thickness;
        o.cp_metallized = slab.sides[metallized_side].cp_coefficient;
        o.cp_dielectric = slab.sides[dielectric_side].cp_coefficient;
        o.exponent_metallized = slab.sides[metallized_side].adsorbate_exponent;
        o.exponent_dielectric = slab.sides[dielectric_side].adsorbate_exponent;
        o.beta_trap = slab.trap;
        o.beta_depth = s.number("scan.beta_depth_khz") * 1e3 * h;
        o.positioning_uncertainty = s.number("scan.positioning_nm") * 1e-9;
        o.beta_uncertainty = s.number("scan.beta_uncertainty");

        LossCurve met, diel;
        const auto& met_path = s.text("scan.met_curve");
        const auto& diel_path = s.text("scan.diel_curve");
        if (met_path.empty() != diel_path.empty()) {
            throw ConfigError("met_curve and diel_curve must be given together", 0, met_path.empty() ? "met_curve" : "diel_curve");
        }
        if (!met_path.empty()) {
            met = detail::read_curve(met_path);
            diel = detail::read_curve(diel_path);
            for (auto* c : {&met, &diel}) {
                c->trap = slab.trap;
                c->state = state;
                c->config = cfg;
                c->flags.assign(c->distances.size(), 0);
            }
            met.side = metallized_side;
            diel.side = dielectric_side;
        } else {
            const auto ds = grid_of(s, "d", "um", 1e-6);
            std::vector<double> zm, zd;
            for (double d : ds) zm.push_back(d);
            for (auto it = ds.rbegin(); it != ds.rend(); ++it) zd.push_back(-slab.thickness - *it);
            met = synthetic_loss_curve(slab, metallized_side, zm, state, cfg);
            diel = synthetic_loss_curve(slab, dielectric_side, zd, state, cfg);
        }
        double beta = s.number("scan.beta");
        if (beta == 0.0) beta = predicted_beta(slab, o.beta_depth);
        rep["beta_measured"] = csv::exact(beta);
        const auto r = calibrate(met, diel, beta, o);
        std::ostringstream block;
        write_report(block, r, k);
        std::istringstream lines(block.str());
        std::string line;
        while (std::getline(lines, line)) {
            const auto eq = line.find(" = ");
            if (eq != std::string::npos) rep[line.substr(0, eq)] = line.substr(eq + 3);
        }
        std::ostringstream met_csv, diel_csv;
        write_csv(met_csv, met);
        write_csv(diel_csv, diel);
        detail::write_file(out_dir / "met_curve.csv", met_csv.str() + detail::footer(s));
        detail::write_file(out_dir / "diel_curve.csv", diel_csv.str() + detail::footer(s));
        out.files.push_back("met_curve.csv");
        out.files.push_back("diel_curve.csv");
        csv_name.clear();
    } else if (kind == "estimates") {
        const auto c = cantilever_of(s);
        const auto slab = slab_of(s, k);
        const auto side = side_of(s);
        const auto p = at_distance(slab, side, distance_of(s, slab, k));
        const auto state = state_of(s, p.trap, k);
        const auto trap = characterize_trap(p);
        std::vector<std::pair<std::string, double>> q;
        q.emplace_back("thermal_amplitude_m", thermal_amplitude(c, k));
        q.emplace_back("ground_state_amplitude_m", ground_state_amplitude(c, k));
        q.emplace_back("driven_amplitude_m", driven_amplitude(c, s.number("cantilever.drive_vpp"), c.resonance));
        q.emplace_back("linear_fwhm_hz", c.resonance / c.quality / two_pi);
        q.emplace_back("detection_displacement_m",
                       coherent_state_displacement(s.number("scan.detect_atoms"),
                                                   two_pi * s.number("scan.detect_omega_hz"), s.number("scan.alpha"),
                                                   s.number("scan.tof_ms") * 1e-3, k));
        q.emplace_back("critical_temperature_nk", state.critical_temperature * 1e9);
        q.emplace_back("temperature_nk", state.temperature * 1e9);
        q.emplace_back("chemical_potential_khz", state.chemical_potential / h / 1e3);
        q.emplace_back("tf_radius_z_m", state.tf_radius_z);
        q.emplace_back("mean_density_cm3", state.mean_density * 1e-6);
        q.emplace_back("three_body_rate_hz", three_body_rate(state, k));
        if (const auto tau = elastic_collision_time(state, k)) q.emplace_back("elastic_collision_time_s", *tau);
        for (const auto& m : mode_spectrum(state)) q.emplace_back("mode_" + m.label + "_hz", m.frequency / two_pi);
        if (trap.exists) {
            q.emplace_back("lifetime_s", lifetime_budget(trap.frequency).lifetime);
            q.emplace_back("omega_z_hz", trap.frequency / two_pi);
            if (!trap.unbounded) {
                q.emplace_back("depth_khz", trap.depth / h / 1e3);
                const double a = 1e-9;
                const auto m = modulation_transfer(p, a);
                const double transfer = std::abs(m.delta_z_t) / a;
                q.emplace_back("transfer_ratio", transfer);
                if (transfer > 0.0) {
                    q.emplace_back("amplitude_for_alpha_m",
                                   amplitude_for_alpha(transfer, trap.frequency, s.number("condensate.atoms"),
                                                       s.number("scan.coherent_hold_ms") * 1e-3, 1.0, k));
                }
            }
        }
        csv_body << "quantity,value\n";
        for (const auto& [name, value] : q) csv_body << name << ',' << csv::number(value) << '\n';
    }

    if (!csv_name.empty()) {
        detail::write_file(out_dir / csv_name, csv_body.str() + detail::footer(s));
        out.files.insert(out.files.begin(), csv_name);
    }
    detail::write_file(out_dir / "scenario.cfg", serialize(s));
    out.files.push_back("scenario.cfg");
    std::ostringstream r;
    for (const auto& [key, value] : rep) r << key << " = " << value << '\n';
    detail::write_file(out_dir / "report.txt", r.str());
    out.files.push_back("report.txt");
    return out;
}

inline Scenario load_scenario(const std::filesystem::path& path) { return parse_config(detail::read_file(path)); }

// Summary of a finished run directory; checks that the stored scenario
// still hashes to the value recorded in the report.
inline std::string report(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    const auto rep_path = dir / "report.txt";
    const std::string rep = detail::read_file(rep_path);
    std::ostringstream os;
    os << rep;
    const auto cfg_path = dir / "scenario.cfg";
    if (std::filesystem::exists(cfg_path)) {
        const auto s = parse_config(detail::read_file(cfg_path));
        const bool ok = rep.find("inputs_fnv1a = " + inputs_hash(s)) != std::string::npos;
        os << "inputs_hash_ok = " << (ok ? "true" : "false") << '\n';
    }
    std::vector<std::string> names;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".csv") names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    for (const auto& name : names) {
        std::istringstream in(detail::read_file(dir / name));
        std::string line;
        std::size_t rows = 0;
        bool header = true;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            if (header) {
                header = false;
                continue;
            }
            ++rows;
        }
        os << "rows[" << name << "] = " << rows << '\n';
    }
    return os.str();
}

} // namespace cantibec

#endif
