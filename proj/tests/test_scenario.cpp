#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "cantibec/scenario.hpp"

using namespace cantibec;
namespace fs = std::filesystem;

namespace {
const fs::path source = CANTIBEC_SOURCE_DIR;

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("cantibec_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int cli(const std::string& args) {
    const std::string cmd = std::string("\"") + CANTIBEC_CLI + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const std::string& name, const std::string& body) {
    const auto p = fs::temp_directory_path() / ("cantibec_cfg_" + name + ".cfg");
    std::ofstream(p) << body;
    return p;
}
} // namespace

TEST(Config, MinimalUsesDefaults) {
    const auto s = parse_config("[scenario]\nkind = potential\n");
    EXPECT_EQ(s.number("trap.omega_z_hz"), 10500.0);
    EXPECT_EQ(s.number("surface.thickness_nm"), 450.0);
    EXPECT_EQ(s.kind(), "potential");
}

TEST(Config, CommentsAndWhitespace) {
    const auto s = parse_config("# top\n\n[scenario]\n  kind = potential   # trailing\n[trap]\nd_um=2\n");
    EXPECT_EQ(s.number("trap.d_um"), 2.0);
}

TEST(Config, NegativeFrequencyNamesKey) {
    try {
        parse_config("[scenario]\nkind = potential\n[trap]\nomega_z_hz = -1\n");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "omega_z_hz");
        EXPECT_EQ(e.line(), 4);
    }
}

TEST(Config, UnknownKeyAndSection) {
    try {
        parse_config("[scenario]\nkind = potential\n[trap]\nomega_q = 3\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.line(), 4);
        EXPECT_EQ(e.key(), "omega_q");
    }
    EXPECT_THROW(parse_config("[nowhere]\nx = 1\n"), ConfigError);
}

TEST(Config, DuplicateAndMalformed) {
    try {
        parse_config("[scenario]\nkind = potential\nkind = potential\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.line(), 3);
    }
    EXPECT_THROW(parse_config("[scenario]\nkind potential\n"), ConfigError);
    EXPECT_THROW(parse_config("kind = potential\n"), ConfigError);
    EXPECT_THROW(parse_config("[scenario]\nkind = potential\n[trap]\nd_um = 1.5x\n"), ConfigError);
    EXPECT_THROW(parse_config("[scenario]\nkind = sideways\n"), ConfigError);
    EXPECT_THROW(parse_config("[trap]\nd_um = 1\n"), ConfigError); // kind is required
}

TEST(Config, SerializeRoundTrip) {
    for (const char* name : {"reference.cfg", "spectrum.cfg", "calibrate.cfg"}) {
        const auto s = load_scenario(source / "scenarios" / name);
        EXPECT_EQ(parse_config(serialize(s)), s) << name;
        EXPECT_EQ(inputs_hash(parse_config(serialize(s))), inputs_hash(s));
    }
}

TEST(Config, HashTracksInputs) {
    const auto a = parse_config("[scenario]\nkind = potential\n");
    const auto b = parse_config("[scenario]\nkind = potential\n[trap]\nd_um = 1.6\n");
    EXPECT_NE(inputs_hash(a), inputs_hash(b));
    EXPECT_EQ(inputs_hash(a).size(), 16u);
}

TEST(Config, SchemaListsEveryKey) {
    std::ostringstream os;
    write_schema(os);
    for (const auto& k : schema()) EXPECT_NE(os.str().find(k.key), std::string::npos) << k.key;
}

TEST(Run, PotentialRunsAreByteIdentical) {
    const auto s = load_scenario(source / "scenarios" / "reference.cfg");
    const auto a = scratch("pot_a"), b = scratch("pot_b");
    const auto ra = run_scenario(s, a);
    run_scenario(s, b);
    ASSERT_FALSE(ra.files.empty());
    for (const auto& f : ra.files) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_NE(slurp(a / "report.txt").find("exists = true"), std::string::npos);
}

TEST(Run, LossCurveMonotone) {
    const auto s = load_scenario(source / "scenarios" / "loss-curve.cfg");
    const auto dir = scratch("loss");
    run_scenario(s, dir);
    const auto curve = detail::read_curve(dir / "loss-curve.csv");
    ASSERT_GT(curve.fractions.size(), 10u);
    for (std::size_t i = 1; i < curve.fractions.size(); ++i) {
        EXPECT_GE(curve.fractions[i], curve.fractions[i - 1] - 1e-12);
    }
}

TEST(Run, ReportChecksHash) {
    const auto s = load_scenario(source / "scenarios" / "estimates.cfg");
    const auto dir = scratch("est");
    run_scenario(s, dir);
    EXPECT_NE(report(dir).find("inputs_hash_ok = true"), std::string::npos);
    EXPECT_THROW(report(dir / "missing"), IoError);
}

TEST(Cli, ExitCodes) {
    const auto out = scratch("cli");
    EXPECT_EQ(cli("validate \"" + (source / "scenarios" / "reference.cfg").string() + "\""), 0);
    EXPECT_EQ(cli("schema"), 0);
    EXPECT_EQ(cli("run \"" + (source / "scenarios" / "estimates.cfg").string() + "\" -o \"" + out.string() + "\""), 0);
    EXPECT_EQ(cli("report \"" + out.string() + "\""), 0);

    const auto bad = write_config("bad", "[scenario]\nkind = potential\n[trap]\nomega_z_hz = -1\n");
    EXPECT_EQ(cli("validate \"" + bad.string() + "\""), 1);
    EXPECT_EQ(cli("run \"" + bad.string() + "\""), 1);
    EXPECT_EQ(cli("frobnicate"), 1);

    EXPECT_EQ(cli("report \"" + (out / "nope").string() + "\""), 3);
    EXPECT_EQ(cli("validate /nonexistent/x.cfg"), 3);

    // trap pushed into the surface: no minimum survives
    const auto gone = write_config("gone", "[scenario]\nkind = resonance\n[trap]\nd_um = 0.3\n"
                                           "[scan]\nf_start_hz = 9600\nf_stop_hz = 9610\nf_step_hz = 10\n");
    EXPECT_EQ(cli("run \"" + gone.string() + "\" -o \"" + (out / "gone").string() + "\""), 2);
}
