// cantibec command line: run / validate / schema / report.
// Exit codes: 0 ok, 1 config, 2 physics, 3 I/O.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cantibec/scenario.hpp"

namespace {

int fail(const char* category, const std::string& message, int code) {
    std::cerr << "error[" << category << "]: " << message << '\n';
    return code;
}

std::string describe(const cantibec::ConfigError& e) {
    std::string out;
    if (e.line() > 0) out += "line " + std::to_string(e.line()) + ": ";
    if (!e.key().empty()) out += e.key() + ": ";
    return out + e.what();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cantibec: atoms trapped near a vibrating cantilever"};
    app.require_subcommand(1);
    app.set_version_flag("--version", cantibec::version);

    std::string config_path;
    std::string output_override;
    auto* run = app.add_subcommand("run", "run a scenario and write CSV + report");
    run->add_option("config", config_path, "scenario file")->required();
    run->add_option("-o,--output", output_override, "output directory (overrides scenario.output)");

    auto* validate = app.add_subcommand("validate", "parse and validate a scenario");
    validate->add_option("config", config_path, "scenario file")->required();

    auto* schema = app.add_subcommand("schema", "print every scenario key with default and constraint");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "summarise a finished output directory");
    report->add_option("output-dir", report_dir, "directory written by run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*schema) {
            cantibec::write_schema(std::cout);
            return 0;
        }
        if (*report) {
            std::cout << cantibec::report(report_dir);
            return 0;
        }
        const auto s = cantibec::load_scenario(config_path);
        if (*validate) {
            std::cout << "ok " << s.text("scenario.name") << " kind=" << s.kind()
                      << " inputs_fnv1a=" << cantibec::inputs_hash(s) << '\n';
            return 0;
        }
        const std::filesystem::path out = output_override.empty() ? s.text("scenario.output") : output_override;
        const auto result = cantibec::run_scenario(s, out);
        for (const auto& f : result.files) std::cout << (out / f).string() << '\n';
        return 0;
    } catch (const cantibec::ConfigError& e) {
        return fail("config", describe(e), 1);
    } catch (const cantibec::DomainError& e) {
        return fail("config", e.what(), 1);
    } catch (const cantibec::PhysicsError& e) {
        return fail(e.category().c_str(), e.what(), 2);
    } catch (const cantibec::IoError& e) {
        return fail("io", e.what(), 3);
    } catch (const std::filesystem::filesystem_error& e) {
        return fail("io", e.what(), 3);
    }
}
