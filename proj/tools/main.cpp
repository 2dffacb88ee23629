#include "commands.hpp"

#include <msc/error.hpp>
#include <msc/version.hpp>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>

int main(int argc, char** argv) {
    CLI::App app{"subspace diagnostics over activation caches", "msc"};
    app.set_version_flag("--version", std::string(msc::kVersion));
    app.require_subcommand(1);
    std::function<void()> run;
    msc::cli::register_commands(app, &run);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        run();
    } catch (const msc::ValidationError& e) {
        std::fprintf(stderr, "msc: %s\n", e.what());
        return 2;
    } catch (const msc::NumericalError& e) {
        std::fprintf(stderr, "msc: numerical failure: %s\n", e.what());
        return 3;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "msc: malformed metadata: %s\n", e.what());
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "msc: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "msc: %s\n", e.what());
        return 3;
    }
    return 0;
}
