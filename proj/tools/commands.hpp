#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace msc::cli {

struct Common {
    std::string cache;
    std::string out;
    std::uint64_t seed = 0;
};

// Registers every subcommand on app. Each callback stores the runner for the
// parsed subcommand in *run.
void register_commands(CLI::App& app, std::function<void()>* run);

} // namespace msc::cli
