#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "trgan/experiment.hpp"

namespace trgan {

inline constexpr std::array<const char*, 7> kFigureNames{
    "hist_discriminator", "hist_generator",          "roc_discriminator", "roc_generator",
    "fidelity_vs_step",   "privacy_utility_vs_step", "privacy_vs_utility"};

/// Writes <name>.csv and <name>.svg for every figure into `out_dir` and
/// returns the file names. A report missing a required section raises
/// ConfigError naming it ("points", "discriminator_attack", "generator_attack").
std::vector<std::string> emit_figures(const Report& report, const std::filesystem::path& out_dir);

/// Re-renders every <name>.svg from the <name>.csv files in `data_dir`.
std::vector<std::string> render_figures(const std::filesystem::path& data_dir, const std::filesystem::path& out_dir);

/// Histogram bin count used for score histograms.
inline constexpr int kHistogramBins = 20;

}  // namespace trgan
