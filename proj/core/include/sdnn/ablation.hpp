#pragma once

#include "sdnn/config.hpp"
#include "sdnn/data.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sdnn {

struct AblationCell {
    std::string name;
    RunConfig config;
};

/// Names accepted by ablation_preset().
const std::vector<std::string>& ablation_presets();

/// Expands a preset into its grid cells on top of `base`:
///   aux_noise  – auxiliary heads × {none, Dropout, Gaussian} (5 cells)
///   spatial    – spatial vs non-spatial Dropout/Gaussian, max and avg pooling (7 cells)
///   sigma      – Gaussian σ ∈ {0.15, 0.1, 0.08, 0.06, 0.04}
///   pdrop      – Dropout p ∈ {0.2, 0.15, 0.1, 0.05, 0.02}
///   placement  – Gaussian noise on every subset of the three blocks (8 cells)
/// Throws ValueError for an unknown preset.
std::vector<AblationCell> ablation_preset(const std::string& preset, const RunConfig& base);

struct AblationRow {
    std::string preset;
    std::string cell;
    std::string seed; // decimal seed, or "all" for the aggregate over seeds
    double one_shot_mean = 0.0;
    double one_shot_ci95 = 0.0;
    double five_shot_mean = 0.0;
    double five_shot_ci95 = 0.0;
};

struct AblationOptions {
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::size_t episodes = 500;
    bool five_shot = true;
    std::size_t jobs = 1;
    std::function<void(const std::string&)> log;
};

/// Trains and evaluates every (cell, seed) pair. Seed s drives both training
/// and episode sampling, so cells are compared on identical episodes. Rows come
/// back grouped by cell: one per seed, then the aggregate.
std::vector<AblationRow> run_ablation(const FewShotDataset& ds, const std::string& preset,
                                      const std::vector<AblationCell>& cells, const AblationOptions& options);

std::string ablation_csv_header();
std::string to_csv_line(const AblationRow& row);

} // namespace sdnn
