#pragma once

// Synthetic runs with planted recycling events. The generator records what
// it planted so classifiers and metrics can be scored against it.

#include "tracelens/cycling.hpp"
#include "tracelens/trace.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tracelens {

enum class LineageShape { chain, tree };
enum class ScoreProfile { improving, jackpot_then_flat, noisy };

LineageShape parse_lineage_shape(std::string_view s);
ScoreProfile parse_score_profile(std::string_view s);
std::string_view to_string(LineageShape s);
std::string_view to_string(ScoreProfile p);

struct SynthConfig {
    int iterations = 100;
    double planted_literal_recycle_rate = 0.0;
    double planted_tuning_recycle_rate = 0.0;
    LineageShape lineage_shape = LineageShape::chain;
    ScoreProfile score_profile = ScoreProfile::improving;
    std::uint64_t rng_seed = 0;
    std::string run_id = "synthetic";
};

struct PlantedLine {
    std::size_t line_index = 0;  // in the child source
    LineCategory category = LineCategory::novel;
    std::optional<int> deletion_iteration;
};

struct PlantedEdit {
    std::string parent_id;
    std::string child_id;
    int iteration = 0;
    std::vector<PlantedLine> added;
};

struct GroundTruth {
    std::vector<PlantedEdit> edits;
    std::size_t literal = 0;
    std::size_t tuning = 0;
    std::size_t trivial = 0;
    std::size_t novel = 0;

    std::size_t code_lines() const { return literal + tuning + novel; }
    double literal_rate() const;
    double tuning_share() const;
    json to_json() const;
};

struct SyntheticTrace {
    Run run;
    GroundTruth truth;
};

/// Pure function of `config`. Throws InvalidConfig when the planted rates
/// are outside [0,1], sum above 1, or iterations < 1.
SyntheticTrace generate_synthetic_run(const SynthConfig& config);

inline constexpr const char* kGroundTruthFile = "ground_truth.json";

/// Writes the run's six tables plus the ground-truth sidecar.
void write_synthetic_run(const SyntheticTrace& trace, const std::filesystem::path& dir);

}  // namespace tracelens
