#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cliff/criterion.hpp"
#include "cliff/density.hpp"
#include "cliff/evalkit.hpp"
#include "cliff/io.hpp"
#include "cliff/trainer.hpp"

namespace cliff::cli {

struct ConfigError : Error {
    using Error::Error;
};

struct DatasetConfig {
    std::vector<int> threshold_counts = {2, 1};
    std::vector<std::vector<double>> thresholds;  // explicit override; empty -> random
    double min_jump = 2.0;
    double mixing_scale = 0.5;
    double max_condition = 20.0;
    std::size_t n = 5000;
    std::uint64_t dataset_seed = 1;
};

/// One validated document driving every subcommand. Unknown keys anywhere
/// are rejected before any compute starts.
struct RunConfig {
    DatasetConfig dataset;
    density::KernelConfig kernel;
    criterion::CliffWeights weights;  // weights.kernel mirrors `kernel`
    trainer::EncoderSpec encoder;
    trainer::TrainConfig train;       // train.weights mirrors `weights`
    evalkit::DetectorConfig eval;

    void validate() const;
};

RunConfig default_config();
RunConfig parse_config(const std::string& json_text);
std::string config_to_json(const RunConfig& cfg);

/// Spec, mixing, and samples all derive deterministically from
/// dataset_seed; rerunning with the same config is bit-identical.
io::Dataset generate_dataset(const DatasetConfig& ds);

std::string mcc_report_to_json(const evalkit::MccReport& report);
std::string threshold_report_to_json(const evalkit::ThresholdReport& report);

}  // namespace cliff::cli
