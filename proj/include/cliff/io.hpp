#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cliff/synthdata.hpp"
#include "cliff/trainer.hpp"

namespace cliff::io {

struct IoError : Error {
    using Error::Error;
};

/// Writes via a temp file in the same directory, then renames, so consumers
/// never observe partial files.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

/// Full-precision float formatting shared by every CSV/JSON writer.
std::string format_double(double v);

/// A generated dataset: true latents, observations, and everything needed
/// to regenerate it bit-exactly.
struct Dataset {
    synth::LatentBatch z;
    synth::LatentBatch x;
    synth::GridDensitySpec spec;
    synth::MixingSpec mixing;
    std::uint64_t seed = 0;
    bool has_sidecar = true;
};

/// CSV columns z_1..z_d,x_1..x_D; the sidecar (same path, .json extension)
/// stores the spec, mixing, and seed.
void write_dataset(const std::filesystem::path& csv_path, const Dataset& ds);

/// Reads the CSV and, when present, the sidecar. has_sidecar is false when
/// only the CSV exists (spec/mixing left default).
Dataset read_dataset(const std::filesystem::path& csv_path);

void write_params(const std::filesystem::path& path, const trainer::EncoderParams& params);
trainer::EncoderParams read_params(const std::filesystem::path& path);

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<trainer::EpochRecord>& log);

}  // namespace cliff::io
