#pragma once

#include "dynamix/systems.hpp"

#include <nlohmann/json.hpp>
#include <string>

namespace dynamix {

/// Binary corpus container ("DMX1"):
///   magic "DMXCORP1" | u32 version | u32 N | u32 T_seq | u32 count |
///   u32 T_C | u32 overlap | float32 row-major payload per sequence |
///   UTF-8 JSON trailer (provenance + generation parameters).
/// All integers and floats little-endian.
inline constexpr char kDatasetMagic[8] = {'D', 'M', 'X', 'C', 'O', 'R', 'P', '1'};
inline constexpr std::uint32_t kDatasetVersion = 1;

void write_dataset(const Corpus& corpus, const nlohmann::json& generation_params,
                   const std::string& path);

struct LoadedDataset {
    Corpus corpus;
    nlohmann::json trailer;
};

/// Validates magic/version/shape before touching the payload; throws
/// format_error on any mismatch.
LoadedDataset read_dataset(const std::string& path);

} // namespace dynamix
