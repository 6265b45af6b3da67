#pragma once

#include "dynamix/model.hpp"

#include <nlohmann/json.hpp>
#include <string>

namespace dynamix {

/// Model container ("DMXM1"):
///   magic "DMXMODL1" | u32 version | u32 manifest length | manifest JSON |
///   u32 blob count | per blob: u32 name length, name, u32 float count,
///   float32 little-endian payload.
/// The manifest carries the structural hyperparameters (validated against
/// every blob shape on load) plus caller metadata. The exploration
/// covariance is stored as its diagonal Sigma (entries >= 0).
inline constexpr char kCheckpointMagic[8] = {'D', 'M', 'X', 'M', 'O', 'D', 'L', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const DynaMixModel& model, const nlohmann::json& metadata,
                     const std::string& path);

struct LoadedModel {
    DynaMixModel model;
    nlohmann::json metadata;
};

LoadedModel load_checkpoint(const std::string& path);

} // namespace dynamix
