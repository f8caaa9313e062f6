#pragma once

// Text container for model parameters:
//
//   gazetrait-checkpoint <layout version>
//   dims <input> <hidden> <layers> <head_hidden> <classes> <dropout>
//   tensor <name> <rows> <cols>
//   <rows lines of cols values>
//   ...
//
// Values use the shortest round-trip decimal form, so save/load is exact.

#include <filesystem>
#include <string>

#include "gazetrait/model.hpp"

namespace gazetrait::model {

inline constexpr int kCheckpointLayoutVersion = 1;

std::string format_checkpoint(const ModelParams<double>& params);
/// Throws SchemaMismatch on a wrong tag/version or unknown tensor and
/// ShapeMismatch when a tensor's shape disagrees with the declared dims.
ModelParams<double> parse_checkpoint(const std::string& text);

void save_checkpoint(const ModelParams<double>& params, const std::filesystem::path& path);
ModelParams<double> load_checkpoint(const std::filesystem::path& path);

}  // namespace gazetrait::model
