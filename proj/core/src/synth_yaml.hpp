#pragma once

#include "gazetrait/synth.hpp"
#include "yaml_util.hpp"

namespace gazetrait::synth {

/// Reads a spec mapping; `source` prefixes diagnostics.
SynthSpec spec_from_node(const YAML::Node& root, const std::string& source);

}  // namespace gazetrait::synth
