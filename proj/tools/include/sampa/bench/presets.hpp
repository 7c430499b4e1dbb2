#pragma once

#include <string_view>
#include <vector>

#include "sampa/bench/config.hpp"

namespace sampa::bench {

/// fig1, lemma1, theorem1, alignment, timing, lambda-sweep.
std::vector<std::string_view> preset_names();

/// Config text of a preset. ConfigError for unknown names.
std::string_view preset_text(std::string_view name);

ExperimentConfig load_preset(std::string_view name);

}  // namespace sampa::bench
