#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tartan/experiment.hpp"
#include "tartan/synth.hpp"

namespace tartan {

// Every tunable knob of the toolchain.
struct Settings {
  ExperimentConfig experiment;
  SynthSpec synth;
};

using SettingList = std::vector<std::pair<std::string, std::string>>;

// "key = value" lines; '#' starts a comment; blank lines are ignored.
// Throws usage_error("bad_config_line") with the line number.
SettingList parse_config(std::string_view text);

// Applies one setting. Throws usage_error("unknown_setting") or
// usage_error("bad_setting_value").
void apply_setting(Settings& settings, std::string_view key, std::string_view value);

// Defaults, then the config file (if any), then overrides in order.
Settings resolve_settings(const std::filesystem::path* config_file, const SettingList& overrides);

// Documented schema: (key, description) for every accepted key.
const std::vector<std::pair<std::string, std::string>>& setting_schema();

}  // namespace tartan
