#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

namespace fvi::cli {

using nlohmann::json;

// Flat key = value text with [section] headers, # comments, arrays [a, b]
// and inline tables {k = v}. Dotted keys nest. Errors carry line numbers.
json parse_config_text(std::string_view text, const std::string& source = "<config>");

// Reads a config file. A file starting with '{' is JSON: either a bare config
// or a RunRecord, whose "config" member is used.
json load_config(const std::string& path);

// Single value in config syntax; bare words become strings.
json parse_value(std::string_view text);

// `divergence = "chi_n"` plus `divergence_params = {n = 2}`, and bare model
// or family names, rewritten to the table form.
void expand_shorthand(json& cfg);

// Sets cfg["a"]["b"] for path "a.b", creating objects on the way.
void set_path(json& cfg, std::string_view path, json value);

// Applies "a.b=value" overrides.
void apply_override(json& cfg, std::string_view assignment);

}  // namespace fvi::cli
