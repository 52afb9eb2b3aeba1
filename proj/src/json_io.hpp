#pragma once

// Internal JSON conversions shared by dataset, checkpoint and report code.

#include <filesystem>
#include <string>

#include "cdqac/features.hpp"
#include "cdqac/sim.hpp"
#include "json.hpp"

namespace cdqac {

using Json = nlohmann::json;

Json to_json(const NormStats& s);
NormStats norm_from_json(const Json& j);

Json to_json(const FeatureFrame& f);
FeatureFrame frame_from_json(const Json& j);

Json to_json(const ScheduleTrace& t);
ScheduleTrace trace_from_json(const Json& j);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// Throws ParseError naming the key when it is missing.
const Json& require(const Json& j, const char* key);

}  // namespace cdqac
