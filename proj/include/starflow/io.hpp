#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "starflow/monitors.hpp"

namespace starflow {

using Json = nlohmann::ordered_json;

/// Pretty JSON with every floating-point value at 17 significant digits and
/// non-finite values as the strings "inf", "-inf" and "nan".
std::string dump_json(const Json& j);
void write_json_file(const std::filesystem::path& path, const Json& j);
/// Throws MISSING_ARTIFACT if absent, PARSE_ERROR if malformed.
Json read_json_file(const std::filesystem::path& path);

/// Accepts a JSON number or one of the non-finite strings.
double json_double(const Json& j);
/// Number for finite values, string sentinel otherwise.
Json json_value(double v);

inline constexpr const char* kMonitorsHeader =
    "t,tau,minH,maxH,minF,minXnu,minZstarOverF,maxZsupOverF,alphaInt,alphaExt,"
    "m_h1,m_h2,m_h3,m_h4,G_h1,G_h2,G_h3,G_h4,D,extinctionMargin";

void write_monitors_csv(std::ostream& os, const std::vector<StarMonitorRecord>& records);
std::vector<StarMonitorRecord> read_monitors_csv(std::istream& is);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace starflow
