#pragma once

#include <string>

#include <json.hpp>

namespace rtp {

// Decimal string with 17 significant digits (round-trips every double).
std::string num17(double x);
// Accepts a JSON number or a decimal string.
double parseNumber(const nlohmann::json& j);

}  // namespace rtp
