#include "rtp/format.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "rtp/error.hpp"

namespace rtp {

std::string num17(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parseNumber(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    char* end = nullptr;
    const double x = std::strtod(s.c_str(), &end);
    if (end != s.c_str() && *end == '\0') return x;
  }
  fail(ErrorKind::Config, "expected a number, got " + j.dump());
}

}  // namespace rtp
