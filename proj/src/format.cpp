#include "fiberopt/format.hpp"

#include <cstdlib>

#include <fmt/format.h>

namespace fiberopt {

double sig9(double x) { return std::strtod(fmt9(x).c_str(), nullptr); }

std::string fmt9(double x) { return fmt::format("{:.9g}", x); }

}  // namespace fiberopt
