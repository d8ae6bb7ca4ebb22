#pragma once

#include <string>

namespace fiberopt {

/// Rounds to 9 significant digits so JSON dumps print the short form.
double sig9(double x);

/// "%.9g"
std::string fmt9(double x);

}  // namespace fiberopt
