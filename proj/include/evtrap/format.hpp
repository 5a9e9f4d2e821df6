#pragma once

#include <string>

namespace evtrap {

// Shortest round-trip decimal form; identical bytes on every run.
std::string fmt(double v);
std::string fmt(double v, int precision);

}  // namespace evtrap
