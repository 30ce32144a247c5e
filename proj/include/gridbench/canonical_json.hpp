#pragma once

#include <string>

#include "json.hpp"

namespace gridbench {

// Deterministic JSON encoding: object keys sorted, two-space indentation,
// floating-point numbers printed with 17 significant digits, trailing
// newline. Throws InvalidSpec on non-finite numbers.
std::string canonical_dump(const nlohmann::json& doc);

}  // namespace gridbench
