#pragma once

#include <string>

#include "snpirt/simulation.hpp"

namespace snpirt {

inline constexpr const char* kToolName = "snpirt";
inline constexpr const char* kToolVersion = "0.1.0";

// deterministic key order; every field needed to audit a run is included
std::string study_result_to_json(const StudyResult& result);

// aligned console tables: rejection rates to three decimals, selection
// percentages to one
std::string study_result_to_text(const StudyResult& result);

} // namespace snpirt
