#pragma once

#include <optional>
#include <string>

namespace ww {

// Extracts a numeric value from a lab result's text representation.
// Plain numerics parse exactly; comparator-prefixed results ("<0.01",
// "> 5") return the bound with the censoring direction discarded;
// anything else is missing. Total: never throws.
std::optional<double> clean_lab_value(const std::string& raw_text);

// Rounds an ATC code to level 4 (the 5-character prefix). Codes at or
// below level 4 are returned unchanged. Lengths outside the ATC level
// structure {1,3,4,5,7} are rejected.
std::string atc_truncate(const std::string& code);

// Syntactic LOINC shape: digits, hyphen, single check digit.
bool loinc_shape_valid(const std::string& code);

// Converts (value, unit) for the five benchmark analytes to the unit the
// benchmark thresholds are stated in. All other labs pass through.
// Returns the canonical unit alongside the converted value.
std::pair<double, std::string> canonicalize_unit(const std::string& loinc, double value,
                                                 const std::string& unit);

}  // namespace ww
