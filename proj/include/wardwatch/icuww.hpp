#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wardwatch/cohort.hpp"
#include "wardwatch/core.hpp"

namespace ww::icuww {

// Rule-based benchmark: alert when any bundled lab criterion is met.
struct Rule {
    std::string loinc;
    enum class Cmp { gt, lt } cmp = Cmp::gt;
    double threshold = 0.0;
    std::string unit;
};

// The five bundled criteria (troponin I, pH, pCO2, platelets, lactate).
std::vector<Rule> default_rules();

// Rules from a csv with columns loinc,comparator,threshold,unit.
std::vector<Rule> read_rules_csv(const std::string& path);

// True iff any lab event with ts <= t strictly satisfies its rule. "Observed"
// is cumulative over the stay; a past abnormal value keeps the alert raised.
// latest_only restricts the check to each analyte's most recent draw instead.
bool evaluate_at(const Admission& adm, Timestamp t, const std::vector<Rule>& rules,
                 bool latest_only = false);

// Earliest scoring instant at which evaluate_at fires, if any. Instants are
// assumed pre-truncated by the cohort (cases stop before the transfer).
std::optional<Timestamp> alert_series(const Admission& adm,
                                      const std::vector<cohort::ScoringInstant>& instants,
                                      const std::vector<Rule>& rules,
                                      bool latest_only = false);

}  // namespace ww::icuww
