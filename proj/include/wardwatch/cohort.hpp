#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wardwatch/core.hpp"

namespace ww {
namespace cohort {

enum class ExclusionReason { none, direct_icu_admission, or_or_recovery_source, neonatal,
                             data_violation };

const char* to_string(ExclusionReason r);

struct CohortLabel {
    std::string admission_id;
    bool is_case = false;
    std::optional<Timestamp> target_ts;  // in-time of the first unplanned ICU transfer
    bool excluded = false;
    ExclusionReason reason = ExclusionReason::none;
};

struct ScoringInstant {
    std::string admission_id;
    Timestamp ts;
};

// Case/control assignment per admission:
//   - neonatal patients (age < 1y) or any neonatal-ICU segment: excluded
//   - first ICU segment begins the stay: excluded (direct ICU admission)
//   - first ICU segment sourced from a general ward: case, target at its in-time
//   - first ICU segment sourced from OR/recovery/elsewhere: control (planned
//     post-surgical transfer); later ICU segments are never considered
//   - no transfer records: excluded as a data violation
std::vector<CohortLabel> label_admissions(const Dataset& ds);

// One instant per distinct event timestamp, ascending. For cases, instants at
// or after the target are removed so no post-event data can leak into
// training or scoring.
std::vector<ScoringInstant> scoring_instants(const Admission& a, const CohortLabel& label);

struct Split {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
};

// Admission-level partition, stratified by case status so both sides hold
// cases. Per stratum the train count is floor(n * train_fraction), clamped
// to [1, n-1] so neither side is empty. Deterministic for a fixed seed.
Split split_train_test(const std::vector<CohortLabel>& labels, double train_fraction,
                       std::uint64_t seed);

void write_labels_csv(const std::vector<CohortLabel>& labels, const std::string& path);
void write_instants_csv(const std::vector<ScoringInstant>& instants, const std::string& path);
std::vector<CohortLabel> read_labels_csv(const std::string& path);

}  // namespace cohort
}  // namespace ww
