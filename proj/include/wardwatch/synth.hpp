#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wardwatch/core.hpp"

namespace ww {
namespace synth {

// Everything the generator does is driven by these knobs. Randomness comes
// from one master seed; each admission draws from its own split stream, so
// content is a function of (seed, admission index) alone.
struct SynthConfig {
    std::size_t n_admissions = 1000;
    double prevalence = 0.01;  // P(admission is an unplanned-ICU case)
    std::uint64_t seed = 1;
    int n_facilities = 3;

    double vitals_cadence_min_h = 1.0;  // gap between observation rounds
    double vitals_cadence_max_h = 4.0;
    int fluids_per_day_min = 2;
    int fluids_per_day_max = 4;
    std::map<std::string, double> lab_panel_prob;  // panel name -> per-day draw probability

    double deterioration_lead_min_h = 12.0;  // signal window before the ICU transfer
    double deterioration_lead_max_h = 120.0;

    double no_signal_frac = 0.2;   // cases with no pre-transfer signal at all
    double icuww_frac = 0.4;       // cases that trip at least one threshold rule pre-transfer
    double prior_frac = 0.35;      // admissions whose patient has one earlier admission
    double direct_icu_frac = 0.03;      // excluded: stay starts in the ICU
    double neonatal_frac = 0.02;        // excluded: age under one year
    double planned_icu_frac = 0.04;     // controls routed general -> OR -> ICU
    double control_abnormal_frac = 0.03;  // controls with one stray abnormal lab

    SynthConfig();  // fills lab_panel_prob with the default panels
};

// "key = value" lines, '#' comments, blank lines ignored. Unknown keys and
// malformed numbers are errors. Panel probabilities via lab_panel_prob.<name>.
SynthConfig parse_synth_config(const std::string& text);
SynthConfig load_synth_config(const std::string& path);

// One assignment from the shared config grammar; false when the key is not
// a synth key (supersets like the pipeline config fall through to their
// own keys), throws on a malformed value.
bool apply_synth_key(SynthConfig& cfg, const std::string& key, const std::string& value);

// What the generator meant each admission to be, for checking that cohort
// labeling reconstructs it exactly.
struct IntendedLabel {
    std::string admission_id;
    bool is_case = false;
    bool excluded = false;

    friend bool operator==(const IntendedLabel&, const IntendedLabel&) = default;
};

struct SynthResult {
    Dataset dataset;
    std::vector<IntendedLabel> intents;  // sorted by admission_id, like the dataset
};

SynthResult generate_with_intents(const SynthConfig& config);
Dataset generate(const SynthConfig& config);

struct SummaryStats {
    std::size_t n_admissions = 0;
    std::size_t n_cases = 0;
    std::size_t n_excluded = 0;
    double prevalence = 0.0;  // cases / (cases + controls)
    std::map<std::string, std::size_t> event_counts;  // per event kind
    double vitals_gap_median_h = 0.0;
    std::map<int, std::size_t> vitals_gap_hist;  // gap floor-bucketed to whole hours
    double fluids_per_day_median = 0.0;

    std::string to_text() const;
};

SummaryStats describe(const Dataset& ds);

}  // namespace synth
}  // namespace ww
