#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wardwatch/util/timeutil.hpp"

namespace ww::evalkit {

// One evaluated admission: the score trace over its instants plus the label.
// Evaluation is admission-level throughout: an admission's score is the max
// over its series, and alerting means that max crossing a threshold.
struct AdmissionScore {
    std::string admission_id;
    int label = 0;
    std::vector<std::pair<Timestamp, double>> series;  // sorted by ts
    double max_score = 0.0;
    std::optional<Timestamp> target_ts;
    Timestamp admit_ts{0};
};

// Builds an AdmissionScore from an unsorted trace; throws on empty series.
AdmissionScore make_admission_score(std::string admission_id, int label,
                                    std::vector<std::pair<Timestamp, double>> series,
                                    std::optional<Timestamp> target_ts = std::nullopt,
                                    Timestamp admit_ts = Timestamp{0});

// Mann-Whitney AUC over (case, control) max-score pairs, ties worth 1/2.
// Counted in integers (2 per win, 1 per tie) with one final division, so the
// result is the exact rational. Throws if either class is absent.
double admission_level_auc(const std::vector<AdmissionScore>& scores);

// Same statistic over raw (score, label) pairs; also the row-level AUC.
double auc_pairs(const std::vector<double>& scores, const std::vector<int>& labels);

// Smallest threshold from the observed control scores (plus +inf, which
// always qualifies) whose specificity reaches the target. An admission with
// max_score >= theta alerts, so specificity = fraction of controls < theta.
double threshold_for_specificity(std::vector<double> control_scores, double target);

struct Confusion {
    double sensitivity = 0.0;
    double specificity = 0.0;
    std::size_t alerted_cases = 0, alerted_controls = 0;
    std::size_t n_cases = 0, n_controls = 0;
};
Confusion confusion_at(const std::vector<AdmissionScore>& scores, double theta);

// Advance warning per true positive: days from the first instant with
// score >= theta to target_ts. Median is mean-of-middle-two for even counts
// and absent (not zero) when nothing crosses.
struct AdvanceWarning {
    std::vector<double> per_case_days;
    std::optional<double> median_days;
};
AdvanceWarning advance_warning(const std::vector<AdmissionScore>& scores, double theta);

// Mean alerted admissions per UTC calendar day over [interval.first,
// interval.second]; days without alerts count. Throws on an empty interval.
double alerts_per_day(const std::vector<AdmissionScore>& scores, double theta,
                      std::pair<Timestamp, Timestamp> interval);

// Five near-equal bins by ascending max_score (remainder rows go to the
// highest bins), each reporting its observed transfer rate.
struct CalibrationBin {
    std::size_t count = 0;
    double transfer_rate = 0.0;
};
std::vector<CalibrationBin> calibration_quintiles(const std::vector<AdmissionScore>& scores);

// ROC sweep over the observed score range, one point per candidate threshold,
// sorted by ascending threshold. fpr = 1 - specificity, tpr = sensitivity.
struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};
std::vector<RocPoint> roc_points(const std::vector<AdmissionScore>& scores);

struct ReportRow {
    std::string method;   // icuww | model_a | model_b
    std::string variant;  // all | excl_lt_24h
    double threshold = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double auc = 0.0;
    std::optional<double> median_advance_warning_days;
    double alerts_per_day = 0.0;
    std::size_t n_cases = 0, n_controls = 0;
};

// Published operating points kept alongside the computed rows for plot
// context; never compared against.
struct ReferenceMark {
    std::string name;
    double sensitivity = 0.0;
    double specificity = 0.0;
    std::optional<double> auc;
};
std::vector<ReferenceMark> published_references();

struct CompareReport {
    std::vector<ReportRow> rows;
    std::vector<ReferenceMark> references;
    double icuww_specificity = 0.0;  // achieved, matched by model_a
    double model_a_threshold = 0.0;
    double model_b_threshold = 0.0;
};

// Side-by-side evaluation: the rule benchmark at its natural operating point,
// the model at a threshold matching the benchmark's achieved specificity
// (model_a) and at 75% specificity (model_b), each also with the variant that
// drops cases transferred within 24h of admission. The benchmark trace is
// encoded as 0/1 scores with the 1 at its first alert instant.
CompareReport compare_report(const std::vector<AdmissionScore>& model,
                             const std::vector<AdmissionScore>& icuww,
                             std::pair<Timestamp, Timestamp> interval,
                             double model_b_specificity = 0.75);

void write_report_csv(const CompareReport& report, const std::string& path);
void write_roc_csv(const std::vector<RocPoint>& points, const std::string& path);
void write_calibration_csv(const std::vector<CalibrationBin>& bins, const std::string& path);
void write_warnings_csv(const std::vector<AdmissionScore>& scores, double theta,
                        const std::string& path);

}  // namespace ww::evalkit
