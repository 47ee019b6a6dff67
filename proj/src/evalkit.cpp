#include "wardwatch/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "wardwatch/util/csv.hpp"
#include "wardwatch/util/stats.hpp"

namespace ww::evalkit {

AdmissionScore make_admission_score(std::string admission_id, int label,
                                    std::vector<std::pair<Timestamp, double>> series,
                                    std::optional<Timestamp> target_ts, Timestamp admit_ts) {
    if (series.empty())
        throw std::invalid_argument("admission " + admission_id + ": empty score series");
    std::sort(series.begin(), series.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    AdmissionScore s;
    s.admission_id = std::move(admission_id);
    s.label = label;
    s.max_score = series.front().second;
    for (const auto& [ts, v] : series) s.max_score = std::max(s.max_score, v);
    s.series = std::move(series);
    s.target_ts = target_ts;
    s.admit_ts = admit_ts;
    return s;
}

double auc_pairs(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("auc: scores/labels length mismatch");
    std::vector<double> cases, controls;
    for (std::size_t i = 0; i < scores.size(); ++i)
        (labels[i] ? cases : controls).push_back(scores[i]);
    if (cases.empty() || controls.empty())
        throw std::invalid_argument("auc: both classes required");
    std::sort(controls.begin(), controls.end());
    // 2 units per win, 1 per tie; a single final division keeps the value the
    // exact rational u2 / (2 * n1 * n0).
    std::uint64_t u2 = 0;
    for (double s : cases) {
        auto lo = std::lower_bound(controls.begin(), controls.end(), s);
        auto hi = std::upper_bound(lo, controls.end(), s);
        u2 += 2 * static_cast<std::uint64_t>(lo - controls.begin());
        u2 += static_cast<std::uint64_t>(hi - lo);
    }
    return static_cast<double>(u2) /
           (2.0 * static_cast<double>(cases.size()) * static_cast<double>(controls.size()));
}

double admission_level_auc(const std::vector<AdmissionScore>& scores) {
    std::vector<double> s;
    std::vector<int> y;
    s.reserve(scores.size());
    y.reserve(scores.size());
    for (const auto& a : scores) {
        s.push_back(a.max_score);
        y.push_back(a.label);
    }
    return auc_pairs(s, y);
}

double threshold_for_specificity(std::vector<double> control_scores, double target) {
    if (control_scores.empty())
        throw std::invalid_argument("threshold_for_specificity: no controls");
    if (!(target > 0.0 && target < 1.0))
        throw std::invalid_argument("threshold_for_specificity: target outside (0,1)");
    std::sort(control_scores.begin(), control_scores.end());
    double n = static_cast<double>(control_scores.size());
    for (std::size_t i = 0; i < control_scores.size(); ++i) {
        if (i && control_scores[i] == control_scores[i - 1]) continue;
        // theta = this observed score; exactly i controls fall strictly below.
        if (static_cast<double>(i) / n >= target) return control_scores[i];
    }
    return std::numeric_limits<double>::infinity();
}

Confusion confusion_at(const std::vector<AdmissionScore>& scores, double theta) {
    Confusion c;
    for (const auto& a : scores) {
        bool alerted = a.max_score >= theta;
        if (a.label) {
            ++c.n_cases;
            c.alerted_cases += alerted;
        } else {
            ++c.n_controls;
            c.alerted_controls += alerted;
        }
    }
    if (!c.n_cases || !c.n_controls)
        throw std::invalid_argument("confusion_at: both classes required");
    c.sensitivity = static_cast<double>(c.alerted_cases) / static_cast<double>(c.n_cases);
    c.specificity = static_cast<double>(c.n_controls - c.alerted_controls) /
                    static_cast<double>(c.n_controls);
    return c;
}

namespace {

std::optional<Timestamp> first_crossing(const AdmissionScore& a, double theta) {
    for (const auto& [ts, v] : a.series)
        if (v >= theta) return ts;
    return std::nullopt;
}

}  // namespace

AdvanceWarning advance_warning(const std::vector<AdmissionScore>& scores, double theta) {
    AdvanceWarning w;
    for (const auto& a : scores) {
        if (!a.label) continue;
        if (!a.target_ts)
            throw std::invalid_argument("advance_warning: case " + a.admission_id +
                                        " lacks target_ts");
        auto first = first_crossing(a, theta);
        if (!first) continue;
        w.per_case_days.push_back(seconds_to_days(*a.target_ts - *first));
    }
    if (!w.per_case_days.empty()) {
        std::vector<double> tmp = w.per_case_days;
        w.median_days = median_inplace(tmp);
    }
    return w;
}

double alerts_per_day(const std::vector<AdmissionScore>& scores, double theta,
                      std::pair<Timestamp, Timestamp> interval) {
    if (interval.second < interval.first)
        throw std::invalid_argument("alerts_per_day: empty interval");
    std::int64_t d0 = utc_day(interval.first), d1 = utc_day(interval.second);
    std::size_t alerted = 0;
    for (const auto& a : scores) {
        auto first = first_crossing(a, theta);
        if (!first) continue;
        std::int64_t d = utc_day(*first);
        if (d >= d0 && d <= d1) ++alerted;
    }
    return static_cast<double>(alerted) / static_cast<double>(d1 - d0 + 1);
}

std::vector<CalibrationBin> calibration_quintiles(const std::vector<AdmissionScore>& scores) {
    if (scores.size() < 5)
        throw std::invalid_argument("calibration_quintiles: need at least 5 admissions");
    std::vector<const AdmissionScore*> order;
    order.reserve(scores.size());
    for (const auto& a : scores) order.push_back(&a);
    std::sort(order.begin(), order.end(), [](const AdmissionScore* a, const AdmissionScore* b) {
        if (a->max_score != b->max_score) return a->max_score < b->max_score;
        return a->admission_id < b->admission_id;
    });
    std::size_t n = order.size(), base = n / 5, rem = n % 5;
    std::vector<CalibrationBin> bins;
    std::size_t at = 0;
    for (std::size_t i = 0; i < 5; ++i) {
        std::size_t size = base + (i >= 5 - rem ? 1 : 0);
        CalibrationBin b;
        b.count = size;
        std::size_t transfers = 0;
        for (std::size_t j = 0; j < size; ++j) transfers += order[at++]->label;
        b.transfer_rate = size ? static_cast<double>(transfers) / static_cast<double>(size) : 0.0;
        bins.push_back(b);
    }
    return bins;
}

std::vector<RocPoint> roc_points(const std::vector<AdmissionScore>& scores) {
    std::vector<double> thresholds;
    thresholds.reserve(scores.size() + 1);
    for (const auto& a : scores) thresholds.push_back(a.max_score);
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    thresholds.push_back(std::numeric_limits<double>::infinity());
    std::vector<RocPoint> pts;
    pts.reserve(thresholds.size());
    for (double t : thresholds) {
        Confusion c = confusion_at(scores, t);
        pts.push_back({t, 1.0 - c.specificity, c.sensitivity});
    }
    return pts;
}

std::vector<ReferenceMark> published_references() {
    return {
        {"hospital1_icuww", 0.420, 0.931, 0.676},
        {"hospital1_model_a", 0.589, 0.931, 0.862},
        {"hospital1_model_b", 0.795, 0.750, 0.862},
        {"mammography", 0.678, 0.750, std::nullopt},
    };
}

namespace {

std::vector<AdmissionScore> drop_early_cases(const std::vector<AdmissionScore>& scores) {
    std::vector<AdmissionScore> out;
    out.reserve(scores.size());
    for (const auto& a : scores) {
        if (a.label && a.target_ts && *a.target_ts - a.admit_ts < days(1)) continue;
        out.push_back(a);
    }
    return out;
}

ReportRow make_row(const std::string& method, const std::string& variant,
                   const std::vector<AdmissionScore>& scores, double theta,
                   std::pair<Timestamp, Timestamp> interval) {
    ReportRow r;
    r.method = method;
    r.variant = variant;
    r.threshold = theta;
    Confusion c = confusion_at(scores, theta);
    r.sensitivity = c.sensitivity;
    r.specificity = c.specificity;
    r.auc = admission_level_auc(scores);
    r.median_advance_warning_days = advance_warning(scores, theta).median_days;
    r.alerts_per_day = alerts_per_day(scores, theta, interval);
    r.n_cases = c.n_cases;
    r.n_controls = c.n_controls;
    return r;
}

}  // namespace

CompareReport compare_report(const std::vector<AdmissionScore>& model,
                             const std::vector<AdmissionScore>& icuww,
                             std::pair<Timestamp, Timestamp> interval,
                             double model_b_specificity) {
    CompareReport rep;
    const double rule_theta = 0.5;  // benchmark traces are 0/1
    Confusion rule_conf = confusion_at(icuww, rule_theta);
    rep.icuww_specificity = rule_conf.specificity;

    std::vector<double> controls;
    for (const auto& a : model)
        if (!a.label) controls.push_back(a.max_score);
    // The benchmark can sit on the boundary (no or all control alerts);
    // the matching thresholds there are the infinities, still exact.
    if (rep.icuww_specificity >= 1.0)
        rep.model_a_threshold = std::numeric_limits<double>::infinity();
    else if (rep.icuww_specificity <= 0.0)
        rep.model_a_threshold = -std::numeric_limits<double>::infinity();
    else
        rep.model_a_threshold = threshold_for_specificity(controls, rep.icuww_specificity);
    rep.model_b_threshold = threshold_for_specificity(controls, model_b_specificity);

    auto model24 = drop_early_cases(model);
    auto icuww24 = drop_early_cases(icuww);
    rep.rows.push_back(make_row("icuww", "all", icuww, rule_theta, interval));
    rep.rows.push_back(make_row("icuww", "excl_lt_24h", icuww24, rule_theta, interval));
    rep.rows.push_back(make_row("model_a", "all", model, rep.model_a_threshold, interval));
    rep.rows.push_back(make_row("model_a", "excl_lt_24h", model24, rep.model_a_threshold, interval));
    rep.rows.push_back(make_row("model_b", "all", model, rep.model_b_threshold, interval));
    rep.rows.push_back(make_row("model_b", "excl_lt_24h", model24, rep.model_b_threshold, interval));
    rep.references = published_references();
    return rep;
}

void write_report_csv(const CompareReport& report, const std::string& path) {
    CsvWriter w(path, {"method", "variant", "threshold", "sensitivity", "specificity", "auc",
                       "median_advance_warning_days", "alerts_per_day", "n_cases", "n_controls"});
    for (const auto& r : report.rows) {
        w.write_row({r.method, r.variant, format_double(r.threshold),
                     format_double(r.sensitivity), format_double(r.specificity),
                     format_double(r.auc),
                     r.median_advance_warning_days ? format_double(*r.median_advance_warning_days)
                                                   : "",
                     format_double(r.alerts_per_day), std::to_string(r.n_cases),
                     std::to_string(r.n_controls)});
    }
    for (const auto& m : report.references) {
        w.write_row({"reference:" + m.name, "published", "", format_double(m.sensitivity),
                     format_double(m.specificity), m.auc ? format_double(*m.auc) : "", "", "", "",
                     ""});
    }
}

void write_roc_csv(const std::vector<RocPoint>& points, const std::string& path) {
    CsvWriter w(path, {"threshold", "fpr", "tpr"});
    for (const auto& p : points)
        w.write_row({format_double(p.threshold), format_double(p.fpr), format_double(p.tpr)});
}

void write_calibration_csv(const std::vector<CalibrationBin>& bins, const std::string& path) {
    CsvWriter w(path, {"bin", "admissions", "transfer_rate"});
    for (std::size_t i = 0; i < bins.size(); ++i)
        w.write_row({std::to_string(i + 1), std::to_string(bins[i].count),
                     format_double(bins[i].transfer_rate)});
}

void write_warnings_csv(const std::vector<AdmissionScore>& scores, double theta,
                        const std::string& path) {
    CsvWriter w(path, {"admission_id", "first_alert_ts", "target_ts", "advance_warning_days"});
    for (const auto& a : scores) {
        if (!a.label || !a.target_ts) continue;
        auto first = first_crossing(a, theta);
        if (!first) continue;
        w.write_row({a.admission_id, format_iso8601(*first), format_iso8601(*a.target_ts),
                     format_double(seconds_to_days(*a.target_ts - *first))});
    }
}

}  // namespace ww::evalkit
