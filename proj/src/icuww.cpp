#include "wardwatch/icuww.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "wardwatch/util/csv.hpp"
#include "wardwatch/util/stats.hpp"

namespace ww::icuww {

std::vector<Rule> default_rules() {
    return {
        {"10839-9", Rule::Cmp::gt, 0.3, "ug/L"},      // troponin I
        {"2744-1", Rule::Cmp::lt, 7.30, "pH"},        // arterial pH
        {"2019-8", Rule::Cmp::gt, 60.0, "mmHg"},      // pCO2
        {"777-3", Rule::Cmp::lt, 100000.0, "/uL"},    // platelets
        {"2524-7", Rule::Cmp::gt, 3.0, "mmol/L"},     // lactate
    };
}

std::vector<Rule> read_rules_csv(const std::string& path) {
    CsvReader r(path);
    std::size_t c_loinc = r.col("loinc"), c_cmp = r.col("comparator");
    std::size_t c_thr = r.col("threshold"), c_unit = r.col("unit");
    std::vector<Rule> rules;
    std::vector<std::string> f;
    while (r.next(f)) {
        Rule rule;
        rule.loinc = f[c_loinc];
        if (f[c_cmp] == "gt")
            rule.cmp = Rule::Cmp::gt;
        else if (f[c_cmp] == "lt")
            rule.cmp = Rule::Cmp::lt;
        else
            throw std::runtime_error(path + ": bad comparator '" + f[c_cmp] + "'");
        auto thr = parse_double(f[c_thr]);
        if (!thr) throw std::runtime_error(path + ": bad threshold '" + f[c_thr] + "'");
        rule.threshold = *thr;
        rule.unit = f[c_unit];
        rules.push_back(std::move(rule));
    }
    if (rules.empty()) throw std::runtime_error(path + ": no rules");
    return rules;
}

namespace {

bool satisfies(const Rule& r, double v) {
    return r.cmp == Rule::Cmp::gt ? v > r.threshold : v < r.threshold;
}

}  // namespace

bool evaluate_at(const Admission& adm, Timestamp t, const std::vector<Rule>& rules,
                 bool latest_only) {
    if (latest_only) {
        // Most recent draw per analyte decides; an abnormal value is cleared
        // by a later normal one.
        std::map<std::string, const ClinicalEvent*> latest;
        for (const auto& e : adm.events) {
            if (e.kind != EventKind::lab || e.ts > t || !e.value) continue;
            auto [it, fresh] = latest.try_emplace(e.code, &e);
            if (!fresh && e.ts >= it->second->ts) it->second = &e;
        }
        for (const auto& r : rules) {
            auto it = latest.find(r.loinc);
            if (it != latest.end() && satisfies(r, *it->second->value)) return true;
        }
        return false;
    }
    for (const auto& e : adm.events) {
        if (e.kind != EventKind::lab || e.ts > t || !e.value) continue;
        for (const auto& r : rules)
            if (r.loinc == e.code && satisfies(r, *e.value)) return true;
    }
    return false;
}

std::optional<Timestamp> alert_series(const Admission& adm,
                                      const std::vector<cohort::ScoringInstant>& instants,
                                      const std::vector<Rule>& rules, bool latest_only) {
    std::vector<Timestamp> ts;
    ts.reserve(instants.size());
    for (const auto& si : instants) ts.push_back(si.ts);
    std::sort(ts.begin(), ts.end());
    if (latest_only) {
        for (Timestamp t : ts)
            if (evaluate_at(adm, t, rules, true)) return t;
        return std::nullopt;
    }
    // Cumulative semantics: the first alert instant is the first instant at or
    // after the earliest qualifying lab, independent of event order.
    std::optional<Timestamp> first_abnormal;
    for (const auto& e : adm.events) {
        if (e.kind != EventKind::lab || !e.value) continue;
        for (const auto& r : rules) {
            if (r.loinc != e.code || !satisfies(r, *e.value)) continue;
            if (!first_abnormal || e.ts < *first_abnormal) first_abnormal = e.ts;
        }
    }
    if (!first_abnormal) return std::nullopt;
    auto it = std::lower_bound(ts.begin(), ts.end(), *first_abnormal);
    return it == ts.end() ? std::nullopt : std::optional<Timestamp>(*it);
}

}  // namespace ww::icuww
