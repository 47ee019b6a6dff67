#include "wardwatch/cohort.hpp"

#include <algorithm>
#include <stdexcept>

#include "wardwatch/util/csv.hpp"
#include "wardwatch/util/rng.hpp"

namespace ww {
namespace cohort {

const char* to_string(ExclusionReason r) {
    switch (r) {
        case ExclusionReason::none: return "none";
        case ExclusionReason::direct_icu_admission: return "direct_icu_admission";
        case ExclusionReason::or_or_recovery_source: return "or_or_recovery_source";
        case ExclusionReason::neonatal: return "neonatal";
        case ExclusionReason::data_violation: return "data_violation";
    }
    return "?";
}

namespace {

bool is_icu(WardType w) { return w == WardType::icu || w == WardType::neonatal_icu; }

CohortLabel label_one(const Admission& a) {
    CohortLabel lab;
    lab.admission_id = a.admission_id;

    if (a.transfers.empty()) {
        lab.excluded = true;
        lab.reason = ExclusionReason::data_violation;
        return lab;
    }
    bool neonatal = a.age < 1.0;
    for (const auto& t : a.transfers)
        if (t.ward_type == WardType::neonatal_icu) neonatal = true;
    if (neonatal) {
        lab.excluded = true;
        lab.reason = ExclusionReason::neonatal;
        return lab;
    }

    // Only the first ICU segment matters; later ones are readmissions.
    for (std::size_t i = 0; i < a.transfers.size(); ++i) {
        if (!is_icu(a.transfers[i].ward_type)) continue;
        if (i == 0) {
            lab.excluded = true;
            lab.reason = ExclusionReason::direct_icu_admission;
            return lab;
        }
        if (a.transfers[i - 1].ward_type == WardType::general) {
            lab.is_case = true;
            lab.target_ts = a.transfers[i].in_ts;
        }
        // OR/recovery (or any non-general) source: an expected post-surgical
        // transfer, so the admission stays in the control population.
        return lab;
    }
    return lab;
}

}  // namespace

std::vector<CohortLabel> label_admissions(const Dataset& ds) {
    std::vector<CohortLabel> out;
    out.reserve(ds.admissions.size());
    for (const auto& a : ds.admissions) out.push_back(label_one(a));
    return out;
}

std::vector<ScoringInstant> scoring_instants(const Admission& a, const CohortLabel& label) {
    if (label.excluded) throw std::invalid_argument("scoring_instants on excluded admission");
    std::vector<Timestamp> ts;
    ts.reserve(a.events.size());
    for (const auto& e : a.events) {
        if (label.is_case && label.target_ts && e.ts >= *label.target_ts) continue;
        ts.push_back(e.ts);
    }
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    std::vector<ScoringInstant> out;
    out.reserve(ts.size());
    for (auto t : ts) out.push_back({a.admission_id, t});
    return out;
}

Split split_train_test(const std::vector<CohortLabel>& labels, double train_fraction,
                       std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("train_fraction must be in (0, 1)");
    std::vector<std::string> cases, controls;
    for (const auto& l : labels) {
        if (l.excluded) continue;
        (l.is_case ? cases : controls).push_back(l.admission_id);
    }
    if (cases.size() < 2) throw std::runtime_error("cannot stratify: fewer than 2 cases");

    Split split;
    Rng rng(splitmix64(seed ^ 0x73706c6974ULL));  // stream tag "split"
    auto take = [&](std::vector<std::string>& ids) {
        std::sort(ids.begin(), ids.end());
        rng.shuffle(ids);
        std::size_t n_train = static_cast<std::size_t>(
            static_cast<double>(ids.size()) * train_fraction);
        if (ids.size() >= 2) {
            n_train = std::max<std::size_t>(1, std::min(n_train, ids.size() - 1));
        }
        for (std::size_t i = 0; i < ids.size(); ++i)
            (i < n_train ? split.train_ids : split.test_ids).push_back(ids[i]);
    };
    take(cases);
    take(controls);
    std::sort(split.train_ids.begin(), split.train_ids.end());
    std::sort(split.test_ids.begin(), split.test_ids.end());
    return split;
}

void write_labels_csv(const std::vector<CohortLabel>& labels, const std::string& path) {
    CsvWriter w(path, {"admission_id", "is_case", "target_ts", "excluded", "reason"});
    for (const auto& l : labels)
        w.write_row({l.admission_id, l.is_case ? "1" : "0",
                     l.target_ts ? format_iso8601(*l.target_ts) : "",
                     l.excluded ? "1" : "0", to_string(l.reason)});
}

void write_instants_csv(const std::vector<ScoringInstant>& instants, const std::string& path) {
    CsvWriter w(path, {"admission_id", "ts"});
    for (const auto& i : instants) w.write_row({i.admission_id, format_iso8601(i.ts)});
}

std::vector<CohortLabel> read_labels_csv(const std::string& path) {
    CsvReader r(path);
    const auto c_id = r.col("admission_id"), c_case = r.col("is_case"),
               c_target = r.col("target_ts"), c_ex = r.col("excluded");
    std::vector<CohortLabel> out;
    std::vector<std::string> f;
    while (r.next(f)) {
        CohortLabel l;
        l.admission_id = f[c_id];
        l.is_case = f[c_case] == "1";
        if (!f[c_target].empty()) l.target_ts = parse_iso8601(f[c_target]);
        l.excluded = f[c_ex] == "1";
        out.push_back(std::move(l));
    }
    return out;
}

}  // namespace cohort
}  // namespace ww
