#include "wardwatch/featgen.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "wardwatch/clean.hpp"
#include "wardwatch/comorbidity.hpp"
#include "wardwatch/util/csv.hpp"
#include "wardwatch/util/rng.hpp"
#include "wardwatch/util/stats.hpp"

namespace ww {
namespace featgen {

const std::vector<std::pair<std::string, std::string>> kVitalChannels = {
    {"hr", "hr"},   {"rr", "rr"},   {"spo2", "spo2"},
    {"sbp", "sbp"}, {"dbp", "dbp"}, {"glucose", "glucose"},
};
const std::vector<std::pair<std::string, std::string>> kFluidChannels = {
    {"9102-5", "oral_intake"},
    {"9108-2", "iv_intake"},
    {"9187-6", "urine"},
    {"9239-5", "balance_8h"},
};
const char* kFluidBalanceCode = "9239-5";
const char* kFluidUrineCode = "9187-6";

namespace {

constexpr int kDayWindows[] = {1, 3, 5, 7};
constexpr int kWeekWindows[] = {1, 2, 3, 4};
constexpr int kMonthWindowDays[] = {30, 182, 365};
constexpr std::int64_t kTrendWindowS = 3 * kSecondsPerDay;

std::string sanitize_code(char prefix, const std::string& code) {
    std::string out(1, prefix);
    for (char c : code) out.push_back(c == '-' ? '_' : c);
    return out;
}

// Shared aggregation core so the reference ops and the cached per-admission
// path produce bit-identical cells. `cum` is the running sum of values with
// cum[0] = 0.
struct SeriesView {
    const std::int64_t* ts;
    const double* val;
    const double* cum;
    std::size_t n;

    std::size_t upper(std::int64_t t) const {
        return static_cast<std::size_t>(std::upper_bound(ts, ts + n, t) - ts);
    }
};

std::optional<double> core_most_recent(const SeriesView& s, std::int64_t t) {
    std::size_t hi = s.upper(t);
    if (hi == 0) return std::nullopt;
    return s.val[hi - 1];
}

std::optional<double> core_window_agg(const SeriesView& s, std::int64_t t, std::int64_t w,
                                      Stat stat) {
    std::size_t lo = s.upper(t - w), hi = s.upper(t);
    std::size_t cnt = hi - lo;
    if (stat == Stat::count) return static_cast<double>(cnt);
    if (cnt == 0) return std::nullopt;
    switch (stat) {
        case Stat::avg: return (s.cum[hi] - s.cum[lo]) / static_cast<double>(cnt);
        case Stat::min: return *std::min_element(s.val + lo, s.val + hi);
        case Stat::max: return *std::max_element(s.val + lo, s.val + hi);
        default: return std::nullopt;
    }
}

std::optional<double> core_trend(const SeriesView& s, std::int64_t t, std::int64_t w,
                                 std::int64_t admit) {
    std::size_t lo = s.upper(t - w), hi = s.upper(t);
    std::vector<std::pair<double, double>> pts;
    pts.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i)
        pts.push_back({seconds_to_days(s.ts[i] - admit), s.val[i]});
    return ols_slope(pts);
}

// Owned series with cached prefix sums.
struct Channel {
    std::vector<std::int64_t> ts;
    std::vector<double> val;
    std::vector<double> cum;

    void push(std::int64_t t, double v) {
        ts.push_back(t);
        val.push_back(v);
    }
    void seal() {
        cum.resize(ts.size() + 1);
        cum[0] = 0;
        for (std::size_t i = 0; i < ts.size(); ++i) cum[i + 1] = cum[i] + val[i];
    }
    SeriesView view() const { return {ts.data(), val.data(), cum.data(), ts.size()}; }
    std::size_t upper(std::int64_t t) const { return view().upper(t); }
};

double opt(std::optional<double> v) { return v ? *v : missing(); }

}  // namespace

std::optional<double> most_recent(const Series& s, Timestamp t) {
    Channel ch;
    for (const auto& [ets, v] : s) ch.push(ets.s, v);
    ch.seal();
    return core_most_recent(ch.view(), t.s);
}

std::optional<double> window_agg(const Series& s, Timestamp t, std::int64_t window_s, Stat stat) {
    Channel ch;
    for (const auto& [ets, v] : s) ch.push(ets.s, v);
    ch.seal();
    return core_window_agg(ch.view(), t.s, window_s, stat);
}

std::optional<double> trend(const Series& s, Timestamp t, std::int64_t window_s,
                            Timestamp admit_ts) {
    Channel ch;
    for (const auto& [ets, v] : s) ch.push(ets.s, v);
    ch.seal();
    return core_trend(ch.view(), t.s, window_s, admit_ts.s);
}

double admission_rand(const std::string& admission_id) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : admission_id) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
}

const char* to_string(ColumnType t) {
    switch (t) {
        case ColumnType::key: return "key";
        case ColumnType::meta: return "meta";
        case ColumnType::numeric: return "numeric";
        case ColumnType::categorical: return "categorical";
        case ColumnType::label: return "label";
    }
    return "?";
}

std::optional<ColumnType> parse_column_type(const std::string& s) {
    if (s == "key") return ColumnType::key;
    if (s == "meta") return ColumnType::meta;
    if (s == "numeric") return ColumnType::numeric;
    if (s == "categorical") return ColumnType::categorical;
    if (s == "label") return ColumnType::label;
    return std::nullopt;
}

std::vector<std::string> FeatureSchema::feature_names() const {
    std::vector<std::string> out;
    out.reserve(n_features());
    for (std::size_t i = first_feature; i < columns.size(); ++i) out.push_back(columns[i].name);
    return out;
}

int FeatureSchema::ward_code(const std::string& name) const {
    for (std::size_t i = 0; i < wards.size(); ++i)
        if (wards[i] == name) return static_cast<int>(i);
    return -1;
}

FeatureSchema build_schema(const Dataset& ds) {
    FeatureSchema sc;
    std::set<std::string> labs, atc4s, wards;
    for (const auto& a : ds.admissions) {
        for (const auto& e : a.events) {
            if (e.kind == EventKind::lab) labs.insert(e.code);
            if (e.kind == EventKind::med_admin) {
                try {
                    atc4s.insert(atc_truncate(e.code));
                } catch (const std::invalid_argument&) {
                    // malformed ATC codes get no channel
                }
            }
        }
        for (const auto& t : a.transfers) wards.insert(t.ward_name);
    }
    sc.lab_codes.assign(labs.begin(), labs.end());
    sc.med_atc4.assign(atc4s.begin(), atc4s.end());
    sc.wards.assign(wards.begin(), wards.end());

    auto col = [&](std::string name, ColumnType type, std::string category, std::string table = "",
                   std::string column = "", std::string code = "") {
        sc.columns.push_back({std::move(name), type, std::move(category), std::move(table),
                              std::move(column), std::move(code)});
    };
    col("facility_cd", ColumnType::key, "keys");
    col("patient_id", ColumnType::key, "keys");
    col("admission_id", ColumnType::key, "keys");
    col("ts", ColumnType::key, "keys");
    col("rand", ColumnType::meta, "keys", "target_adm", "rand");
    col("label", ColumnType::label, "keys", "target_adm", "label");
    col("admit_ts", ColumnType::meta, "keys", "adm", "admit_ts");
    col("target_ts", ColumnType::meta, "keys", "adm", "target_ts");
    col("is_direct_icu_admission", ColumnType::meta, "keys", "adm", "is_direct_icu_admission");
    sc.first_feature = sc.columns.size();

    col("prev_discharge_disposition", ColumnType::categorical, "usage", "adm",
        "discharge_disposition");
    col("days_since_discharge", ColumnType::numeric, "usage");  // expression column
    col("prev_los_d", ColumnType::numeric, "usage");            // expression column
    col("gender", ColumnType::categorical, "demographics", "patient_demographics_features",
        "gender");
    col("age", ColumnType::numeric, "demographics", "patient_demographics_features",
        "admission_age");
    col("days_since_adm", ColumnType::numeric, "usage");  // expression column
    for (const char* c : {"prev_adm_cnt", "adm_cnt_1mo", "adm_cnt_6mo", "adm_cnt_12mo"})
        col(c, ColumnType::numeric, "usage", "usage_features", c);
    col("lab_cnt_trend", ColumnType::numeric, "usage", "usage_features", "lab_cnt_trend");
    col("ward_at_adm", ColumnType::categorical, "transfer", "transfer_history_features",
        "ward_at_adm");
    col("most_recent_ward", ColumnType::categorical, "transfer", "transfer_history_features",
        "most_recent_ward");
    col("charlson_1y", ColumnType::numeric, "comorbidity", "comorbidity_features", "charlson_1y");
    col("elixhauser_1y", ColumnType::numeric, "comorbidity", "comorbidity_features",
        "elixhauser_1y");

    auto channel_tables = [&](const std::string& stem, const char* category,
                              const std::vector<std::pair<std::string, std::string>>& chans,
                              bool with_count_adm, bool weekly_stats) {
        auto table = [&](const std::string& tbl, const std::string& suffix) {
            for (const auto& [code, short_name] : chans)
                col(short_name + suffix, ColumnType::numeric, category, tbl, short_name, code);
        };
        table(stem + "_mrv", "_mrv");
        if (with_count_adm) table(stem + "_cntadm", "_cnt_adm");
        for (int y : kDayWindows)
            table(stem + "_cnt" + std::to_string(y) + "day", "_cnt_" + std::to_string(y) + "d");
        if (weekly_stats) {
            for (const char* stat : {"avg", "min", "max"})
                for (int z : kWeekWindows)
                    table(stem + "_" + stat + std::to_string(z) + "wk",
                          std::string("_") + stat + "_" + std::to_string(z) + "w");
        } else {
            for (int y : kDayWindows)
                table(stem + "_avg" + std::to_string(y) + "day",
                      "_avg_" + std::to_string(y) + "d");
        }
    };

    channel_tables("vital_signs", "vitals", kVitalChannels, false, false);

    std::vector<std::pair<std::string, std::string>> lab_chans;
    for (const auto& code : sc.lab_codes) lab_chans.push_back({code, sanitize_code('l', code)});
    channel_tables("lab_tests", "labs", lab_chans, true, true);

    channel_tables("fluids", "fluids", kFluidChannels, false, false);
    col("balance_8h_trend_3d", ColumnType::numeric, "fluids", "fluids_trend", "balance_8h_trend_3d",
        kFluidBalanceCode);
    col("urine_trend_3d", ColumnType::numeric, "fluids", "fluids_trend", "urine_trend_3d",
        kFluidUrineCode);

    for (int y : kDayWindows) {
        std::string tbl = "meds_cnt" + std::to_string(y) + "day";
        std::string suffix = "_cnt_" + std::to_string(y) + "d";
        for (const auto& atc : sc.med_atc4)
            col("m" + atc + suffix, ColumnType::numeric, "meds", tbl, "m" + atc, atc);
    }
    return sc;
}

void write_schema_csv(const FeatureSchema& schema, const std::string& path) {
    CsvWriter w(path, {"name", "type", "category", "table", "column", "code"});
    for (const auto& c : schema.columns)
        w.write_row({c.name, to_string(c.type), c.category, c.table, c.column, c.code});
    for (std::size_t i = 0; i < schema.wards.size(); ++i)
        w.write_row({schema.wards[i], "dict", "wards", "", std::to_string(i), ""});
}

FeatureSchema read_schema_csv(const std::string& path) {
    CsvReader r(path);
    auto c_name = r.col("name"), c_type = r.col("type"), c_cat = r.col("category"),
         c_tbl = r.col("table"), c_col = r.col("column"), c_code = r.col("code");
    FeatureSchema sc;
    std::vector<std::string> f;
    bool saw_feature = false;
    std::set<std::string> labs_seen, meds_seen;
    while (r.next(f)) {
        if (f[c_type] == "dict") {
            if (f[c_cat] != "wards") throw std::runtime_error(path + ": unknown dictionary");
            sc.wards.push_back(f[c_name]);
            continue;
        }
        auto type = parse_column_type(f[c_type]);
        if (!type) throw std::runtime_error(path + ": bad column type " + f[c_type]);
        sc.columns.push_back({f[c_name], *type, f[c_cat], f[c_tbl], f[c_col], f[c_code]});
        const ColumnDef& c = sc.columns.back();
        if (c.type == ColumnType::numeric || c.type == ColumnType::categorical) {
            if (!saw_feature) {
                sc.first_feature = sc.columns.size() - 1;
                saw_feature = true;
            }
        }
        if (c.category == "labs" && !c.code.empty() && labs_seen.insert(c.code).second)
            sc.lab_codes.push_back(c.code);
        if (c.category == "meds" && !c.code.empty() && meds_seen.insert(c.code).second)
            sc.med_atc4.push_back(c.code);
    }
    if (!saw_feature) throw std::runtime_error(path + ": no feature columns");
    return sc;
}

namespace {

// Everything fixed per admission while its instants stream.
class AdmissionContext {
  public:
    AdmissionContext(const FeatureSchema& sc, const Admission& a,
                     const std::vector<const Admission*>& priors)
        : sc_(sc), a_(a) {
        for (std::size_t i = 0; i < sc.lab_codes.size(); ++i) lab_idx_[sc.lab_codes[i]] = i;
        for (std::size_t i = 0; i < sc.med_atc4.size(); ++i) med_idx_[sc.med_atc4[i]] = i;
        for (std::size_t i = 0; i < kVitalChannels.size(); ++i)
            vital_idx_[kVitalChannels[i].first] = i;
        for (std::size_t i = 0; i < kFluidChannels.size(); ++i)
            fluid_idx_[kFluidChannels[i].first] = i;
        vitals_.resize(kVitalChannels.size());
        labs_.resize(sc.lab_codes.size());
        fluids_.resize(kFluidChannels.size());
        med_times_.resize(sc.med_atc4.size());

        for (const auto& e : a.events) {
            switch (e.kind) {
                case EventKind::vital:
                    if (auto it = vital_idx_.find(e.code); it != vital_idx_.end() && e.value)
                        vitals_[it->second].push(e.ts.s, *e.value);
                    break;
                case EventKind::lab:
                    if (auto it = lab_idx_.find(e.code); it != lab_idx_.end() && e.value) {
                        labs_[it->second].push(e.ts.s, *e.value);
                        lab_times_.push_back(e.ts.s);
                    }
                    break;
                case EventKind::fluid:
                    if (auto it = fluid_idx_.find(e.code); it != fluid_idx_.end() && e.value)
                        fluids_[it->second].push(e.ts.s, *e.value);
                    break;
                case EventKind::med_admin: {
                    std::string atc4;
                    try {
                        atc4 = atc_truncate(e.code);
                    } catch (const std::invalid_argument&) {
                        break;
                    }
                    if (auto it = med_idx_.find(atc4); it != med_idx_.end())
                        med_times_[it->second].push_back(e.ts.s);
                    break;
                }
            }
        }
        for (auto& ch : vitals_) ch.seal();
        for (auto& ch : labs_) ch.seal();
        for (auto& ch : fluids_) ch.seal();

        // Usage and comorbidity, constant over the stay.
        prev_cnt_ = static_cast<double>(priors.size());
        for (int w = 0; w < 3; ++w) {
            std::int64_t cutoff = a.admit_ts.s - kMonthWindowDays[w] * kSecondsPerDay;
            month_cnt_[w] = 0;
            for (const Admission* p : priors)
                if (p->discharge_ts.s > cutoff) ++month_cnt_[w];
        }
        if (!priors.empty()) {
            const Admission* prev = priors.back();
            days_since_discharge_ = round_decimals(
                static_cast<double>(a.admit_ts - prev->discharge_ts) / 3600.0 / 24.0, 2);
            prev_los_ = round_decimals(
                static_cast<double>(prev->discharge_ts - prev->admit_ts) / 3600.0 / 24.0, 2);
            prev_dispo_ = static_cast<double>(static_cast<int>(prev->disposition));
        }
        std::vector<std::string> dx;
        std::int64_t year_cutoff = a.admit_ts.s - 365 * kSecondsPerDay;
        for (const Admission* p : priors) {
            if (p->discharge_ts.s <= year_cutoff) continue;
            for (const auto& d : p->diagnoses) dx.push_back(d.icd10_code);
        }
        charlson_ = static_cast<double>(comorbidity_score(dx, charlson_table()));
        elixhauser_ = static_cast<double>(comorbidity_score(dx, elixhauser_table()));

        ward_at_adm_ = a.transfers.empty()
                           ? missing()
                           : static_cast<double>(sc.ward_code(a.transfers.front().ward_name));
    }

    // Fills the feature block (schema order from first_feature on). The
    // enumeration below must mirror build_schema exactly.
    void fill(Timestamp t, std::vector<double>& out) {
        out.clear();
        out.reserve(sc_.n_features());
        out.push_back(prev_dispo_);
        out.push_back(days_since_discharge_);
        out.push_back(prev_los_);
        out.push_back(static_cast<double>(static_cast<int>(a_.gender)));
        out.push_back(a_.age);
        out.push_back(round_decimals(static_cast<double>(t - a_.admit_ts) / 3600.0 / 24.0, 1));
        out.push_back(prev_cnt_);
        for (int w = 0; w < 3; ++w) out.push_back(month_cnt_[w]);
        out.push_back(lab_count_trend(t));
        out.push_back(ward_at_adm_);
        out.push_back(most_recent_ward(t));
        out.push_back(charlson_);
        out.push_back(elixhauser_);

        auto channel_block = [&](const std::vector<Channel>& chans, bool with_count_adm,
                                 bool weekly_stats) {
            for (const auto& ch : chans) out.push_back(opt(core_most_recent(ch.view(), t.s)));
            if (with_count_adm)
                for (const auto& ch : chans)
                    out.push_back(static_cast<double>(ch.upper(t.s)));
            for (int y : kDayWindows)
                for (const auto& ch : chans)
                    out.push_back(
                        opt(core_window_agg(ch.view(), t.s, y * kSecondsPerDay, Stat::count)));
            if (weekly_stats) {
                for (Stat stat : {Stat::avg, Stat::min, Stat::max})
                    for (int z : kWeekWindows)
                        for (const auto& ch : chans)
                            out.push_back(opt(core_window_agg(
                                ch.view(), t.s, z * 7 * kSecondsPerDay, stat)));
            } else {
                for (int y : kDayWindows)
                    for (const auto& ch : chans)
                        out.push_back(
                            opt(core_window_agg(ch.view(), t.s, y * kSecondsPerDay, Stat::avg)));
            }
        };
        channel_block(vitals_, false, false);
        channel_block(labs_, true, true);
        channel_block(fluids_, false, false);
        out.push_back(opt(core_trend(fluids_[3].view(), t.s, kTrendWindowS, a_.admit_ts.s)));
        out.push_back(opt(core_trend(fluids_[2].view(), t.s, kTrendWindowS, a_.admit_ts.s)));
        for (int y : kDayWindows)
            for (const auto& times : med_times_) {
                auto lo = std::upper_bound(times.begin(), times.end(), t.s - y * kSecondsPerDay);
                auto hi = std::upper_bound(times.begin(), times.end(), t.s);
                out.push_back(static_cast<double>(hi - lo));
            }
    }

  private:
    // Slope of labs-per-day over the trailing week of whole admit-relative
    // days; the current partial day counts up to t.
    double lab_count_trend(Timestamp t) {
        std::int64_t d_t = (t - a_.admit_ts) / kSecondsPerDay;
        std::int64_t first = std::max<std::int64_t>(0, d_t - 6);
        if (d_t == first) return missing();
        std::vector<std::pair<double, double>> pts;
        for (std::int64_t b = first; b <= d_t; ++b) {
            std::int64_t lo_ts = a_.admit_ts.s + b * kSecondsPerDay;
            std::int64_t hi_ts = std::min(lo_ts + kSecondsPerDay - 1, t.s);
            auto lo = std::upper_bound(lab_times_.begin(), lab_times_.end(), lo_ts - 1);
            auto hi = std::upper_bound(lab_times_.begin(), lab_times_.end(), hi_ts);
            pts.push_back({static_cast<double>(b), static_cast<double>(hi - lo)});
        }
        return opt(ols_slope(pts));
    }

    double most_recent_ward(Timestamp t) {
        const TransferRecord* cur = nullptr;
        for (const auto& tr : a_.transfers) {
            if (tr.in_ts <= t) cur = &tr;
            else break;
        }
        if (!cur) return missing();
        int code = sc_.ward_code(cur->ward_name);
        return code < 0 ? missing() : static_cast<double>(code);
    }

    const FeatureSchema& sc_;
    const Admission& a_;
    std::unordered_map<std::string, std::size_t> vital_idx_, lab_idx_, fluid_idx_, med_idx_;
    std::vector<Channel> vitals_, labs_, fluids_;
    std::vector<std::vector<std::int64_t>> med_times_;
    std::vector<std::int64_t> lab_times_;

    double prev_cnt_ = 0, month_cnt_[3] = {0, 0, 0};
    double days_since_discharge_ = missing(), prev_los_ = missing(), prev_dispo_ = missing();
    double charlson_ = 0, elixhauser_ = 0, ward_at_adm_ = missing();
};

// patient_id -> admissions sorted by discharge time.
std::unordered_map<std::string, std::vector<const Admission*>> patient_index(const Dataset& ds) {
    std::unordered_map<std::string, std::vector<const Admission*>> by_patient;
    for (const auto& a : ds.admissions) by_patient[a.patient_id].push_back(&a);
    for (auto& [id, v] : by_patient)
        std::sort(v.begin(), v.end(), [](const Admission* x, const Admission* y) {
            return x->discharge_ts < y->discharge_ts;
        });
    return by_patient;
}

std::vector<const Admission*> priors_of(
    const std::unordered_map<std::string, std::vector<const Admission*>>& index,
    const Admission& a) {
    std::vector<const Admission*> out;
    auto it = index.find(a.patient_id);
    if (it == index.end()) return out;
    for (const Admission* p : it->second)
        if (p->discharge_ts < a.admit_ts) out.push_back(p);
    return out;
}

}  // namespace

void for_each_row(const Dataset& ds, const std::vector<cohort::CohortLabel>& labels,
                  const FeatureSchema& schema, const RowSink& sink) {
    if (labels.size() != ds.admissions.size())
        throw std::invalid_argument("labels do not match dataset");
    auto index = patient_index(ds);
    std::vector<double> features;
    for (std::size_t i = 0; i < ds.admissions.size(); ++i) {
        const Admission& a = ds.admissions[i];
        const cohort::CohortLabel& lab = labels[i];
        if (lab.admission_id != a.admission_id)
            throw std::invalid_argument("labels do not match dataset");
        if (lab.excluded) continue;
        auto instants = cohort::scoring_instants(a, lab);
        if (instants.empty()) continue;
        AdmissionContext ctx(schema, a, priors_of(index, a));
        double rand = admission_rand(a.admission_id);
        for (const auto& inst : instants) {
            ctx.fill(inst.ts, features);
            RowView row{&a, &lab, inst.ts, rand, &features};
            sink(row);
        }
    }
}

std::vector<double> features_at(const Dataset& ds, const std::string& admission_id, Timestamp t,
                                const FeatureSchema& schema) {
    const Admission* a = ds.find(admission_id);
    if (!a) throw std::invalid_argument("features_at: unknown admission '" + admission_id + "'");
    auto index = patient_index(ds);
    AdmissionContext ctx(schema, *a, priors_of(index, *a));
    std::vector<double> features;
    ctx.fill(t, features);
    return features;
}

FeatureMatrix build_matrix(const Dataset& ds, const std::vector<cohort::CohortLabel>& labels) {
    FeatureMatrix m;
    m.schema = build_schema(ds);
    for_each_row(ds, labels, m.schema, [&](const RowView& row) {
        m.rows.push_back({row.adm->admission_id, row.ts, row.label->is_case ? 1 : 0,
                          *row.features});
    });
    return m;
}

namespace {

// The nine bookkeeping cells preceding the feature block.
void meta_cells(const RowView& row, std::vector<std::string>& out) {
    out.clear();
    out.push_back(row.adm->facility_cd);
    out.push_back(row.adm->patient_id);
    out.push_back(row.adm->admission_id);
    out.push_back(format_iso8601(row.ts));
    out.push_back(format_double(row.rand));
    out.push_back(row.label->is_case ? "1" : "0");
    out.push_back(format_iso8601(row.adm->admit_ts));
    out.push_back(row.label->target_ts ? format_iso8601(*row.label->target_ts) : "");
    out.push_back("0");  // excluded admissions never reach the matrix
}

std::string cell(double v) { return is_missing(v) ? std::string() : format_double(v); }

}  // namespace

void write_matrix_csv(const Dataset& ds, const std::vector<cohort::CohortLabel>& labels,
                      const FeatureSchema& schema, const std::string& path) {
    std::vector<std::string> header;
    for (const auto& c : schema.columns) header.push_back(c.name);
    CsvWriter w(path, header);
    std::vector<std::string> meta;
    std::string line;
    for_each_row(ds, labels, schema, [&](const RowView& row) {
        meta_cells(row, meta);
        line.clear();
        for (const auto& m : meta) {
            line += m;  // bookkeeping cells never need quoting
            line += ',';
        }
        const auto& f = *row.features;
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (i) line += ',';
            line += cell(f[i]);
        }
        w.write_line(line);
    });
}

void write_category_tables(const Dataset& ds, const std::vector<cohort::CohortLabel>& labels,
                           const FeatureSchema& schema, const std::string& dir) {
    // adm and target_adm are per admission.
    {
        CsvWriter adm(dir + "/adm.csv",
                      {"admission_id", "admit_ts", "discharge_ts", "target_ts",
                       "is_direct_icu_admission", "prev_admission_id", "discharge_disposition"});
        CsvWriter target(dir + "/target_adm.csv", {"admission_id", "rand", "label"});
        auto index = patient_index(ds);
        for (std::size_t i = 0; i < ds.admissions.size(); ++i) {
            const Admission& a = ds.admissions[i];
            const auto& lab = labels.at(i);
            auto priors = priors_of(index, a);
            adm.write_row({a.admission_id, format_iso8601(a.admit_ts),
                           format_iso8601(a.discharge_ts),
                           lab.target_ts ? format_iso8601(*lab.target_ts) : "",
                           lab.excluded && lab.reason == cohort::ExclusionReason::direct_icu_admission
                               ? "1"
                               : "0",
                           priors.empty() ? "" : priors.back()->admission_id,
                           std::to_string(static_cast<int>(a.disposition))});
            target.write_row({a.admission_id, format_double(admission_rand(a.admission_id)),
                              lab.is_case ? "1" : "0"});
        }
    }

    // Instant-keyed tables, one writer per per-category table.
    struct TableOut {
        std::unique_ptr<CsvWriter> w;
        std::vector<std::size_t> feature_slots;  // offsets into the feature block
    };
    std::vector<std::string> table_order;
    std::map<std::string, TableOut> tables;
    for (std::size_t i = schema.first_feature; i < schema.columns.size(); ++i) {
        const ColumnDef& c = schema.columns[i];
        if (c.table.empty() || c.table == "adm" || c.table == "target_adm") continue;
        auto [it, fresh] = tables.try_emplace(c.table);
        if (fresh) table_order.push_back(c.table);
        it->second.feature_slots.push_back(i - schema.first_feature);
    }
    for (const auto& name : table_order) {
        std::vector<std::string> header = {"admission_id", "ts"};
        for (std::size_t slot : tables[name].feature_slots)
            header.push_back(schema.columns[schema.first_feature + slot].column);
        tables[name].w = std::make_unique<CsvWriter>(dir + "/" + name + ".csv", header);
    }
    CsvWriter master(dir + "/patient_master.csv",
                     {"facility_cd", "patient_id", "admission_id", "ts"});

    std::vector<std::string> cells;
    for_each_row(ds, labels, schema, [&](const RowView& row) {
        std::string iso = format_iso8601(row.ts);
        master.write_row({row.adm->facility_cd, row.adm->patient_id, row.adm->admission_id, iso});
        for (const auto& name : table_order) {
            TableOut& t = tables[name];
            cells.clear();
            cells.push_back(row.adm->admission_id);
            cells.push_back(iso);
            for (std::size_t slot : t.feature_slots) cells.push_back(cell((*row.features)[slot]));
            t.w->write_row(cells);
        }
    });
}

std::string default_merge_spec(const FeatureSchema& schema) {
    std::ostringstream out;
    out << "base patient_master alias t1 keys (admission_id, ts) {\n"
        << "  facility_cd, patient_id, admission_id, ts\n"
        << "}\n"
        << "table target_adm alias t2 join (t1.admission_id = admission_id) {\n"
        << "  rand, label\n"
        << "}\n"
        << "table adm alias t3 join (t1.admission_id = admission_id) {\n"
        << "  admit_ts, target_ts, is_direct_icu_admission\n"
        << "}\n"
        << "table adm alias t4 join (t3.prev_admission_id = admission_id) {\n"
        << "  discharge_disposition as prev_discharge_disposition\n"
        << "}\n"
        << "expr days_since_discharge = round(hours_between(t3.admit_ts, t4.discharge_ts) / 24, 2)\n"
        << "expr prev_los_d = round(hours_between(t4.discharge_ts, t4.admit_ts) / 24, 2)\n"
        << "table patient_demographics_features alias t5 join (t1.admission_id = admission_id, "
           "t1.ts = ts) {\n"
        << "  gender, admission_age as age\n"
        << "}\n"
        << "expr days_since_adm = round(hours_between(t1.ts, t3.admit_ts) / 24, 1)\n";

    // Remaining instant-keyed tables in schema order, each as one wildcard
    // block with the suffix that reconstructs the matrix column names.
    std::vector<std::string> table_order;
    std::map<std::string, std::pair<std::string, bool>> suffix_of;  // table -> (suffix, uniform)
    for (std::size_t i = schema.first_feature; i < schema.columns.size(); ++i) {
        const ColumnDef& c = schema.columns[i];
        if (c.table.empty() || c.table == "adm" || c.table == "target_adm" ||
            c.table == "patient_demographics_features")
            continue;
        std::string suffix = c.name.size() > c.column.size() &&
                                     c.name.compare(0, c.column.size(), c.column) == 0
                                 ? c.name.substr(c.column.size())
                                 : std::string();
        bool same_name = c.name == c.column;
        auto [it, fresh] = suffix_of.try_emplace(c.table, std::make_pair(suffix, true));
        if (fresh) table_order.push_back(c.table);
        else if (it->second.first != suffix) it->second.second = false;
        if (same_name && !suffix.empty()) it->second.second = false;
    }
    int alias = 6;
    for (const auto& name : table_order) {
        out << "table " << name << " alias t" << alias++
            << " join (t1.admission_id = admission_id, t1.ts = ts) {\n";
        auto [suffix, uniform] = suffix_of[name];
        if (uniform && !suffix.empty()) {
            out << "  * " << suffix << "\n";
        } else {
            // Explicit selectors when columns keep their own names.
            out << " ";
            bool first = true;
            for (std::size_t i = schema.first_feature; i < schema.columns.size(); ++i) {
                const ColumnDef& c = schema.columns[i];
                if (c.table != name) continue;
                out << (first ? " " : ", ") << c.column;
                first = false;
            }
            out << "\n";
        }
        out << "}\n";
    }
    return out.str();
}

void read_matrix_csv(const std::string& path, const FeatureSchema& schema,
                     const std::function<void(MatrixCsvRow&)>& sink) {
    CsvReader r(path);
    for (const auto& c : schema.columns)
        r.col(c.name);  // abort early if the file does not match the schema
    std::size_t c_adm = r.col("admission_id"), c_ts = r.col("ts"), c_label = r.col("label");
    std::size_t c_fac = r.col("facility_cd"), c_admit = r.col("admit_ts");
    std::size_t c_target = r.col("target_ts");
    std::vector<std::string> f;
    MatrixCsvRow row;
    while (r.next(f)) {
        if (f.size() != schema.columns.size())
            throw std::runtime_error(path + ": row width does not match schema");
        row.admission_id = f[c_adm];
        row.facility_cd = f[c_fac];
        auto ts = parse_iso8601(f[c_ts]);
        if (!ts) throw std::runtime_error(path + ": bad ts " + f[c_ts]);
        row.ts = *ts;
        auto admit = parse_iso8601(f[c_admit]);
        if (!admit) throw std::runtime_error(path + ": bad admit_ts " + f[c_admit]);
        row.admit_ts = *admit;
        row.target_ts.reset();
        if (!f[c_target].empty()) {
            auto target = parse_iso8601(f[c_target]);
            if (!target) throw std::runtime_error(path + ": bad target_ts " + f[c_target]);
            row.target_ts = *target;
        }
        row.label = f[c_label] == "1" ? 1 : 0;
        row.features.clear();
        row.features.reserve(schema.n_features());
        for (std::size_t i = schema.first_feature; i < schema.columns.size(); ++i) {
            const std::string& s = f[i];
            if (s.empty()) {
                row.features.push_back(missing());
            } else {
                auto v = parse_double(s);
                if (!v) throw std::runtime_error(path + ": bad number " + s);
                row.features.push_back(*v);
            }
        }
        sink(row);
    }
}

}  // namespace featgen
}  // namespace ww
