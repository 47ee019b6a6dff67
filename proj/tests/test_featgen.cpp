#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "wardwatch/cohort.hpp"
#include "wardwatch/comorbidity.hpp"
#include "wardwatch/featgen.hpp"
#include "wardwatch/synth.hpp"
#include "wardwatch/util/stats.hpp"

using namespace ww;
using namespace ww::featgen;
namespace fs = std::filesystem;

namespace {

const Timestamp kAdmit{1614585600};  // 2021-03-01T08:00:00Z

Series series(std::initializer_list<std::pair<std::int64_t, double>> pts) {
    Series s;
    for (auto [h, v] : pts) s.push_back({kAdmit + hours(h), v});
    return s;
}

Admission stay(const std::string& id, Timestamp admit, std::int64_t los_hours,
               Disposition dispo = Disposition::home) {
    Admission a;
    a.admission_id = id;
    a.patient_id = "P7";
    a.facility_cd = "F1";
    a.admit_ts = admit;
    a.discharge_ts = admit + hours(los_hours);
    a.disposition = dispo;
    a.age = 60;
    a.gender = Gender::female;
    a.transfers.push_back({id, "3A", WardType::general, a.admit_ts, a.discharge_ts});
    return a;
}

void ev(Admission& a, EventKind kind, const std::string& code, double value, std::int64_t h) {
    a.events.push_back(
        {a.admission_id, kind, code, kind == EventKind::med_admin ? std::nullopt
                                                                  : std::optional<double>(value),
         "", a.admit_ts + hours(h)});
}

// One index admission with three priors at 20, 100, and 400 days back.
Dataset usage_dataset() {
    Dataset ds;
    Admission cur = stay("A9", kAdmit, 72);
    auto prior = [&](const std::string& id, int days_back, std::int64_t los_hours,
                     Disposition dispo, const std::vector<std::string>& dx) {
        Admission p = stay(id, kAdmit - days(days_back) - hours(los_hours), los_hours, dispo);
        for (const auto& c : dx) p.diagnoses.push_back({c, 1});
        return p;
    };
    ds.admissions.push_back(prior("A1", 20, 48, Disposition::transfer, {"I21.0"}));
    ds.admissions.push_back(prior("A2", 100, 96, Disposition::home, {"G81.1"}));
    ds.admissions.push_back(prior("A3", 400, 24, Disposition::home, {"C78.0"}));

    ev(cur, EventKind::vital, "hr", 80, 1);
    ev(cur, EventKind::vital, "hr", 90, 25);
    ev(cur, EventKind::vital, "hr", 100, 49);
    ev(cur, EventKind::lab, "2345-7", 5.0, 2);
    ev(cur, EventKind::lab, "2345-7", 7.0, 26);
    ev(cur, EventKind::med_admin, "C03CA01", 0, 3);
    ev(cur, EventKind::med_admin, "C03CA01", 0, 30);
    ev(cur, EventKind::fluid, "9187-6", 100, 4);
    ev(cur, EventKind::fluid, "9187-6", 200, 28);
    ev(cur, EventKind::fluid, "9239-5", 500, 4);
    ev(cur, EventKind::fluid, "9239-5", 300, 28);
    ev(cur, EventKind::fluid, "9239-5", 100, 47);
    std::sort(cur.events.begin(), cur.events.end(),
              [](const ClinicalEvent& x, const ClinicalEvent& y) { return x.ts < y.ts; });
    ds.admissions.push_back(std::move(cur));
    return ds;
}

std::size_t fidx(const FeatureSchema& sc, const std::string& name) {
    auto names = sc.feature_names();
    auto it = std::find(names.begin(), names.end(), name);
    REQUIRE(it != names.end());
    return static_cast<std::size_t>(it - names.begin());
}

std::string lab_col(const std::string& code) {
    std::string out = "l";
    for (char c : code) out.push_back(c == '-' ? '_' : c);
    return out;
}

const MatrixRow& row_at(const FeatureMatrix& m, const std::string& adm, std::int64_t h) {
    for (const auto& r : m.rows)
        if (r.admission_id == adm && r.ts == kAdmit + hours(h)) return r;
    REQUIRE(false);
    static MatrixRow dummy;
    return dummy;
}

}  // namespace

TEST_CASE("most recent value: latest wins, closed at t, missing before any event") {
    Series s = series({{2, 80}, {6, 90}});
    CHECK(*most_recent(s, kAdmit + hours(7)) == 90);
    CHECK(!most_recent(s, kAdmit + hours(1)).has_value());
    CHECK(*most_recent(s, kAdmit + hours(6)) == 90);
    CHECK(*most_recent(s, kAdmit + hours(2)) == 80);
}

TEST_CASE("window aggregates over the half-open window (t-w, t]") {
    Series s = series({{1, 1}, {2, 2}, {3, 3}});
    Timestamp t = kAdmit + hours(3);
    CHECK(*window_agg(s, t, days(1), Stat::avg) == 2.0);
    CHECK(*window_agg(s, t, days(1), Stat::count) == 3.0);

    Series empty = series({{30, 5}});
    CHECK(*window_agg(empty, t, days(1), Stat::count) == 0.0);
    CHECK(!window_agg(empty, t, days(1), Stat::max).has_value());

    // an event exactly at t - w falls outside, one at t falls inside
    Series edge = series({{0, 7}, {12, 5}, {24, -1}});
    CHECK(*window_agg(edge, kAdmit + hours(24), hours(24), Stat::count) == 2.0);
    CHECK(*window_agg(edge, kAdmit + hours(24), hours(24), Stat::min) == -1.0);
    CHECK(*window_agg(edge, kAdmit + hours(24), hours(24), Stat::max) == 5.0);
}

TEST_CASE("trend is the OLS slope per day, missing when underdetermined") {
    Series line = series({{0, 0}, {24, 1}, {48, 2}});
    Timestamp t = kAdmit + hours(48);
    CHECK(*trend(line, t, days(7), kAdmit) == doctest::Approx(1.0).epsilon(1e-12));

    Series one = series({{0, 4}});
    CHECK(!trend(one, t, days(7), kAdmit).has_value());
    Series same_ts = series({{24, 1}, {24, 3}});
    CHECK(!trend(same_ts, t, days(7), kAdmit).has_value());

    Series bend = series({{0, 3}, {24, 1}, {48, 2}});
    CHECK(*trend(bend, t, days(7), kAdmit) == doctest::Approx(-0.5).epsilon(1e-12));

    // window clipping: only the last two points of the line remain in 1.5 days
    CHECK(*trend(line, t, hours(36), kAdmit) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("comorbidity scores: category-once sums over the bundled tables") {
    const auto& ch = charlson_table();
    const auto& el = elixhauser_table();
    CHECK(comorbidity_score({}, ch) == 0);
    CHECK(comorbidity_score({}, el) == 0);

    // one weight-2 category listed twice counts once
    CHECK(comorbidity_score({"G81.1", "G82.2"}, ch) == 2);
    // weights 1 + 2 + 6 across three categories
    CHECK(comorbidity_score({"I21.0", "G81.1", "C78.0"}, ch) == 9);
    // unknown codes contribute nothing, case and dots are ignored
    CHECK(comorbidity_score({"i21.0", "XYZ", ""}, ch) == 1);

    CHECK(comorbidity_score({"E66.9"}, el) == -4);                    // negative weight
    CHECK(comorbidity_score({"I50.0", "I48"}, el) == 12);             // CHF 7 + arrhythmia 5
    CHECK(comorbidity_score({"I50.0", "I48", "E66.9"}, el) == 8);
    // permutation invariance
    CHECK(comorbidity_score({"C78.0", "I21.0", "G81.1"}, ch) == 9);
    CHECK(comorbidity_score({"G81.1", "C78.0", "I21.0", "G81.1"}, ch) == 9);
}

TEST_CASE("matrix cells reproduce hand-computed features for a small admission") {
    Dataset ds = usage_dataset();
    auto labels = cohort::label_admissions(ds);
    FeatureMatrix m = build_matrix(ds, labels);
    const FeatureSchema& sc = m.schema;

    CHECK(sc.lab_codes == std::vector<std::string>{"2345-7"});
    CHECK(sc.med_atc4 == std::vector<std::string>{"C03CA"});
    CHECK(m.rows.size() == 10);  // one per distinct event instant of the index stay
    for (const auto& r : m.rows) CHECK(r.features.size() == sc.n_features());

    const MatrixRow& r49 = row_at(m, "A9", 49);
    auto f = [&](const std::string& name) { return r49.features[fidx(sc, name)]; };

    CHECK(f("hr_mrv") == 100);
    CHECK(f("hr_cnt_1d") == 1);  // the +25h reading sits exactly on t-24h, outside
    CHECK(f("hr_cnt_3d") == 3);
    CHECK(f("hr_avg_1d") == 100);
    CHECK(f("hr_avg_3d") == 90);
    CHECK(is_missing(f("rr_mrv")));
    CHECK(f("rr_cnt_7d") == 0);

    CHECK(f("l2345_7_mrv") == 7);
    CHECK(f("l2345_7_cnt_adm") == 2);
    CHECK(f("l2345_7_cnt_1d") == 1);
    CHECK(f("l2345_7_avg_1w") == 6);
    CHECK(f("l2345_7_min_1w") == 5);
    CHECK(f("l2345_7_max_1w") == 7);

    // labs per day over days {0,1,2}: counts (1,1,0) give slope -1/2
    CHECK(f("lab_cnt_trend") == doctest::Approx(-0.5).epsilon(1e-12));

    CHECK(f("mC03CA_cnt_1d") == 1);
    CHECK(f("mC03CA_cnt_3d") == 2);

    CHECK(f("urine_mrv") == 200);
    CHECK(f("balance_8h_cnt_3d") == 3);
    Series balance = series({{4, 500}, {28, 300}, {47, 100}});
    CHECK(f("balance_8h_trend_3d") == *trend(balance, kAdmit + hours(49), days(3), kAdmit));
    Series urine = series({{4, 100}, {28, 200}});
    CHECK(f("urine_trend_3d") == *trend(urine, kAdmit + hours(49), days(3), kAdmit));
    CHECK(f("urine_trend_3d") == doctest::Approx(100.0).epsilon(1e-9));

    CHECK(f("gender") == 0);
    CHECK(f("age") == 60);
    CHECK(f("days_since_adm") == 2.0);  // round(49/24, 1)

    CHECK(f("prev_adm_cnt") == 3);
    CHECK(f("adm_cnt_1mo") == 1);
    CHECK(f("adm_cnt_6mo") == 2);
    CHECK(f("adm_cnt_12mo") == 2);  // the 400-days-back stay is outside 365 days
    CHECK(f("days_since_discharge") == 20.0);
    CHECK(f("prev_los_d") == 2.0);
    CHECK(f("prev_discharge_disposition") == 1);  // transfer

    // only the two priors inside one year feed the comorbidity scores
    CHECK(f("charlson_1y") == 3);      // MI 1 + hemiplegia 2, metastatic too old
    CHECK(f("elixhauser_1y") == 7);    // paralysis only

    CHECK(f("ward_at_adm") == sc.ward_code("3A"));
    CHECK(f("most_recent_ward") == sc.ward_code("3A"));

    // before anything is charted the channel features are missing or zero
    const MatrixRow& r1 = row_at(m, "A9", 1);
    auto g = [&](const std::string& name) { return r1.features[fidx(sc, name)]; };
    CHECK(g("hr_mrv") == 80);  // the event at t itself counts
    CHECK(is_missing(g("l2345_7_mrv")));
    CHECK(g("l2345_7_cnt_adm") == 0);
    CHECK(is_missing(g("l2345_7_avg_2w")));
    CHECK(is_missing(g("lab_cnt_trend")));  // first day has a single count bucket
    CHECK(is_missing(g("days_since_adm")) == false);
    CHECK(g("days_since_adm") == 0.0);

    // priors with no charted events contribute no rows
    for (const auto& r : m.rows) CHECK(r.admission_id == "A9");
}

TEST_CASE("usage features with no prior admissions are zero or missing") {
    Dataset ds;
    Admission a = stay("B1", kAdmit, 48);
    ev(a, EventKind::vital, "hr", 70, 2);
    ds.admissions.push_back(std::move(a));
    auto labels = cohort::label_admissions(ds);
    FeatureMatrix m = build_matrix(ds, labels);
    const MatrixRow& r = m.rows.at(0);
    auto f = [&](const std::string& name) { return r.features[fidx(m.schema, name)]; };
    CHECK(f("prev_adm_cnt") == 0);
    CHECK(f("adm_cnt_12mo") == 0);
    CHECK(is_missing(f("days_since_discharge")));
    CHECK(is_missing(f("prev_los_d")));
    CHECK(is_missing(f("prev_discharge_disposition")));
    CHECK(f("charlson_1y") == 0);
    CHECK(f("elixhauser_1y") == 0);
}

TEST_CASE("column universe for a default synthetic dataset lands near 500") {
    synth::SynthConfig cfg;
    cfg.n_admissions = 250;
    cfg.prevalence = 0.08;
    cfg.seed = 5;
    Dataset ds = synth::generate(cfg);
    FeatureSchema sc = build_schema(ds);
    CHECK(sc.n_features() >= 400);
    CHECK(sc.n_features() <= 600);
    // every feature name unique
    auto names = sc.feature_names();
    std::set<std::string> uniq(names.begin(), names.end());
    CHECK(uniq.size() == names.size());
}

TEST_CASE("future events never change already-scored rows") {
    synth::SynthConfig cfg;
    cfg.n_admissions = 80;
    cfg.prevalence = 0.15;
    cfg.seed = 11;
    Dataset ds = synth::generate(cfg);
    auto labels = cohort::label_admissions(ds);
    FeatureMatrix before = build_matrix(ds, labels);

    Dataset perturbed = ds;
    std::string known_lab = before.schema.lab_codes.front();
    for (std::size_t i = 0; i < perturbed.admissions.size(); ++i) {
        Admission& a = perturbed.admissions[i];
        ev(a, EventKind::vital, "hr", 180, (a.discharge_ts - a.admit_ts) / 3600 + 2);
        ev(a, EventKind::lab, known_lab, 99, (a.discharge_ts - a.admit_ts) / 3600 + 3);
    }
    FeatureMatrix after = build_matrix(perturbed, labels);

    std::map<std::pair<std::string, std::int64_t>, const MatrixRow*> index;
    for (const auto& r : after.rows) index[{r.admission_id, r.ts.s}] = &r;
    for (const auto& r : before.rows) {
        auto it = index.find({r.admission_id, r.ts.s});
        REQUIRE(it != index.end());
        const MatrixRow& o = *it->second;
        CHECK(o.label == r.label);
        REQUIRE(o.features.size() == r.features.size());
        for (std::size_t k = 0; k < r.features.size(); ++k) {
            bool same = (is_missing(r.features[k]) && is_missing(o.features[k])) ||
                        r.features[k] == o.features[k];
            if (!same) {
                CAPTURE(r.admission_id);
                CAPTURE(before.schema.feature_names()[k]);
            }
            CHECK(same);
        }
    }
}

TEST_CASE("wider windows never see fewer events and cells match the reference ops") {
    synth::SynthConfig cfg;
    cfg.n_admissions = 60;
    cfg.prevalence = 0.15;
    cfg.seed = 11;
    Dataset ds = synth::generate(cfg);
    auto labels = cohort::label_admissions(ds);
    FeatureMatrix m = build_matrix(ds, labels);
    const FeatureSchema& sc = m.schema;
    REQUIRE(!sc.lab_codes.empty());
    std::string lab = lab_col(sc.lab_codes.front());

    std::size_t c1 = fidx(sc, "hr_cnt_1d"), c3 = fidx(sc, "hr_cnt_3d"), c5 = fidx(sc, "hr_cnt_5d"),
                c7 = fidx(sc, "hr_cnt_7d");
    std::size_t l1 = fidx(sc, lab + "_cnt_1d"), l7 = fidx(sc, lab + "_cnt_7d"),
                ladm = fidx(sc, lab + "_cnt_adm");
    for (const auto& r : m.rows) {
        CHECK(r.features[c1] <= r.features[c3]);
        CHECK(r.features[c3] <= r.features[c5]);
        CHECK(r.features[c5] <= r.features[c7]);
        CHECK(r.features[l1] <= r.features[l7]);
        CHECK(r.features[l7] <= r.features[ladm]);
    }

    // spot-check alignment between schema order and fill order with the
    // reference primitives on extracted series
    std::size_t step = std::max<std::size_t>(1, m.rows.size() / 40);
    for (std::size_t i = 0; i < m.rows.size(); i += step) {
        const MatrixRow& r = m.rows[i];
        const Admission* a = ds.find(r.admission_id);
        REQUIRE(a != nullptr);
        Series hr, spo2, labv, balance;
        for (const auto& e : a->events) {
            if (e.kind == EventKind::vital && e.code == "hr" && e.value)
                hr.push_back({e.ts, *e.value});
            if (e.kind == EventKind::vital && e.code == "spo2" && e.value)
                spo2.push_back({e.ts, *e.value});
            if (e.kind == EventKind::lab && e.code == sc.lab_codes.front() && e.value)
                labv.push_back({e.ts, *e.value});
            if (e.kind == EventKind::fluid && e.code == kFluidBalanceCode && e.value)
                balance.push_back({e.ts, *e.value});
        }
        auto same = [&](const std::string& name, std::optional<double> want) {
            double got = r.features[fidx(sc, name)];
            if (!want) return is_missing(got);
            return got == *want;
        };
        CHECK(same("hr_mrv", most_recent(hr, r.ts)));
        CHECK(same("spo2_avg_7d", window_agg(spo2, r.ts, days(7), Stat::avg)));
        CHECK(same(lab + "_min_3w", window_agg(labv, r.ts, days(21), Stat::min)));
        CHECK(same(lab + "_max_2w", window_agg(labv, r.ts, days(14), Stat::max)));
        CHECK(same("balance_8h_trend_3d", trend(balance, r.ts, days(3), a->admit_ts)));
    }
}

TEST_CASE("schema file round-trips") {
    Dataset ds = usage_dataset();
    FeatureSchema sc = build_schema(ds);
    auto path = (fs::temp_directory_path() / "ww_featgen_schema.csv").string();
    write_schema_csv(sc, path);
    FeatureSchema rt = read_schema_csv(path);
    REQUIRE(rt.columns.size() == sc.columns.size());
    CHECK(rt.first_feature == sc.first_feature);
    CHECK(rt.wards == sc.wards);
    CHECK(rt.lab_codes == sc.lab_codes);
    CHECK(rt.med_atc4 == sc.med_atc4);
    for (std::size_t i = 0; i < sc.columns.size(); ++i) {
        CHECK(rt.columns[i].name == sc.columns[i].name);
        CHECK(rt.columns[i].type == sc.columns[i].type);
        CHECK(rt.columns[i].table == sc.columns[i].table);
        CHECK(rt.columns[i].column == sc.columns[i].column);
        CHECK(rt.columns[i].code == sc.columns[i].code);
    }
}

TEST_CASE("matrix csv round-trips bit-exactly through the shortest rendering") {
    synth::SynthConfig cfg;
    cfg.n_admissions = 40;
    cfg.prevalence = 0.2;
    cfg.seed = 3;
    Dataset ds = synth::generate(cfg);
    auto labels = cohort::label_admissions(ds);
    FeatureMatrix m = build_matrix(ds, labels);
    auto path = (fs::temp_directory_path() / "ww_featgen_matrix.csv").string();
    write_matrix_csv(ds, labels, m.schema, path);

    std::vector<MatrixCsvRow> got;
    read_matrix_csv(path, m.schema, [&](MatrixCsvRow& r) { got.push_back(r); });
    REQUIRE(got.size() == m.rows.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].admission_id == m.rows[i].admission_id);
        CHECK(got[i].ts == m.rows[i].ts);
        CHECK(got[i].label == m.rows[i].label);
        REQUIRE(got[i].features.size() == m.rows[i].features.size());
        for (std::size_t k = 0; k < got[i].features.size(); ++k) {
            double a = got[i].features[k], b = m.rows[i].features[k];
            CHECK(((is_missing(a) && is_missing(b)) || a == b));
        }
    }
}

TEST_CASE("per-admission sampling variate is deterministic and uniform-ish") {
    double r1 = admission_rand("A000123");
    CHECK(r1 == admission_rand("A000123"));
    CHECK(r1 >= 0.0);
    CHECK(r1 < 1.0);
    CHECK(admission_rand("A000124") != r1);

    int low = 0, n = 2000;
    for (int i = 0; i < n; ++i)
        if (admission_rand("ADM" + std::to_string(i)) < 0.25) ++low;
    CHECK(low > n / 4 - 120);
    CHECK(low < n / 4 + 120);
}

TEST_CASE("the generated merge spec names every matrix column once") {
    Dataset ds = usage_dataset();
    FeatureSchema sc = build_schema(ds);
    std::string spec = default_merge_spec(sc);
    CHECK(spec.find("base patient_master alias t1") != std::string::npos);
    CHECK(spec.find("table adm alias t4 join (t3.prev_admission_id = admission_id)") !=
          std::string::npos);
    CHECK(spec.find("expr days_since_adm = round(hours_between(t1.ts, t3.admit_ts) / 24, 1)") !=
          std::string::npos);
    CHECK(spec.find("table vital_signs_mrv") != std::string::npos);
    CHECK(spec.find("* _mrv") != std::string::npos);
    CHECK(spec.find("fluids_trend") != std::string::npos);
}
