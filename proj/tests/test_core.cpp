#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "wardwatch/clean.hpp"
#include "wardwatch/load.hpp"
#include "wardwatch/util/csv.hpp"

using namespace ww;
namespace fs = std::filesystem;

namespace {

Timestamp ts(const char* iso) {
    auto t = parse_iso8601(iso);
    REQUIRE(t.has_value());
    return *t;
}

Admission make_admission(const std::string& id) {
    Admission a;
    a.admission_id = id;
    a.patient_id = "P-" + id;
    a.facility_cd = "H1";
    a.admit_ts = ts("2021-03-01T08:00:00Z");
    a.discharge_ts = ts("2021-03-05T08:00:00Z");
    a.age = 60;
    a.gender = Gender::male;
    a.transfers.push_back({id, "W-A", WardType::general, a.admit_ts, a.discharge_ts});
    return a;
}

}  // namespace

TEST_CASE("iso8601 round trip") {
    CHECK(format_iso8601(ts("2021-03-05T14:30:00Z")) == "2021-03-05T14:30:00Z");
    CHECK(ts("1970-01-01T00:00:00Z").s == 0);
    CHECK(ts("1970-01-02T00:00:00Z").s == 86400);
    CHECK(!parse_iso8601("2021-03-05 14:30:00").has_value());
    CHECK(!parse_iso8601("garbage").has_value());
    // leap year
    CHECK(format_iso8601(ts("2020-02-29T23:59:59Z")) == "2020-02-29T23:59:59Z");
}

TEST_CASE("clean_lab_value") {
    CHECK(clean_lab_value("7.30") == 7.30);
    CHECK(clean_lab_value("<0.01") == 0.01);
    CHECK(clean_lab_value("> 5") == 5.0);
    CHECK(clean_lab_value(">=10") == 10.0);
    CHECK(clean_lab_value("hemolyzed sample") == std::nullopt);
    CHECK(clean_lab_value("") == std::nullopt);
    CHECK(clean_lab_value("100,000") == 100000.0);
    CHECK(clean_lab_value("  3.5 ") == 3.5);
    CHECK(clean_lab_value("4.2e1") == 42.0);
    CHECK(clean_lab_value("7.3 high") == std::nullopt);  // trailing text is not numeric

    // Idempotence on rendered numeric output.
    for (double v : {7.30, 0.01, -2.5, 100000.0, 1e-9}) {
        auto once = clean_lab_value(format_double(v));
        REQUIRE(once.has_value());
        auto twice = clean_lab_value(format_double(*once));
        CHECK(*twice == *once);
    }
}

TEST_CASE("atc_truncate") {
    CHECK(atc_truncate("B01AC06") == "B01AC");
    CHECK(atc_truncate("B01AC") == "B01AC");
    CHECK(atc_truncate("B01") == "B01");
    CHECK(atc_truncate("B") == "B");
    CHECK(atc_truncate("B01A") == "B01A");
    CHECK_THROWS_AS(atc_truncate("B0"), std::invalid_argument);
    CHECK_THROWS_AS(atc_truncate("B01AC063X"), std::invalid_argument);
}

TEST_CASE("loinc shape") {
    CHECK(loinc_shape_valid("2524-7"));
    CHECK(loinc_shape_valid("777-3"));
    CHECK(!loinc_shape_valid("2524"));
    CHECK(!loinc_shape_valid("2524-77"));
    CHECK(!loinc_shape_valid("-7"));
    CHECK(!loinc_shape_valid("25a4-7"));
}

TEST_CASE("unit canonicalization for benchmark analytes") {
    CHECK(canonicalize_unit("777-3", 250.0, "10*3/uL").first == 250000.0);
    CHECK(canonicalize_unit("777-3", 250000.0, "/uL").first == 250000.0);
    CHECK(canonicalize_unit("10839-9", 0.4, "ng/mL") == std::pair{0.4, std::string("ug/L")});
    CHECK(canonicalize_unit("2019-8", 8.0, "kPa").first == doctest::Approx(60.005));
    CHECK(canonicalize_unit("2524-7", 27.024, "mg/dL").first == doctest::Approx(3.0));
    // anything else passes through
    CHECK(canonicalize_unit("999-9", 1.25, "mg") == std::pair{1.25, std::string("mg")});
}

TEST_CASE("validate drops out-of-stay events and dedups") {
    Admission a = make_admission("A1");
    ClinicalEvent e;
    e.admission_id = "A1";
    e.kind = EventKind::vital;
    e.code = "hr";
    e.value = 80;
    e.ts = ts("2021-03-02T00:00:00Z");
    a.events.push_back(e);
    e.ts = ts("2021-02-28T00:00:00Z");  // before admit
    a.events.push_back(e);
    e.ts = ts("2021-03-02T00:00:00Z");  // exact duplicate
    a.events.push_back(e);
    e.value = 90;  // conflicting value, same instant: keep last
    a.events.push_back(e);

    Dataset ds = validate_dataset({a});
    REQUIRE(ds.admissions.size() == 1);
    REQUIRE(ds.admissions[0].events.size() == 1);
    CHECK(ds.admissions[0].events[0].value == 90);
    bool outside = false, dup = false, conflict = false;
    for (const auto& v : ds.violations) {
        if (v.what == "event outside stay") outside = true;
        if (v.what == "duplicate event") dup = true;
        if (v.what == "conflicting event value") conflict = true;
    }
    CHECK(outside);
    CHECK(dup);
    CHECK(conflict);
}

TEST_CASE("validate keeps first of duplicate admission ids") {
    Admission a = make_admission("A1");
    a.age = 60;
    Admission b = make_admission("A1");
    b.age = 30;
    Dataset ds = validate_dataset({a, b});
    REQUIRE(ds.admissions.size() == 1);
    CHECK(ds.admissions[0].age == 60);
    REQUIRE(ds.violations.size() == 1);
    CHECK(ds.violations[0].what == "duplicate admission");
}

TEST_CASE("load_dataset happy path and round trip") {
    fs::path dir = fs::temp_directory_path() / "ww_core_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream adm(dir / "admissions.csv");
        adm << "admission_id,patient_id,facility_cd,admit_ts,discharge_ts,disposition,age,gender\n"
               "A1,P1,H1,2021-03-01T08:00:00Z,2021-03-05T08:00:00Z,home,63,male\n"
               "A2,P2,H1,2021-03-02T09:00:00Z,2021-03-04T10:00:00Z,transfer,41,female\n"
               "A3,P3,H2,2021-03-02T12:00:00Z,2021-03-06T18:00:00Z,home,77,female\n";
        std::ofstream tra(dir / "transfers.csv");
        tra << "admission_id,ward_name,ward_type,in_ts,out_ts\n"
               "A1,WardA,general,2021-03-01T08:00:00Z,2021-03-05T08:00:00Z\n"
               "A2,WardB,general,2021-03-02T09:00:00Z,2021-03-04T10:00:00Z\n"
               "A3,WardA,general,2021-03-02T12:00:00Z,2021-03-06T18:00:00Z\n";
        std::ofstream eve(dir / "events.csv");
        eve << "admission_id,kind,code,value_text,unit,ts\n"
               "A1,vital,hr,81,bpm,2021-03-01T10:00:00Z\n"
               "A1,lab,2524-7,<2.1,mmol/L,2021-03-01T11:00:00Z\n"
               "A2,vital,spo2,97,%,2021-03-02T10:00:00Z\n"
               "A2,vital,hr,not recorded,bpm,2021-03-02T10:00:00Z\n"
               "A3,fluid,9192-6,350,mL,2021-03-03T06:00:00Z\n"
               "A3,vital,hr,75,bpm,2021-02-01T00:00:00Z\n";
        std::ofstream dia(dir / "diagnoses.csv");
        dia << "admission_id,icd10_code,rank\nA1,I21.0,1\n";
        std::ofstream med(dir / "meds.csv");
        med << "admission_id,atc_code\nA1,B01AC06\n";
    }

    Dataset ds = load_dataset_dir(dir.string(), FileFormat::csv);
    REQUIRE(ds.admissions.size() == 3);
    // A2's unusable vital and A3's out-of-stay vital are violations
    CHECK(ds.violations.size() == 2);
    const Admission* a1 = ds.find("A1");
    REQUIRE(a1 != nullptr);
    CHECK(a1->events.size() == 2);
    CHECK(a1->events[1].value == 2.1);  // comparator bound
    CHECK(ds.find("A2")->events.size() == 1);
    CHECK(ds.find("A9") == nullptr);

    for (const auto& a : ds.admissions)
        for (const auto& e : a.events) {
            CHECK(e.ts >= a.admit_ts);
            CHECK(e.ts <= a.discharge_ts);
        }

    // CSV round trip: save, reload, field-wise identical.
    fs::path out1 = dir / "rt1";
    save_dataset(ds, out1.string(), FileFormat::csv);
    Dataset ds2 = load_dataset_dir(out1.string(), FileFormat::csv);
    CHECK(ds.admissions == ds2.admissions);
    CHECK(ds2.violations.empty());

    // JSONL round trip.
    fs::path out2 = dir / "rt2";
    save_dataset(ds, out2.string(), FileFormat::jsonl);
    Dataset ds3 = load_dataset_dir(out2.string(), FileFormat::jsonl);
    CHECK(ds.admissions == ds3.admissions);
}

TEST_CASE("load_dataset aborts on missing column, not on bad rows") {
    fs::path dir = fs::temp_directory_path() / "ww_core_badcol";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream adm(dir / "admissions.csv");
    adm << "admission_id,patient_id\nA1,P1\n";
    adm.close();
    CHECK_THROWS(load_dataset({(dir / "admissions.csv").string()}, FileFormat::csv));
    CHECK_THROWS(load_dataset({(dir / "nope.csv").string()}, FileFormat::csv));
}

TEST_CASE("csv quoting and doubles") {
    auto f = split_csv_line("a,\"b,c\",\"d\"\"e\",f");
    REQUIRE(f.size() == 4);
    CHECK(f[1] == "b,c");
    CHECK(f[2] == "d\"e");
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(format_double(0.1) == "0.1");
    CHECK(parse_double(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
