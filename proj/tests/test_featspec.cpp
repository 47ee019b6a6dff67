#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "wardwatch/cohort.hpp"
#include "wardwatch/featgen.hpp"
#include "wardwatch/featspec.hpp"
#include "wardwatch/synth.hpp"

using namespace ww;
using namespace ww::featspec;
namespace fs = std::filesystem;

namespace {

const char* kMirrorSpec = R"(base patient_master alias t1 keys (admission_id, ts) {
  facility_cd, patient_id, admission_id, ts
}
table target_adm alias t2 join (t1.admission_id = admission_id) {
  rand
}
table adm alias t3 join (t1.admission_id = admission_id) {
  admit_ts, target_ts, is_direct_icu_admission
}
table adm alias t4 join (t3.prev_admission_id = admission_id) {
  discharge_disposition as prev_discharge_disposition
}
table patient_demographics_features alias t5 join (t1.admission_id = admission_id, t1.ts = ts) {
  gender, admission_age as age
}
expr days_since_adm = round(hours_between(t1.ts, t3.admit_ts) / 24, 1)
table vital_signs_min1day alias t6 join (t1.admission_id = admission_id, t1.ts = ts) {
  * _min_1day
}
table vital_signs_max1day alias t7 join (t1.admission_id = admission_id, t1.ts = ts) {
  * _max_1day
}
)";

Catalog mirror_catalog() {
    return {
        {"patient_master", {"facility_cd", "patient_id", "admission_id", "ts"}},
        {"target_adm", {"admission_id", "rand"}},
        {"adm",
         {"admission_id", "admit_ts", "target_ts", "is_direct_icu_admission",
          "prev_admission_id", "discharge_disposition"}},
        {"patient_demographics_features", {"admission_id", "ts", "gender", "admission_age"}},
        {"vital_signs_min1day", {"admission_id", "ts", "bmi", "rr", "hr", "spo2"}},
        {"vital_signs_max1day", {"admission_id", "ts", "bmi", "rr", "hr", "spo2"}},
    };
}

RelTable table(const std::string& name, std::vector<std::string> columns,
               std::vector<std::string> keys, std::vector<std::vector<std::string>> rows) {
    RelTable t;
    t.name = name;
    t.columns = std::move(columns);
    t.keys = std::move(keys);
    t.rows = std::move(rows);
    t.validate_keys();
    return t;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("parsing reads blocks, selectors, and self-joins") {
    SpecAst ast = parse_spec(kMirrorSpec);
    CHECK(ast.base_table == "patient_master");
    CHECK(ast.base_alias == "t1");
    CHECK(ast.base_keys == std::vector<std::string>{"admission_id", "ts"});
    CHECK(ast.base_selectors.size() == 4);
    REQUIRE(ast.items.size() == 7);

    const auto& t3 = std::get<TableBlock>(ast.items[1]);
    CHECK(t3.table == "adm");
    CHECK(t3.alias == "t3");
    REQUIRE(t3.join.size() == 1);
    CHECK(t3.join[0].first == ColumnRef{"t1", "admission_id"});
    CHECK(t3.join[0].second == "admission_id");
    CHECK(t3.selectors.size() == 3);
    CHECK(t3.selectors[0] == Selector{Selector::Kind::column, "admit_ts", ""});

    // self-join: adm appears twice under distinct aliases, keyed off t3
    const auto& t4 = std::get<TableBlock>(ast.items[2]);
    CHECK(t4.table == "adm");
    CHECK(t4.alias == "t4");
    CHECK(t4.join[0].first == ColumnRef{"t3", "prev_admission_id"});
    REQUIRE(t4.selectors.size() == 1);
    CHECK(t4.selectors[0] ==
          Selector{Selector::Kind::renamed, "discharge_disposition",
                   "prev_discharge_disposition"});

    const auto& wild = std::get<TableBlock>(ast.items[5]);
    CHECK(wild.selectors[0] == Selector{Selector::Kind::wildcard, "*", "_min_1day"});

    const auto& d = std::get<ExprDef>(ast.items[4]);
    CHECK(d.out == "days_since_adm");
    CHECK(d.expr.kind == Expr::Kind::call);
    CHECK(d.expr.func == "round");
}

TEST_CASE("parse errors carry position and name the problem") {
    try {
        parse_spec("base b alias t1 keys (id) { id }\n"
                   "table x alias t2 join (t9.id = id) { v }\n");
        FAIL("expected SpecError");
    } catch (const SpecError& e) {
        CHECK(e.line == 2);
        CHECK(std::string(e.what()).find("t9") != std::string::npos);
        CHECK(std::string(e.what()).find("merge spec:2:") != std::string::npos);
    }

    CHECK_THROWS_AS(parse_spec("table x alias t2 join (t1.id = id) { v }\n"), SpecError);
    CHECK_THROWS_AS(parse_spec("base b alias t1 keys (id) { id }\n"
                               "table x alias t1 join (t1.id = id) { v }\n"),
                    SpecError);  // duplicate alias
    CHECK_THROWS_AS(parse_spec("base b alias t1 keys (id) { id, id }\n"),
                    SpecError);  // duplicate output
    CHECK_THROWS_AS(parse_spec("base b alias t1 keys (id) { id }\n"
                               "expr bad = round(t1.id, 1\n"),
                    SpecError);  // unterminated call
    CHECK_THROWS_AS(parse_spec("base b alias t1 keys (id) { id }\n"
                               "expr bad = hours_between(t1.a, t1.b) +\n"),
                    SpecError);  // dangling operator
    CHECK_THROWS_AS(parse_spec("base b alias t1 keys (id) { }\n"), SpecError);
    CHECK_THROWS_AS(parse_spec("base b alias t1 keys (id) { id }\n"
                               "expr bad = round(t1.a, 1.5)\n"),
                    SpecError);  // fractional decimal count
}

TEST_CASE("print then parse reproduces the ast exactly") {
    SpecAst ast = parse_spec(kMirrorSpec);
    std::string printed = print_spec(ast);
    SpecAst again = parse_spec(printed);
    CHECK(again == ast);
    CHECK(print_spec(again) == printed);

    // and for the generated default merge spec of a real schema
    synth::SynthConfig cfg;
    cfg.n_admissions = 30;
    cfg.prevalence = 0.2;
    cfg.seed = 9;
    Dataset ds = synth::generate(cfg);
    featgen::FeatureSchema sc = featgen::build_schema(ds);
    std::string text = featgen::default_merge_spec(sc);
    SpecAst real = parse_spec(text);
    CHECK(parse_spec(print_spec(real)) == real);
}

TEST_CASE("generated sql mirrors the canonical merge statement") {
    SpecAst ast = parse_spec(kMirrorSpec);
    std::string sql = generate_sql(ast, mirror_catalog());
    const char* expected =
        "SELECT t1.facility_cd, t1.patient_id, t1.admission_id, t1.ts,\n"
        "       t2.rand,\n"
        "       t3.admit_ts, t3.target_ts, t3.is_direct_icu_admission,\n"
        "       t4.discharge_disposition AS prev_discharge_disposition,\n"
        "       t5.gender, t5.admission_age AS age,\n"
        "       round(cast(extract(epoch FROM t1.ts - t3.admit_ts)/3600.0/24 AS numeric), 1) AS "
        "days_since_adm,\n"
        "       t6.bmi AS bmi_min_1day, t6.rr AS rr_min_1day, t6.hr AS hr_min_1day, t6.spo2 AS "
        "spo2_min_1day,\n"
        "       t7.bmi AS bmi_max_1day, t7.rr AS rr_max_1day, t7.hr AS hr_max_1day, t7.spo2 AS "
        "spo2_max_1day\n"
        "FROM patient_master t1\n"
        "    LEFT OUTER JOIN target_adm t2 ON t1.admission_id = t2.admission_id\n"
        "    LEFT OUTER JOIN adm t3 ON t1.admission_id = t3.admission_id\n"
        "    LEFT OUTER JOIN adm t4 ON t3.prev_admission_id = t4.admission_id\n"
        "    LEFT OUTER JOIN patient_demographics_features t5 ON t1.admission_id = "
        "t5.admission_id AND t1.ts = t5.ts\n"
        "    LEFT OUTER JOIN vital_signs_min1day t6 ON t1.admission_id = t6.admission_id AND "
        "t1.ts = t6.ts\n"
        "    LEFT OUTER JOIN vital_signs_max1day t7 ON t1.admission_id = t7.admission_id AND "
        "t1.ts = t7.ts\n";
    CHECK(sql == expected);
    CHECK(generate_sql(ast, mirror_catalog()) == sql);  // byte-deterministic

    Catalog missing_vitals = mirror_catalog();
    missing_vitals["vital_signs_min1day"] = {"admission_id", "ts"};  // wildcard finds nothing
    CHECK_THROWS_WITH_AS(generate_sql(ast, missing_vitals),
                         "wildcard '*' matches nothing in table 'vital_signs_min1day'",
                         std::runtime_error);
    Catalog no_adm = mirror_catalog();
    no_adm.erase("adm");
    CHECK_THROWS_AS(generate_sql(ast, no_adm), std::runtime_error);
}

TEST_CASE("left outer join keeps base rows and nulls unmatched blocks") {
    auto base = table("b", {"id", "ts"}, {"id"},
                      {{"a", "2021-03-01T00:00:00Z"},
                       {"b", "2021-03-01T01:00:00Z"},
                       {"c", "2021-03-01T02:00:00Z"}});
    auto vals = table("v", {"id", "x"}, {"id"}, {{"a", "1"}, {"c", "3"}});
    SpecAst ast = parse_spec(
        "base b alias t1 keys (id) { id, ts }\n"
        "table v alias t2 join (t1.id = id) { x }\n"
        "expr zero = hours_between(t1.ts, t1.ts) / 24\n"
        "expr x2 = t2.x * 2 + 1\n");
    RelTable out = execute_query(ast, {base, vals});
    CHECK(out.columns == std::vector<std::string>{"id", "ts", "x", "zero", "x2"});
    REQUIRE(out.rows.size() == 3);  // row count always equals the base
    CHECK(out.rows[0] == std::vector<std::string>{"a", "2021-03-01T00:00:00Z", "1", "0", "3"});
    CHECK(out.rows[1] == std::vector<std::string>{"b", "2021-03-01T01:00:00Z", "", "0", ""});
    CHECK(out.rows[2] == std::vector<std::string>{"c", "2021-03-01T02:00:00Z", "3", "0", "7"});
}

TEST_CASE("nulls never join and chained lookups go through earlier blocks") {
    auto base = table("b", {"id"}, {"id"}, {{"a"}, {"b"}});
    auto adm = table("adm", {"id", "prev", "los"}, {"id"},
                     {{"a", "p1", "2"}, {"b", "", "5"}, {"p1", "", "9"}});
    SpecAst ast = parse_spec(
        "base b alias t1 keys (id) { id }\n"
        "table adm alias t2 join (t1.id = id) { los }\n"
        "table adm alias t3 join (t2.prev = id) { los as prev_los }\n");
    RelTable out = execute_query(ast, {base, adm});
    CHECK(out.rows[0] == std::vector<std::string>{"a", "2", "9"});
    CHECK(out.rows[1] == std::vector<std::string>{"b", "5", ""});  // null prev joins nothing
}

TEST_CASE("independent block order does not change cell values") {
    auto base = table("b", {"id"}, {"id"}, {{"a"}, {"b"}, {"c"}});
    auto x = table("x", {"id", "u"}, {"id"}, {{"a", "1"}, {"b", "2"}});
    auto y = table("y", {"id", "w"}, {"id"}, {{"b", "20"}, {"c", "30"}});
    SpecAst xy = parse_spec(
        "base b alias t1 keys (id) { id }\n"
        "table x alias t2 join (t1.id = id) { u }\n"
        "table y alias t3 join (t1.id = id) { w }\n");
    SpecAst yx = parse_spec(
        "base b alias t1 keys (id) { id }\n"
        "table y alias t3 join (t1.id = id) { w }\n"
        "table x alias t2 join (t1.id = id) { u }\n");
    RelTable a = execute_query(xy, {base, x, y});
    RelTable b = execute_query(yx, {base, x, y});
    for (const auto& col : {"id", "u", "w"}) {
        std::size_t ca = a.col(col), cb = b.col(col);
        for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i][ca] == b.rows[i][cb]);
    }
}

TEST_CASE("executor rejects broken inputs") {
    auto base = table("b", {"id"}, {"id"}, {{"a"}});
    RelTable dup;
    dup.name = "v";
    dup.columns = {"id", "x"};
    dup.keys = {"id"};
    dup.rows = {{"a", "1"}, {"a", "2"}};
    CHECK_THROWS_AS(dup.validate_keys(), std::runtime_error);

    SpecAst ast = parse_spec(
        "base b alias t1 keys (id) { id }\n"
        "table v alias t2 join (t1.id = id) { x }\n"
        "expr y = t2.x + 1\n");
    // duplicate join key detected even without validate_keys
    CHECK_THROWS_AS(execute_query(ast, {base, dup}), std::runtime_error);

    auto text = table("v", {"id", "x"}, {"id"}, {{"a", "pear"}});
    CHECK_THROWS_AS(execute_query(ast, {base, text}), std::runtime_error);

    CHECK_THROWS_AS(execute_query(ast, {base}), std::runtime_error);  // missing table
}

TEST_CASE("csv-backed tables round-trip and validate") {
    auto dir = fs::temp_directory_path() / "ww_featspec";
    fs::create_directories(dir);
    auto path = (dir / "t.csv").string();
    auto t = table("t", {"id", "v"}, {"id"}, {{"a", "1.5"}, {"b", ""}});
    write_rel_table_csv(t, path);
    RelTable rt = read_rel_table_csv(path, "t", {"id"});
    rt.validate_keys();
    CHECK(rt.columns == t.columns);
    CHECK(rt.rows == t.rows);
}

TEST_CASE("merging the per-category tables reproduces the matrix byte for byte") {
    synth::SynthConfig cfg;
    cfg.n_admissions = 40;
    cfg.prevalence = 0.2;
    cfg.seed = 3;
    Dataset ds = synth::generate(cfg);
    auto labels = cohort::label_admissions(ds);
    featgen::FeatureSchema sc = featgen::build_schema(ds);

    auto dir = fs::temp_directory_path() / "ww_featspec_merge";
    fs::create_directories(dir);
    featgen::write_matrix_csv(ds, labels, sc, (dir / "matrix.csv").string());
    featgen::write_category_tables(ds, labels, sc, dir.string());

    std::vector<RelTable> tables;
    tables.push_back(read_rel_table_csv((dir / "patient_master.csv").string(), "patient_master",
                                        {"admission_id", "ts"}));
    tables.push_back(read_rel_table_csv((dir / "adm.csv").string(), "adm", {"admission_id"}));
    tables.push_back(
        read_rel_table_csv((dir / "target_adm.csv").string(), "target_adm", {"admission_id"}));
    std::set<std::string> instant_tables;
    for (std::size_t i = sc.first_feature; i < sc.columns.size(); ++i) {
        const auto& t = sc.columns[i].table;
        if (t.empty() || t == "adm" || t == "target_adm") continue;
        if (instant_tables.insert(t).second)
            tables.push_back(read_rel_table_csv((dir / (t + ".csv")).string(), t,
                                                {"admission_id", "ts"}));
    }
    for (const auto& t : tables) t.validate_keys();

    std::string spec_text = featgen::default_merge_spec(sc);
    SpecAst ast = parse_spec(spec_text);
    RelTable merged = execute_query(ast, tables);
    write_rel_table_csv(merged, (dir / "merged.csv").string());

    std::string want = slurp((dir / "matrix.csv").string());
    std::string got = slurp((dir / "merged.csv").string());
    if (got != want) {
        std::size_t i = 0;
        while (i < got.size() && i < want.size() && got[i] == want[i]) ++i;
        CAPTURE(i);
        CAPTURE(want.substr(i > 40 ? i - 40 : 0, 120));
        CAPTURE(got.substr(i > 40 ? i - 40 : 0, 120));
    }
    CHECK(got == want);

    // the generated sql for the same spec is well formed and deterministic
    std::string sql = generate_sql(ast, catalog_of(tables));
    CHECK(sql.find("LEFT OUTER JOIN adm t4 ON t3.prev_admission_id = t4.admission_id") !=
          std::string::npos);
    CHECK(sql == generate_sql(ast, catalog_of(tables)));
}
