#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "wardwatch/cohort.hpp"
#include "wardwatch/core.hpp"

namespace ww {
namespace featgen {

// Missing is a first-class state, distinct from 0, carried as NaN inside
// row vectors and as an empty CSV field on disk.
inline double missing() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double v) { return std::isnan(v); }

enum class ColumnType { key, meta, numeric, categorical, label };
const char* to_string(ColumnType t);
std::optional<ColumnType> parse_column_type(const std::string& s);

struct ColumnDef {
    std::string name;      // merged-matrix column name
    ColumnType type = ColumnType::numeric;
    std::string category;  // keys, demographics, usage, transfer, vitals, labs, fluids, ...
    std::string table;     // per-category source table ("" for base/adm columns)
    std::string column;    // short column name inside that table
    std::string code;      // source code (LOINC, vital short name, ATC-4) when channel-bound
};

// Matrix layout plus the dictionaries needed to rebuild rows at scoring
// time. Columns before first_feature are keys and bookkeeping; from there
// on every column is a model input, in matrix order.
struct FeatureSchema {
    std::vector<ColumnDef> columns;
    std::size_t first_feature = 0;
    std::vector<std::string> wards;      // categorical dictionary, index = encoded value
    std::vector<std::string> lab_codes;  // channel universes, sorted
    std::vector<std::string> med_atc4;

    std::size_t n_features() const { return columns.size() - first_feature; }
    std::vector<std::string> feature_names() const;
    int ward_code(const std::string& name) const;  // -1 when unknown
};

// Column universe from the codes present in the dataset (the deployment's
// training extract); vitals and fluids channels are the fixed charting
// codes below.
FeatureSchema build_schema(const Dataset& ds);

void write_schema_csv(const FeatureSchema& schema, const std::string& path);
FeatureSchema read_schema_csv(const std::string& path);

// Fixed vitals/fluids charting codes and their matrix short names.
extern const std::vector<std::pair<std::string, std::string>> kVitalChannels;   // code, short
extern const std::vector<std::pair<std::string, std::string>> kFluidChannels;
extern const char* kFluidBalanceCode;  // the two fluid channels with trend columns
extern const char* kFluidUrineCode;

// Pure feature primitives over one code's (ts, value) series, sorted by ts.
using Series = std::vector<std::pair<Timestamp, double>>;
std::optional<double> most_recent(const Series& s, Timestamp t);
enum class Stat { count, avg, min, max };
// Window is half-open (t - w, t]; count of an empty window is 0, other
// stats are missing.
std::optional<double> window_agg(const Series& s, Timestamp t, std::int64_t window_s, Stat stat);
// OLS slope in value units per day over the window; x measured in days
// since admit so collinear points stay exact.
std::optional<double> trend(const Series& s, Timestamp t, std::int64_t window_s,
                            Timestamp admit_ts);

// One merged-matrix row. `features` is aligned to schema columns from
// first_feature on; bookkeeping cells are derived from the admission.
struct RowView {
    const Admission* adm = nullptr;
    const cohort::CohortLabel* label = nullptr;
    Timestamp ts;
    double rand = 0;  // per-admission sampling variate, carried through
    const std::vector<double>* features = nullptr;
};
using RowSink = std::function<void(const RowView&)>;

// Streams every scoring-instant row of every non-excluded admission in
// (admission_id, ts) order. Labels must be label_admissions(ds) output.
void for_each_row(const Dataset& ds, const std::vector<cohort::CohortLabel>& labels,
                  const FeatureSchema& schema, const RowSink& sink);

// Deterministic uniform [0,1) variate from the admission id alone.
double admission_rand(const std::string& admission_id);

// One row for one admission at one instant, same cell values for_each_row
// would stream at that ts. Labels play no part; callers scoring live data
// pass whatever instant they want. The scoring service entry point.
std::vector<double> features_at(const Dataset& ds, const std::string& admission_id, Timestamp t,
                                const FeatureSchema& schema);

// Small-data convenience: the whole matrix in memory.
struct MatrixRow {
    std::string admission_id;
    Timestamp ts;
    int label = 0;
    std::vector<double> features;
};
struct FeatureMatrix {
    FeatureSchema schema;
    std::vector<MatrixRow> rows;
};
FeatureMatrix build_matrix(const Dataset& ds, const std::vector<cohort::CohortLabel>& labels);

// Artifact writers. matrix.csv holds the merged rows; the per-category
// tables plus adm/target_adm/patient_master are the inputs the query
// evaluator merges; merge_spec.txt is the generated spec that reproduces
// matrix.csv from them.
void write_matrix_csv(const Dataset& ds, const std::vector<cohort::CohortLabel>& labels,
                      const FeatureSchema& schema, const std::string& path);
void write_category_tables(const Dataset& ds, const std::vector<cohort::CohortLabel>& labels,
                           const FeatureSchema& schema, const std::string& dir);
std::string default_merge_spec(const FeatureSchema& schema);

// matrix.csv reader used by training and evaluation; calls sink with
// (admission_id, ts, label, features).
struct MatrixCsvRow {
    std::string admission_id;
    std::string facility_cd;
    Timestamp ts;
    Timestamp admit_ts;
    std::optional<Timestamp> target_ts;  // cases only
    int label;
    std::vector<double> features;  // aligned to schema feature columns
};
void read_matrix_csv(const std::string& path, const FeatureSchema& schema,
                     const std::function<void(MatrixCsvRow&)>& sink);

}  // namespace featgen
}  // namespace ww
