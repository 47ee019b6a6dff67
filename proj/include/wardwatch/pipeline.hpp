#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wardwatch/evalkit.hpp"
#include "wardwatch/featgen.hpp"
#include "wardwatch/gbdt.hpp"
#include "wardwatch/synth.hpp"

namespace ww {
namespace pipeline {

// One config drives every stage, so a rerun with the same file is
// byte-reproducible end to end. Parsed from the same "key = value" grammar
// as the synth config; synth keys pass through unchanged.
struct PipelineConfig {
    std::string data_dir = "wardwatch-data";
    std::string model_file;  // override; default <data_dir>/model[_<facility>].json
    std::string spec_file;   // override; default <data_dir>/merge_spec.txt

    synth::SynthConfig synth;
    gbdt::Hyperparams train;

    double train_fraction = 0.5;
    std::uint64_t split_seed = 1;
    bool combined = false;  // default is one model per facility
    int cv_folds = 0;       // >= 2 picks the round count by CV before the final fit
    double model_b_specificity = 0.75;  // the fixed operating point beside the matched one
};

PipelineConfig parse_pipeline_config(const std::string& text);
PipelineConfig load_pipeline_config(const std::string& path);
void validate_pipeline_config(const PipelineConfig& cfg);

// Artifact locations under cfg.data_dir. Facility "" means the combined
// model; otherwise files carry a _<facility> suffix.
struct Artifacts {
    explicit Artifacts(const PipelineConfig& cfg);
    std::string raw_dir;      // synthetic EMR extract, csv per record kind
    std::string summary_txt;  // generator sanity numbers
    std::string labels_csv;
    std::string instants_csv;
    std::string schema_csv;
    std::string matrix_csv;
    std::string tables_dir;  // per-category relational tables
    std::string merge_spec;
    std::string merge_sql;
    std::string merged_csv;
    std::string model(const std::string& facility) const;
    std::string report(const std::string& facility) const;
    std::string roc(const std::string& facility) const;
    std::string calibration(const std::string& facility) const;
    std::string warnings(const std::string& facility) const;
    std::string importance(const std::string& facility) const;
    std::string shap_summary(const std::string& facility) const;

  private:
    std::string dir_;
    std::string model_override_;
    std::string stem(const std::string& base, const std::string& facility,
                     const std::string& ext) const;
};

// Stages, in pipeline order. Each reads the previous stage's files, writes
// its own, and returns the paths written. A missing input is an error
// naming the file and the stage that produces it.
std::vector<std::string> run_synth(const PipelineConfig& cfg);
std::vector<std::string> run_cohort(const PipelineConfig& cfg);
std::vector<std::string> run_featgen(const PipelineConfig& cfg);
std::vector<std::string> run_sqlgen(const PipelineConfig& cfg);
std::vector<std::string> run_merge(const PipelineConfig& cfg);
std::vector<std::string> run_train(const PipelineConfig& cfg);
std::vector<std::string> run_eval(const PipelineConfig& cfg);
std::vector<std::string> run_explain(const PipelineConfig& cfg);
std::vector<std::string> run_all(const PipelineConfig& cfg);

// In-memory generate -> label -> featurize -> train -> evaluate run that
// never touches matrix.csv; the matrix at benchmark scale is gigabytes and
// the comparison needs none of it. Always trains one combined model.
// test_row_hook, when set, sees every test-split row with its raw and
// probability score (fixture capture for parity and attribution checks).
struct HeadlineResult {
    featgen::FeatureSchema schema;
    gbdt::GbdtModel model;
    std::vector<evalkit::AdmissionScore> model_scores;  // test split, probability scale
    std::vector<evalkit::AdmissionScore> icuww_scores;  // test split, 0/1 rule scores
    evalkit::CompareReport report;
    std::vector<evalkit::CalibrationBin> calibration;
    std::size_t n_train_rows = 0;
    std::size_t n_test_rows = 0;
    std::size_t n_train_admissions = 0;
    std::size_t n_test_admissions = 0;
};
using TestRowHook = std::function<void(const featgen::RowView&, double raw, double prob)>;
HeadlineResult run_headline(const PipelineConfig& cfg, const TestRowHook& test_row_hook = {});

}  // namespace pipeline
}  // namespace ww
