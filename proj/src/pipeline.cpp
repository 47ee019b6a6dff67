#include "wardwatch/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <variant>

#include "wardwatch/cohort.hpp"
#include "wardwatch/core.hpp"
#include "wardwatch/featspec.hpp"
#include "wardwatch/icuww.hpp"
#include "wardwatch/load.hpp"
#include "wardwatch/util/csv.hpp"

namespace fs = std::filesystem;

namespace ww {
namespace pipeline {

namespace {

void require_file(const std::string& path, const std::string& what, const std::string& stage) {
    if (!fs::exists(path))
        throw std::runtime_error("missing " + what + " '" + path + "'; run " + stage + " first");
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

bool apply_pipeline_key(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    auto num = [&]() {
        auto v = parse_double(value);
        if (!v) throw std::runtime_error("bad number '" + value + "'");
        return *v;
    };
    auto flag = [&]() {
        if (value == "1" || value == "true") return true;
        if (value == "0" || value == "false") return false;
        throw std::runtime_error("bad flag '" + value + "' (want true/false)");
    };
    if (key == "data_dir") cfg.data_dir = value;
    else if (key == "model_file") cfg.model_file = value;
    else if (key == "spec_file") cfg.spec_file = value;
    else if (key == "train_fraction") cfg.train_fraction = num();
    else if (key == "split_seed") cfg.split_seed = static_cast<std::uint64_t>(num());
    else if (key == "combined") cfg.combined = flag();
    else if (key == "cv_folds") cfg.cv_folds = static_cast<int>(num());
    else if (key == "model_b_specificity") cfg.model_b_specificity = num();
    else if (key == "neg_sample_rate") cfg.train.neg_sample_rate = num();
    else if (key == "learning_rate") cfg.train.learning_rate = num();
    else if (key == "max_depth") cfg.train.max_depth = static_cast<int>(num());
    else if (key == "colsample_per_tree") cfg.train.colsample_per_tree = num();
    else if (key == "min_node_cases") cfg.train.min_node_cases = static_cast<int>(num());
    else if (key == "l2_reg") cfg.train.l2_reg = num();
    else if (key == "gain_floor") cfg.train.gain_floor = num();
    else if (key == "max_rounds") cfg.train.max_rounds = static_cast<int>(num());
    else if (key == "train_seed") cfg.train.seed = static_cast<std::uint64_t>(num());
    else return false;
    return true;
}

// Facility routing for the per-facility default. The key is "" when
// training combined, so downstream loops treat both modes uniformly.
struct MatrixIndex {
    std::vector<std::string> facilities;
    std::unordered_map<std::string, std::string> facility_of;  // admission -> facility key
};

MatrixIndex scan_matrix(const std::string& path, const featgen::FeatureSchema& schema,
                        bool combined) {
    MatrixIndex mi;
    std::set<std::string> fac;
    featgen::read_matrix_csv(path, schema, [&](featgen::MatrixCsvRow& r) {
        std::string key = combined ? std::string() : r.facility_cd;
        mi.facility_of.emplace(r.admission_id, key);
        fac.insert(key);
    });
    mi.facilities.assign(fac.begin(), fac.end());
    return mi;
}

struct IdSplit {
    std::unordered_set<std::string> train;
    std::unordered_set<std::string> test;
};

// labels.csv keeps label_admissions order (admission_id ascending), so the
// filtered subsequence and therefore the split are deterministic.
IdSplit split_ids(const std::vector<cohort::CohortLabel>& labels, const MatrixIndex& mi,
                  const std::string& facility, double train_fraction, std::uint64_t seed) {
    std::vector<cohort::CohortLabel> sub;
    for (const auto& l : labels) {
        auto it = mi.facility_of.find(l.admission_id);
        if (it == mi.facility_of.end() || it->second != facility) continue;
        sub.push_back(l);
    }
    cohort::Split sp = cohort::split_train_test(sub, train_fraction, seed);
    IdSplit out;
    out.train.insert(sp.train_ids.begin(), sp.train_ids.end());
    out.test.insert(sp.test_ids.begin(), sp.test_ids.end());
    return out;
}

// Operating point for the shipped model: per-admission max probability on
// the training split, threshold at the configured specificity over its
// controls. The untouched test split keeps its own operating points.
void set_alert_threshold(gbdt::GbdtModel& model, const gbdt::TrainSet& tr, double specificity) {
    const std::size_t nf = tr.n_features;
    std::vector<double> row(nf);
    std::vector<std::string> order;
    std::unordered_map<std::string, double> best;
    std::unordered_map<std::string, int> lab;
    for (std::size_t i = 0; i < tr.n_rows(); ++i) {
        const float* src = tr.values.data() + i * nf;
        for (std::size_t j = 0; j < nf; ++j) row[j] = src[j];
        double p = model.predict(row);
        auto [it, fresh] = best.emplace(tr.admission_ids[i], p);
        if (fresh) order.push_back(tr.admission_ids[i]);
        else if (p > it->second) it->second = p;
        int& l = lab[tr.admission_ids[i]];
        l = std::max(l, tr.labels[i]);
    }
    std::vector<double> controls;
    for (const auto& id : order)
        if (!lab[id]) controls.push_back(best[id]);
    if (controls.empty()) return;
    model.alert_threshold = evalkit::threshold_for_specificity(controls, specificity);
}

// Per-admission score trace plus the raw material the rule benchmark and
// the report writers need.
struct ScoreAcc {
    std::vector<std::pair<Timestamp, double>> series;
    std::vector<cohort::ScoringInstant> instants;
    int label = 0;
    Timestamp admit{0};
    std::optional<Timestamp> target;
};

struct EvalBundle {
    std::vector<evalkit::AdmissionScore> model_scores;
    std::vector<evalkit::AdmissionScore> icuww_scores;
    std::pair<Timestamp, Timestamp> interval;
};

EvalBundle finish_scores(std::vector<std::pair<std::string, ScoreAcc>>& accs,
                         const std::function<const Admission*(const std::string&)>& find,
                         const std::vector<icuww::Rule>& rules) {
    EvalBundle out;
    Timestamp lo{std::numeric_limits<std::int64_t>::max()};
    Timestamp hi{std::numeric_limits<std::int64_t>::min()};
    for (auto& [id, acc] : accs) {
        for (const auto& [ts, p] : acc.series) {
            if (ts < lo) lo = ts;
            if (hi < ts) hi = ts;
        }
        out.model_scores.push_back(
            evalkit::make_admission_score(id, acc.label, acc.series, acc.target, acc.admit));
        const Admission* adm = find(id);
        if (!adm) throw std::runtime_error("admission '" + id + "' missing from raw extract");
        auto alert = icuww::alert_series(*adm, acc.instants, rules);
        std::vector<std::pair<Timestamp, double>> rule_series{
            {alert ? *alert : acc.series.front().first, alert ? 1.0 : 0.0}};
        out.icuww_scores.push_back(
            evalkit::make_admission_score(id, acc.label, std::move(rule_series), acc.target,
                                          acc.admit));
    }
    out.interval = {lo, hi};
    return out;
}

void write_eval_artifacts(const PipelineConfig& cfg, const Artifacts& art,
                          const std::string& facility, EvalBundle& bundle,
                          std::vector<std::string>& written) {
    auto report =
        evalkit::compare_report(bundle.model_scores, bundle.icuww_scores, bundle.interval,
                                cfg.model_b_specificity);
    evalkit::write_report_csv(report, art.report(facility));
    evalkit::write_roc_csv(evalkit::roc_points(bundle.model_scores), art.roc(facility));
    evalkit::write_calibration_csv(evalkit::calibration_quintiles(bundle.model_scores),
                                   art.calibration(facility));
    evalkit::write_warnings_csv(bundle.model_scores, report.model_b_threshold,
                                art.warnings(facility));
    written.push_back(art.report(facility));
    written.push_back(art.roc(facility));
    written.push_back(art.calibration(facility));
    written.push_back(art.warnings(facility));
}

}  // namespace

void validate_pipeline_config(const PipelineConfig& cfg) {
    if (cfg.data_dir.empty()) throw std::invalid_argument("pipeline config: empty data_dir");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
        throw std::invalid_argument("pipeline config: train_fraction must be in (0, 1)");
    if (!(cfg.model_b_specificity > 0.0 && cfg.model_b_specificity < 1.0))
        throw std::invalid_argument("pipeline config: model_b_specificity must be in (0, 1)");
    if (cfg.cv_folds != 0 && cfg.cv_folds < 2)
        throw std::invalid_argument("pipeline config: cv_folds must be 0 or >= 2");
}

PipelineConfig parse_pipeline_config(const std::string& text) {
    PipelineConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& m) {
        throw std::runtime_error("pipeline config line " + std::to_string(line_no) + ": " + m);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) fail("expected key = value");
        bool known = false;
        try {
            known = apply_pipeline_key(cfg, key, value) ||
                    synth::apply_synth_key(cfg.synth, key, value);
        } catch (const std::runtime_error& e) {
            fail(e.what());
        }
        if (!known) fail("unknown key '" + key + "'");
    }
    validate_pipeline_config(cfg);
    return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_pipeline_config(buf.str());
}

Artifacts::Artifacts(const PipelineConfig& cfg) : dir_(cfg.data_dir), model_override_(cfg.model_file) {
    raw_dir = dir_ + "/raw";
    summary_txt = dir_ + "/summary.txt";
    labels_csv = dir_ + "/labels.csv";
    instants_csv = dir_ + "/instants.csv";
    schema_csv = dir_ + "/schema.csv";
    matrix_csv = dir_ + "/matrix.csv";
    tables_dir = dir_ + "/tables";
    merge_spec = cfg.spec_file.empty() ? dir_ + "/merge_spec.txt" : cfg.spec_file;
    merge_sql = dir_ + "/merge.sql";
    merged_csv = dir_ + "/merged.csv";
}

std::string Artifacts::stem(const std::string& base, const std::string& facility,
                            const std::string& ext) const {
    return dir_ + "/" + base + (facility.empty() ? "" : "_" + facility) + ext;
}

std::string Artifacts::model(const std::string& facility) const {
    std::string base = model_override_.empty() ? dir_ + "/model.json" : model_override_;
    if (facility.empty()) return base;
    auto dot = base.rfind('.');
    if (dot == std::string::npos || base.find('/', dot) != std::string::npos)
        return base + "_" + facility;
    return base.substr(0, dot) + "_" + facility + base.substr(dot);
}

std::string Artifacts::report(const std::string& f) const { return stem("report", f, ".csv"); }
std::string Artifacts::roc(const std::string& f) const { return stem("roc", f, ".csv"); }
std::string Artifacts::calibration(const std::string& f) const {
    return stem("calibration", f, ".csv");
}
std::string Artifacts::warnings(const std::string& f) const { return stem("warnings", f, ".csv"); }
std::string Artifacts::importance(const std::string& f) const {
    return stem("importance", f, ".csv");
}
std::string Artifacts::shap_summary(const std::string& f) const {
    return stem("shap_summary", f, ".csv");
}

std::vector<std::string> run_synth(const PipelineConfig& cfg) {
    validate_pipeline_config(cfg);
    Artifacts art(cfg);
    fs::create_directories(art.raw_dir);
    Dataset ds = synth::generate(cfg.synth);
    save_dataset(ds, art.raw_dir, FileFormat::csv);
    std::ofstream out(art.summary_txt);
    out << synth::describe(ds).to_text();
    std::vector<std::string> written;
    for (const char* f : {"admissions.csv", "transfers.csv", "events.csv", "diagnoses.csv",
                          "meds.csv"})
        written.push_back(art.raw_dir + "/" + f);
    written.push_back(art.summary_txt);
    return written;
}

std::vector<std::string> run_cohort(const PipelineConfig& cfg) {
    validate_pipeline_config(cfg);
    Artifacts art(cfg);
    require_file(art.raw_dir + "/admissions.csv", "raw extract", "synth");
    Dataset ds = load_dataset_dir(art.raw_dir, FileFormat::csv);
    auto labels = cohort::label_admissions(ds);
    cohort::write_labels_csv(labels, art.labels_csv);
    std::vector<cohort::ScoringInstant> instants;
    for (std::size_t i = 0; i < ds.admissions.size(); ++i) {
        if (labels[i].excluded) continue;
        auto v = cohort::scoring_instants(ds.admissions[i], labels[i]);
        instants.insert(instants.end(), v.begin(), v.end());
    }
    cohort::write_instants_csv(instants, art.instants_csv);
    return {art.labels_csv, art.instants_csv};
}

std::vector<std::string> run_featgen(const PipelineConfig& cfg) {
    validate_pipeline_config(cfg);
    Artifacts art(cfg);
    require_file(art.raw_dir + "/admissions.csv", "raw extract", "synth");
    require_file(art.labels_csv, "cohort labels", "cohort");
    Dataset ds = load_dataset_dir(art.raw_dir, FileFormat::csv);
    auto labels = cohort::read_labels_csv(art.labels_csv);
    featgen::FeatureSchema schema = featgen::build_schema(ds);
    featgen::write_schema_csv(schema, art.schema_csv);
    featgen::write_matrix_csv(ds, labels, schema, art.matrix_csv);
    fs::create_directories(art.tables_dir);
    featgen::write_category_tables(ds, labels, schema, art.tables_dir);
    return {art.schema_csv, art.matrix_csv, art.tables_dir};
}

namespace {

// Tables a merge spec touches, in first-reference order; the base table
// leads.
std::vector<std::string> spec_tables(const featspec::SpecAst& ast) {
    std::vector<std::string> order{ast.base_table};
    std::set<std::string> seen{ast.base_table};
    for (const auto& item : ast.items) {
        if (const auto* block = std::get_if<featspec::TableBlock>(&item))
            if (seen.insert(block->table).second) order.push_back(block->table);
    }
    return order;
}

std::vector<std::string> table_keys(const std::string& name) {
    if (name == "adm" || name == "target_adm") return {"admission_id"};
    return {"admission_id", "ts"};
}

}  // namespace

std::vector<std::string> run_sqlgen(const PipelineConfig& cfg) {
    validate_pipeline_config(cfg);
    Artifacts art(cfg);
    require_file(art.schema_csv, "feature schema", "featgen");
    featgen::FeatureSchema schema = featgen::read_schema_csv(art.schema_csv);
    std::string spec_text = featgen::default_merge_spec(schema);
    {
        std::ofstream out(art.merge_spec);
        if (!out) throw std::runtime_error("cannot open file for writing: " + art.merge_spec);
        out << spec_text;
    }
    featspec::SpecAst ast = featspec::parse_spec(spec_text);
    featspec::Catalog catalog;
    for (const auto& name : spec_tables(ast)) {
        std::string path = art.tables_dir + "/" + name + ".csv";
        require_file(path, "relational table", "featgen");
        CsvReader header(path);
        catalog[name] = header.columns();
    }
    std::string sql = featspec::generate_sql(ast, catalog);
    {
        std::ofstream out(art.merge_sql);
        if (!out) throw std::runtime_error("cannot open file for writing: " + art.merge_sql);
        out << sql;
    }
    return {art.merge_spec, art.merge_sql};
}

std::vector<std::string> run_merge(const PipelineConfig& cfg) {
    validate_pipeline_config(cfg);
    Artifacts art(cfg);
    require_file(art.merge_spec, "merge spec", "sqlgen");
    featspec::SpecAst ast = featspec::parse_spec(slurp(art.merge_spec));
    std::vector<featspec::RelTable> tables;
    for (const auto& name : spec_tables(ast)) {
        std::string path = art.tables_dir + "/" + name + ".csv";
        require_file(path, "relational table", "featgen");
        tables.push_back(featspec::read_rel_table_csv(path, name, table_keys(name)));
        tables.back().validate_keys();
    }
    featspec::RelTable merged = featspec::execute_query(ast, tables);
    featspec::write_rel_table_csv(merged, art.merged_csv);
    return {art.merged_csv};
}

std::vector<std::string> run_train(const PipelineConfig& cfg) {
    validate_pipeline_config(cfg);
    Artifacts art(cfg);
    require_file(art.matrix_csv, "feature matrix", "featgen");
    require_file(art.schema_csv, "feature schema", "featgen");
    require_file(art.labels_csv, "cohort labels", "cohort");
    featgen::FeatureSchema schema = featgen::read_schema_csv(art.schema_csv);
    auto labels = cohort::read_labels_csv(art.labels_csv);
    MatrixIndex mi = scan_matrix(art.matrix_csv, schema, cfg.combined);
    std::vector<std::string> written;
    for (const auto& facility : mi.facilities) {
        IdSplit split = split_ids(labels, mi, facility, cfg.train_fraction, cfg.split_seed);
        gbdt::TrainSet tr;
        tr.feature_names = schema.feature_names();
        tr.n_features = tr.feature_names.size();
        featgen::read_matrix_csv(art.matrix_csv, schema, [&](featgen::MatrixCsvRow& r) {
            if (mi.facility_of.at(r.admission_id) != facility) return;
            if (!split.train.count(r.admission_id)) return;
            tr.push_row(r.admission_id, r.label, r.features);
        });
        int rounds = cfg.train.max_rounds;
        if (cfg.cv_folds >= 2)
            rounds = gbdt::cross_validate_rounds(tr, cfg.train, cfg.cv_folds).best_rounds;
        gbdt::GbdtModel model = gbdt::train(tr, cfg.train, rounds);
        model.wards = schema.wards;
        set_alert_threshold(model, tr, cfg.model_b_specificity);
        gbdt::save_model(model, art.model(facility));
        written.push_back(art.model(facility));
    }
    return written;
}

std::vector<std::string> run_eval(const PipelineConfig& cfg) {
    validate_pipeline_config(cfg);
    Artifacts art(cfg);
    require_file(art.matrix_csv, "feature matrix", "featgen");
    require_file(art.schema_csv, "feature schema", "featgen");
    require_file(art.labels_csv, "cohort labels", "cohort");
    require_file(art.raw_dir + "/admissions.csv", "raw extract", "synth");
    featgen::FeatureSchema schema = featgen::read_schema_csv(art.schema_csv);
    auto labels = cohort::read_labels_csv(art.labels_csv);
    MatrixIndex mi = scan_matrix(art.matrix_csv, schema, cfg.combined);
    for (const auto& facility : mi.facilities)
        require_file(art.model(facility), "trained model", "train");
    Dataset ds = load_dataset_dir(art.raw_dir, FileFormat::csv);
    auto rules = icuww::default_rules();
    std::vector<std::string> written;
    for (const auto& facility : mi.facilities) {
        gbdt::GbdtModel model = gbdt::load_model(art.model(facility));
        IdSplit split = split_ids(labels, mi, facility, cfg.train_fraction, cfg.split_seed);
        std::vector<std::pair<std::string, ScoreAcc>> accs;
        std::unordered_map<std::string, std::size_t> slot;
        featgen::read_matrix_csv(art.matrix_csv, schema, [&](featgen::MatrixCsvRow& r) {
            if (mi.facility_of.at(r.admission_id) != facility) return;
            if (!split.test.count(r.admission_id)) return;
            double p = model.predict(r.features);
            auto [it, fresh] = slot.emplace(r.admission_id, accs.size());
            if (fresh) accs.emplace_back(r.admission_id, ScoreAcc{});
            ScoreAcc& acc = accs[it->second].second;
            acc.series.emplace_back(r.ts, p);
            acc.instants.push_back({r.admission_id, r.ts});
            acc.label = r.label;
            acc.admit = r.admit_ts;
            acc.target = r.target_ts;
        });
        EvalBundle bundle = finish_scores(
            accs, [&](const std::string& id) { return ds.find(id); }, rules);
        write_eval_artifacts(cfg, art, facility, bundle, written);
    }
    return written;
}

std::vector<std::string> run_explain(const PipelineConfig& cfg) {
    validate_pipeline_config(cfg);
    Artifacts art(cfg);
    require_file(art.matrix_csv, "feature matrix", "featgen");
    require_file(art.schema_csv, "feature schema", "featgen");
    require_file(art.labels_csv, "cohort labels", "cohort");
    featgen::FeatureSchema schema = featgen::read_schema_csv(art.schema_csv);
    auto labels = cohort::read_labels_csv(art.labels_csv);
    MatrixIndex mi = scan_matrix(art.matrix_csv, schema, cfg.combined);
    std::vector<std::string> written;
    const std::size_t kShapRows = 2000;
    for (const auto& facility : mi.facilities) {
        require_file(art.model(facility), "trained model", "train");
        gbdt::GbdtModel model = gbdt::load_model(art.model(facility));
        IdSplit split = split_ids(labels, mi, facility, cfg.train_fraction, cfg.split_seed);
        auto is_test = [&](const featgen::MatrixCsvRow& r) {
            return mi.facility_of.at(r.admission_id) == facility &&
                   split.test.count(r.admission_id) > 0;
        };
        std::size_t n_test = 0;
        featgen::read_matrix_csv(art.matrix_csv, schema, [&](featgen::MatrixCsvRow& r) {
            if (is_test(r)) ++n_test;
        });
        const std::size_t nf = schema.n_features();
        std::vector<double> sum_abs(nf, 0.0);
        std::size_t used = 0;
        if (n_test) {
            std::size_t want = std::min(kShapRows, n_test);
            std::size_t stride = std::max<std::size_t>(1, n_test / want);
            std::size_t seen = 0;
            featgen::read_matrix_csv(art.matrix_csv, schema, [&](featgen::MatrixCsvRow& r) {
                if (!is_test(r)) return;
                if (seen++ % stride != 0 || used >= want) return;
                gbdt::ShapResult sr = gbdt::shap_values(model, r.features);
                for (std::size_t j = 0; j < nf; ++j) sum_abs[j] += std::fabs(sr.phi[j]);
                ++used;
            });
        }
        auto names = schema.feature_names();
        auto imp = gbdt::importance_gain(model);
        std::vector<std::size_t> by_gain(nf);
        for (std::size_t i = 0; i < nf; ++i) by_gain[i] = i;
        std::stable_sort(by_gain.begin(), by_gain.end(), [&](std::size_t a, std::size_t b) {
            return imp[a].total_gain > imp[b].total_gain;
        });
        {
            CsvWriter out(art.importance(facility),
                          {"rank", "feature", "total_gain", "split_count",
                           "cover_weighted_mean_gain"});
            for (std::size_t r = 0; r < by_gain.size(); ++r) {
                std::size_t i = by_gain[r];
                out.write_row({std::to_string(r + 1), names[i], format_double(imp[i].total_gain),
                               std::to_string(imp[i].split_count),
                               format_double(imp[i].cover_weighted_mean_gain)});
            }
        }
        std::vector<std::size_t> by_phi(nf);
        for (std::size_t i = 0; i < nf; ++i) by_phi[i] = i;
        std::stable_sort(by_phi.begin(), by_phi.end(), [&](std::size_t a, std::size_t b) {
            return sum_abs[a] > sum_abs[b];
        });
        {
            CsvWriter out(art.shap_summary(facility),
                          {"rank", "feature", "sum_abs_phi", "mean_abs_phi", "rows"});
            for (std::size_t r = 0; r < by_phi.size(); ++r) {
                std::size_t i = by_phi[r];
                double mean = used ? sum_abs[i] / static_cast<double>(used) : 0.0;
                out.write_row({std::to_string(r + 1), names[i], format_double(sum_abs[i]),
                               format_double(mean), std::to_string(used)});
            }
        }
        written.push_back(art.importance(facility));
        written.push_back(art.shap_summary(facility));
    }
    return written;
}

std::vector<std::string> run_all(const PipelineConfig& cfg) {
    std::vector<std::string> written;
    for (auto* stage : {&run_synth, &run_cohort, &run_featgen, &run_sqlgen, &run_merge, &run_train,
                        &run_eval, &run_explain}) {
        auto v = (*stage)(cfg);
        written.insert(written.end(), v.begin(), v.end());
    }
    return written;
}

HeadlineResult run_headline(const PipelineConfig& cfg, const TestRowHook& test_row_hook) {
    validate_pipeline_config(cfg);
    Dataset ds = synth::generate(cfg.synth);
    auto labels = cohort::label_admissions(ds);

    HeadlineResult out;
    out.schema = featgen::build_schema(ds);

    cohort::Split sp = cohort::split_train_test(labels, cfg.train_fraction, cfg.split_seed);
    std::unordered_set<std::string> train_ids(sp.train_ids.begin(), sp.train_ids.end());
    std::unordered_set<std::string> test_ids(sp.test_ids.begin(), sp.test_ids.end());

    gbdt::TrainSet tr;
    tr.feature_names = out.schema.feature_names();
    tr.n_features = tr.feature_names.size();
    featgen::for_each_row(ds, labels, out.schema, [&](const featgen::RowView& row) {
        if (!train_ids.count(row.adm->admission_id)) return;
        tr.push_row(row.adm->admission_id, row.label->is_case ? 1 : 0, *row.features);
    });
    out.n_train_rows = tr.n_rows();
    for (std::size_t i = 0; i < tr.admission_ids.size(); ++i)
        if (i == 0 || tr.admission_ids[i] != tr.admission_ids[i - 1]) ++out.n_train_admissions;

    int rounds = cfg.train.max_rounds;
    if (cfg.cv_folds >= 2)
        rounds = gbdt::cross_validate_rounds(tr, cfg.train, cfg.cv_folds).best_rounds;
    out.model = gbdt::train(tr, cfg.train, rounds);
    out.model.wards = out.schema.wards;
    set_alert_threshold(out.model, tr, cfg.model_b_specificity);
    tr = gbdt::TrainSet();  // the test pass streams rows; the train matrix is done

    std::vector<std::pair<std::string, ScoreAcc>> accs;
    std::unordered_map<std::string, std::size_t> slot;
    std::unordered_map<std::string, const Admission*> adm_of;
    featgen::for_each_row(ds, labels, out.schema, [&](const featgen::RowView& row) {
        const std::string& id = row.adm->admission_id;
        if (!test_ids.count(id)) return;
        double raw = out.model.raw_score(*row.features);
        double p = gbdt::sigmoid(raw);
        if (test_row_hook) test_row_hook(row, raw, p);
        auto [it, fresh] = slot.emplace(id, accs.size());
        if (fresh) {
            accs.emplace_back(id, ScoreAcc{});
            adm_of.emplace(id, row.adm);
        }
        ScoreAcc& acc = accs[it->second].second;
        acc.series.emplace_back(row.ts, p);
        acc.instants.push_back({id, row.ts});
        acc.label = row.label->is_case ? 1 : 0;
        acc.admit = row.adm->admit_ts;
        acc.target = row.label->target_ts;
        ++out.n_test_rows;
    });
    out.n_test_admissions = accs.size();

    EvalBundle bundle = finish_scores(
        accs, [&](const std::string& id) { return adm_of.at(id); }, icuww::default_rules());
    out.model_scores = std::move(bundle.model_scores);
    out.icuww_scores = std::move(bundle.icuww_scores);
    out.report = evalkit::compare_report(out.model_scores, out.icuww_scores, bundle.interval,
                                         cfg.model_b_specificity);
    out.calibration = evalkit::calibration_quintiles(out.model_scores);
    return out;
}

}  // namespace pipeline
}  // namespace ww
