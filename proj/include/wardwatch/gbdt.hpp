#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wardwatch/util/timeutil.hpp"

namespace ww::gbdt {

struct Hyperparams {
    double neg_sample_rate = 0.25;  // fraction of control admissions kept
    double learning_rate = 0.1;
    int max_depth = 4;
    double colsample_per_tree = 1.0;  // fraction of features drawn per tree
    int min_node_cases = 10;          // minimum rows per child
    double l2_reg = 1.0;              // lambda
    double gain_floor = 0.0;          // gamma, subtracted from every gain
    int max_rounds = 100;
    std::uint64_t seed = 1;
};

struct GradPair {
    double g = 0.0;
    double h = 0.0;
};

double sigmoid(double raw);
// Per-example logistic loss -[y log p + (1-y) log(1-p)], stable at large |raw|.
double logistic_loss(double raw, int label);
GradPair logistic_grad_hess(double raw, int label);

// Flat node storage; feature < 0 marks a leaf. cover is the training row
// count that reached the node; gain is the realized split gain.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    bool default_left = true;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double weight = 0.0;
    double cover = 0.0;
    double gain = 0.0;
    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;

    // Index of the leaf the row routes to; missing follows default_left.
    std::size_t leaf_for(const std::vector<double>& row) const;
    double value(const std::vector<double>& row) const { return nodes[leaf_for(row)].weight; }
};

struct GbdtModel {
    double base_score = 0.0;
    double learning_rate = 0.1;
    std::vector<Tree> trees;
    std::vector<std::string> feature_names;
    std::vector<std::string> wards;  // ward dictionary the features were encoded with
    Hyperparams params;
    int rounds = 0;
    std::vector<double> train_loss;           // sampled-set loss after each round
    std::optional<double> alert_threshold;    // operating point shipped with the model

    double raw_score(const std::vector<double>& row) const;
    double predict(const std::vector<double>& row) const;  // probability
};

// Training rows, row-major; NaN cells are missing. admission_ids drive
// negative sampling and CV fold assignment.
struct TrainSet {
    std::vector<std::string> feature_names;
    std::vector<std::string> admission_ids;
    std::vector<int> labels;
    std::vector<float> values;
    std::size_t n_features = 0;

    std::size_t n_rows() const { return n_features ? values.size() / n_features : 0; }
    void push_row(const std::string& admission_id, int label, const std::vector<double>& feats);
};

struct NodeStats {
    double g = 0.0;
    double h = 0.0;
    std::int64_t count = 0;
};

struct SplitDecision {
    int feature = -1;
    double threshold = 0.0;
    bool default_left = true;
    double gain = 0.0;  // gain_floor already subtracted
    NodeStats left, right;
};

// Exact greedy split search over one node given column-major features.
// Maximizes 1/2 [GL^2/(HL+l2) + GR^2/(HR+l2) - (GL+GR)^2/(HL+HR+l2)] - floor
// over midpoints of adjacent distinct values, trying missing rows on both
// sides; ties go to the lower feature index, then the lower threshold.
// Returns nothing when no candidate has positive gain and legal children.
std::optional<SplitDecision> find_best_split(const std::vector<std::vector<double>>& columns,
                                             const std::vector<GradPair>& grads,
                                             const std::vector<int>& candidate_features,
                                             double l2_reg, double gain_floor,
                                             int min_node_cases);

// Boosted training. Keeps every case admission and a seeded neg_sample_rate
// fraction of control admissions, then fits `rounds` depth-limited trees on
// the sampled rows. base_score is the log-odds of the sampled prevalence.
GbdtModel train(const TrainSet& data, const Hyperparams& params, int rounds);

struct CvResult {
    int best_rounds = 0;
    std::vector<double> admission_auc;  // mean held-out, index r = r+1 rounds
    std::vector<double> row_auc;
};

// k-fold CV with folds partitioning admissions, stratified by label. Picks
// the round count maximizing mean held-out admission-level AUC (first argmax
// on ties) and returns both curves.
CvResult cross_validate_rounds(const TrainSet& data, const Hyperparams& params, int k = 5);

// Scores per instant, sorted by timestamp.
std::vector<std::pair<Timestamp, double>> predict_series(
    const GbdtModel& model, std::vector<std::pair<Timestamp, std::vector<double>>> rows);

struct ImportanceEntry {
    double total_gain = 0.0;
    std::int64_t split_count = 0;
    double cover_weighted_mean_gain = 0.0;  // sum(gain*cover)/sum(cover)
};
// One entry per feature, aligned with model.feature_names.
std::vector<ImportanceEntry> importance_gain(const GbdtModel& model);

// Shapley attribution by exact enumeration over each tree's used features,
// with v(S) the cover-weighted descent expectation (features outside S are
// averaged by child cover). base_value + sum(phi) equals the raw score.
struct ShapResult {
    std::vector<double> phi;
    double base_value = 0.0;
};
ShapResult shap_values(const GbdtModel& model, const std::vector<double>& row);

std::string to_json(const GbdtModel& model);
GbdtModel model_from_json(const std::string& text);
void save_model(const GbdtModel& model, const std::string& path);
GbdtModel load_model(const std::string& path);

}  // namespace ww::gbdt
