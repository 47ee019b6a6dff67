#include "wardwatch/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "wardwatch/evalkit.hpp"
#include "wardwatch/util/rng.hpp"

namespace ww::gbdt {

double sigmoid(double raw) { return 1.0 / (1.0 + std::exp(-raw)); }

double logistic_loss(double raw, int label) {
    // softplus(label ? -raw : raw), stable for large |raw|
    double z = label ? -raw : raw;
    return (z > 0 ? z : 0.0) + std::log1p(std::exp(-std::abs(z)));
}

GradPair logistic_grad_hess(double raw, int label) {
    double p = sigmoid(raw);
    return {p - static_cast<double>(label), p * (1.0 - p)};
}

std::size_t Tree::leaf_for(const std::vector<double>& row) const {
    std::size_t at = 0;
    while (!nodes[at].is_leaf()) {
        const TreeNode& n = nodes[at];
        double v = row[static_cast<std::size_t>(n.feature)];
        bool go_left = std::isnan(v) ? n.default_left : v < n.threshold;
        at = static_cast<std::size_t>(go_left ? n.left : n.right);
    }
    return at;
}

double GbdtModel::raw_score(const std::vector<double>& row) const {
    if (row.size() != feature_names.size())
        throw std::invalid_argument("predict: row has " + std::to_string(row.size()) +
                                    " features, model expects " +
                                    std::to_string(feature_names.size()));
    double raw = base_score;
    for (const Tree& t : trees) raw += learning_rate * t.value(row);
    return raw;
}

double GbdtModel::predict(const std::vector<double>& row) const { return sigmoid(raw_score(row)); }

void TrainSet::push_row(const std::string& admission_id, int label,
                        const std::vector<double>& feats) {
    if (n_features == 0) n_features = feature_names.size();
    if (feats.size() != n_features)
        throw std::invalid_argument("push_row: expected " + std::to_string(n_features) +
                                    " features, got " + std::to_string(feats.size()));
    admission_ids.push_back(admission_id);
    labels.push_back(label);
    for (double v : feats) values.push_back(static_cast<float>(v));
}

namespace {

// One feature's sampled cells, pre-sorted once and reused every round.
struct SortedFeature {
    std::vector<float> values;  // ascending, non-missing rows only
    std::vector<std::int32_t> rows;
    std::vector<std::int32_t> missing;
};

struct RunStat {
    double g = 0.0, h = 0.0;
    std::int64_t cnt = 0;
    float last = 0.0f;
    bool any = false;
};

struct BestSplit {
    bool found = false;
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
    bool default_left = true;
    NodeStats left, right;
};

inline double part_score(double g, double h, double l2) { return g * g / (h + l2); }

// Streams one pre-sorted feature over every node of the current layer,
// updating each node's best candidate. Features must be visited in ascending
// index order so the strict > keeps the lowest (feature, threshold) on ties.
void scan_feature(int feature, const SortedFeature& sf, const std::vector<std::int32_t>& position,
                  const std::vector<std::int32_t>& layer_of, const std::vector<GradPair>& gh,
                  const std::vector<NodeStats>& total, std::vector<BestSplit>& best, double l2,
                  double gain_floor, std::int64_t min_cases, std::vector<NodeStats>& miss_buf,
                  std::vector<RunStat>& run_buf) {
    std::size_t layer_n = total.size();
    miss_buf.assign(layer_n, NodeStats{});
    run_buf.assign(layer_n, RunStat{});
    for (std::int32_t r : sf.missing) {
        int li = layer_of[static_cast<std::size_t>(position[static_cast<std::size_t>(r)])];
        if (li < 0) continue;
        miss_buf[static_cast<std::size_t>(li)].g += gh[static_cast<std::size_t>(r)].g;
        miss_buf[static_cast<std::size_t>(li)].h += gh[static_cast<std::size_t>(r)].h;
        ++miss_buf[static_cast<std::size_t>(li)].count;
    }
    auto consider = [&](std::size_t li, double threshold, const RunStat& run) {
        const NodeStats& tot = total[li];
        const NodeStats& ms = miss_buf[li];
        double nm_g = tot.g - ms.g, nm_h = tot.h - ms.h;
        std::int64_t nm_c = tot.count - ms.count;
        double parent = part_score(tot.g, tot.h, l2);
        BestSplit& b = best[li];
        for (int side = 0; side < 2; ++side) {
            bool miss_left = side == 0;
            double gl = run.g + (miss_left ? ms.g : 0.0);
            double hl = run.h + (miss_left ? ms.h : 0.0);
            std::int64_t cl = run.cnt + (miss_left ? ms.count : 0);
            double gr = nm_g - run.g + (miss_left ? 0.0 : ms.g);
            double hr = nm_h - run.h + (miss_left ? 0.0 : ms.h);
            std::int64_t cr = nm_c - run.cnt + (miss_left ? 0 : ms.count);
            if (cl < min_cases || cr < min_cases) continue;
            double gain =
                0.5 * (part_score(gl, hl, l2) + part_score(gr, hr, l2) - parent) - gain_floor;
            if (gain <= 0.0) continue;
            if (!b.found || gain > b.gain) {
                b.found = true;
                b.gain = gain;
                b.feature = feature;
                b.threshold = threshold;
                b.default_left = miss_left;
                b.left = {gl, hl, cl};
                b.right = {gr, hr, cr};
            }
        }
    };
    std::size_t n = sf.values.size();
    for (std::size_t i = 0; i < n; ++i) {
        std::int32_t r = sf.rows[i];
        int li = layer_of[static_cast<std::size_t>(position[static_cast<std::size_t>(r)])];
        if (li < 0) continue;
        RunStat& run = run_buf[static_cast<std::size_t>(li)];
        float v = sf.values[i];
        if (run.any && v > run.last)
            consider(static_cast<std::size_t>(li),
                     (static_cast<double>(run.last) + static_cast<double>(v)) * 0.5, run);
        run.g += gh[static_cast<std::size_t>(r)].g;
        run.h += gh[static_cast<std::size_t>(r)].h;
        ++run.cnt;
        run.last = v;
        run.any = true;
    }
}

SortedFeature sort_feature(const float* cells, const std::vector<std::int32_t>& rows,
                           std::size_t stride) {
    SortedFeature sf;
    std::vector<std::pair<float, std::int32_t>> buf;
    buf.reserve(rows.size());
    for (std::int32_t r : rows) {
        float v = cells[static_cast<std::size_t>(r) * stride];
        if (std::isnan(v))
            sf.missing.push_back(r);
        else
            buf.emplace_back(v, r);
    }
    std::sort(buf.begin(), buf.end());
    sf.values.reserve(buf.size());
    sf.rows.reserve(buf.size());
    for (auto [v, r] : buf) {
        sf.values.push_back(v);
        sf.rows.push_back(r);
    }
    return sf;
}

void check_params(const Hyperparams& p) {
    if (!(p.neg_sample_rate > 0.0 && p.neg_sample_rate <= 1.0))
        throw std::invalid_argument("hyperparams: neg_sample_rate outside (0,1]");
    if (!(p.colsample_per_tree > 0.0 && p.colsample_per_tree <= 1.0))
        throw std::invalid_argument("hyperparams: colsample_per_tree outside (0,1]");
    if (p.learning_rate <= 0.0) throw std::invalid_argument("hyperparams: learning_rate <= 0");
    if (p.max_depth < 1) throw std::invalid_argument("hyperparams: max_depth < 1");
    if (p.min_node_cases < 1) throw std::invalid_argument("hyperparams: min_node_cases < 1");
    if (p.l2_reg < 0.0) throw std::invalid_argument("hyperparams: l2_reg < 0");
    if (p.gain_floor < 0.0) throw std::invalid_argument("hyperparams: gain_floor < 0");
}

}  // namespace

std::optional<SplitDecision> find_best_split(const std::vector<std::vector<double>>& columns,
                                             const std::vector<GradPair>& grads,
                                             const std::vector<int>& candidate_features,
                                             double l2_reg, double gain_floor,
                                             int min_node_cases) {
    std::size_t n = grads.size();
    for (const auto& c : columns)
        if (c.size() != n) throw std::invalid_argument("find_best_split: ragged columns");
    std::vector<int> feats = candidate_features;
    std::sort(feats.begin(), feats.end());
    feats.erase(std::unique(feats.begin(), feats.end()), feats.end());

    std::vector<std::int32_t> all_rows(n);
    std::vector<std::int32_t> position(n, 0);
    for (std::size_t i = 0; i < n; ++i) all_rows[i] = static_cast<std::int32_t>(i);
    std::vector<std::int32_t> layer_of = {0};
    std::vector<NodeStats> total(1);
    for (const GradPair& gp : grads) {
        total[0].g += gp.g;
        total[0].h += gp.h;
        ++total[0].count;
    }
    std::vector<BestSplit> best(1);
    std::vector<NodeStats> miss_buf;
    std::vector<RunStat> run_buf;
    std::vector<float> col(n);
    for (int f : feats) {
        if (f < 0 || static_cast<std::size_t>(f) >= columns.size())
            throw std::invalid_argument("find_best_split: feature index out of range");
        for (std::size_t i = 0; i < n; ++i) col[i] = static_cast<float>(columns[f][i]);
        SortedFeature sf = sort_feature(col.data(), all_rows, 1);
        scan_feature(f, sf, position, layer_of, grads, total, best, l2_reg, gain_floor,
                     min_node_cases, miss_buf, run_buf);
    }
    if (!best[0].found) return std::nullopt;
    SplitDecision d;
    d.feature = best[0].feature;
    d.threshold = best[0].threshold;
    d.default_left = best[0].default_left;
    d.gain = best[0].gain;
    d.left = best[0].left;
    d.right = best[0].right;
    return d;
}

GbdtModel train(const TrainSet& data, const Hyperparams& params, int rounds) {
    check_params(params);
    if (rounds <= 0) throw std::invalid_argument("train: rounds must be positive");
    std::size_t p = data.n_features, n = data.n_rows();
    if (p == 0 || n == 0) throw std::invalid_argument("train: empty matrix");
    if (data.labels.size() != n || data.admission_ids.size() != n)
        throw std::invalid_argument("train: misaligned labels or admission ids");

    // Admission-level negative sampling: all cases, a seeded fraction of
    // controls. Admissions are sorted first so the draw is order-independent.
    std::map<std::string, int> adm_label;
    for (std::size_t i = 0; i < n; ++i) {
        auto [it, fresh] = adm_label.try_emplace(data.admission_ids[i], data.labels[i]);
        if (!fresh) it->second = std::max(it->second, data.labels[i]);
    }
    std::vector<std::string> controls;
    std::set<std::string> kept;
    for (const auto& [adm, lab] : adm_label)
        if (lab)
            kept.insert(adm);
        else
            controls.push_back(adm);
    if (kept.empty() || controls.empty())
        throw std::invalid_argument("train: both classes required");

    Rng rng(params.seed);
    std::size_t n_keep = static_cast<std::size_t>(
        std::ceil(params.neg_sample_rate * static_cast<double>(controls.size())));
    n_keep = std::min(n_keep, controls.size());
    for (std::size_t i = 0; i < n_keep; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(controls.size() - i));
        std::swap(controls[i], controls[j]);
        kept.insert(controls[i]);
    }

    std::vector<std::int32_t> sampled;
    sampled.reserve(n);
    std::int64_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!kept.count(data.admission_ids[i])) continue;
        sampled.push_back(static_cast<std::int32_t>(i));
        (data.labels[i] ? pos : neg) += 1;
    }
    if (pos == 0 || neg == 0) throw std::invalid_argument("train: single class after sampling");
    std::size_t m = sampled.size();

    GbdtModel model;
    model.params = params;
    model.learning_rate = params.learning_rate;
    model.feature_names = data.feature_names;
    model.rounds = rounds;
    model.base_score = std::log(static_cast<double>(pos) / static_cast<double>(neg));

    // Remap sampled rows to [0, m) and pre-sort every feature once.
    std::vector<std::int8_t> label(m);
    for (std::size_t i = 0; i < m; ++i)
        label[i] = static_cast<std::int8_t>(data.labels[static_cast<std::size_t>(sampled[i])]);
    std::vector<std::int32_t> local(m);
    for (std::size_t i = 0; i < m; ++i) local[i] = static_cast<std::int32_t>(i);
    std::vector<SortedFeature> sorted(p);
    {
        std::vector<float> col(m);
        for (std::size_t f = 0; f < p; ++f) {
            for (std::size_t i = 0; i < m; ++i)
                col[i] = data.values[static_cast<std::size_t>(sampled[i]) * p + f];
            sorted[f] = sort_feature(col.data(), local, 1);
        }
    }

    std::size_t k_feats = static_cast<std::size_t>(
        std::ceil(params.colsample_per_tree * static_cast<double>(p)));
    k_feats = std::clamp<std::size_t>(k_feats, 1, p);
    std::vector<int> all_feats(p);
    for (std::size_t f = 0; f < p; ++f) all_feats[static_cast<std::size_t>(f)] = static_cast<int>(f);

    std::vector<double> raw(m, model.base_score);
    std::vector<GradPair> gh(m);
    std::vector<std::int32_t> position(m);
    std::vector<NodeStats> miss_buf;
    std::vector<RunStat> run_buf;

    for (int round = 0; round < rounds; ++round) {
        for (std::size_t i = 0; i < m; ++i) gh[i] = logistic_grad_hess(raw[i], label[i]);

        std::vector<int> feats = all_feats;
        if (k_feats < p) {
            for (std::size_t i = 0; i < k_feats; ++i) {
                std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(p - i));
                std::swap(feats[i], feats[j]);
            }
            feats.resize(k_feats);
            std::sort(feats.begin(), feats.end());
        }

        Tree tree;
        tree.nodes.emplace_back();
        tree.nodes[0].cover = static_cast<double>(m);
        std::fill(position.begin(), position.end(), 0);
        std::vector<std::int32_t> layer = {0};
        std::vector<NodeStats> layer_stats(1);
        for (std::size_t i = 0; i < m; ++i) {
            layer_stats[0].g += gh[i].g;
            layer_stats[0].h += gh[i].h;
        }
        layer_stats[0].count = static_cast<std::int64_t>(m);
        std::vector<std::int32_t> layer_of(1, 0);

        for (int depth = 0; !layer.empty(); ++depth) {
            if (depth == params.max_depth) {
                for (std::size_t li = 0; li < layer.size(); ++li) {
                    TreeNode& nd = tree.nodes[static_cast<std::size_t>(layer[li])];
                    nd.weight = -layer_stats[li].g / (layer_stats[li].h + params.l2_reg);
                }
                break;
            }
            std::vector<BestSplit> best(layer.size());
            bool any_candidate = false;
            for (const NodeStats& st : layer_stats)
                any_candidate |= st.count >= 2 * static_cast<std::int64_t>(params.min_node_cases);
            if (any_candidate)
                for (int f : feats)
                    scan_feature(f, sorted[static_cast<std::size_t>(f)], position, layer_of, gh,
                                 layer_stats, best, params.l2_reg, params.gain_floor,
                                 params.min_node_cases, miss_buf, run_buf);

            std::vector<std::int32_t> next_layer;
            std::vector<NodeStats> next_stats;
            std::vector<int> split_feats;
            for (std::size_t li = 0; li < layer.size(); ++li) {
                TreeNode& nd = tree.nodes[static_cast<std::size_t>(layer[li])];
                if (!best[li].found) {
                    nd.weight = -layer_stats[li].g / (layer_stats[li].h + params.l2_reg);
                    continue;
                }
                std::int32_t lc = static_cast<std::int32_t>(tree.nodes.size());
                tree.nodes.emplace_back();
                std::int32_t rc = static_cast<std::int32_t>(tree.nodes.size());
                tree.nodes.emplace_back();
                TreeNode& nd2 = tree.nodes[static_cast<std::size_t>(layer[li])];
                nd2.feature = best[li].feature;
                nd2.threshold = best[li].threshold;
                nd2.default_left = best[li].default_left;
                nd2.left = lc;
                nd2.right = rc;
                nd2.gain = best[li].gain;
                tree.nodes[static_cast<std::size_t>(lc)].cover =
                    static_cast<double>(best[li].left.count);
                tree.nodes[static_cast<std::size_t>(rc)].cover =
                    static_cast<double>(best[li].right.count);
                next_layer.push_back(lc);
                next_stats.push_back(best[li].left);
                next_layer.push_back(rc);
                next_stats.push_back(best[li].right);
                split_feats.push_back(best[li].feature);
            }
            std::sort(split_feats.begin(), split_feats.end());
            split_feats.erase(std::unique(split_feats.begin(), split_feats.end()),
                              split_feats.end());
            // Children created above are not in this layer; pad the lookup so
            // rows already moved to them are skipped by later feature passes.
            layer_of.resize(tree.nodes.size(), -1);
            for (int f : split_feats) {
                const SortedFeature& sf = sorted[static_cast<std::size_t>(f)];
                for (std::size_t i = 0; i < sf.rows.size(); ++i) {
                    std::int32_t r = sf.rows[i];
                    std::int32_t at = position[static_cast<std::size_t>(r)];
                    int li = layer_of[static_cast<std::size_t>(at)];
                    if (li < 0 || !best[static_cast<std::size_t>(li)].found) continue;
                    const TreeNode& nd = tree.nodes[static_cast<std::size_t>(at)];
                    if (nd.feature != f) continue;
                    position[static_cast<std::size_t>(r)] = static_cast<double>(sf.values[i]) <
                                                                    nd.threshold
                                                                ? nd.left
                                                                : nd.right;
                }
                for (std::int32_t r : sf.missing) {
                    std::int32_t at = position[static_cast<std::size_t>(r)];
                    int li = layer_of[static_cast<std::size_t>(at)];
                    if (li < 0 || !best[static_cast<std::size_t>(li)].found) continue;
                    const TreeNode& nd = tree.nodes[static_cast<std::size_t>(at)];
                    if (nd.feature != f) continue;
                    position[static_cast<std::size_t>(r)] = nd.default_left ? nd.left : nd.right;
                }
            }
            layer = std::move(next_layer);
            layer_stats = std::move(next_stats);
            layer_of.assign(tree.nodes.size(), -1);
            for (std::size_t li = 0; li < layer.size(); ++li)
                layer_of[static_cast<std::size_t>(layer[li])] = static_cast<std::int32_t>(li);
        }

        for (std::size_t i = 0; i < m; ++i)
            raw[i] += params.learning_rate *
                      tree.nodes[static_cast<std::size_t>(position[i])].weight;
        double loss = 0.0;
        for (std::size_t i = 0; i < m; ++i) loss += logistic_loss(raw[i], label[i]);
        model.train_loss.push_back(loss / static_cast<double>(m));
        model.trees.push_back(std::move(tree));
    }
    return model;
}

namespace {

// Leaf routing over the float training matrix; mirrors Tree::leaf_for.
double tree_value_f(const Tree& tree, const float* row) {
    std::size_t at = 0;
    while (!tree.nodes[at].is_leaf()) {
        const TreeNode& nd = tree.nodes[at];
        float v = row[static_cast<std::size_t>(nd.feature)];
        bool go_left = std::isnan(v) ? nd.default_left : static_cast<double>(v) < nd.threshold;
        at = static_cast<std::size_t>(go_left ? nd.left : nd.right);
    }
    return tree.nodes[at].weight;
}

}  // namespace

CvResult cross_validate_rounds(const TrainSet& data, const Hyperparams& params, int k) {
    check_params(params);
    if (k < 2) throw std::invalid_argument("cross_validate_rounds: k must be >= 2");
    if (params.max_rounds <= 0)
        throw std::invalid_argument("cross_validate_rounds: max_rounds must be positive");
    std::size_t p = data.n_features, n = data.n_rows();
    if (p == 0 || n == 0) throw std::invalid_argument("cross_validate_rounds: empty matrix");

    std::map<std::string, int> adm_label;
    for (std::size_t i = 0; i < n; ++i) {
        auto [it, fresh] = adm_label.try_emplace(data.admission_ids[i], data.labels[i]);
        if (!fresh) it->second = std::max(it->second, data.labels[i]);
    }
    std::vector<std::string> cases, controls;
    for (const auto& [adm, lab] : adm_label) (lab ? cases : controls).push_back(adm);
    if (static_cast<int>(cases.size()) < k || static_cast<int>(controls.size()) < k)
        throw std::invalid_argument("cross_validate_rounds: a fold would be single-class");

    // Stratified fold assignment: shuffle each class, deal round-robin.
    Rng rng(splitmix64(params.seed ^ 0xc5a1ce17ULL));
    rng.shuffle(cases);
    rng.shuffle(controls);
    std::unordered_map<std::string, int> fold_of;
    for (std::size_t i = 0; i < cases.size(); ++i) fold_of[cases[i]] = static_cast<int>(i % k);
    for (std::size_t i = 0; i < controls.size(); ++i)
        fold_of[controls[i]] = static_cast<int>(i % k);

    int rounds = params.max_rounds;
    std::vector<double> adm_sum(static_cast<std::size_t>(rounds), 0.0);
    std::vector<double> row_sum(static_cast<std::size_t>(rounds), 0.0);

    for (int fold = 0; fold < k; ++fold) {
        TrainSet tr;
        tr.feature_names = data.feature_names;
        tr.n_features = p;
        std::vector<std::size_t> held;
        for (std::size_t i = 0; i < n; ++i) {
            if (fold_of[data.admission_ids[i]] == fold) {
                held.push_back(i);
            } else {
                tr.admission_ids.push_back(data.admission_ids[i]);
                tr.labels.push_back(data.labels[i]);
                tr.values.insert(tr.values.end(), data.values.begin() + static_cast<std::ptrdiff_t>(i * p),
                                 data.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * p));
            }
        }

        Hyperparams fp = params;
        fp.seed = splitmix64(params.seed + 0x9e37u * static_cast<std::uint64_t>(fold + 1));
        GbdtModel model = train(tr, fp, rounds);

        // Held-out admission bookkeeping for the per-round curves.
        std::vector<int> held_labels;
        held_labels.reserve(held.size());
        for (std::size_t i : held) held_labels.push_back(data.labels[i]);
        std::unordered_map<std::string, std::size_t> adm_slot;
        std::vector<int> a_labels;
        std::vector<std::size_t> row_adm(held.size());
        for (std::size_t j = 0; j < held.size(); ++j) {
            const std::string& adm = data.admission_ids[held[j]];
            auto [it, fresh] = adm_slot.try_emplace(adm, a_labels.size());
            if (fresh) a_labels.push_back(data.labels[held[j]]);
            row_adm[j] = it->second;
        }
        bool has_case = false, has_ctrl = false;
        for (int lab : a_labels) (lab ? has_case : has_ctrl) = true;
        if (!has_case || !has_ctrl)
            throw std::invalid_argument("cross_validate_rounds: fold " + std::to_string(fold) +
                                        " is single-class");

        std::vector<double> held_raw(held.size(), model.base_score);
        std::vector<double> a_max(a_labels.size());
        for (int r = 0; r < rounds; ++r) {
            const Tree& tree = model.trees[static_cast<std::size_t>(r)];
            for (std::size_t j = 0; j < held.size(); ++j)
                held_raw[j] += model.learning_rate *
                               tree_value_f(tree, data.values.data() + held[j] * p);
            std::fill(a_max.begin(), a_max.end(), -std::numeric_limits<double>::infinity());
            for (std::size_t j = 0; j < held.size(); ++j)
                a_max[row_adm[j]] = std::max(a_max[row_adm[j]], held_raw[j]);
            adm_sum[static_cast<std::size_t>(r)] += evalkit::auc_pairs(a_max, a_labels);
            row_sum[static_cast<std::size_t>(r)] += evalkit::auc_pairs(held_raw, held_labels);
        }
    }

    CvResult res;
    res.admission_auc.resize(static_cast<std::size_t>(rounds));
    res.row_auc.resize(static_cast<std::size_t>(rounds));
    for (int r = 0; r < rounds; ++r) {
        res.admission_auc[static_cast<std::size_t>(r)] =
            adm_sum[static_cast<std::size_t>(r)] / static_cast<double>(k);
        res.row_auc[static_cast<std::size_t>(r)] =
            row_sum[static_cast<std::size_t>(r)] / static_cast<double>(k);
    }
    std::size_t best = 0;
    for (std::size_t r = 1; r < res.admission_auc.size(); ++r)
        if (res.admission_auc[r] > res.admission_auc[best]) best = r;
    res.best_rounds = static_cast<int>(best) + 1;
    return res;
}

std::vector<std::pair<Timestamp, double>> predict_series(
    const GbdtModel& model, std::vector<std::pair<Timestamp, std::vector<double>>> rows) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<Timestamp, double>> out;
    out.reserve(rows.size());
    for (const auto& [ts, feats] : rows) out.emplace_back(ts, model.predict(feats));
    return out;
}

std::vector<ImportanceEntry> importance_gain(const GbdtModel& model) {
    std::vector<ImportanceEntry> out(model.feature_names.size());
    std::vector<double> cover_sum(model.feature_names.size(), 0.0);
    std::vector<double> gain_cover(model.feature_names.size(), 0.0);
    for (const Tree& t : model.trees) {
        for (const TreeNode& nd : t.nodes) {
            if (nd.is_leaf()) continue;
            auto f = static_cast<std::size_t>(nd.feature);
            out[f].total_gain += nd.gain;
            ++out[f].split_count;
            gain_cover[f] += nd.gain * nd.cover;
            cover_sum[f] += nd.cover;
        }
    }
    for (std::size_t f = 0; f < out.size(); ++f)
        if (cover_sum[f] > 0.0) out[f].cover_weighted_mean_gain = gain_cover[f] / cover_sum[f];
    return out;
}

using json = nlohmann::ordered_json;

std::string to_json(const GbdtModel& model) {
    json j;
    j["format"] = "wardwatch-gbdt-1";
    j["base_score"] = model.base_score;
    j["learning_rate"] = model.learning_rate;
    j["rounds"] = model.rounds;
    json hp;
    hp["neg_sample_rate"] = model.params.neg_sample_rate;
    hp["learning_rate"] = model.params.learning_rate;
    hp["max_depth"] = model.params.max_depth;
    hp["colsample_per_tree"] = model.params.colsample_per_tree;
    hp["min_node_cases"] = model.params.min_node_cases;
    hp["l2_reg"] = model.params.l2_reg;
    hp["gain_floor"] = model.params.gain_floor;
    hp["max_rounds"] = model.params.max_rounds;
    hp["seed"] = model.params.seed;
    j["hyperparams"] = hp;
    j["feature_names"] = model.feature_names;
    j["wards"] = model.wards;
    if (model.alert_threshold)
        j["alert_threshold"] = *model.alert_threshold;
    else
        j["alert_threshold"] = nullptr;
    j["train_loss"] = model.train_loss;
    json trees = json::array();
    for (const Tree& t : model.trees) {
        json nodes = json::array();
        for (const TreeNode& nd : t.nodes) {
            json n;
            if (nd.is_leaf()) {
                n["weight"] = nd.weight;
            } else {
                n["feature"] = nd.feature;
                n["threshold"] = nd.threshold;
                n["default_left"] = nd.default_left;
                n["left"] = nd.left;
                n["right"] = nd.right;
                n["gain"] = nd.gain;
            }
            n["cover"] = nd.cover;
            nodes.push_back(std::move(n));
        }
        trees.push_back(json{{"nodes", std::move(nodes)}});
    }
    j["trees"] = std::move(trees);
    return j.dump(2) + "\n";
}

GbdtModel model_from_json(const std::string& text) {
    json j = json::parse(text);
    if (!j.contains("format") || j["format"] != "wardwatch-gbdt-1")
        throw std::runtime_error("unsupported model format");
    GbdtModel m;
    m.base_score = j.at("base_score").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.rounds = j.at("rounds").get<int>();
    const json& hp = j.at("hyperparams");
    m.params.neg_sample_rate = hp.at("neg_sample_rate").get<double>();
    m.params.learning_rate = hp.at("learning_rate").get<double>();
    m.params.max_depth = hp.at("max_depth").get<int>();
    m.params.colsample_per_tree = hp.at("colsample_per_tree").get<double>();
    m.params.min_node_cases = hp.at("min_node_cases").get<int>();
    m.params.l2_reg = hp.at("l2_reg").get<double>();
    m.params.gain_floor = hp.at("gain_floor").get<double>();
    m.params.max_rounds = hp.at("max_rounds").get<int>();
    m.params.seed = hp.at("seed").get<std::uint64_t>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.wards = j.at("wards").get<std::vector<std::string>>();
    if (j.contains("alert_threshold") && !j["alert_threshold"].is_null())
        m.alert_threshold = j["alert_threshold"].get<double>();
    m.train_loss = j.at("train_loss").get<std::vector<double>>();
    for (const json& jt : j.at("trees")) {
        Tree t;
        for (const json& jn : jt.at("nodes")) {
            TreeNode nd;
            if (jn.contains("feature")) {
                nd.feature = jn.at("feature").get<int>();
                nd.threshold = jn.at("threshold").get<double>();
                nd.default_left = jn.at("default_left").get<bool>();
                nd.left = jn.at("left").get<std::int32_t>();
                nd.right = jn.at("right").get<std::int32_t>();
                nd.gain = jn.at("gain").get<double>();
            } else {
                nd.weight = jn.at("weight").get<double>();
            }
            nd.cover = jn.at("cover").get<double>();
            t.nodes.push_back(nd);
        }
        if (t.nodes.empty()) throw std::runtime_error("model file: empty tree");
        m.trees.push_back(std::move(t));
    }
    return m;
}

void save_model(const GbdtModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_json(model);
    if (!out.flush()) throw std::runtime_error("short write to " + path);
}

GbdtModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read model file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace ww::gbdt
