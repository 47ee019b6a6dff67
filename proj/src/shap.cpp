#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "wardwatch/gbdt.hpp"

namespace ww::gbdt {

// Shapley values for one tree, player set = the distinct features the tree
// splits on (m of them). The game is v(S) = cover-weighted descent: splits on
// features in S follow the row, others average children by cover. Summing
// v(S) leaf by leaf turns each leaf into a product of per-feature factors
//   ind_f  = prod of routing indicators over that feature's path splits,
//   ratio_f = prod of cover fractions over the same splits,
// so phi_i needs only subsets of the leaf's own path features; the m - d
// off-path features enter through the closed-form weight sum
//   wagg[t] = sum_r C(u,r) * t'!(m-t'-1)!/m!  with t' = t + r, u = m - d.
// That keeps the enumeration exact while costing O(leaves * 2^depth * depth).

namespace {

struct PathFactor {
    int feature;
    double ind;
    double ratio;
};

struct TreeShap {
    const Tree* tree = nullptr;
    const std::vector<double>* row = nullptr;
    std::vector<double>* phi = nullptr;
    double v_empty = 0.0;
    std::size_t m = 0;
    std::vector<double> fact;
    std::vector<PathFactor> path;
    std::vector<double> wagg, sub_ind, sub_ratio;

    void leaf(const TreeNode& nd) {
        double w = nd.weight;
        std::size_t d = path.size();
        double all_ratio = 1.0;
        for (const PathFactor& pf : path) all_ratio *= pf.ratio;
        v_empty += w * all_ratio;
        if (d == 0) return;
        std::size_t u = m - d;
        wagg.assign(d, 0.0);
        for (std::size_t t = 0; t < d; ++t) {
            double acc = 0.0;
            for (std::size_t r = 0; r <= u; ++r) {
                double comb = fact[u] / (fact[r] * fact[u - r]);
                std::size_t s = t + r;
                acc += comb * fact[s] * fact[m - s - 1] / fact[m];
            }
            wagg[t] = acc;
        }
        for (std::size_t i = 0; i < d; ++i) {
            double diff = path[i].ind - path[i].ratio;
            if (diff == 0.0) continue;
            sub_ind.clear();
            sub_ratio.clear();
            for (std::size_t j = 0; j < d; ++j) {
                if (j == i) continue;
                sub_ind.push_back(path[j].ind);
                sub_ratio.push_back(path[j].ratio);
            }
            std::size_t dd = d - 1;
            double total = 0.0;
            for (std::size_t mask = 0; mask < (std::size_t{1} << dd); ++mask) {
                double prod = 1.0;
                std::size_t t = 0;
                for (std::size_t b = 0; b < dd; ++b) {
                    if (mask >> b & 1) {
                        prod *= sub_ind[b];
                        ++t;
                    } else {
                        prod *= sub_ratio[b];
                    }
                }
                total += prod * wagg[t];
            }
            (*phi)[static_cast<std::size_t>(path[i].feature)] += w * diff * total;
        }
    }

    void descend(std::size_t at) {
        const TreeNode& nd = tree->nodes[at];
        if (nd.is_leaf()) {
            leaf(nd);
            return;
        }
        if (!(nd.cover > 0.0))
            throw std::runtime_error("shap_values: model lacks cover metadata");
        double v = (*row)[static_cast<std::size_t>(nd.feature)];
        bool go_left = std::isnan(v) ? nd.default_left : v < nd.threshold;
        for (int side = 0; side < 2; ++side) {
            std::int32_t child = side == 0 ? nd.left : nd.right;
            double child_cover = tree->nodes[static_cast<std::size_t>(child)].cover;
            if (!(child_cover > 0.0))
                throw std::runtime_error("shap_values: model lacks cover metadata");
            double step_ind = (go_left == (side == 0)) ? 1.0 : 0.0;
            double step_ratio = child_cover / nd.cover;
            std::size_t slot = path.size();
            for (std::size_t i = 0; i < path.size(); ++i)
                if (path[i].feature == nd.feature) {
                    slot = i;
                    break;
                }
            if (slot == path.size()) {
                path.push_back({nd.feature, step_ind, step_ratio});
                descend(static_cast<std::size_t>(child));
                path.pop_back();
            } else {
                PathFactor saved = path[slot];
                path[slot].ind *= step_ind;
                path[slot].ratio *= step_ratio;
                descend(static_cast<std::size_t>(child));
                path[slot] = saved;
            }
        }
    }
};

}  // namespace

ShapResult shap_values(const GbdtModel& model, const std::vector<double>& row) {
    if (row.size() != model.feature_names.size())
        throw std::invalid_argument("shap_values: row has " + std::to_string(row.size()) +
                                    " features, model expects " +
                                    std::to_string(model.feature_names.size()));
    ShapResult res;
    res.phi.assign(row.size(), 0.0);
    res.base_value = model.base_score;
    std::vector<int> used;
    for (const Tree& tree : model.trees) {
        used.clear();
        for (const TreeNode& nd : tree.nodes)
            if (!nd.is_leaf()) used.push_back(nd.feature);
        std::sort(used.begin(), used.end());
        used.erase(std::unique(used.begin(), used.end()), used.end());
        if (used.size() > 170)
            throw std::runtime_error("shap_values: tree uses too many features to enumerate");

        TreeShap ts;
        ts.tree = &tree;
        ts.row = &row;
        ts.phi = &res.phi;
        ts.m = used.size();
        ts.fact.resize(ts.m + 1);
        ts.fact[0] = 1.0;
        for (std::size_t i = 1; i <= ts.m; ++i)
            ts.fact[i] = ts.fact[i - 1] * static_cast<double>(i);
        ts.descend(0);
        res.base_value += model.learning_rate * ts.v_empty;
    }
    for (double& v : res.phi) v *= model.learning_rate;
    return res;
}

}  // namespace ww::gbdt
