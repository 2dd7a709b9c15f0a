#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfl/domain.hpp"
#include "vfl/errors.hpp"
#include "vfl/parallel.hpp"
#include "vfl/rng.hpp"

namespace vfl {

/// Canonical predictor inputs, in this fixed order. Bitrate enters on the
/// natural-log scale.
inline constexpr std::array<const char*, 7> kFeatureNames = {
    "energy", "gradient", "luminance", "height", "log_bitrate", "framerate", "preset"};

using FeatureVector = std::array<double, 7>;

inline FeatureVector make_feature_vector(const SegmentFeatures& f, const Representation& rep,
                                         double framerate, int preset) {
    return {f.energy,
            f.gradient,
            f.luminance,
            static_cast<double>(rep.height),
            std::log(static_cast<double>(rep.bitrate_bps)),
            framerate,
            static_cast<double>(preset)};
}

struct Hyperparams {
    int n_estimators = 100;
    int max_depth = 14;
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    bool bootstrap = true;
    int features_per_split = 0;  // 0 = consider every feature
    std::uint64_t seed = 0;
};

inline nlohmann::json to_json(const Hyperparams& hp) {
    return {{"n_estimators", hp.n_estimators},
            {"max_depth", hp.max_depth},
            {"min_samples_split", hp.min_samples_split},
            {"min_samples_leaf", hp.min_samples_leaf},
            {"bootstrap", hp.bootstrap},
            {"features_per_split", hp.features_per_split},
            {"seed", hp.seed}};
}

inline Hyperparams hyperparams_from_json(const nlohmann::json& j) {
    Hyperparams hp;
    hp.n_estimators = j.at("n_estimators").get<int>();
    hp.max_depth = j.at("max_depth").get<int>();
    hp.min_samples_split = j.at("min_samples_split").get<int>();
    hp.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    hp.bootstrap = j.at("bootstrap").get<bool>();
    hp.features_per_split = j.at("features_per_split").get<int>();
    hp.seed = j.at("seed").get<std::uint64_t>();
    return hp;
}

/// Column-major feature matrix.
class DataMatrix {
public:
    DataMatrix() = default;
    DataMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double at(std::size_t r, std::size_t c) const { return data_[c * rows_ + r]; }
    double& at(std::size_t r, std::size_t c) { return data_[c * rows_ + r]; }
    const double* column(std::size_t c) const { return data_.data() + c * rows_; }

    void row(std::size_t r, std::span<double> out) const {
        for (std::size_t c = 0; c < cols_; ++c) out[c] = at(r, c);
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;              // mean target over node samples
    double n_samples = 0.0;          // bootstrap-weighted count
    double impurity_decrease = 0.0;  // weighted SSE removed by this split
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> x) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const TreeNode& n = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }
};

struct Forest {
    Hyperparams hp;
    std::vector<std::string> feature_names;
    std::size_t n_features = 0;
    std::vector<Tree> trees;

    double predict(std::span<const double> x) const {
        double sum = 0.0;
        for (const auto& t : trees) sum += t.predict(x);
        return sum / static_cast<double>(trees.size());
    }
};

namespace detail {

// Grows one CART regression tree level by level. Feature columns are
// presorted once per forest; bootstrap resampling is expressed as integer
// row weights so the sorted order can be shared across trees.
class TreeBuilder {
public:
    TreeBuilder(const DataMatrix& x, const std::vector<double>& y,
                const std::vector<std::vector<std::uint32_t>>& order, const Hyperparams& hp)
        : x_(x), y_(y), order_(order), hp_(hp) {}

    Tree build(Rng rng) {
        const std::size_t n = x_.rows();
        const std::size_t k = x_.cols();
        std::vector<std::uint32_t> weight(n, 1);
        if (hp_.bootstrap) {
            std::fill(weight.begin(), weight.end(), 0u);
            for (std::size_t i = 0; i < n; ++i)
                ++weight[static_cast<std::size_t>(rng.below(n))];
        }
        std::vector<std::int32_t> node_of_row(n);
        double root_w = 0.0, root_sum = 0.0, root_sumsq = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            if (weight[r] == 0) {
                node_of_row[r] = -1;
                continue;
            }
            node_of_row[r] = 0;
            const double w = weight[r];
            root_w += w;
            root_sum += w * y_[r];
            root_sumsq += w * y_[r] * y_[r];
        }

        Tree tree;
        tree.nodes.push_back(make_leaf(root_w, root_sum));
        struct LevelNode {
            int id;
            double w, sum, sumsq;
        };
        std::vector<LevelNode> level = {{0, root_w, root_sum, root_sumsq}};

        const int m = hp_.features_per_split > 0
                          ? std::min<int>(hp_.features_per_split, static_cast<int>(k))
                          : static_cast<int>(k);

        for (int depth = 0; depth < hp_.max_depth && !level.empty(); ++depth) {
            // Select splittable nodes and assign sweep slots.
            std::vector<int> slot_of_node(tree.nodes.size(), -1);
            std::vector<LevelNode> cand;
            for (const auto& ln : level) {
                const double sse = ln.sumsq - ln.sum * ln.sum / ln.w;
                if (ln.w >= hp_.min_samples_split && sse > 1e-12 * std::max(1.0, ln.sumsq)) {
                    slot_of_node[static_cast<std::size_t>(ln.id)] = static_cast<int>(cand.size());
                    cand.push_back(ln);
                }
            }
            if (cand.empty()) break;

            const std::size_t s = cand.size();
            std::vector<std::uint8_t> mask(s * k, 1);
            if (m < static_cast<int>(k)) {
                std::vector<std::uint32_t> idx(k);
                for (std::size_t slot = 0; slot < s; ++slot) {
                    std::iota(idx.begin(), idx.end(), 0u);
                    std::fill(mask.begin() + static_cast<std::ptrdiff_t>(slot * k),
                              mask.begin() + static_cast<std::ptrdiff_t>((slot + 1) * k),
                              std::uint8_t{0});
                    for (int j = 0; j < m; ++j) {
                        const auto pick = static_cast<std::size_t>(j) +
                                          static_cast<std::size_t>(rng.below(k - static_cast<std::size_t>(j)));
                        std::swap(idx[static_cast<std::size_t>(j)], idx[pick]);
                        mask[slot * k + idx[static_cast<std::size_t>(j)]] = 1;
                    }
                }
            }

            // Best split per candidate node; proxy = sum_l^2/w_l + sum_r^2/w_r
            // (maximizing it maximizes the SSE decrease).
            std::vector<double> best_proxy(s, -std::numeric_limits<double>::infinity());
            std::vector<int> best_feat(s, -1);
            std::vector<double> best_thr(s, 0.0);
            std::vector<double> run_w(s), run_sum(s), prev_v(s);
            std::vector<std::uint8_t> started(s);

            for (std::size_t c = 0; c < k; ++c) {
                std::fill(run_w.begin(), run_w.end(), 0.0);
                std::fill(run_sum.begin(), run_sum.end(), 0.0);
                std::fill(started.begin(), started.end(), std::uint8_t{0});
                const double* col = x_.column(c);
                for (const std::uint32_t r : order_[c]) {
                    const std::int32_t nid = node_of_row[r];
                    if (nid < 0) continue;
                    const int slot = slot_of_node[static_cast<std::size_t>(nid)];
                    if (slot < 0 || !mask[static_cast<std::size_t>(slot) * k + c]) continue;
                    const auto us = static_cast<std::size_t>(slot);
                    const double v = col[r];
                    if (started[us] && v > prev_v[us]) {
                        const double wl = run_w[us];
                        const double wr = cand[us].w - wl;
                        if (wl >= hp_.min_samples_leaf && wr >= hp_.min_samples_leaf) {
                            const double sl = run_sum[us];
                            const double sr = cand[us].sum - sl;
                            const double proxy = sl * sl / wl + sr * sr / wr;
                            if (proxy > best_proxy[us]) {
                                best_proxy[us] = proxy;
                                best_feat[us] = static_cast<int>(c);
                                double thr = 0.5 * (prev_v[us] + v);
                                if (!(thr < v)) thr = prev_v[us];
                                best_thr[us] = thr;
                            }
                        }
                    }
                    const double w = weight[r];
                    run_w[us] += w;
                    run_sum[us] += w * y_[r];
                    prev_v[us] = v;
                    started[us] = 1;
                }
            }

            // Materialize the chosen splits.
            std::vector<int> left_of_slot(s, -1);
            for (std::size_t us = 0; us < s; ++us) {
                if (best_feat[us] < 0) continue;
                TreeNode& node = tree.nodes[static_cast<std::size_t>(cand[us].id)];
                node.feature = best_feat[us];
                node.threshold = best_thr[us];
                node.impurity_decrease = best_proxy[us] - cand[us].sum * cand[us].sum / cand[us].w;
                node.left = static_cast<int>(tree.nodes.size());
                node.right = node.left + 1;
                left_of_slot[us] = node.left;
                tree.nodes.push_back(TreeNode{});
                tree.nodes.push_back(TreeNode{});
            }

            // Partition rows and accumulate child statistics in row order.
            std::vector<LevelNode> next;
            std::vector<double> cw(2 * s, 0.0), cs(2 * s, 0.0), cq(2 * s, 0.0);
            for (std::size_t r = 0; r < n; ++r) {
                const std::int32_t nid = node_of_row[r];
                if (nid < 0) continue;
                const int slot = slot_of_node[static_cast<std::size_t>(nid)];
                if (slot < 0 || best_feat[static_cast<std::size_t>(slot)] < 0) continue;
                const auto us = static_cast<std::size_t>(slot);
                const TreeNode& node = tree.nodes[static_cast<std::size_t>(cand[us].id)];
                const bool go_left =
                    x_.at(r, static_cast<std::size_t>(node.feature)) <= node.threshold;
                node_of_row[r] = go_left ? node.left : node.right;
                const std::size_t ci = 2 * us + (go_left ? 0 : 1);
                const double w = weight[r];
                cw[ci] += w;
                cs[ci] += w * y_[r];
                cq[ci] += w * y_[r] * y_[r];
            }
            for (std::size_t us = 0; us < s; ++us) {
                if (best_feat[us] < 0) continue;
                const int left = left_of_slot[us];
                tree.nodes[static_cast<std::size_t>(left)] = make_leaf(cw[2 * us], cs[2 * us]);
                tree.nodes[static_cast<std::size_t>(left) + 1] =
                    make_leaf(cw[2 * us + 1], cs[2 * us + 1]);
                next.push_back({left, cw[2 * us], cs[2 * us], cq[2 * us]});
                next.push_back({left + 1, cw[2 * us + 1], cs[2 * us + 1], cq[2 * us + 1]});
            }
            level = std::move(next);
        }
        return tree;
    }

private:
    static TreeNode make_leaf(double w, double sum) {
        TreeNode n;
        n.value = w > 0 ? sum / w : 0.0;
        n.n_samples = w;
        return n;
    }

    const DataMatrix& x_;
    const std::vector<double>& y_;
    const std::vector<std::vector<std::uint32_t>>& order_;
    const Hyperparams& hp_;
};

}  // namespace detail

/// Trains a random-forest regressor: n_estimators CART trees grown with
/// variance-reduction greedy splits on bootstrap resamples. Candidate
/// thresholds are midpoints between consecutive distinct feature values;
/// equal-gain ties resolve to the lowest feature index, then the lowest
/// threshold. Bit-identical output for a given seed, at any thread count.
inline Forest train(const DataMatrix& x, const std::vector<double>& y, const Hyperparams& hp,
                    unsigned threads = 1, std::vector<std::string> feature_names = {}) {
    if (x.rows() == 0) throw UsageError("empty training set");
    if (x.rows() != y.size()) throw UsageError("feature/target row count mismatch");
    if (hp.n_estimators < 1 || hp.max_depth < 1 || hp.min_samples_split < 2 ||
        hp.min_samples_leaf < 1)
        throw UsageError("invalid hyperparameters");
    for (std::size_t c = 0; c < x.cols(); ++c)
        for (std::size_t r = 0; r < x.rows(); ++r)
            if (!std::isfinite(x.at(r, c))) throw UsageError("non-finite feature value");
    for (const double v : y)
        if (!std::isfinite(v)) throw UsageError("non-finite target value");

    // Presort each feature column once; ties resolve by row index.
    std::vector<std::vector<std::uint32_t>> order(x.cols());
    parallel_for(x.cols(), threads, [&](std::size_t c) {
        auto& idx = order[c];
        idx.resize(x.rows());
        std::iota(idx.begin(), idx.end(), 0u);
        const double* col = x.column(c);
        std::sort(idx.begin(), idx.end(), [col](std::uint32_t a, std::uint32_t b) {
            return col[a] != col[b] ? col[a] < col[b] : a < b;
        });
    });

    Forest f;
    f.hp = hp;
    f.n_features = x.cols();
    f.feature_names = std::move(feature_names);
    if (f.feature_names.empty())
        for (std::size_t c = 0; c < x.cols(); ++c) f.feature_names.push_back("f" + std::to_string(c));
    f.trees.resize(static_cast<std::size_t>(hp.n_estimators));
    detail::TreeBuilder builder(x, y, order, hp);
    parallel_for(f.trees.size(), threads, [&](std::size_t t) {
        f.trees[t] = builder.build(Rng::for_stream(hp.seed, t));
    });
    return f;
}

/// Impurity-based importance: per-feature sum of the weighted SSE decrease
/// over all split nodes of all trees, normalized to sum to 1. All zeros when
/// no tree contains a split.
inline std::map<std::string, double> feature_importance(const Forest& f) {
    std::vector<double> acc(f.n_features, 0.0);
    for (const auto& t : f.trees)
        for (const auto& n : t.nodes)
            if (n.feature >= 0) acc[static_cast<std::size_t>(n.feature)] += n.impurity_decrease;
    const double total = std::accumulate(acc.begin(), acc.end(), 0.0);
    std::map<std::string, double> out;
    for (std::size_t c = 0; c < f.n_features; ++c)
        out[f.feature_names[c]] = total > 0 ? acc[c] / total : 0.0;
    return out;
}

inline nlohmann::json to_json(const Forest& f) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : f.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : t.nodes)
            nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.n_samples,
                             n.impurity_decrease});
        trees.push_back({{"nodes", std::move(nodes)}});
    }
    return {{"n_features", f.n_features},
            {"feature_names", f.feature_names},
            {"hyperparams", to_json(f.hp)},
            {"trees", std::move(trees)}};
}

inline Forest forest_from_json(const nlohmann::json& j) {
    Forest f;
    f.n_features = j.at("n_features").get<std::size_t>();
    f.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    f.hp = hyperparams_from_json(j.at("hyperparams"));
    for (const auto& jt : j.at("trees")) {
        Tree t;
        for (const auto& jn : jt.at("nodes")) {
            TreeNode n;
            n.feature = jn.at(0).get<int>();
            n.threshold = jn.at(1).get<double>();
            n.left = jn.at(2).get<int>();
            n.right = jn.at(3).get<int>();
            n.value = jn.at(4).get<double>();
            n.n_samples = jn.at(5).get<double>();
            n.impurity_decrease = jn.at(6).get<double>();
            t.nodes.push_back(n);
        }
        if (t.nodes.empty()) throw FormatError("model tree with no nodes");
        f.trees.push_back(std::move(t));
    }
    if (f.trees.empty()) throw FormatError("model with no trees");
    return f;
}

struct FoldScore {
    double r2 = 0.0;
    double mae = 0.0;
    std::size_t test_rows = 0;
};

struct CvReport {
    std::vector<FoldScore> folds;
    double mean_r2 = 0.0;
    double mean_mae = 0.0;
};

/// Grouped k-fold cross-validation: rows sharing a group key land in the
/// same fold, so no group straddles the train/test boundary. Groups are
/// shuffled once (seeded) and dealt round-robin into folds.
inline CvReport cross_validate(const DataMatrix& x, const std::vector<double>& y,
                               const std::vector<std::string>& groups, const Hyperparams& hp,
                               int k = 5, unsigned threads = 1) {
    if (groups.size() != x.rows()) throw UsageError("group key count mismatch");
    std::vector<std::string> uniq;
    std::map<std::string, int> fold_of_group;
    for (const auto& g : groups)
        if (fold_of_group.emplace(g, -1).second) uniq.push_back(g);
    if (static_cast<int>(uniq.size()) < k)
        throw UsageError("fewer distinct groups than folds");
    Rng rng = Rng::for_stream(hp.seed, 0x666f6c64);  // independent fold-shuffle stream
    for (std::size_t i = uniq.size() - 1; i > 0; --i)
        std::swap(uniq[i], uniq[static_cast<std::size_t>(rng.below(i + 1))]);
    for (std::size_t i = 0; i < uniq.size(); ++i)
        fold_of_group[uniq[i]] = static_cast<int>(i % static_cast<std::size_t>(k));

    CvReport report;
    for (int fold = 0; fold < k; ++fold) {
        std::vector<std::uint32_t> train_rows, test_rows;
        for (std::size_t r = 0; r < x.rows(); ++r)
            (fold_of_group[groups[r]] == fold ? test_rows : train_rows).push_back(
                static_cast<std::uint32_t>(r));
        DataMatrix xt(train_rows.size(), x.cols());
        std::vector<double> yt(train_rows.size());
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
            for (std::size_t c = 0; c < x.cols(); ++c) xt.at(i, c) = x.at(train_rows[i], c);
            yt[i] = y[train_rows[i]];
        }
        const Forest f = train(xt, yt, hp, threads);
        double mean = 0.0;
        for (const auto r : test_rows) mean += y[r];
        mean /= static_cast<double>(test_rows.size());
        double ss_res = 0.0, ss_tot = 0.0, abs_sum = 0.0;
        std::vector<double> row(x.cols());
        for (const auto r : test_rows) {
            x.row(r, row);
            const double pred = f.predict(row);
            ss_res += (y[r] - pred) * (y[r] - pred);
            ss_tot += (y[r] - mean) * (y[r] - mean);
            abs_sum += std::abs(y[r] - pred);
        }
        FoldScore score;
        score.test_rows = test_rows.size();
        score.mae = abs_sum / static_cast<double>(test_rows.size());
        if (ss_tot > 0)
            score.r2 = 1.0 - ss_res / ss_tot;
        else
            score.r2 = ss_res <= 1e-12 ? 1.0 : -std::numeric_limits<double>::infinity();
        report.folds.push_back(score);
    }
    for (const auto& s : report.folds) {
        report.mean_r2 += s.r2;
        report.mean_mae += s.mae;
    }
    report.mean_r2 /= static_cast<double>(report.folds.size());
    report.mean_mae /= static_cast<double>(report.folds.size());
    return report;
}

}  // namespace vfl
