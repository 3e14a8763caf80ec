#include "rehab/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace rehab::models {

namespace {

using json = nlohmann::json;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_training_input(const std::vector<std::vector<double>>& rows,
                          const std::vector<int>& labels) {
    if (rows.size() < 2 || rows.size() != labels.size()) {
        throw DataError("train: need >= 2 rows with aligned labels");
    }
    const std::size_t p = rows.front().size();
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != p) throw DimensionMismatch("train: ragged feature rows");
        for (double v : rows[i]) {
            if (!std::isfinite(v)) throw NonFiniteFeature("train: non-finite feature value");
        }
        (labels[i] == 1 ? pos : neg) = true;
    }
    if (!pos || !neg) throw SingleClass("train: both classes must be present");
}

// Canonical row order used by resampling-based trainers: models become
// invariant to permutations of the training rows.
std::vector<std::size_t> canonical_order(const std::vector<std::vector<double>>& rows,
                                         const std::vector<int>& labels) {
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (rows[a] != rows[b]) return rows[a] < rows[b];
        return labels[a] < labels[b];
    });
    return order;
}

// ---------------------------------------------------------------------------
// Regression tree with weighted variance splits. Gini splitting on a binary
// 0/1 target selects the same cut, so the one builder serves RF and GB.

struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    double value = 0.0;
    int left = -1;
    int right = -1;
    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(const std::vector<double>& row) const {
        int i = 0;
        while (!nodes[i].is_leaf()) {
            i = row[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold
                    ? nodes[i].left
                    : nodes[i].right;
        }
        return nodes[i].value;
    }

    int apply(const std::vector<double>& row) const {
        int i = 0;
        while (!nodes[i].is_leaf()) {
            i = row[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold
                    ? nodes[i].left
                    : nodes[i].right;
        }
        return i;
    }

    json to_json() const {
        json arr = json::array();
        for (const TreeNode& n : nodes) {
            arr.push_back({{"f", n.feature},
                           {"t", n.threshold},
                           {"v", n.value},
                           {"l", n.left},
                           {"r", n.right}});
        }
        return arr;
    }
};

struct TreeBuilder {
    const std::vector<std::vector<double>>& rows;
    const std::vector<double>& targets;
    int max_depth;
    std::size_t mtry;  // 0 means all features
    Rng* rng = nullptr;

    Tree tree;

    std::vector<std::size_t> candidate_features() {
        const std::size_t p = rows.front().size();
        std::vector<std::size_t> feats(p);
        std::iota(feats.begin(), feats.end(), 0);
        if (mtry == 0 || mtry >= p || rng == nullptr) return feats;
        // partial Fisher-Yates: first mtry entries are the sample
        for (std::size_t i = 0; i < mtry; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng->below(p - i));
            std::swap(feats[i], feats[j]);
        }
        feats.resize(mtry);
        std::sort(feats.begin(), feats.end());
        return feats;
    }

    int build(std::vector<std::size_t>& indices, int depth) {
        double sum = 0.0;
        for (std::size_t i : indices) sum += targets[i];
        const double mean = sum / static_cast<double>(indices.size());

        bool constant = true;
        for (std::size_t i : indices) {
            if (targets[i] != targets[indices.front()]) {
                constant = false;
                break;
            }
        }
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(TreeNode{-1, 0.0, mean, -1, -1});
        if (constant || depth >= max_depth || indices.size() < 2) return node_id;

        // best split: maximize sum_L^2/n_L + sum_R^2/n_R
        double best_gain = -1.0;
        std::size_t best_feature = 0;
        double best_threshold = 0.0;
        const double base = sum * sum / static_cast<double>(indices.size());

        std::vector<std::pair<double, double>> column(indices.size());
        for (std::size_t f : candidate_features()) {
            for (std::size_t i = 0; i < indices.size(); ++i) {
                column[i] = {rows[indices[i]][f], targets[indices[i]]};
            }
            std::sort(column.begin(), column.end());
            double left_sum = 0.0;
            for (std::size_t i = 0; i + 1 < column.size(); ++i) {
                left_sum += column[i].second;
                if (column[i].first == column[i + 1].first) continue;
                const double nl = static_cast<double>(i + 1);
                const double nr = static_cast<double>(column.size() - i - 1);
                const double right_sum = sum - left_sum;
                const double gain =
                    left_sum * left_sum / nl + right_sum * right_sum / nr - base;
                if (gain > best_gain + 1e-12) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = 0.5 * (column[i].first + column[i + 1].first);
                }
            }
        }
        if (best_gain <= 1e-12) return node_id;

        std::vector<std::size_t> left, right;
        for (std::size_t i : indices) {
            (rows[i][best_feature] <= best_threshold ? left : right).push_back(i);
        }
        if (left.empty() || right.empty()) return node_id;

        tree.nodes[static_cast<std::size_t>(node_id)].feature = static_cast<int>(best_feature);
        tree.nodes[static_cast<std::size_t>(node_id)].threshold = best_threshold;
        const int l = build(left, depth + 1);
        tree.nodes[static_cast<std::size_t>(node_id)].left = l;
        const int r = build(right, depth + 1);
        tree.nodes[static_cast<std::size_t>(node_id)].right = r;
        return node_id;
    }
};

Tree build_tree(const std::vector<std::vector<double>>& rows,
                const std::vector<double>& targets, std::vector<std::size_t> indices,
                int max_depth, std::size_t mtry, Rng* rng) {
    TreeBuilder builder{rows, targets, max_depth, mtry, rng, {}};
    builder.build(indices, 0);
    return std::move(builder.tree);
}

// ---------------------------------------------------------------------------

class LinearModel : public Model {
public:
    LinearModel(ModelKind kind, std::vector<double> weights, double bias, json params)
        : kind_(kind), weights_(std::move(weights)), bias_(bias), params_(std::move(params)) {}

    double predict_proba(const std::vector<double>& row) const override {
        if (row.size() != weights_.size()) {
            throw DimensionMismatch("predict_proba: feature dimension mismatch");
        }
        double z = bias_;
        for (std::size_t i = 0; i < row.size(); ++i) z += weights_[i] * row[i];
        return sigmoid(z);
    }

    ModelKind kind() const override { return kind_; }

    std::string to_json() const override {
        json doc{{"format_version", 1},
                 {"kind", model_kind_name(kind_)},
                 {"hyperparameters", params_},
                 {"weights", weights_},
                 {"bias", bias_}};
        return doc.dump(2);
    }

private:
    ModelKind kind_;
    std::vector<double> weights_;
    double bias_;
    json params_;
};

struct Stump {
    std::size_t feature = 0;
    double threshold = 0.0;
    // prediction for x[feature] <= threshold; the other side gets the opposite
    int low_side_class = 0;

    int predict(const std::vector<double>& row) const {
        const bool low = row[feature] <= threshold;
        return low ? low_side_class : 1 - low_side_class;
    }
};

class AdaBoostModel : public Model {
public:
    AdaBoostModel(std::vector<Stump> stumps, std::vector<double> alphas, std::size_t n_features,
                  json params)
        : stumps_(std::move(stumps)),
          alphas_(std::move(alphas)),
          n_features_(n_features),
          params_(std::move(params)) {
        for (double a : alphas_) alpha_sum_ += a;
    }

    double predict_proba(const std::vector<double>& row) const override {
        if (row.size() != n_features_) {
            throw DimensionMismatch("predict_proba: feature dimension mismatch");
        }
        if (alpha_sum_ <= 0.0) return 0.5;
        double vote = 0.0;  // signed, in [-alpha_sum, alpha_sum]
        for (std::size_t m = 0; m < stumps_.size(); ++m) {
            vote += alphas_[m] * (stumps_[m].predict(row) == 1 ? 1.0 : -1.0);
        }
        return 0.5 * (vote / alpha_sum_ + 1.0);
    }

    ModelKind kind() const override { return ModelKind::ADB; }

    std::string to_json() const override {
        json rounds = json::array();
        for (std::size_t m = 0; m < stumps_.size(); ++m) {
            rounds.push_back({{"feature", stumps_[m].feature},
                              {"threshold", stumps_[m].threshold},
                              {"low_side_class", stumps_[m].low_side_class},
                              {"alpha", alphas_[m]}});
        }
        json doc{{"format_version", 1},
                 {"kind", "ADB"},
                 {"hyperparameters", params_},
                 {"n_features", n_features_},
                 {"rounds", rounds}};
        return doc.dump(2);
    }

private:
    std::vector<Stump> stumps_;
    std::vector<double> alphas_;
    std::size_t n_features_;
    double alpha_sum_ = 0.0;
    json params_;
};

class GradientBoostingModel : public Model {
public:
    GradientBoostingModel(double base_score, std::vector<Tree> trees, double shrinkage,
                          std::size_t n_features, json params)
        : base_score_(base_score),
          trees_(std::move(trees)),
          shrinkage_(shrinkage),
          n_features_(n_features),
          params_(std::move(params)) {}

    double predict_proba(const std::vector<double>& row) const override {
        if (row.size() != n_features_) {
            throw DimensionMismatch("predict_proba: feature dimension mismatch");
        }
        double f = base_score_;
        for (const Tree& t : trees_) f += shrinkage_ * t.predict(row);
        return sigmoid(f);
    }

    ModelKind kind() const override { return ModelKind::GB; }

    std::string to_json() const override {
        json trees = json::array();
        for (const Tree& t : trees_) trees.push_back(t.to_json());
        json doc{{"format_version", 1},
                 {"kind", "GB"},
                 {"hyperparameters", params_},
                 {"n_features", n_features_},
                 {"base_score", base_score_},
                 {"shrinkage", shrinkage_},
                 {"trees", trees}};
        return doc.dump(2);
    }

private:
    double base_score_;
    std::vector<Tree> trees_;
    double shrinkage_;
    std::size_t n_features_;
    json params_;
};

class RandomForestModel : public Model {
public:
    RandomForestModel(std::vector<Tree> trees, std::size_t n_features, json params)
        : trees_(std::move(trees)), n_features_(n_features), params_(std::move(params)) {}

    double predict_proba(const std::vector<double>& row) const override {
        if (row.size() != n_features_) {
            throw DimensionMismatch("predict_proba: feature dimension mismatch");
        }
        std::size_t positive = 0;
        for (const Tree& t : trees_) {
            if (t.predict(row) > 0.5) ++positive;
        }
        return static_cast<double>(positive) / static_cast<double>(trees_.size());
    }

    ModelKind kind() const override { return ModelKind::RF; }

    std::string to_json() const override {
        json trees = json::array();
        for (const Tree& t : trees_) trees.push_back(t.to_json());
        json doc{{"format_version", 1},
                 {"kind", "RF"},
                 {"hyperparameters", params_},
                 {"n_features", n_features_},
                 {"trees", trees}};
        return doc.dump(2);
    }

private:
    std::vector<Tree> trees_;
    std::size_t n_features_;
    json params_;
};

std::unique_ptr<Model> train_lr(const Hyperparameters& hp,
                                const std::vector<std::vector<double>>& rows,
                                const std::vector<int>& labels) {
    const std::size_t n = rows.size();
    const std::size_t p = rows.front().size();
    std::vector<double> w(p, 0.0);
    double b = 0.0;

    double max_row_sq = 0.0;
    for (const auto& row : rows) {
        double s = 1.0;  // bias column
        for (double v : row) s += v * v;
        max_row_sq = std::max(max_row_sq, s);
    }
    // objective: mean logistic loss + (lambda / n) * ||w||^2 / 2 (bias free)
    const double reg = hp.lr_lambda / static_cast<double>(n);
    const double step = 1.0 / (0.25 * max_row_sq + reg);

    std::vector<double> grad(p, 0.0);
    for (int iter = 0; iter < hp.lr_max_iters; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double z = b;
            for (std::size_t j = 0; j < p; ++j) z += w[j] * rows[i][j];
            const double err = sigmoid(z) - static_cast<double>(labels[i]);
            for (std::size_t j = 0; j < p; ++j) grad[j] += err * rows[i][j];
            grad_b += err;
        }
        double norm_sq = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            grad[j] = grad[j] / static_cast<double>(n) + reg * w[j];
            norm_sq += grad[j] * grad[j];
        }
        grad_b /= static_cast<double>(n);
        norm_sq += grad_b * grad_b;
        if (std::sqrt(norm_sq) < hp.lr_tolerance) break;
        for (std::size_t j = 0; j < p; ++j) w[j] -= step * grad[j];
        b -= step * grad_b;
    }
    json params{{"lambda", hp.lr_lambda},
                {"max_iters", hp.lr_max_iters},
                {"tolerance", hp.lr_tolerance}};
    return std::make_unique<LinearModel>(ModelKind::LR, std::move(w), b, std::move(params));
}

std::unique_ptr<Model> train_svm(const Hyperparameters& hp,
                                 const std::vector<std::vector<double>>& rows,
                                 const std::vector<int>& labels) {
    const std::size_t n = rows.size();
    const std::size_t p = rows.front().size();
    std::vector<double> w(p, 0.0), w_avg(p, 0.0);
    double b = 0.0, b_avg = 0.0;
    std::size_t averaged = 0;

    for (int t = 0; t < hp.svm_iters; ++t) {
        std::vector<double> grad(p, 0.0);
        double grad_b = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double y = labels[i] == 1 ? 1.0 : -1.0;
            double z = b;
            for (std::size_t j = 0; j < p; ++j) z += w[j] * rows[i][j];
            if (y * z < 1.0) {
                for (std::size_t j = 0; j < p; ++j) grad[j] -= y * rows[i][j];
                grad_b -= y;
            }
        }
        const double eta = 1.0 / (hp.svm_lambda * static_cast<double>(t + 1));
        for (std::size_t j = 0; j < p; ++j) {
            w[j] -= eta * (hp.svm_lambda * w[j] + grad[j] / static_cast<double>(n));
        }
        b -= eta * grad_b / static_cast<double>(n);
        if (t >= hp.svm_iters / 2) {
            for (std::size_t j = 0; j < p; ++j) w_avg[j] += w[j];
            b_avg += b;
            ++averaged;
        }
    }
    for (double& v : w_avg) v /= static_cast<double>(averaged);
    b_avg /= static_cast<double>(averaged);
    // probability is a logistic squash of the signed margin; the rank order
    // (all ROC needs) matches the raw margin
    json params{{"lambda", hp.svm_lambda}, {"iters", hp.svm_iters}};
    return std::make_unique<LinearModel>(ModelKind::SVM, std::move(w_avg), b_avg,
                                         std::move(params));
}

std::unique_ptr<Model> train_adb(const Hyperparameters& hp,
                                 const std::vector<std::vector<double>>& rows,
                                 const std::vector<int>& labels) {
    const std::size_t n = rows.size();
    const std::size_t p = rows.front().size();
    std::vector<double> sample_w(n, 1.0 / static_cast<double>(n));
    std::vector<Stump> stumps;
    std::vector<double> alphas;

    for (int round = 0; round < hp.adb_rounds; ++round) {
        // exhaustive weighted-error stump search
        Stump best;
        double best_err = 1.0;
        std::vector<std::pair<double, std::size_t>> column(n);
        for (std::size_t f = 0; f < p; ++f) {
            for (std::size_t i = 0; i < n; ++i) column[i] = {rows[i][f], i};
            std::sort(column.begin(), column.end());
            // err(low=1): weight of label-0 rows on the low side plus
            // label-1 rows on the high side; sweep all cut points
            double w1_total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (labels[i] == 1) w1_total += sample_w[i];
            }
            double w0_low = 0.0, w1_low = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const std::size_t idx = column[i].second;
                (labels[idx] == 1 ? w1_low : w0_low) += sample_w[idx];
                if (column[i].first == column[i + 1].first) continue;
                const double thr = 0.5 * (column[i].first + column[i + 1].first);
                const double err_low1 = w0_low + (w1_total - w1_low);
                const double err_low0 = 1.0 - err_low1;
                if (err_low1 < best_err - 1e-12) {
                    best_err = err_low1;
                    best = Stump{f, thr, 1};
                }
                if (err_low0 < best_err - 1e-12) {
                    best_err = err_low0;
                    best = Stump{f, thr, 0};
                }
            }
        }
        if (best_err >= 0.5 - 1e-12) break;  // no stump beats chance
        const double eps = std::max(best_err, 1e-10);
        const double alpha = hp.adb_learning_rate * std::log((1.0 - eps) / eps);
        stumps.push_back(best);
        alphas.push_back(alpha);

        double w_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (best.predict(rows[i]) != labels[i]) sample_w[i] *= std::exp(alpha);
            w_sum += sample_w[i];
        }
        for (double& v : sample_w) v /= w_sum;
        if (best_err <= 1e-10) break;  // perfect stump; nothing left to reweight
    }
    json params{{"rounds", hp.adb_rounds}, {"learning_rate", hp.adb_learning_rate}};
    return std::make_unique<AdaBoostModel>(std::move(stumps), std::move(alphas), p,
                                           std::move(params));
}

std::unique_ptr<Model> train_gb(const Hyperparameters& hp,
                                const std::vector<std::vector<double>>& rows,
                                const std::vector<int>& labels) {
    const std::size_t n = rows.size();
    double pos = 0.0;
    for (int y : labels) pos += y;
    double p_bar = std::clamp(pos / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
    const double base = std::log(p_bar / (1.0 - p_bar));

    std::vector<double> f(n, base);
    std::vector<double> residual(n, 0.0);
    std::vector<Tree> trees;
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);

    for (int round = 0; round < hp.gb_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            residual[i] = static_cast<double>(labels[i]) - sigmoid(f[i]);
        }
        Tree tree = build_tree(rows, residual, all, hp.gb_depth, 0, nullptr);
        // Newton leaf values: sum(residual) / sum(p (1 - p)) per leaf
        std::vector<double> num(tree.nodes.size(), 0.0), den(tree.nodes.size(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const int leaf = tree.apply(rows[i]);
            const double pr = sigmoid(f[i]);
            num[static_cast<std::size_t>(leaf)] += residual[i];
            den[static_cast<std::size_t>(leaf)] += pr * (1.0 - pr);
        }
        for (std::size_t j = 0; j < tree.nodes.size(); ++j) {
            if (tree.nodes[j].is_leaf()) {
                tree.nodes[j].value = den[j] > 1e-12 ? num[j] / den[j] : 0.0;
            }
        }
        for (std::size_t i = 0; i < n; ++i) f[i] += hp.gb_shrinkage * tree.predict(rows[i]);
        trees.push_back(std::move(tree));
    }
    json params{{"rounds", hp.gb_rounds}, {"depth", hp.gb_depth},
                {"shrinkage", hp.gb_shrinkage}};
    return std::make_unique<GradientBoostingModel>(base, std::move(trees), hp.gb_shrinkage,
                                                   rows.front().size(), std::move(params));
}

std::unique_ptr<Model> train_rf(const ModelSpec& spec,
                                const std::vector<std::vector<double>>& rows,
                                const std::vector<int>& labels) {
    const Hyperparameters& hp = spec.params;
    const std::size_t n = rows.size();
    const std::size_t p = rows.front().size();
    const std::size_t mtry =
        static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
    const std::vector<std::size_t> canon = canonical_order(rows, labels);
    std::vector<double> targets(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) targets[i] = static_cast<double>(labels[i]);

    std::vector<Tree> trees;
    trees.reserve(static_cast<std::size_t>(hp.rf_trees));
    for (int t = 0; t < hp.rf_trees; ++t) {
        Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(t)));
        std::vector<std::size_t> bootstrap(n);
        for (std::size_t i = 0; i < n; ++i) {
            bootstrap[i] = canon[static_cast<std::size_t>(rng.below(n))];
        }
        trees.push_back(build_tree(rows, targets, std::move(bootstrap), hp.rf_max_depth, mtry,
                                   &rng));
    }
    json params{{"trees", hp.rf_trees}, {"max_depth", hp.rf_max_depth}, {"mtry", mtry},
                {"seed", spec.seed}};
    return std::make_unique<RandomForestModel>(std::move(trees), p, std::move(params));
}

}  // namespace

const char* model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::LR: return "LR";
        case ModelKind::ADB: return "ADB";
        case ModelKind::SVM: return "SVM";
        case ModelKind::GB: return "GB";
        default: return "RF";
    }
}

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "LR") return ModelKind::LR;
    if (name == "ADB") return ModelKind::ADB;
    if (name == "SVM") return ModelKind::SVM;
    if (name == "GB") return ModelKind::GB;
    if (name == "RF") return ModelKind::RF;
    throw ConfigError("unknown model kind '" + name + "'");
}

FeatureMatrix build_features(const std::vector<cohort::StagePatient>& population,
                             const std::vector<outcomes::StageOutcome>& outcome_list,
                             const notes::ExerciseLexicon& lexicon, Stage stage) {
    if (population.empty()) throw EmptyInput("build_features: empty stage population");
    if (population.size() != outcome_list.size()) {
        throw DataError("build_features: population/outcome length mismatch");
    }
    FeatureMatrix fm;
    for (const auto& entry : lexicon.entries) fm.column_names.push_back(entry.canonical);
    fm.column_names.push_back("SEX=FEMALE");
    fm.column_names.push_back("RACE=WHITE");
    fm.column_names.push_back("AGE=UNDER_40");
    fm.column_names.push_back("AGE=FROM_40_TO_60");
    fm.column_names.push_back("AGE=OVER_60");

    for (std::size_t i = 0; i < population.size(); ++i) {
        const cohort::PatientRecord& rec = *population[i].record;
        std::vector<double> row;
        row.reserve(fm.column_names.size());
        const auto it = rec.exposures.find(stage);
        for (const auto& entry : lexicon.entries) {
            const bool exposed = it != rec.exposures.end() && it->second.count(entry.canonical);
            row.push_back(exposed ? 1.0 : 0.0);
        }
        row.push_back(rec.demographics.sex == cohort::Sex::FEMALE ? 1.0 : 0.0);
        row.push_back(rec.demographics.race == cohort::Race::WHITE ? 1.0 : 0.0);
        const cohort::AgeBin bin = rec.demographics.age_bin();
        row.push_back(bin == cohort::AgeBin::UNDER_40 ? 1.0 : 0.0);
        row.push_back(bin == cohort::AgeBin::FROM_40_TO_60 ? 1.0 : 0.0);
        row.push_back(bin == cohort::AgeBin::OVER_60 ? 1.0 : 0.0);
        fm.rows.push_back(std::move(row));
        fm.labels.push_back(outcome_list[i].label == outcomes::Label::IMPROVED ? 1 : 0);
        fm.patient_ids.push_back(rec.patient_id);
    }
    return fm;
}

std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<int>& labels,
                                                       std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("stratified_kfold: k must be >= 2");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        (labels[i] == 1 ? pos : neg).push_back(i);
    }
    if (pos.size() < k || neg.size() < k) {
        throw ClassTooSmall("stratified_kfold: each class needs at least k members");
    }
    std::vector<std::vector<std::size_t>> folds(k);
    Rng rng(derive_seed(seed, 0x5f01d));
    for (auto* cls : {&pos, &neg}) {
        rng.shuffle(*cls);
        for (std::size_t i = 0; i < cls->size(); ++i) folds[i % k].push_back((*cls)[i]);
    }
    for (auto& fold : folds) std::sort(fold.begin(), fold.end());
    return folds;
}

void oversample(std::vector<std::vector<double>>& rows, std::vector<int>& labels,
                std::uint64_t seed) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        (labels[i] == 1 ? pos : neg).push_back(i);
    }
    if (pos.empty() || neg.empty()) {
        throw SingleClass("oversample: both classes must be present");
    }
    std::vector<std::size_t>& minority = pos.size() < neg.size() ? pos : neg;
    const std::size_t deficit =
        (pos.size() < neg.size() ? neg.size() : pos.size()) - minority.size();
    Rng rng(derive_seed(seed, 0x05a)); // dedicated stream
    for (std::size_t i = 0; i < deficit; ++i) {
        const std::size_t src = minority[static_cast<std::size_t>(rng.below(minority.size()))];
        rows.push_back(rows[src]);
        labels.push_back(labels[src]);
    }
}

std::unique_ptr<Model> train(const ModelSpec& spec,
                             const std::vector<std::vector<double>>& rows,
                             const std::vector<int>& labels) {
    check_training_input(rows, labels);
    switch (spec.kind) {
        case ModelKind::LR: return train_lr(spec.params, rows, labels);
        case ModelKind::SVM: return train_svm(spec.params, rows, labels);
        case ModelKind::ADB: return train_adb(spec.params, rows, labels);
        case ModelKind::GB: return train_gb(spec.params, rows, labels);
        default: return train_rf(spec, rows, labels);
    }
}

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.empty() || scores.size() != labels.size()) {
        throw EmptyInput("roc_curve: need aligned, non-empty scores and labels");
    }
    double n_pos = 0.0, n_neg = 0.0;
    for (int y : labels) (y == 1 ? n_pos : n_neg) += 1.0;
    if (n_pos == 0.0 || n_neg == 0.0) {
        throw SingleClass("roc_curve: both classes must be present");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.emplace_back(0.0, 0.0);
    double tp = 0.0, fp = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        for (std::size_t m = i; m <= j; ++m) {
            (labels[order[m]] == 1 ? tp : fp) += 1.0;  // tie group moves as one
        }
        curve.points.emplace_back(fp / n_neg, tp / n_pos);
        i = j + 1;
    }
    double auc = 0.0;
    for (std::size_t m = 1; m < curve.points.size(); ++m) {
        const auto& [x0, y0] = curve.points[m - 1];
        const auto& [x1, y1] = curve.points[m];
        auc += (x1 - x0) * (y0 + y1) / 2.0;
    }
    curve.auc = auc;
    return curve;
}

double roc_interpolate(const RocCurve& curve, double fpr) {
    const auto& pts = curve.points;
    // upper envelope across vertical runs; TPR is nondecreasing along the
    // curve, so the last point of a run is its maximum
    auto run_top = [&](std::size_t i) {
        while (i + 1 < pts.size() && pts[i + 1].first == pts[i].first) ++i;
        return pts[i].second;
    };
    if (fpr <= pts.front().first) return run_top(0);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (fpr > pts[i].first) continue;
        if (fpr == pts[i].first) return run_top(i);
        const double x0 = pts[i - 1].first, y0 = pts[i - 1].second;
        const double x1 = pts[i].first, y1 = pts[i].second;
        return y0 + (y1 - y0) * (fpr - x0) / (x1 - x0);
    }
    return pts.back().second;
}

EvalMetrics evaluate(const std::vector<double>& scores, const std::vector<int>& labels,
                     double threshold, Weighting weighting) {
    if (scores.empty() || scores.size() != labels.size()) {
        throw EmptyInput("evaluate: need aligned, non-empty scores and labels");
    }
    double counts[2] = {0.0, 0.0};       // class frequency
    double tp[2] = {0.0, 0.0};           // per-class true positives
    double pred_count[2] = {0.0, 0.0};   // predicted-as-class counts
    double correct = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const int truth = labels[i] == 1 ? 1 : 0;
        const int pred = scores[i] >= threshold ? 1 : 0;
        counts[truth] += 1.0;
        pred_count[pred] += 1.0;
        if (pred == truth) {
            tp[truth] += 1.0;
            correct += 1.0;
        }
    }
    const double n = static_cast<double>(scores.size());

    double precision[2], recall[2], f1[2];
    for (int c = 0; c < 2; ++c) {
        precision[c] = pred_count[c] > 0.0 ? tp[c] / pred_count[c] : 0.0;
        recall[c] = counts[c] > 0.0 ? tp[c] / counts[c] : 0.0;
        f1[c] = precision[c] + recall[c] > 0.0
                    ? 2.0 * precision[c] * recall[c] / (precision[c] + recall[c])
                    : 0.0;
    }
    double w[2];
    if (weighting == Weighting::INVERSE_FREQUENCY) {
        // weight each class by the inverse of its frequency
        if (counts[0] == 0.0 || counts[1] == 0.0) {
            w[0] = counts[0] > 0.0 ? 1.0 : 0.0;
            w[1] = counts[1] > 0.0 ? 1.0 : 0.0;
        } else {
            w[0] = 1.0 / counts[0];
            w[1] = 1.0 / counts[1];
        }
    } else {
        w[0] = counts[0] / n;
        w[1] = counts[1] / n;
    }
    const double w_sum = w[0] + w[1];
    w[0] /= w_sum;
    w[1] /= w_sum;

    EvalMetrics m;
    m.weighting = weighting;
    m.precision = w[0] * precision[0] + w[1] * precision[1];
    m.recall = w[0] * recall[0] + w[1] * recall[1];
    m.f1 = w[0] * f1[0] + w[1] * f1[1];
    m.accuracy = correct / n;
    m.auc = roc_curve(scores, labels).auc;
    return m;
}

CvReport cross_validate(const ModelSpec& spec, const FeatureMatrix& features, std::size_t k,
                        std::uint64_t seed, Weighting weighting, bool oversample_training) {
    const auto folds = stratified_kfold(features.labels, k, seed);
    CvReport report;
    report.fpr_grid.resize(101);
    for (std::size_t i = 0; i < report.fpr_grid.size(); ++i) {
        report.fpr_grid[i] = static_cast<double>(i) / 100.0;
    }
    std::vector<std::vector<double>> grid_tprs;

    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<bool> in_test(features.n_rows(), false);
        for (std::size_t idx : folds[f]) in_test[idx] = true;

        std::vector<std::vector<double>> train_rows;
        std::vector<int> train_labels;
        std::vector<double> test_scores;
        std::vector<int> test_labels;
        for (std::size_t i = 0; i < features.n_rows(); ++i) {
            if (in_test[i]) continue;
            train_rows.push_back(features.rows[i]);
            train_labels.push_back(features.labels[i]);
        }
        if (oversample_training) {
            oversample(train_rows, train_labels, derive_seed(seed, 100 + f));
        }
        ModelSpec fold_spec = spec;
        fold_spec.seed = derive_seed(seed, 200 + f);
        const auto model = train(fold_spec, train_rows, train_labels);
        for (std::size_t idx : folds[f]) {
            test_scores.push_back(model->predict_proba(features.rows[idx]));
            test_labels.push_back(features.labels[idx]);
        }
        report.per_fold.push_back(evaluate(test_scores, test_labels, 0.5, weighting));
        const RocCurve curve = roc_curve(test_scores, test_labels);
        std::vector<double> tprs(report.fpr_grid.size());
        for (std::size_t g = 0; g < report.fpr_grid.size(); ++g) {
            tprs[g] = roc_interpolate(curve, report.fpr_grid[g]);
        }
        grid_tprs.push_back(std::move(tprs));
    }

    const double kf = static_cast<double>(report.per_fold.size());
    for (const EvalMetrics& m : report.per_fold) {
        report.aggregate.precision += m.precision / kf;
        report.aggregate.recall += m.recall / kf;
        report.aggregate.f1 += m.f1 / kf;
        report.aggregate.auc += m.auc / kf;
        report.aggregate.accuracy += m.accuracy / kf;
    }
    report.aggregate.weighting = weighting;
    report.mean_auc = report.aggregate.auc;

    report.mean_tpr.assign(report.fpr_grid.size(), 0.0);
    report.sd_tpr.assign(report.fpr_grid.size(), 0.0);
    for (std::size_t g = 0; g < report.fpr_grid.size(); ++g) {
        for (const auto& tprs : grid_tprs) report.mean_tpr[g] += tprs[g] / kf;
        if (grid_tprs.size() > 1) {
            double ss = 0.0;
            for (const auto& tprs : grid_tprs) {
                ss += (tprs[g] - report.mean_tpr[g]) * (tprs[g] - report.mean_tpr[g]);
            }
            report.sd_tpr[g] = std::sqrt(ss / (kf - 1.0));
        }
    }
    return report;
}

}  // namespace rehab::models
