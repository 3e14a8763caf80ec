#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rehab/outcomes.hpp"
#include "rehab/rng.hpp"

namespace rehab::models {

using cohort::Domain;
using cohort::Stage;

struct FeatureMatrix {
    std::vector<std::string> column_names;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;  // 1 = IMPROVED, 0 = NOT_IMPROVED
    std::vector<std::string> patient_ids;

    std::size_t n_rows() const { return rows.size(); }
    std::size_t n_cols() const { return column_names.size(); }
};

enum class ModelKind { LR, ADB, SVM, GB, RF };

const char* model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& name);

struct Hyperparameters {
    // LR: L2-regularized logistic loss, full-batch gradient descent
    double lr_lambda = 1.0;
    int lr_max_iters = 1000;
    double lr_tolerance = 1e-6;
    // SVM: linear hinge + L2 via deterministic subgradient descent
    double svm_lambda = 0.01;
    int svm_iters = 500;
    // ADB: SAMME with depth-1 stumps
    int adb_rounds = 100;
    double adb_learning_rate = 1.0;
    // GB: logistic-loss boosting with depth-3 regression trees
    int gb_rounds = 100;
    int gb_depth = 3;
    double gb_shrinkage = 0.1;
    // RF
    int rf_trees = 200;
    int rf_max_depth = 25;
};

struct ModelSpec {
    ModelKind kind = ModelKind::RF;
    Hyperparameters params;
    std::uint64_t seed = 0;
};

struct SingleClass : DataError {
    using DataError::DataError;
};
struct ClassTooSmall : DataError {
    using DataError::DataError;
};
struct DimensionMismatch : DataError {
    using DataError::DataError;
};
struct NonFiniteFeature : DataError {
    using DataError::DataError;
};
struct EmptyInput : DataError {
    using DataError::DataError;
};

class Model {
public:
    virtual ~Model() = default;
    virtual double predict_proba(const std::vector<double>& row) const = 0;
    virtual ModelKind kind() const = 0;
    // Versioned JSON document with architecture and learned parameters.
    virtual std::string to_json() const = 0;
};

// One row per stage-population patient: lexicon-ordered exercise indicators,
// then sex, race, and the three age-bin one-hots.
FeatureMatrix build_features(const std::vector<cohort::StagePatient>& population,
                             const std::vector<outcomes::StageOutcome>& outcome_list,
                             const notes::ExerciseLexicon& lexicon, Stage stage);

// Stratified k folds: within each class, indices are shuffled and dealt
// round-robin, so per-fold class proportions stay within one member of the
// global proportions. Deterministic given the seed.
std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<int>& labels,
                                                       std::size_t k, std::uint64_t seed);

// Duplicates minority rows (with replacement) until class counts are equal.
void oversample(std::vector<std::vector<double>>& rows, std::vector<int>& labels,
                std::uint64_t seed);

std::unique_ptr<Model> train(const ModelSpec& spec,
                             const std::vector<std::vector<double>>& rows,
                             const std::vector<int>& labels);

enum class Weighting { INVERSE_FREQUENCY, SUPPORT };

struct EvalMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    double accuracy = 0.0;
    Weighting weighting = Weighting::INVERSE_FREQUENCY;
};

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (fpr, tpr), anchored
    double auc = 0.0;
};

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels);

EvalMetrics evaluate(const std::vector<double>& scores, const std::vector<int>& labels,
                     double threshold = 0.5,
                     Weighting weighting = Weighting::INVERSE_FREQUENCY);

struct CvReport {
    std::vector<EvalMetrics> per_fold;
    EvalMetrics aggregate;  // arithmetic mean of the folds
    std::vector<double> fpr_grid;     // {0, 0.01, ..., 1}
    std::vector<double> mean_tpr;
    std::vector<double> sd_tpr;
    double mean_auc = 0.0;
};

// Per fold: oversample the training split only, train, score the held-out
// fold. Mean ROC by vertical averaging on the fixed FPR grid.
CvReport cross_validate(const ModelSpec& spec, const FeatureMatrix& features, std::size_t k,
                        std::uint64_t seed,
                        Weighting weighting = Weighting::INVERSE_FREQUENCY,
                        bool oversample_training = true);

// Linear interpolation of a ROC polyline at one FPR value.
double roc_interpolate(const RocCurve& curve, double fpr);

}  // namespace rehab::models
