#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rehab/outcomes.hpp"

namespace rehab::stats {

using cohort::Domain;
using cohort::Stage;

struct ContingencyTable2x2 {
    // a: improved & exposed, b: improved & unexposed,
    // c: not-improved & exposed, d: not-improved & unexposed
    long a = 0;
    long b = 0;
    long c = 0;
    long d = 0;

    long n() const { return a + b + c + d; }
    long improved() const { return a + b; }
    long not_improved() const { return c + d; }
    long exposed() const { return a + c; }
    long unexposed() const { return b + d; }
};

enum class Method {
    FRIEDMAN,
    WILCOXON_EXACT,
    WILCOXON_NORMAL,
    CHI2_PEARSON,
    CHI2_YATES,
    FISHER_EXACT,
};

const char* method_name(Method m);

struct TestResult {
    std::optional<double> statistic;
    double p_value = 1.0;
    Method method = Method::FISHER_EXACT;
};

enum class OrEstimator { SAMPLE, CONDITIONAL_MLE };

struct OddsRatioEstimate {
    OrEstimator estimator = OrEstimator::SAMPLE;
    double or_value = 0.0;  // may be +inf
    double ci_low = 0.0;
    double ci_high = 0.0;   // may be +inf
    double level = 0.95;
    bool defined = true;    // false for degenerate support / 0*inf cases
};

struct AssociationResult {
    std::string feature;          // canonical exercise or demographic level
    std::string feature_kind;     // "EXERCISE", "SEX", "RACE", "AGE"
    ContingencyTable2x2 table;
    TestResult test;
    OddsRatioEstimate conditional_or;
    OddsRatioEstimate sample_or;
};

struct InsufficientRows : DataError {
    using DataError::DataError;
};
struct NoNonzeroDifferences : DataError {
    using DataError::DataError;
};
struct DegenerateMargin : DataError {
    using DataError::DataError;
};
struct UndefinedOddsRatio : DataError {
    using DataError::DataError;
};

// Friedman rank test over an n x k matrix (k = 3 for the T0/M1/M2 timeline).
// Mid-rank ties, tie-corrected statistic. Exact permutation p-value while the
// (k!)^n enumeration stays under a million tables, chi-square approximation
// with k-1 degrees of freedom beyond that.
TestResult friedman_test(const std::vector<std::vector<double>>& scores);

// Two-sided Wilcoxon signed-rank test. Zero differences are dropped,
// mid-ranks on |diff|. Exact enumeration when effective n <= 25 and the
// absolute differences are tie-free, otherwise a normal approximation with
// tie variance correction and continuity correction.
TestResult wilcoxon_signed_rank(const std::vector<std::pair<double, double>>& pairs);

struct ScreenConfig {
    double p_threshold = 0.3;
    bool yates = true;               // continuity correction for chi-square
    long small_cell_cutoff = 5;      // Fisher when any cell is below this
    bool expected_count_rule = false;  // use expected (not observed) counts
};

// Cross-tabulate improvement against exposure to one feature.
ContingencyTable2x2 build_table(const std::vector<outcomes::StageOutcome>& outcome_list,
                                const std::vector<bool>& exposed);

// Pearson chi-square with optional Yates continuity correction, 1 df.
TestResult chi_square_test(const ContingencyTable2x2& table, bool yates);

// Two-sided Fisher exact p: sum of central-hypergeometric probabilities of
// all same-margin tables whose probability is <= the observed table's
// (relative tie tolerance 1e-7).
TestResult fisher_exact(const ContingencyTable2x2& table);

// Sample OR (a*d)/(b*c) with a Woolf logit CI; Haldane-Anscombe +0.5 applied
// to every cell for the CI only when any cell is zero.
OddsRatioEstimate sample_odds_ratio(const ContingencyTable2x2& table, double level = 0.95);

// Conditional MLE under Fisher's noncentral hypergeometric distribution with
// the observed margins; exact CI by tail-probability inversion. This is the
// convention behind standard Fisher-exact software output.
OddsRatioEstimate conditional_mle_odds_ratio(const ContingencyTable2x2& table,
                                             double level = 0.95);

// Noncentral hypergeometric helpers (exposed for verification tests).
// Margins taken from `table`; x plays the role of cell a.
double noncentral_hypergeom_mean(const ContingencyTable2x2& table, double psi);
double noncentral_hypergeom_cdf(const ContingencyTable2x2& table, double psi, long x);
double noncentral_hypergeom_sf(const ContingencyTable2x2& table, double psi, long x);

struct ExposureView {
    std::string feature;
    std::string feature_kind;
    std::vector<bool> exposed;  // aligned with the outcome list
};

// Exposure indicator vectors for every lexicon exercise and demographic
// level, aligned with `population`.
std::vector<ExposureView> feature_exposures(const std::vector<cohort::StagePatient>& population,
                                            const notes::ExerciseLexicon& lexicon, Stage stage);

// The association screen: per feature, pick Fisher (small cells) or
// chi-square, attach conditional-MLE and sample ORs, retain p < threshold,
// sort by ascending p (feature name breaks ties).
std::vector<AssociationResult> association_screen(
    const std::vector<outcomes::StageOutcome>& outcome_list,
    const std::vector<ExposureView>& exposures, const ScreenConfig& config = {});

}  // namespace rehab::stats
