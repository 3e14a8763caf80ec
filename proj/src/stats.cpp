#include "rehab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rehab/mathstats.hpp"

namespace rehab::stats {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Mid-ranks (1-based) of a value vector.
std::vector<double> midranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

const char* method_name(Method m) {
    switch (m) {
        case Method::FRIEDMAN: return "FRIEDMAN";
        case Method::WILCOXON_EXACT: return "WILCOXON_EXACT";
        case Method::WILCOXON_NORMAL: return "WILCOXON_NORMAL";
        case Method::CHI2_PEARSON: return "CHI2_PEARSON";
        case Method::CHI2_YATES: return "CHI2_YATES";
        default: return "FISHER_EXACT";
    }
}

TestResult friedman_test(const std::vector<std::vector<double>>& scores) {
    const std::size_t n = scores.size();
    if (n < 2) throw InsufficientRows("friedman_test: need at least 2 rows");
    const std::size_t k = scores.front().size();
    if (k < 2) throw InsufficientRows("friedman_test: need at least 2 columns");
    for (const auto& row : scores) {
        if (row.size() != k) throw DataError("friedman_test: ragged matrix");
        for (double v : row) {
            if (!std::isfinite(v)) throw DataError("friedman_test: non-finite entry");
        }
    }

    std::vector<double> col_rank_sum(k, 0.0);
    double rank_sq_sum = 0.0;
    for (const auto& row : scores) {
        const std::vector<double> r = midranks(row);
        for (std::size_t j = 0; j < k; ++j) {
            col_rank_sum[j] += r[j];
            rank_sq_sum += r[j] * r[j];
        }
    }

    const double nn = static_cast<double>(n);
    const double kk = static_cast<double>(k);
    const double mean_rank_sum = nn * (kk + 1.0) / 2.0;
    double numerator = 0.0;
    for (double rj : col_rank_sum) {
        numerator += (rj - mean_rank_sum) * (rj - mean_rank_sum);
    }
    // tie-corrected denominator; zero when every row is constant
    const double denominator = rank_sq_sum - nn * kk * (kk + 1.0) * (kk + 1.0) / 4.0;

    TestResult result;
    result.method = Method::FRIEDMAN;
    if (denominator <= 1e-12) {
        result.statistic = 0.0;
        result.p_value = 1.0;
        return result;
    }
    const double stat = (kk - 1.0) * numerator / denominator;
    result.statistic = stat;

    // Exact permutation p-value when the (k!)^n enumeration is affordable;
    // chi-square approximation otherwise.
    double k_fact = 1.0;
    for (std::size_t j = 2; j <= k; ++j) k_fact *= static_cast<double>(j);
    if (std::pow(k_fact, static_cast<double>(n)) <= 1e6) {
        std::vector<std::vector<double>> row_ranks(n);
        for (std::size_t i = 0; i < n; ++i) row_ranks[i] = midranks(scores[i]);
        std::vector<std::size_t> perm(k);
        for (std::size_t j = 0; j < k; ++j) perm[j] = j;
        std::vector<std::vector<std::size_t>> perms;
        do {
            perms.push_back(perm);
        } while (std::next_permutation(perm.begin(), perm.end()));

        double hits = 0.0, total = 0.0;
        std::vector<double> sums(k, 0.0);
        auto dfs = [&](auto&& self, std::size_t row) -> void {
            if (row == n) {
                double num = 0.0;
                for (double rj : sums) num += (rj - mean_rank_sum) * (rj - mean_rank_sum);
                const double s = (kk - 1.0) * num / denominator;
                total += 1.0;
                if (s >= stat - 1e-9) hits += 1.0;
                return;
            }
            for (const auto& p : perms) {
                for (std::size_t j = 0; j < k; ++j) sums[j] += row_ranks[row][p[j]];
                self(self, row + 1);
                for (std::size_t j = 0; j < k; ++j) sums[j] -= row_ranks[row][p[j]];
            }
        };
        dfs(dfs, 0);
        result.p_value = hits / total;
        return result;
    }

    result.p_value = chi2_sf(stat, kk - 1.0);
    return result;
}

TestResult wilcoxon_signed_rank(const std::vector<std::pair<double, double>>& pairs) {
    std::vector<double> diffs;
    for (const auto& [x, y] : pairs) {
        const double d = y - x;
        if (d != 0.0) diffs.push_back(d);
    }
    if (diffs.empty()) {
        throw NoNonzeroDifferences("wilcoxon_signed_rank: all differences are zero");
    }
    const std::size_t n = diffs.size();
    std::vector<double> abs_diffs(n);
    for (std::size_t i = 0; i < n; ++i) abs_diffs[i] = std::fabs(diffs[i]);
    const std::vector<double> ranks = midranks(abs_diffs);

    double w_pos = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (diffs[i] > 0.0) w_pos += ranks[i];
    }

    std::vector<double> sorted_abs = abs_diffs;
    std::sort(sorted_abs.begin(), sorted_abs.end());
    const bool has_ties =
        std::adjacent_find(sorted_abs.begin(), sorted_abs.end()) != sorted_abs.end();

    TestResult result;
    result.statistic = w_pos;
    if (n <= 25 && !has_ties) {
        // Ranks are exactly 1..n: count subsets by rank sum.
        const std::size_t max_sum = n * (n + 1) / 2;
        std::vector<double> count(max_sum + 1, 0.0);
        count[0] = 1.0;
        for (std::size_t r = 1; r <= n; ++r) {
            for (std::size_t s = max_sum; s >= r; --s) count[s] += count[s - r];
        }
        const double total = std::pow(2.0, static_cast<double>(n));
        const long w = static_cast<long>(std::llround(w_pos));
        double p_le = 0.0, p_ge = 0.0;
        for (std::size_t s = 0; s <= max_sum; ++s) {
            if (static_cast<long>(s) <= w) p_le += count[s];
            if (static_cast<long>(s) >= w) p_ge += count[s];
        }
        p_le /= total;
        p_ge /= total;
        result.method = Method::WILCOXON_EXACT;
        result.p_value = std::min(1.0, 2.0 * std::min(p_le, p_ge));
        return result;
    }

    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    double variance = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    // tie correction: subtract sum(t^3 - t)/48 over tie groups of |diff|
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && sorted_abs[j + 1] == sorted_abs[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        variance -= (t * t * t - t) / 48.0;
        i = j + 1;
    }
    result.method = Method::WILCOXON_NORMAL;
    if (variance <= 0.0) {
        result.p_value = 1.0;
        return result;
    }
    const double centered = w_pos - mean;
    const double cc = centered > 0.0 ? 0.5 : (centered < 0.0 ? -0.5 : 0.0);
    const double z = (centered - cc) / std::sqrt(variance);
    result.p_value = std::min(1.0, 2.0 * normal_sf(std::fabs(z)));
    return result;
}

ContingencyTable2x2 build_table(const std::vector<outcomes::StageOutcome>& outcome_list,
                                const std::vector<bool>& exposed) {
    if (outcome_list.size() != exposed.size()) {
        throw DataError("build_table: outcome/exposure length mismatch");
    }
    ContingencyTable2x2 t;
    for (std::size_t i = 0; i < outcome_list.size(); ++i) {
        const bool improved = outcome_list[i].label == outcomes::Label::IMPROVED;
        if (improved && exposed[i]) ++t.a;
        else if (improved) ++t.b;
        else if (exposed[i]) ++t.c;
        else ++t.d;
    }
    return t;
}

TestResult chi_square_test(const ContingencyTable2x2& t, bool yates) {
    const double n = static_cast<double>(t.n());
    const double r1 = static_cast<double>(t.improved());
    const double r2 = static_cast<double>(t.not_improved());
    const double c1 = static_cast<double>(t.exposed());
    const double c2 = static_cast<double>(t.unexposed());
    if (r1 == 0.0 || r2 == 0.0 || c1 == 0.0 || c2 == 0.0) {
        throw DegenerateMargin("chi_square_test: zero row or column margin");
    }
    const double observed[4] = {static_cast<double>(t.a), static_cast<double>(t.b),
                                static_cast<double>(t.c), static_cast<double>(t.d)};
    const double expected[4] = {r1 * c1 / n, r1 * c2 / n, r2 * c1 / n, r2 * c2 / n};
    double stat = 0.0;
    for (int i = 0; i < 4; ++i) {
        double dev = std::fabs(observed[i] - expected[i]);
        if (yates) dev = std::max(0.0, dev - 0.5);
        stat += dev * dev / expected[i];
    }
    TestResult result;
    result.method = yates ? Method::CHI2_YATES : Method::CHI2_PEARSON;
    result.statistic = stat;
    result.p_value = chi2_sf(stat, 1.0);
    return result;
}

namespace {

struct Support {
    long lo = 0;
    long hi = 0;
    // log central-hypergeometric weights, index x - lo
    std::vector<double> log_weight;
};

Support table_support(const ContingencyTable2x2& t) {
    const long r1 = t.improved();
    const long c1 = t.exposed();
    const long n = t.n();
    Support s;
    s.lo = std::max(0L, r1 + c1 - n);
    s.hi = std::min(r1, c1);
    s.log_weight.reserve(static_cast<std::size_t>(s.hi - s.lo + 1));
    for (long x = s.lo; x <= s.hi; ++x) {
        s.log_weight.push_back(log_choose(static_cast<double>(r1), static_cast<double>(x)) +
                               log_choose(static_cast<double>(n - r1),
                                          static_cast<double>(c1 - x)));
    }
    return s;
}

// Normalized noncentral weights for log(psi) = t; central when t = 0.
std::vector<double> noncentral_weights(const Support& s, double log_psi) {
    std::vector<double> w(s.log_weight.size());
    double max_lw = -kInf;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = s.log_weight[i] + static_cast<double>(s.lo + static_cast<long>(i)) * log_psi;
        max_lw = std::max(max_lw, w[i]);
    }
    double sum = 0.0;
    for (double& v : w) {
        v = std::exp(v - max_lw);
        sum += v;
    }
    for (double& v : w) v /= sum;
    return w;
}

double weights_mean(const Support& s, const std::vector<double>& w) {
    double mean = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        mean += static_cast<double>(s.lo + static_cast<long>(i)) * w[i];
    }
    return mean;
}

double weights_tail_ge(const Support& s, const std::vector<double>& w, long x) {
    double p = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (s.lo + static_cast<long>(i) >= x) p += w[i];
    }
    return p;
}

double weights_tail_le(const Support& s, const std::vector<double>& w, long x) {
    double p = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (s.lo + static_cast<long>(i) <= x) p += w[i];
    }
    return p;
}

// Bisection for a monotone increasing function of log(psi).
// Returns log(psi) with |f| driven below tol or the bracket exhausted.
template <typename F>
double solve_increasing(F f, double tol) {
    double lo = -1.0, hi = 1.0;
    double flo = f(lo), fhi = f(hi);
    int guard = 0;
    while (flo > 0.0 && guard++ < 60) {
        hi = lo;
        lo *= 2.0;
        flo = f(lo);
    }
    guard = 0;
    while (fhi < 0.0 && guard++ < 60) {
        lo = hi;
        hi *= 2.0;
        fhi = f(hi);
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (std::fabs(fm) < tol || hi - lo < 1e-13) return mid;
        if (fm < 0.0) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

double noncentral_hypergeom_mean(const ContingencyTable2x2& table, double psi) {
    const Support s = table_support(table);
    return weights_mean(s, noncentral_weights(s, std::log(psi)));
}

double noncentral_hypergeom_cdf(const ContingencyTable2x2& table, double psi, long x) {
    const Support s = table_support(table);
    return weights_tail_le(s, noncentral_weights(s, std::log(psi)), x);
}

double noncentral_hypergeom_sf(const ContingencyTable2x2& table, double psi, long x) {
    const Support s = table_support(table);
    return weights_tail_ge(s, noncentral_weights(s, std::log(psi)), x);
}

TestResult fisher_exact(const ContingencyTable2x2& t) {
    const Support s = table_support(t);
    const std::vector<double> w = noncentral_weights(s, 0.0);
    const double p_obs = w[static_cast<std::size_t>(t.a - s.lo)];
    double p = 0.0;
    for (double v : w) {
        if (v <= p_obs * (1.0 + 1e-7)) p += v;
    }
    TestResult result;
    result.method = Method::FISHER_EXACT;
    result.p_value = std::min(1.0, p);
    return result;
}

OddsRatioEstimate sample_odds_ratio(const ContingencyTable2x2& t, double level) {
    const double ad = static_cast<double>(t.a) * static_cast<double>(t.d);
    const double bc = static_cast<double>(t.b) * static_cast<double>(t.c);
    OddsRatioEstimate est;
    est.estimator = OrEstimator::SAMPLE;
    est.level = level;
    if (ad == 0.0 && bc == 0.0) {
        throw UndefinedOddsRatio("sample_odds_ratio: a*d and b*c are both zero");
    }
    est.or_value = bc == 0.0 ? kInf : ad / bc;

    // Woolf CI; Haldane-Anscombe correction for the CI only
    const bool any_zero = t.a == 0 || t.b == 0 || t.c == 0 || t.d == 0;
    const double shift = any_zero ? 0.5 : 0.0;
    const double a = static_cast<double>(t.a) + shift;
    const double b = static_cast<double>(t.b) + shift;
    const double c = static_cast<double>(t.c) + shift;
    const double d = static_cast<double>(t.d) + shift;
    const double log_or = std::log(a * d / (b * c));
    const double se = std::sqrt(1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d);
    const double z = 1.959963984540054;  // Phi^-1(0.975)
    est.ci_low = std::exp(log_or - z * se);
    est.ci_high = std::exp(log_or + z * se);
    return est;
}

OddsRatioEstimate conditional_mle_odds_ratio(const ContingencyTable2x2& t, double level) {
    const Support s = table_support(t);
    OddsRatioEstimate est;
    est.estimator = OrEstimator::CONDITIONAL_MLE;
    est.level = level;
    if (s.lo == s.hi) {
        // only one table is compatible with the margins
        est.defined = false;
        est.or_value = std::numeric_limits<double>::quiet_NaN();
        est.ci_low = 0.0;
        est.ci_high = kInf;
        return est;
    }
    const long a = t.a;
    const double alpha = (1.0 - level) / 2.0;

    if (a == s.lo) {
        est.or_value = 0.0;
    } else if (a == s.hi) {
        est.or_value = kInf;
    } else {
        const double root = solve_increasing(
            [&](double lp) {
                return weights_mean(s, noncentral_weights(s, lp)) - static_cast<double>(a);
            },
            1e-11);
        est.or_value = std::exp(root);
    }

    if (a == s.lo) {
        est.ci_low = 0.0;
    } else {
        // P_psi(X >= a) grows with psi
        const double root = solve_increasing(
            [&](double lp) {
                return weights_tail_ge(s, noncentral_weights(s, lp), a) - alpha;
            },
            1e-11);
        est.ci_low = std::exp(root);
    }
    if (a == s.hi) {
        est.ci_high = kInf;
    } else {
        // P_psi(X <= a) falls with psi; negate to get an increasing function
        const double root = solve_increasing(
            [&](double lp) {
                return alpha - weights_tail_le(s, noncentral_weights(s, lp), a);
            },
            1e-11);
        est.ci_high = std::exp(root);
    }
    return est;
}

std::vector<ExposureView> feature_exposures(const std::vector<cohort::StagePatient>& population,
                                            const notes::ExerciseLexicon& lexicon, Stage stage) {
    std::vector<ExposureView> views;
    const std::size_t n = population.size();
    for (const auto& entry : lexicon.entries) {
        ExposureView v{entry.canonical, "EXERCISE", std::vector<bool>(n, false)};
        for (std::size_t i = 0; i < n; ++i) {
            const auto& exp = population[i].record->exposures;
            auto it = exp.find(stage);
            v.exposed[i] = it != exp.end() && it->second.count(entry.canonical) > 0;
        }
        views.push_back(std::move(v));
    }
    auto add_demo = [&](const std::string& name, const std::string& kind, auto pred) {
        ExposureView v{name, kind, std::vector<bool>(n, false)};
        for (std::size_t i = 0; i < n; ++i) {
            v.exposed[i] = pred(population[i].record->demographics);
        }
        views.push_back(std::move(v));
    };
    add_demo("SEX=FEMALE", "SEX",
             [](const cohort::Demographics& d) { return d.sex == cohort::Sex::FEMALE; });
    add_demo("SEX=MALE", "SEX",
             [](const cohort::Demographics& d) { return d.sex == cohort::Sex::MALE; });
    add_demo("RACE=WHITE", "RACE",
             [](const cohort::Demographics& d) { return d.race == cohort::Race::WHITE; });
    add_demo("RACE=NOT_WHITE", "RACE",
             [](const cohort::Demographics& d) { return d.race == cohort::Race::NOT_WHITE; });
    add_demo("AGE=UNDER_40", "AGE",
             [](const cohort::Demographics& d) { return d.age_bin() == cohort::AgeBin::UNDER_40; });
    add_demo("AGE=FROM_40_TO_60", "AGE", [](const cohort::Demographics& d) {
        return d.age_bin() == cohort::AgeBin::FROM_40_TO_60;
    });
    add_demo("AGE=OVER_60", "AGE",
             [](const cohort::Demographics& d) { return d.age_bin() == cohort::AgeBin::OVER_60; });
    return views;
}

std::vector<AssociationResult> association_screen(
    const std::vector<outcomes::StageOutcome>& outcome_list,
    const std::vector<ExposureView>& exposures, const ScreenConfig& config) {
    std::vector<AssociationResult> results;
    for (const ExposureView& view : exposures) {
        AssociationResult r;
        r.feature = view.feature;
        r.feature_kind = view.feature_kind;
        r.table = build_table(outcome_list, view.exposed);

        bool use_fisher;
        if (config.expected_count_rule) {
            const double n = static_cast<double>(r.table.n());
            const double r1 = static_cast<double>(r.table.improved());
            const double c1 = static_cast<double>(r.table.exposed());
            use_fisher = n == 0.0;
            if (!use_fisher) {
                const double e[4] = {r1 * c1 / n, r1 * (n - c1) / n, (n - r1) * c1 / n,
                                     (n - r1) * (n - c1) / n};
                for (double v : e) use_fisher = use_fisher || v < config.small_cell_cutoff;
            }
        } else {
            use_fisher = r.table.a < config.small_cell_cutoff ||
                         r.table.b < config.small_cell_cutoff ||
                         r.table.c < config.small_cell_cutoff ||
                         r.table.d < config.small_cell_cutoff;
        }
        if (!use_fisher) {
            try {
                r.test = chi_square_test(r.table, config.yates);
            } catch (const DegenerateMargin&) {
                use_fisher = true;
            }
        }
        if (use_fisher) r.test = fisher_exact(r.table);

        r.conditional_or = conditional_mle_odds_ratio(r.table);
        try {
            r.sample_or = sample_odds_ratio(r.table);
        } catch (const UndefinedOddsRatio&) {
            r.sample_or.defined = false;
            r.sample_or.or_value = std::numeric_limits<double>::quiet_NaN();
            r.sample_or.ci_low = 0.0;
            r.sample_or.ci_high = kInf;
        }

        if (r.test.p_value < config.p_threshold) results.push_back(std::move(r));
    }
    std::sort(results.begin(), results.end(),
              [](const AssociationResult& x, const AssociationResult& y) {
                  if (x.test.p_value != y.test.p_value) return x.test.p_value < y.test.p_value;
                  return x.feature < y.feature;
              });
    return results;
}

}  // namespace rehab::stats
