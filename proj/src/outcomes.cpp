#include "rehab/outcomes.hpp"

#include <cmath>

namespace rehab::outcomes {

const char* label_name(Label l) {
    return l == Label::IMPROVED ? "IMPROVED" : "NOT_IMPROVED";
}

McidEstimate estimate_mcid(const std::vector<cohort::PatientRecord>& records, Domain domain,
                           double factor) {
    std::vector<double> pooled;
    for (const auto& rec : records) {
        for (cohort::Timepoint t :
             {cohort::Timepoint::T0, cohort::Timepoint::M1, cohort::Timepoint::M2}) {
            if (auto s = rec.score(domain, t)) pooled.push_back(*s);
        }
    }
    if (pooled.size() < 2) {
        throw InsufficientData("estimate_mcid: need at least 2 pooled scores, have " +
                               std::to_string(pooled.size()));
    }
    double mean = 0.0;
    for (double s : pooled) mean += s;
    mean /= static_cast<double>(pooled.size());
    double ss = 0.0;
    for (double s : pooled) ss += (s - mean) * (s - mean);
    const double sd = std::sqrt(ss / static_cast<double>(pooled.size() - 1));

    McidEstimate est;
    est.domain = domain;
    est.pooled_n = pooled.size();
    est.pooled_sd = sd;
    est.mcid = factor * sd;
    return est;
}

std::vector<StageOutcome> label_outcomes(const std::vector<StagePatient>& population,
                                         Domain domain, Stage stage,
                                         const McidEstimate& mcid) {
    std::vector<StageOutcome> out;
    out.reserve(population.size());
    for (const StagePatient& p : population) {
        StageOutcome o;
        o.patient_id = p.record->patient_id;
        o.domain = domain;
        o.stage = stage;
        o.delta = p.score_end - p.score_start;
        o.label = o.delta > mcid.mcid ? Label::IMPROVED : Label::NOT_IMPROVED;
        out.push_back(std::move(o));
    }
    return out;
}

}  // namespace rehab::outcomes
