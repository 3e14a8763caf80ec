#pragma once

#include <string>
#include <vector>

#include "rehab/cohort.hpp"

namespace rehab::outcomes {

using cohort::Domain;
using cohort::Stage;
using cohort::StagePatient;

struct McidEstimate {
    Domain domain;
    std::size_t pooled_n = 0;
    double pooled_sd = 0.0;
    double mcid = 0.0;  // factor * pooled_sd
};

enum class Label { IMPROVED, NOT_IMPROVED };

const char* label_name(Label l);

struct StageOutcome {
    std::string patient_id;
    Domain domain;
    Stage stage;
    double delta = 0.0;  // score_end - score_start
    Label label = Label::NOT_IMPROVED;
};

// Fewer than two pooled scores.
struct InsufficientData : DataError {
    using DataError::DataError;
};

// Pools every available T0/M1/M2 score for the domain across patients and
// estimates the MCID as factor (default 0.2) times the sample SD.
McidEstimate estimate_mcid(const std::vector<cohort::PatientRecord>& records, Domain domain,
                           double factor = 0.2);

// IMPROVED iff delta is strictly greater than the MCID.
std::vector<StageOutcome> label_outcomes(const std::vector<StagePatient>& population,
                                         Domain domain, Stage stage,
                                         const McidEstimate& mcid);

}  // namespace rehab::outcomes
