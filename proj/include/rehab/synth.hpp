#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rehab/cohort.hpp"
#include "rehab/stats.hpp"

namespace rehab::synth {

using cohort::Domain;
using cohort::Stage;

struct PlantedEffect {
    std::string exercise;  // lexicon canonical
    Domain domain = Domain::BM;
    Stage stage = Stage::EARLY;
    double odds_ratio = 1.0;
};

struct SynthConfig {
    std::size_t n_patients = 265;
    // demographic mix (remaining age mass falls in the over-60 bin)
    double female_rate = 0.48;
    double white_rate = 0.81;
    double age_under_40_rate = 0.06;
    double age_40_to_60_rate = 0.28;
    // score model: T0 drawn near the baseline, improvements push scores up by
    // more than any realizable MCID, non-improvements never gain
    double t0_mean = 12.0;
    double t0_sd = 2.5;
    double improve_base_rate = 0.25;   // P(improve | unexposed)
    double exposure_base_rate = 0.15;  // per exercise, per stage
    double missing_rate = 0.0;         // per (domain, timepoint) dropout
    std::vector<PlantedEffect> planted;
    std::uint64_t seed = 1;

    void validate() const;
};

// What the generator knows about its own cohort; used to verify the
// extraction and labeling pipeline end to end.
struct GroundTruth {
    // improvement label per (patient, domain, stage); present timepoints only
    std::map<std::string, std::map<Domain, std::map<Stage, bool>>> improved;
    std::map<std::string, std::map<Stage, std::set<std::string>>> exposures;
    std::size_t ampac_observation_count = 0;
};

struct SynthOutput {
    std::vector<notes::ProcedureNote> note_list;
    std::vector<std::pair<std::string, cohort::Demographics>> demographics;
    GroundTruth truth;
};

// Deterministic synthetic cohort with configurable planted exercise effects.
// Exposed vs unexposed improvement log-odds differ by ln(odds_ratio_target).
SynthOutput generate(const SynthConfig& config,
                     const notes::ExerciseLexicon& lexicon = notes::default_lexicon());

// Minimal cohort reproducing one printed 2x2 table row: a+b improved and
// c+d not-improved patients with exposures matching the cells, so the
// association screen returns exactly these counts.
SynthOutput replay_table(const stats::ContingencyTable2x2& counts, const std::string& feature,
                         Stage stage, Domain domain,
                         const notes::ExerciseLexicon& lexicon = notes::default_lexicon());

// Key-value config file (key = value, '#' comments). Unknown keys rejected.
SynthConfig parse_config(const std::string& content, const std::string& origin);
SynthConfig load_config(const std::string& path);

}  // namespace rehab::synth
