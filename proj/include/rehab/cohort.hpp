#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rehab/note_parser.hpp"

namespace rehab::cohort {

using notes::Domain;

enum class Sex { FEMALE, MALE };
enum class Race { WHITE, NOT_WHITE };
enum class AgeBin { UNDER_40, FROM_40_TO_60, OVER_60 };

const char* sex_name(Sex s);
const char* race_name(Race r);
const char* age_bin_name(AgeBin b);

AgeBin age_bin_for(int age_years);

struct Demographics {
    Sex sex = Sex::FEMALE;
    Race race = Race::WHITE;
    int age_years = 0;

    bool operator==(const Demographics&) const = default;

    AgeBin age_bin() const { return age_bin_for(age_years); }
};

enum class Timepoint { T0, M1, M2 };
enum class Stage { EARLY, LATE };

const char* timepoint_name(Timepoint t);
const char* stage_name(Stage s);

// Endpoints of a stage in the T0/M1/M2 timeline.
Timepoint stage_start(Stage s);
Timepoint stage_end(Stage s);

struct BinningConfig {
    int month1_days = 30;   // M1 anchor relative to T0
    int month2_days = 60;   // M2 anchor relative to T0
    int window_days = 15;   // accept observations within +/- window of an anchor
};

struct PatientRecord {
    std::string patient_id;
    Demographics demographics;
    // at most one score per (domain, timepoint)
    std::map<std::pair<Domain, Timepoint>, double> scores;
    std::map<Stage, std::set<std::string>> exposures;

    std::optional<double> score(Domain d, Timepoint t) const {
        auto it = scores.find({d, t});
        if (it == scores.end()) return std::nullopt;
        return it->second;
    }
};

struct StagePatient {
    const PatientRecord* record;
    double score_start;
    double score_end;
};

// A note references a patient_id absent from the demographics table.
struct UnknownPatient : DataError {
    using DataError::DataError;
};

// Bin AM-PAC observations to T0/M1/M2 and attach stage exposure sets.
// T0 is the earliest dated observation per domain; M1/M2 are the
// observations nearest their anchors within the window, ties broken
// toward the earlier date. Order of the input note list does not matter.
std::vector<PatientRecord> assemble(const std::vector<notes::ProcedureNote>& note_list,
                                    const std::map<std::string, Demographics>& demographics,
                                    const notes::ExerciseLexicon& lexicon,
                                    const notes::PatternSet& patterns,
                                    const BinningConfig& binning = {});

// Complete-case filter: patients with both endpoint scores for the stage.
std::vector<StagePatient> stage_population(const std::vector<PatientRecord>& records,
                                           Domain domain, Stage stage);

}  // namespace rehab::cohort
