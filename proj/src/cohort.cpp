#include "rehab/cohort.hpp"

#include <algorithm>
#include <cmath>

namespace rehab::cohort {

const char* sex_name(Sex s) { return s == Sex::FEMALE ? "FEMALE" : "MALE"; }
const char* race_name(Race r) { return r == Race::WHITE ? "WHITE" : "NOT_WHITE"; }

const char* age_bin_name(AgeBin b) {
    switch (b) {
        case AgeBin::UNDER_40: return "UNDER_40";
        case AgeBin::FROM_40_TO_60: return "FROM_40_TO_60";
        default: return "OVER_60";
    }
}

AgeBin age_bin_for(int age_years) {
    if (age_years < 40) return AgeBin::UNDER_40;
    if (age_years <= 60) return AgeBin::FROM_40_TO_60;
    return AgeBin::OVER_60;
}

const char* timepoint_name(Timepoint t) {
    switch (t) {
        case Timepoint::T0: return "T0";
        case Timepoint::M1: return "M1";
        default: return "M2";
    }
}

const char* stage_name(Stage s) { return s == Stage::EARLY ? "EARLY" : "LATE"; }

Timepoint stage_start(Stage s) {
    return s == Stage::EARLY ? Timepoint::T0 : Timepoint::M1;
}

Timepoint stage_end(Stage s) {
    return s == Stage::EARLY ? Timepoint::M1 : Timepoint::M2;
}

namespace {

struct DatedObservation {
    long day;            // days since epoch
    double score;
    std::size_t order;   // stable document order for same-date tie-breaks
};

// Pick the observation nearest the anchor within +/- window among dates
// strictly after `after_day` and not in `used`. Ties go to the earlier date.
std::optional<std::size_t> pick_nearest(const std::vector<DatedObservation>& obs,
                                        long anchor, int window, long after_day,
                                        const std::vector<bool>& used) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (used[i] || obs[i].day <= after_day) continue;
        const long dist = std::labs(obs[i].day - anchor);
        if (dist > window) continue;
        if (!best) {
            best = i;
            continue;
        }
        const long best_dist = std::labs(obs[*best].day - anchor);
        if (dist < best_dist || (dist == best_dist && obs[i].day < obs[*best].day)) best = i;
    }
    return best;
}

}  // namespace

std::vector<PatientRecord> assemble(const std::vector<notes::ProcedureNote>& note_list,
                                    const std::map<std::string, Demographics>& demographics,
                                    const notes::ExerciseLexicon& lexicon,
                                    const notes::PatternSet& patterns,
                                    const BinningConfig& binning) {
    struct PerPatient {
        std::map<Domain, std::vector<DatedObservation>> observations;
        std::vector<std::pair<long, std::set<std::string>>> exercise_days;
    };
    std::map<std::string, PerPatient> by_patient;

    // Sort note indices by (date, patient, input order) so that "last mention
    // in document order" is well defined and independent of list permutation
    // apart from genuinely identical (patient, date) duplicates.
    std::vector<std::size_t> order(note_list.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& na = note_list[a];
        const auto& nb = note_list[b];
        if (na.note_date != nb.note_date) return na.note_date < nb.note_date;
        return na.patient_id < nb.patient_id;
    });

    std::size_t seq = 0;
    for (std::size_t idx : order) {
        const notes::ProcedureNote& note = note_list[idx];
        if (!demographics.count(note.patient_id)) {
            throw UnknownPatient("note for unknown patient '" + note.patient_id + "'");
        }
        PerPatient& pp = by_patient[note.patient_id];
        const long day = note.note_date.to_days();
        for (const auto& obs : notes::extract_ampac(note, patterns)) {
            pp.observations[obs.domain].push_back({day, obs.score, seq++});
        }
        auto extraction = notes::extract_exercises(note, lexicon);
        if (!extraction.canonicals.empty()) {
            pp.exercise_days.emplace_back(day, std::move(extraction.canonicals));
        }
    }

    std::vector<PatientRecord> records;
    for (auto& [patient_id, pp] : by_patient) {
        PatientRecord rec;
        rec.patient_id = patient_id;
        rec.demographics = demographics.at(patient_id);
        rec.exposures[Stage::EARLY] = {};
        rec.exposures[Stage::LATE] = {};

        std::optional<long> t0_day;
        for (auto& [domain, observations] : pp.observations) {
            // collapse to one value per date: last mention wins
            std::map<long, DatedObservation> per_date;
            for (const DatedObservation& o : observations) {
                auto it = per_date.find(o.day);
                if (it == per_date.end() || o.order > it->second.order) per_date[o.day] = o;
            }
            std::vector<DatedObservation> daily;
            daily.reserve(per_date.size());
            for (auto& [day, o] : per_date) daily.push_back(o);
            if (daily.empty()) continue;

            const long d0 = daily.front().day;
            rec.scores[{domain, Timepoint::T0}] = daily.front().score;
            if (!t0_day || d0 < *t0_day) t0_day = d0;

            std::vector<bool> used(daily.size(), false);
            used[0] = true;
            if (auto m1 = pick_nearest(daily, d0 + binning.month1_days, binning.window_days,
                                       d0, used)) {
                used[*m1] = true;
                rec.scores[{domain, Timepoint::M1}] = daily[*m1].score;
            }
            if (auto m2 = pick_nearest(daily, d0 + binning.month2_days, binning.window_days,
                                       d0, used)) {
                used[*m2] = true;
                rec.scores[{domain, Timepoint::M2}] = daily[*m2].score;
            }
        }

        if (t0_day) {
            const long early_end = *t0_day + binning.month1_days + binning.window_days;
            const long late_end = *t0_day + binning.month2_days + binning.window_days;
            for (const auto& [day, names] : pp.exercise_days) {
                if (day <= *t0_day || day > late_end) continue;
                auto& target = day <= early_end ? rec.exposures[Stage::EARLY]
                                                : rec.exposures[Stage::LATE];
                target.insert(names.begin(), names.end());
            }
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<StagePatient> stage_population(const std::vector<PatientRecord>& records,
                                           Domain domain, Stage stage) {
    std::vector<StagePatient> out;
    for (const PatientRecord& rec : records) {
        const auto start = rec.score(domain, stage_start(stage));
        const auto end = rec.score(domain, stage_end(stage));
        if (start && end) out.push_back({&rec, *start, *end});
    }
    return out;
}

}  // namespace rehab::cohort
