#include "rehab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rehab/rng.hpp"

namespace rehab::synth {

namespace {

constexpr long kEpochYear = 2023;

Date day_to_date(long day) {
    return Date{static_cast<int>(kEpochYear), 1, 1}.plus_days(day);
}

std::string format_tenths(long tenths) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%ld.%ld", tenths / 10, std::labs(tenths % 10));
    return buf;
}

std::string patient_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "P%05zu", i + 1);
    return buf;
}

const char* ampac_domain_phrase(Domain d) {
    return d == Domain::BM ? "Basic Mobility" : "Applied Cognitive";
}

// Distractor sentences; none of them contains a lexicon key phrase.
const char* kIntro = "Patient attended outpatient therapy today. ";
const char* kOutro = " Tolerated the session without adverse events.";

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

void SynthConfig::validate() const {
    if (n_patients < 1) throw ConfigError("synth: n_patients must be >= 1");
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ConfigError(std::string("synth: ") + name + " must be in [0, 1]");
        }
    };
    prob(female_rate, "female_rate");
    prob(white_rate, "white_rate");
    prob(age_under_40_rate, "age_under_40_rate");
    prob(age_40_to_60_rate, "age_40_to_60_rate");
    prob(exposure_base_rate, "exposure_base_rate");
    prob(missing_rate, "missing_rate");
    if (age_under_40_rate + age_40_to_60_rate > 1.0) {
        throw ConfigError("synth: age bin rates must sum to <= 1");
    }
    if (!(improve_base_rate > 0.0 && improve_base_rate < 1.0)) {
        throw ConfigError("synth: improve_base_rate must be in (0, 1)");
    }
    if (!(t0_sd >= 0.0) || !(t0_mean > 0.0)) {
        throw ConfigError("synth: t0_mean must be > 0 and t0_sd >= 0");
    }
    for (const PlantedEffect& e : planted) {
        if (!(e.odds_ratio > 0.0)) throw ConfigError("synth: planted odds ratio must be > 0");
    }
}

SynthOutput generate(const SynthConfig& config, const notes::ExerciseLexicon& lexicon) {
    config.validate();
    SynthOutput out;

    {
        std::set<std::string> canonicals;
        for (const auto& e : lexicon.entries) canonicals.insert(e.canonical);
        for (const PlantedEffect& e : config.planted) {
            if (!canonicals.count(e.exercise)) {
                throw ConfigError("synth: planted exercise '" + e.exercise +
                                  "' is not in the lexicon");
            }
        }
    }

    for (std::size_t pi = 0; pi < config.n_patients; ++pi) {
        Rng rng(derive_seed(config.seed, pi));
        const std::string id = patient_name(pi);

        cohort::Demographics demo;
        demo.sex = rng.next_double() < config.female_rate ? cohort::Sex::FEMALE
                                                          : cohort::Sex::MALE;
        demo.race = rng.next_double() < config.white_rate ? cohort::Race::WHITE
                                                          : cohort::Race::NOT_WHITE;
        const double u_age = rng.next_double();
        if (u_age < config.age_under_40_rate) {
            demo.age_years = 18 + static_cast<int>(rng.below(22));  // 18..39
        } else if (u_age < config.age_under_40_rate + config.age_40_to_60_rate) {
            demo.age_years = 40 + static_cast<int>(rng.below(21));  // 40..60
        } else {
            demo.age_years = 61 + static_cast<int>(rng.below(30));  // 61..90
        }
        out.demographics.emplace_back(id, demo);

        // stage exposures, one draw per exercise per stage
        std::map<Stage, std::set<std::string>> exposures;
        for (Stage stage : {Stage::EARLY, Stage::LATE}) {
            for (const auto& entry : lexicon.entries) {
                if (rng.next_double() < config.exposure_base_rate) {
                    exposures[stage].insert(entry.canonical);
                }
            }
        }
        out.truth.exposures[id] = exposures;

        // scores in integer tenths; improvements exceed any realizable MCID
        // (pooled scores stay inside [0, 24], so MCID <= 2.4 < smallest gain)
        std::map<Domain, long> tenths;
        for (Domain d : {Domain::BM, Domain::AC}) {
            long t0 = std::lround((config.t0_mean + config.t0_sd * rng.normal()) * 10.0);
            tenths[d] = std::clamp(t0, 50L, 140L);
        }

        std::map<Domain, std::map<cohort::Timepoint, long>> score_tenths;
        for (Domain d : {Domain::BM, Domain::AC}) {
            score_tenths[d][cohort::Timepoint::T0] = tenths[d];
            long current = tenths[d];
            for (Stage stage : {Stage::EARLY, Stage::LATE}) {
                double z = logit(config.improve_base_rate);
                for (const PlantedEffect& e : config.planted) {
                    if (e.domain == d && e.stage == stage &&
                        exposures[stage].count(e.exercise)) {
                        z += std::log(e.odds_ratio);
                    }
                }
                const bool improved = rng.next_double() < sigmoid(z);
                out.truth.improved[id][d][stage] = improved;
                const long delta = improved ? 25 + static_cast<long>(rng.below(26))
                                            : -static_cast<long>(rng.below(21));
                current += delta;
                const cohort::Timepoint tp =
                    stage == Stage::EARLY ? cohort::Timepoint::M1 : cohort::Timepoint::M2;
                score_tenths[d][tp] = current;
            }
        }

        // missingness: drop whole (domain, timepoint) observations
        for (Domain d : {Domain::BM, Domain::AC}) {
            for (cohort::Timepoint tp :
                 {cohort::Timepoint::T0, cohort::Timepoint::M1, cohort::Timepoint::M2}) {
                if (config.missing_rate > 0.0 && rng.next_double() < config.missing_rate) {
                    score_tenths[d].erase(tp);
                }
            }
        }
        // keep ground truth consistent with what actually gets written; a
        // dropped T0 re-anchors the whole timeline, so the domain's labels
        // are no longer meaningful
        for (Domain d : {Domain::BM, Domain::AC}) {
            const auto& present = score_tenths[d];
            if (!present.count(cohort::Timepoint::T0)) {
                out.truth.improved[id].erase(d);
                continue;
            }
            if (!present.count(cohort::Timepoint::M1)) {
                out.truth.improved[id][d].erase(Stage::EARLY);
            }
            if (!present.count(cohort::Timepoint::M1) || !present.count(cohort::Timepoint::M2)) {
                out.truth.improved[id][d].erase(Stage::LATE);
            }
        }

        // notes: AM-PAC scores on days 0/30/60, exercises on days 10/50
        const long tp_day[3] = {0, 30, 60};
        const cohort::Timepoint tps[3] = {cohort::Timepoint::T0, cohort::Timepoint::M1,
                                          cohort::Timepoint::M2};
        for (int t = 0; t < 3; ++t) {
            std::ostringstream text;
            text << kIntro;
            for (Domain d : {Domain::BM, Domain::AC}) {
                auto it = score_tenths[d].find(tps[t]);
                if (it == score_tenths[d].end()) continue;
                text << "AM-PAC " << ampac_domain_phrase(d) << " score "
                     << format_tenths(it->second) << ". ";
                ++out.truth.ampac_observation_count;
            }
            text << "Vitals stable; plan reviewed." << kOutro;
            out.note_list.push_back({id, day_to_date(tp_day[t]), text.str()});
        }
        const long stage_day[2] = {10, 50};
        const Stage stages[2] = {Stage::EARLY, Stage::LATE};
        for (int s = 0; s < 2; ++s) {
            std::ostringstream text;
            text << kIntro << "Exercises performed this visit:";
            bool first = true;
            for (const auto& entry : lexicon.entries) {
                if (!exposures[stages[s]].count(entry.canonical)) continue;
                text << (first ? " " : "; ") << entry.key_phrases.front();
                first = false;
            }
            if (first) text << " none recorded";
            text << " x10 reps." << kOutro;
            out.note_list.push_back({id, day_to_date(stage_day[s]), text.str()});
        }
    }
    return out;
}

SynthOutput replay_table(const stats::ContingencyTable2x2& counts, const std::string& feature,
                         Stage stage, Domain domain, const notes::ExerciseLexicon& lexicon) {
    if (counts.a < 0 || counts.b < 0 || counts.c < 0 || counts.d < 0 || counts.n() < 1) {
        throw ConfigError("replay_table: invalid counts");
    }

    // feature is either a lexicon canonical or a demographic level
    std::string exercise_phrase;
    bool is_exercise = false;
    for (const auto& entry : lexicon.entries) {
        if (entry.canonical == feature) {
            exercise_phrase = entry.key_phrases.front();
            is_exercise = true;
            break;
        }
    }
    const bool demo_feature = feature.rfind("SEX=", 0) == 0 || feature.rfind("RACE=", 0) == 0 ||
                              feature.rfind("AGE=", 0) == 0;
    if (!is_exercise && !demo_feature) {
        throw ConfigError("replay_table: unknown feature '" + feature + "'");
    }

    auto demographics_for = [&](bool exposed) {
        cohort::Demographics demo;
        demo.sex = cohort::Sex::MALE;
        demo.race = cohort::Race::WHITE;
        demo.age_years = 50;
        if (!demo_feature) return demo;
        if (feature == "SEX=FEMALE") demo.sex = exposed ? cohort::Sex::FEMALE : cohort::Sex::MALE;
        else if (feature == "SEX=MALE") demo.sex = exposed ? cohort::Sex::MALE : cohort::Sex::FEMALE;
        else if (feature == "RACE=WHITE")
            demo.race = exposed ? cohort::Race::WHITE : cohort::Race::NOT_WHITE;
        else if (feature == "RACE=NOT_WHITE")
            demo.race = exposed ? cohort::Race::NOT_WHITE : cohort::Race::WHITE;
        else if (feature == "AGE=UNDER_40") demo.age_years = exposed ? 30 : 70;
        else if (feature == "AGE=FROM_40_TO_60") demo.age_years = exposed ? 50 : 70;
        else if (feature == "AGE=OVER_60") demo.age_years = exposed ? 70 : 50;
        else throw ConfigError("replay_table: unknown demographic level '" + feature + "'");
        return demo;
    };

    SynthOutput out;
    std::size_t pi = 0;
    auto add_patient = [&](bool improved, bool exposed) {
        const std::string id = patient_name(pi++);
        out.demographics.emplace_back(id, demographics_for(exposed));
        out.truth.improved[id][domain][stage] = improved;

        // flat trajectory except a +5 jump over the replayed stage for the
        // improved; pooled SD stays below 2.5 so the MCID is below the jump
        long tenths[3] = {100, 100, 100};
        if (improved) {
            if (stage == Stage::EARLY) {
                tenths[1] = tenths[2] = 150;
            } else {
                tenths[2] = 150;
            }
        }
        const long days[3] = {0, 30, 60};
        for (int t = 0; t < 3; ++t) {
            std::ostringstream text;
            text << kIntro << "AM-PAC " << ampac_domain_phrase(domain) << " score "
                 << format_tenths(tenths[t]) << "." << kOutro;
            ++out.truth.ampac_observation_count;
            out.note_list.push_back({id, day_to_date(days[t]), text.str()});
        }
        if (is_exercise && exposed) {
            const long day = stage == Stage::EARLY ? 10 : 50;
            std::ostringstream text;
            text << kIntro << "Exercises performed this visit: " << exercise_phrase
                 << " x10 reps." << kOutro;
            out.note_list.push_back({id, day_to_date(day), text.str()});
            out.truth.exposures[id][stage].insert(feature);
        }
    };

    for (long i = 0; i < counts.a; ++i) add_patient(true, true);
    for (long i = 0; i < counts.b; ++i) add_patient(true, false);
    for (long i = 0; i < counts.c; ++i) add_patient(false, true);
    for (long i = 0; i < counts.d; ++i) add_patient(false, false);
    return out;
}

namespace {

std::map<std::string, std::string> parse_kv(const std::string& content,
                                            const std::string& origin) {
    std::map<std::string, std::string> kv;
    std::istringstream in(content);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const std::size_t b = line.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError(origin + ": expected key = value", line_no);
        }
        auto trim = [](std::string s) {
            const std::size_t x = s.find_first_not_of(" \t");
            if (x == std::string::npos) return std::string();
            const std::size_t y = s.find_last_not_of(" \t");
            return s.substr(x, y - x + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw FormatError(origin + ": empty key", line_no);
        kv[key] = value;
    }
    return kv;
}

double parse_number(const std::string& value, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("synth config: bad number for '" + key + "': " + value);
    }
}

}  // namespace

SynthConfig parse_config(const std::string& content, const std::string& origin) {
    SynthConfig cfg;
    for (const auto& [key, value] : parse_kv(content, origin)) {
        if (key == "n_patients") cfg.n_patients = static_cast<std::size_t>(parse_number(value, key));
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_number(value, key));
        else if (key == "female_rate") cfg.female_rate = parse_number(value, key);
        else if (key == "white_rate") cfg.white_rate = parse_number(value, key);
        else if (key == "age_under_40_rate") cfg.age_under_40_rate = parse_number(value, key);
        else if (key == "age_40_to_60_rate") cfg.age_40_to_60_rate = parse_number(value, key);
        else if (key == "t0_mean") cfg.t0_mean = parse_number(value, key);
        else if (key == "t0_sd") cfg.t0_sd = parse_number(value, key);
        else if (key == "improve_base_rate") cfg.improve_base_rate = parse_number(value, key);
        else if (key == "exposure_base_rate") cfg.exposure_base_rate = parse_number(value, key);
        else if (key == "missing_rate") cfg.missing_rate = parse_number(value, key);
        else if (key == "planted") {
            // exercise:domain:stage:odds_ratio, ';'-separated entries
            std::istringstream items(value);
            std::string item;
            while (std::getline(items, item, ';')) {
                if (item.find_first_not_of(" \t") == std::string::npos) continue;
                std::istringstream parts(item);
                std::string exercise, domain, stage, or_text;
                if (!std::getline(parts, exercise, ':') || !std::getline(parts, domain, ':') ||
                    !std::getline(parts, stage, ':') || !std::getline(parts, or_text)) {
                    throw ConfigError("synth config: planted entry must be "
                                      "EXERCISE:DOMAIN:STAGE:OR, got '" + item + "'");
                }
                PlantedEffect effect;
                effect.exercise = exercise;
                if (domain == "BM") effect.domain = Domain::BM;
                else if (domain == "AC") effect.domain = Domain::AC;
                else throw ConfigError("synth config: planted domain must be BM or AC");
                if (stage == "EARLY") effect.stage = Stage::EARLY;
                else if (stage == "LATE") effect.stage = Stage::LATE;
                else throw ConfigError("synth config: planted stage must be EARLY or LATE");
                effect.odds_ratio = parse_number(or_text, "planted odds ratio");
                cfg.planted.push_back(std::move(effect));
            }
        } else {
            throw ConfigError("synth config: unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

SynthConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

}  // namespace rehab::synth
