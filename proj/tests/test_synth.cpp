#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>

#include "rehab/synth.hpp"
#include "rehab/outcomes.hpp"
#include "rehab/stats.hpp"

using namespace rehab;
using namespace rehab::synth;

namespace {

std::map<std::string, cohort::Demographics> demo_map(const SynthOutput& out) {
    return {out.demographics.begin(), out.demographics.end()};
}

std::vector<cohort::PatientRecord> assemble_output(const SynthOutput& out) {
    return cohort::assemble(out.note_list, demo_map(out), notes::default_lexicon(),
                            notes::default_patterns());
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
    SynthConfig cfg;
    cfg.n_patients = 40;
    cfg.seed = 123;
    const auto a = generate(cfg);
    const auto b = generate(cfg);
    REQUIRE(a.note_list.size() == b.note_list.size());
    for (std::size_t i = 0; i < a.note_list.size(); ++i) {
        CHECK(a.note_list[i].patient_id == b.note_list[i].patient_id);
        CHECK(a.note_list[i].note_date == b.note_list[i].note_date);
        CHECK(a.note_list[i].text == b.note_list[i].text);
    }
    CHECK(a.demographics == b.demographics);
    cfg.seed = 124;
    const auto c = generate(cfg);
    bool any_difference = false;
    for (std::size_t i = 0; i < std::min(a.note_list.size(), c.note_list.size()); ++i) {
        any_difference = any_difference || a.note_list[i].text != c.note_list[i].text;
    }
    CHECK(any_difference);
}

TEST_CASE("generated notes parse back to the recorded observation count") {
    SynthConfig cfg;
    cfg.n_patients = 30;
    cfg.seed = 5;
    const auto out = generate(cfg);
    std::size_t parsed = 0;
    for (const auto& note : out.note_list) {
        parsed += notes::extract_ampac(note, notes::default_patterns()).size();
    }
    CHECK(parsed == out.truth.ampac_observation_count);
    CHECK(out.truth.ampac_observation_count == 30 * 6);  // 2 domains x 3 timepoints
}

TEST_CASE("full round trip recovers the planted labels exactly") {
    SynthConfig cfg;
    cfg.n_patients = 120;
    cfg.seed = 99;
    cfg.planted.push_back({"BALANCE", cohort::Domain::AC, cohort::Stage::EARLY, 6.0});
    const auto out = generate(cfg);
    const auto records = assemble_output(out);
    REQUIRE(records.size() == cfg.n_patients);
    for (cohort::Domain d : {cohort::Domain::BM, cohort::Domain::AC}) {
        const auto mcid = outcomes::estimate_mcid(records, d);
        for (cohort::Stage s : {cohort::Stage::EARLY, cohort::Stage::LATE}) {
            const auto population = cohort::stage_population(records, d, s);
            REQUIRE(population.size() == cfg.n_patients);
            const auto labels = outcomes::label_outcomes(population, d, s, mcid);
            for (const auto& o : labels) {
                const bool truth = out.truth.improved.at(o.patient_id).at(d).at(s);
                CHECK((o.label == outcomes::Label::IMPROVED) == truth);
            }
        }
    }
}

TEST_CASE("round trip recovers the planted exposures exactly") {
    SynthConfig cfg;
    cfg.n_patients = 50;
    cfg.seed = 42;
    cfg.exposure_base_rate = 0.25;
    const auto out = generate(cfg);
    const auto records = assemble_output(out);
    for (const auto& rec : records) {
        for (cohort::Stage s : {cohort::Stage::EARLY, cohort::Stage::LATE}) {
            CHECK(rec.exposures.at(s) == out.truth.exposures.at(rec.patient_id).at(s));
        }
    }
}

TEST_CASE("missingness drops observations and ground truth stays consistent") {
    SynthConfig cfg;
    cfg.n_patients = 60;
    cfg.seed = 31;
    cfg.missing_rate = 0.3;
    const auto out = generate(cfg);
    std::size_t parsed = 0;
    for (const auto& note : out.note_list) {
        parsed += notes::extract_ampac(note, notes::default_patterns()).size();
    }
    CHECK(parsed == out.truth.ampac_observation_count);
    CHECK(parsed < 60 * 6);
    // every label in the truth map must still be recoverable
    const auto records = assemble_output(out);
    std::map<std::string, const cohort::PatientRecord*> by_id;
    for (const auto& rec : records) by_id[rec.patient_id] = &rec;
    for (const auto& [id, by_domain] : out.truth.improved) {
        for (const auto& [d, by_stage] : by_domain) {
            for (const auto& [s, truth] : by_stage) {
                const auto* rec = by_id.at(id);
                CHECK(rec->score(d, cohort::stage_start(s)).has_value());
                CHECK(rec->score(d, cohort::stage_end(s)).has_value());
            }
        }
    }
}

TEST_CASE("planted effects raise the improvement rate among the exposed") {
    SynthConfig cfg;
    cfg.n_patients = 400;
    cfg.seed = 77;
    cfg.exposure_base_rate = 0.4;
    cfg.planted.push_back({"GAIT", cohort::Domain::BM, cohort::Stage::EARLY, 8.0});
    const auto out = generate(cfg);
    long exposed_improved = 0, exposed_n = 0, unexposed_improved = 0, unexposed_n = 0;
    for (const auto& [id, by_domain] : out.truth.improved) {
        const bool improved = by_domain.at(cohort::Domain::BM).at(cohort::Stage::EARLY);
        const bool exposed =
            out.truth.exposures.at(id).at(cohort::Stage::EARLY).count("GAIT") > 0;
        (exposed ? exposed_n : unexposed_n) += 1;
        if (improved) (exposed ? exposed_improved : unexposed_improved) += 1;
    }
    REQUIRE(exposed_n > 50);
    REQUIRE(unexposed_n > 50);
    const double rate_exposed = static_cast<double>(exposed_improved) / exposed_n;
    const double rate_unexposed = static_cast<double>(unexposed_improved) / unexposed_n;
    CHECK(rate_exposed > rate_unexposed + 0.2);
}

TEST_CASE("replay_table reproduces the requested counts") {
    const stats::ContingencyTable2x2 wanted{10, 6, 16, 77};
    const auto out = replay_table(wanted, "BALANCE", cohort::Stage::EARLY, cohort::Domain::AC);
    const auto records = assemble_output(out);
    const auto mcid = outcomes::estimate_mcid(records, cohort::Domain::AC);
    const auto population =
        cohort::stage_population(records, cohort::Domain::AC, cohort::Stage::EARLY);
    const auto labels =
        outcomes::label_outcomes(population, cohort::Domain::AC, cohort::Stage::EARLY, mcid);
    const auto views =
        stats::feature_exposures(population, notes::default_lexicon(), cohort::Stage::EARLY);
    for (const auto& view : views) {
        if (view.feature != "BALANCE") continue;
        const auto table = stats::build_table(labels, view.exposed);
        CHECK(table.a == wanted.a);
        CHECK(table.b == wanted.b);
        CHECK(table.c == wanted.c);
        CHECK(table.d == wanted.d);
    }
}

TEST_CASE("replay_table handles demographic features and rejects unknown ones") {
    const auto out = replay_table({3, 4, 5, 6}, "SEX=FEMALE", cohort::Stage::LATE,
                                  cohort::Domain::BM);
    long female = 0;
    for (const auto& [id, demo] : out.demographics) {
        if (demo.sex == cohort::Sex::FEMALE) ++female;
    }
    CHECK(female == 8);  // a + c
    CHECK_THROWS_AS(
        replay_table({1, 1, 1, 1}, "NO SUCH THING", cohort::Stage::EARLY, cohort::Domain::BM),
        ConfigError);
}

TEST_CASE("config parsing and validation") {
    const auto cfg = parse_config(
        "n_patients = 80\nseed = 9\nmissing_rate = 0.1\n"
        "planted = BALANCE:AC:EARLY:8.0; GAIT:BM:LATE:2.5\n# comment\n",
        "test");
    CHECK(cfg.n_patients == 80);
    CHECK(cfg.seed == 9);
    CHECK(cfg.missing_rate == doctest::Approx(0.1));
    REQUIRE(cfg.planted.size() == 2);
    CHECK(cfg.planted[0].exercise == "BALANCE");
    CHECK(cfg.planted[1].stage == cohort::Stage::LATE);
    CHECK(cfg.planted[1].odds_ratio == doctest::Approx(2.5));

    CHECK_THROWS_AS(parse_config("nonsense_key = 1\n", "t"), ConfigError);
    CHECK_THROWS_AS(parse_config("missing_rate = 1.5\n", "t"), ConfigError);
    CHECK_THROWS_AS(parse_config("just a line without equals\n", "t"), FormatError);
    CHECK_THROWS_AS(parse_config("planted = BALANCE:XX:EARLY:2\n", "t"), ConfigError);
    SynthConfig bad;
    bad.planted.push_back({"NOT AN EXERCISE", cohort::Domain::BM, cohort::Stage::EARLY, 2.0});
    CHECK_THROWS_AS(generate(bad), ConfigError);
}

TEST_CASE("demographic marginals track the configured mix") {
    SynthConfig cfg;
    cfg.n_patients = 2000;
    cfg.seed = 3;
    const auto out = generate(cfg);
    double female = 0, white = 0, under40 = 0, over60 = 0, age_sum = 0;
    for (const auto& [id, demo] : out.demographics) {
        female += demo.sex == cohort::Sex::FEMALE;
        white += demo.race == cohort::Race::WHITE;
        under40 += demo.age_bin() == cohort::AgeBin::UNDER_40;
        over60 += demo.age_bin() == cohort::AgeBin::OVER_60;
        age_sum += demo.age_years;
    }
    const double n = static_cast<double>(cfg.n_patients);
    CHECK(female / n == doctest::Approx(0.48).epsilon(0.1));
    CHECK(white / n == doctest::Approx(0.81).epsilon(0.1));
    CHECK(under40 / n == doctest::Approx(0.06).epsilon(0.5));
    CHECK(over60 / n == doctest::Approx(0.66).epsilon(0.1));
    CHECK(age_sum / n > 55.0);  // elderly-skewed cohort
}
