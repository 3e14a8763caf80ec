#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "rehab/cohort.hpp"
#include "rehab/rng.hpp"

using namespace rehab;
using namespace rehab::cohort;

namespace {

const Date kStart{2023, 3, 1};

notes::ProcedureNote note(const std::string& id, long day, const std::string& text) {
    return {id, kStart.plus_days(day), text};
}

std::map<std::string, Demographics> demo_for(const std::vector<std::string>& ids) {
    std::map<std::string, Demographics> out;
    for (const auto& id : ids) out[id] = Demographics{Sex::FEMALE, Race::WHITE, 55};
    return out;
}

std::vector<PatientRecord> run(std::vector<notes::ProcedureNote> note_list,
                               const std::vector<std::string>& ids,
                               const BinningConfig& binning = {}) {
    return assemble(note_list, demo_for(ids), notes::default_lexicon(),
                    notes::default_patterns(), binning);
}

std::string bm(double score) {
    return "AM-PAC Basic Mobility score " + std::to_string(score) + ".";
}

}  // namespace

TEST_CASE("timepoint binning picks nearest observation, ties toward earlier") {
    const auto records = run({note("P1", 0, bm(10)), note("P1", 28, bm(12)),
                              note("P1", 33, bm(13)), note("P1", 61, bm(14))},
                             {"P1"});
    REQUIRE(records.size() == 1);
    CHECK(records[0].score(Domain::BM, Timepoint::T0) == 10.0);
    CHECK(records[0].score(Domain::BM, Timepoint::M1) == 12.0);  // 28 beats 33 (28 vs 32? no: |28-30|=2 < |33-30|=3)
    CHECK(records[0].score(Domain::BM, Timepoint::M2) == 14.0);
    CHECK(!records[0].score(Domain::AC, Timepoint::T0).has_value());
}

TEST_CASE("equidistant candidates resolve to the earlier date") {
    const auto records =
        run({note("P1", 0, bm(10)), note("P1", 28, bm(12)), note("P1", 32, bm(13))}, {"P1"});
    CHECK(records[0].score(Domain::BM, Timepoint::M1) == 12.0);
}

TEST_CASE("observations outside the window are not binned") {
    const auto records = run({note("P1", 0, bm(10)), note("P1", 46, bm(12))}, {"P1"});
    CHECK(!records[0].score(Domain::BM, Timepoint::M1).has_value());
    CHECK(records[0].score(Domain::BM, Timepoint::M2) == 12.0);  // |46-60| = 14 <= 15
}

TEST_CASE("same-date observations collapse to the last mention") {
    const auto records = run(
        {note("P1", 0, "AM-PAC Basic Mobility score 9. Re-test: AM-PAC BM score 11.")}, {"P1"});
    CHECK(records[0].score(Domain::BM, Timepoint::T0) == 11.0);
}

TEST_CASE("assembly is invariant to note order") {
    std::vector<notes::ProcedureNote> note_list = {
        note("P1", 0, bm(10) + " worked on balance"),
        note("P1", 12, "gait drills and sit to stand"),
        note("P1", 30, bm(12)),
        note("P1", 50, "arm bike intervals"),
        note("P1", 60, bm(15)),
        note("P2", 3, bm(8)),
        note("P2", 31, bm(9)),
    };
    const auto baseline = run(note_list, {"P1", "P2"});
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        auto shuffled = note_list;
        rng.shuffle(shuffled);
        const auto records = run(shuffled, {"P1", "P2"});
        REQUIRE(records.size() == baseline.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            CHECK(records[i].patient_id == baseline[i].patient_id);
            CHECK(records[i].scores == baseline[i].scores);
            CHECK(records[i].exposures == baseline[i].exposures);
        }
    }
}

TEST_CASE("exposures split at the stage boundary") {
    const auto records = run(
        {note("P1", 0, bm(10) + " started balance work"), note("P1", 45, "tandem holds at the rail"),
         note("P1", 46, "arm bike warmup"), note("P1", 76, "walking program")},
        {"P1"});
    const auto& exp = records[0].exposures;
    // day 0 coincides with T0 and is excluded; day 45 is the early boundary
    CHECK(exp.at(Stage::EARLY) == std::set<std::string>{"TANDEM"});
    CHECK(exp.at(Stage::LATE) == std::set<std::string>{"ARM BIKE"});
    // day 76 is past the late window end (60 + 15)
    CHECK(!exp.at(Stage::LATE).count("WALK"));
}

TEST_CASE("unknown patient ids are rejected") {
    CHECK_THROWS_AS(run({note("GHOST", 0, bm(10))}, {"P1"}), UnknownPatient);
}

TEST_CASE("patients with no score observations still appear with exposures") {
    const auto records = run({note("P1", 2, "balance and gait work")}, {"P1"});
    REQUIRE(records.size() == 1);
    CHECK(records[0].scores.empty());
}

TEST_CASE("custom binning config changes the anchors") {
    BinningConfig binning;
    binning.month1_days = 10;
    binning.month2_days = 20;
    binning.window_days = 2;
    const auto records =
        run({note("P1", 0, bm(10)), note("P1", 11, bm(12)), note("P1", 23, bm(14))}, {"P1"},
            binning);
    CHECK(records[0].score(Domain::BM, Timepoint::M1) == 12.0);
    CHECK(!records[0].score(Domain::BM, Timepoint::M2).has_value());  // |23-20| > 2
}

TEST_CASE("stage population keeps complete cases only") {
    const auto records = run({note("P1", 0, bm(10)), note("P1", 30, bm(12)),
                              note("P2", 0, bm(9)), note("P3", 0, bm(7)),
                              note("P3", 30, bm(7.5)), note("P3", 60, bm(8))},
                             {"P1", "P2", "P3"});
    const auto early = stage_population(records, Domain::BM, Stage::EARLY);
    REQUIRE(early.size() == 2);
    CHECK(early[0].record->patient_id == "P1");
    CHECK(early[0].score_start == 10.0);
    CHECK(early[0].score_end == 12.0);
    const auto late = stage_population(records, Domain::BM, Stage::LATE);
    REQUIRE(late.size() == 1);
    CHECK(late[0].record->patient_id == "P3");
    CHECK(late[0].score_start == 7.5);
    CHECK(late[0].score_end == 8.0);
}
