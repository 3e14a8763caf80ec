#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rehab/outcomes.hpp"
#include "rehab/rng.hpp"

using namespace rehab;
using namespace rehab::cohort;
using namespace rehab::outcomes;

namespace {

PatientRecord record_with(const std::string& id, std::vector<std::pair<Timepoint, double>> bm) {
    PatientRecord rec;
    rec.patient_id = id;
    for (const auto& [t, v] : bm) rec.scores[{Domain::BM, t}] = v;
    return rec;
}

}  // namespace

TEST_CASE("mcid is 0.2 times the pooled sample standard deviation") {
    // pooled scores {10, 14}: mean 12, sample variance 8, SD 2.828427...
    std::vector<PatientRecord> records;
    records.push_back(record_with("P1", {{Timepoint::T0, 10.0}}));
    records.push_back(record_with("P2", {{Timepoint::M1, 14.0}}));
    const auto est = estimate_mcid(records, Domain::BM);
    CHECK(est.pooled_n == 2);
    CHECK(est.pooled_sd == doctest::Approx(2.8284271247461903).epsilon(1e-12));
    CHECK(est.mcid == doctest::Approx(0.565685424949238).epsilon(1e-12));
    const auto half = estimate_mcid(records, Domain::BM, 0.5);
    CHECK(half.mcid == doctest::Approx(1.4142135623730951).epsilon(1e-12));
}

TEST_CASE("mcid pools every available timepoint") {
    std::vector<PatientRecord> records;
    records.push_back(record_with(
        "P1", {{Timepoint::T0, 10.0}, {Timepoint::M1, 12.0}, {Timepoint::M2, 14.0}}));
    records.push_back(record_with("P2", {{Timepoint::T0, 8.0}}));
    const auto est = estimate_mcid(records, Domain::BM);
    CHECK(est.pooled_n == 4);
    // scores {10, 12, 14, 8}: mean 11, sample variance 20/3
    CHECK(est.pooled_sd == doctest::Approx(std::sqrt(20.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("mcid requires at least two pooled scores") {
    std::vector<PatientRecord> records;
    CHECK_THROWS_AS(estimate_mcid(records, Domain::BM), InsufficientData);
    records.push_back(record_with("P1", {{Timepoint::T0, 10.0}}));
    CHECK_THROWS_AS(estimate_mcid(records, Domain::BM), InsufficientData);
    CHECK_THROWS_AS(estimate_mcid(records, Domain::AC), InsufficientData);
}

TEST_CASE("labeling is strict: delta equal to the mcid is not improvement") {
    McidEstimate mcid{Domain::BM, 10, 5.0, 1.0};
    std::vector<PatientRecord> backing(3);
    std::vector<StagePatient> population = {
        {&backing[0], 10.0, 11.0},   // delta 1.0 == mcid
        {&backing[1], 10.0, 11.01},  // just above
        {&backing[2], 10.0, 9.0},    // decline
    };
    backing[0].patient_id = "A";
    backing[1].patient_id = "B";
    backing[2].patient_id = "C";
    const auto out = label_outcomes(population, Domain::BM, Stage::EARLY, mcid);
    REQUIRE(out.size() == 3);
    CHECK(out[0].label == Label::NOT_IMPROVED);
    CHECK(out[1].label == Label::IMPROVED);
    CHECK(out[2].label == Label::NOT_IMPROVED);
    CHECK(out[0].delta == doctest::Approx(1.0));
    CHECK(out[1].patient_id == "B");
    CHECK(out[2].stage == Stage::EARLY);
}

TEST_CASE("label monotonicity in the delta") {
    McidEstimate mcid{Domain::BM, 10, 5.0, 1.0};
    PatientRecord backing;
    Rng rng(5);
    double last_improved_delta = -1e9;
    for (int i = 0; i < 200; ++i) {
        const double delta = -3.0 + 6.0 * rng.next_double();
        StagePatient p{&backing, 10.0, 10.0 + delta};
        const auto out = label_outcomes({p}, Domain::BM, Stage::LATE, mcid);
        if (out[0].label == Label::IMPROVED) {
            CHECK(delta > mcid.mcid);
        } else {
            CHECK(delta <= mcid.mcid);
        }
        (void)last_improved_delta;
    }
}

TEST_CASE("mcid is shift invariant and scales with the data") {
    Rng rng(8);
    std::vector<PatientRecord> base;
    for (int i = 0; i < 30; ++i) {
        base.push_back(record_with("P" + std::to_string(i),
                                   {{Timepoint::T0, 10.0 + 3.0 * rng.normal()},
                                    {Timepoint::M1, 11.0 + 3.0 * rng.normal()}}));
    }
    auto shifted = base;
    auto scaled = base;
    for (auto& rec : shifted) {
        for (auto& [k, v] : rec.scores) v += 100.0;
    }
    for (auto& rec : scaled) {
        for (auto& [k, v] : rec.scores) v *= 3.0;
    }
    const double m0 = estimate_mcid(base, Domain::BM).mcid;
    CHECK(estimate_mcid(shifted, Domain::BM).mcid == doctest::Approx(m0).epsilon(1e-9));
    CHECK(estimate_mcid(scaled, Domain::BM).mcid == doctest::Approx(3.0 * m0).epsilon(1e-9));
}
