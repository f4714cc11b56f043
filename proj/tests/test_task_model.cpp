#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "centaur/error.hpp"
#include "centaur/task_model.hpp"
#include "centaur/trial_io.hpp"
#include "test_support.hpp"

using namespace centaur;
using centaur::testing::gamble;
using centaur::testing::horizon_trial;
using centaur::testing::ids;

namespace {

ChoiceTrial description_trial(std::string id) {
    DescriptionProblem p{gamble({{90, 0.1}, {-12, 0.9}}), gamble({{-13, 0.4}, {22, 0.6}})};
    return make_single_choice_trial(std::move(id), std::nullopt, p, 2);
}

std::vector<Observation> forced(std::vector<int> machines, std::vector<double> rewards) {
    std::vector<Observation> obs;
    for (std::size_t i = 0; i < machines.size(); ++i) obs.push_back({machines[i], rewards[i]});
    return obs;
}

} // namespace

TEST_CASE("empty dataset validates cleanly") {
    const auto report = validate_dataset({});
    CHECK(report.trial_count == 0);
    CHECK(report.violations.empty());
}

TEST_CASE("probabilities summing to 0.9 yield one violation naming the trial") {
    std::vector<ChoiceTrial> trials{description_trial("ok")};
    auto bad = description_trial("bad");
    std::get<DescriptionProblem>(bad.payload).option1 = gamble({{1, 0.5}, {2, 0.4}});
    trials.push_back(bad);
    const auto report = validate_dataset(trials);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].trial_id == "bad");
}

TEST_CASE("valid horizon trials produce no violations") {
    std::vector<ChoiceTrial> trials;
    for (int i = 0; i < 100; ++i)
        trials.push_back(horizon_trial("h" + std::to_string(i), forced({1, 1, 2, 2}, {30, 40, 50, 60}), 6, 1 + i % 2));
    const auto report = validate_dataset(trials);
    CHECK(report.trial_count == 100);
    CHECK(report.paradigm_counts.at(Paradigm::Horizon) == 100);
    CHECK(report.ok());
}

TEST_CASE("count and paradigm invariants are reported") {
    auto t = description_trial("x");
    t.repeat_count = 3;
    t.choice_count_1 = 4;
    auto u = description_trial("y");
    u.paradigm = Paradigm::Horizon;
    std::vector<ChoiceTrial> trials{t, u};
    const auto report = validate_dataset(trials);
    CHECK(report.violations.size() >= 2);
}

TEST_CASE("fold plan test blocks partition all ids") {
    const auto names = ids(1000);
    for (std::uint64_t seed : {7ULL, 1ULL, 99ULL, 123456789ULL}) {
        const auto plan = make_fold_plan(names, 100, {}, seed);
        REQUIRE(plan.fold_count() == 100);
        std::multiset<std::size_t> covered;
        for (const auto& fold : plan.folds) {
            CHECK(fold.test.size() == 10);
            CHECK(fold.train.size() + fold.validation.size() + fold.test.size() == 1000);
            std::set<std::size_t> all(fold.train.begin(), fold.train.end());
            all.insert(fold.validation.begin(), fold.validation.end());
            all.insert(fold.test.begin(), fold.test.end());
            CHECK(all.size() == 1000);
            CHECK(std::abs(static_cast<double>(fold.validation.size()) - 90.0) <= 1.0);
            covered.insert(fold.test.begin(), fold.test.end());
        }
        CHECK(covered.size() == 1000);
        CHECK(std::set<std::size_t>(covered.begin(), covered.end()).size() == 1000);
    }
}

TEST_CASE("fold plans are deterministic per seed") {
    const auto names = ids(500);
    const auto a = make_fold_plan(names, 20, {0.8, 0.15, 0.05}, 3);
    const auto b = make_fold_plan(names, 20, {0.8, 0.15, 0.05}, 3);
    const auto c = make_fold_plan(names, 20, {0.8, 0.15, 0.05}, 4);
    bool same = true, differs = false;
    for (std::size_t f = 0; f < a.folds.size(); ++f) {
        same = same && a.folds[f].test == b.folds[f].test && a.folds[f].validation == b.folds[f].validation;
        differs = differs || a.folds[f].test != c.folds[f].test;
    }
    CHECK(same);
    CHECK(differs);
}

TEST_CASE("fractions that do not sum to one are rejected") {
    const auto names = ids(100);
    CHECK_THROWS_AS(make_fold_plan(names, 10, {0.5, 0.5, 0.1}, 1), ConfigError);
}

TEST_CASE("partition blocks are disjoint and exhaustive") {
    const auto blocks = make_partition(103, 8, 5);
    REQUIRE(blocks.size() == 8);
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& b : blocks) {
        total += b.size();
        seen.insert(b.begin(), b.end());
    }
    CHECK(total == 103);
    CHECK(seen.size() == 103);
}

TEST_CASE("horizon condition tagging") {
    std::vector<ChoiceTrial> trials{
        horizon_trial("eq", forced({1, 1, 2, 2}, {10, 20, 30, 40}), 6),
        horizon_trial("uneq", forced({1, 2, 2, 2}, {40, 50, 60, 44}), 1),
    };
    const auto tags = tag_horizon_conditions(trials);
    REQUIRE(tags.size() == 2);
    CHECK(tags[0].condition == InfoCondition::EqualInfo);
    CHECK(tags[0].horizon == 6);
    CHECK_FALSE(tags[0].more_informative_option.has_value());
    CHECK(tags[0].reward_difference == doctest::Approx(15.0 - 35.0));
    CHECK(tags[1].condition == InfoCondition::UnequalInfo);
    CHECK(tags[1].horizon == 1);
    REQUIRE(tags[1].more_informative_option.has_value());
    CHECK(*tags[1].more_informative_option == 1);
    CHECK(tags[1].reward_difference == doctest::Approx(40.0 - 154.0 / 3.0).epsilon(1e-12));
    CHECK(tags[1].first_free_choice);

    const auto again = tag_horizon_conditions(trials);
    CHECK(again[1].reward_difference == tags[1].reward_difference);
}

TEST_CASE("later free choices are tagged and keep the game horizon") {
    auto obs = forced({1, 1, 2, 2, 1, 1}, {10, 20, 30, 40, 15, 25});
    std::vector<ChoiceTrial> trials{horizon_trial("late", obs, 4, 1, 2)};
    const auto tags = tag_horizon_conditions(trials);
    CHECK_FALSE(tags[0].first_free_choice);
    CHECK(tags[0].horizon == 6);
    CHECK(tags[0].condition == InfoCondition::EqualInfo);
}

TEST_CASE("mixed paradigms are rejected by tagging") {
    std::vector<ChoiceTrial> trials{horizon_trial("h", forced({1, 1, 2, 2}, {1, 2, 3, 4}), 1), description_trial("d")};
    CHECK_THROWS_AS(tag_horizon_conditions(trials), ParadigmError);
}

TEST_CASE("trials round-trip through JSON lines") {
    std::vector<ChoiceTrial> trials{description_trial("d1"),
                                    horizon_trial("h1", forced({1, 2, 2, 2}, {40, 50, 60, 44.5}), 6, 2)};
    auto& hs = std::get<HorizonState>(trials[1].payload);
    hs.generating_means = std::array<double, 2>{41.25, 59.5};
    trials[1].participant_id = "p7";
    ExperientialSymbolicTrial es;
    es.e_option_history = {1, -1, 1};
    es.s_option = gamble({{-1, 0.3}, {1, 0.7}});
    es.e_win_probability = 0.6;
    es.s_win_probability = 0.7;
    auto t = make_single_choice_trial("e1", "p2", es, 1);
    t.repeat_count = 5;
    t.choice_count_1 = 3;
    trials.push_back(t);

    const auto dir = centaur::testing::scratch_dir("task_roundtrip");
    write_trials(dir / "t.jsonl", trials);
    const auto back = read_trials(dir / "t.jsonl");
    REQUIRE(back.size() == trials.size());
    for (std::size_t i = 0; i < trials.size(); ++i) CHECK(back[i] == trials[i]);
}

TEST_CASE("malformed trial line names its line number") {
    const auto dir = centaur::testing::scratch_dir("task_bad");
    std::ofstream(dir / "bad.jsonl") << "\n{not json}\n";
    try {
        read_trials(dir / "bad.jsonl");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
}

TEST_CASE("delimited adapter maps external columns") {
    const auto dir = centaur::testing::scratch_dir("task_csv");
    std::ofstream(dir / "x.csv") << "id,who,o1v,o1p,o2v,o2p,rate,n\n"
                                    "a,,\"3;-1\",0.5;0.5,2,1,0.25,4\n";
    ColumnMapping m;
    m.columns = {{"id", "trial_id"},         {"who", "participant_id"}, {"o1v", "option1_values"},
                 {"o1p", "option1_probabilities"}, {"o2v", "option2_values"},  {"o2p", "option2_probabilities"},
                 {"rate", "choice_rate_1"},  {"n", "repeat_count"}};
    m.defaults = {{"paradigm", "Description"}, {"human_choice", "1"}};
    const auto trials = read_delimited(dir / "x.csv", m);
    REQUIRE(trials.size() == 1);
    CHECK(trials[0].trial_id == "a");
    CHECK_FALSE(trials[0].participant_id.has_value());
    CHECK(trials[0].repeat_count == 4);
    CHECK(trials[0].choice_count_1 == 1);
    const auto& p = std::get<DescriptionProblem>(trials[0].payload);
    CHECK(p.option1 == gamble({{3, 0.5}, {-1, 0.5}}));
    CHECK(p.option2 == gamble({{2, 1.0}}));

    m.columns["absent"] = "horizon";
    CHECK_THROWS_AS(read_delimited(dir / "x.csv", m), ConfigError);
}
