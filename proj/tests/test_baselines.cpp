#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "centaur/baselines.hpp"
#include "centaur/error.hpp"
#include "centaur/random.hpp"
#include "centaur/synthetic.hpp"
#include "test_support.hpp"

using namespace centaur;
using centaur::testing::horizon_trial;
using centaur::testing::ids;

namespace {

constexpr double kLn2 = std::numbers::ln2;

std::vector<ChoiceTrial> coin_trials(std::size_t n, std::uint64_t seed) {
    const std::vector<double> p(n, 0.5);
    return labelled_trials(ids(n), p, seed);
}

} // namespace

TEST_CASE("random baseline") {
    CHECK(random_baseline_nll({}) == 0.0);
    auto one = coin_trials(1, 1);
    CHECK(random_baseline_nll(one) == doctest::Approx(0.693147).epsilon(1e-6));
    auto many = coin_trials(8, 2);
    for (auto& t : many) {
        t.repeat_count = 1078;
        t.choice_count_1 = 500;
    }
    CHECK(random_baseline_nll(many) == 8624 * kLn2);
    CHECK(random_baseline_nll(many) == doctest::Approx(5977.6).epsilon(2e-5));
}

TEST_CASE("log-prob baseline") {
    const auto trials = coin_trials(400, 3);
    const auto plan = make_fold_plan(trial_ids(trials), 10, {0.8, 0.1, 0.1}, 4);
    const std::vector<double> grid{0.05, 0.25, 0.5, 1.0};

    SUBCASE("equal log-probs are chance for every temperature") {
        LogprobTable table;
        for (const auto& t : trials) table[t.trial_id] = {-0.9, -0.9};
        const auto r = fit_logprob_baseline(table, trials, plan, grid);
        CHECK(r.report.aggregate_test_nll == doctest::Approx(400 * kLn2).epsilon(1e-12));
    }
    SUBCASE("aligned log-probs select the largest inverse temperature") {
        LogprobTable table;
        for (const auto& t : trials) table[t.trial_id] = t.human_choice == 1 ? OptionLogprobs{-0.1, -2.0} : OptionLogprobs{-2.0, -0.1};
        const auto r = fit_logprob_baseline(table, trials, plan, grid);
        CHECK(r.inverse_temperature == 1.0);
        for (const auto& f : r.report.folds) CHECK(f.inverse_temperature == 1.0);
        CHECK(r.report.aggregate_test_nll < 400 * kLn2);
    }
    SUBCASE("anti-aligned log-probs cannot beat chance") {
        LogprobTable table;
        for (const auto& t : trials) table[t.trial_id] = t.human_choice == 1 ? OptionLogprobs{-2.0, -0.1} : OptionLogprobs{-0.1, -2.0};
        const auto r = fit_logprob_baseline(table, trials, plan, grid);
        CHECK(r.inverse_temperature == 0.05);
        CHECK(r.report.aggregate_test_nll >= 400 * kLn2);
    }
    SUBCASE("missing records fail fast") {
        LogprobTable table;
        table[trials[0].trial_id] = {-1, -1};
        CHECK_THROWS_AS(fit_logprob_baseline(table, trials, plan, grid), DataError);
    }
}

TEST_CASE("log-prob records are read from JSON lines") {
    const auto dir = centaur::testing::scratch_dir("logprobs");
    std::ofstream(dir / "l.jsonl") << R"({"trial_id": "a", "logp_1": -0.5, "logp_2": -1.5})" "\n\n"
                                      R"({"trial_id": "b", "logp_1": -3, "logp_2": -0.25})" "\n";
    const auto table = read_logprobs(dir / "l.jsonl");
    REQUIRE(table.size() == 2);
    CHECK(table.at("b").logp_2 == -0.25);
}

TEST_CASE("kalman update edge cases") {
    KalmanPriors priors;
    priors.noise_variance = 0.0;
    auto b = kalman_update(KalmanBelief::from_priors(priors), 1, 73.0);
    CHECK(b.mean[0] == 73.0);
    CHECK(b.variance[0] == kVarianceFloor);
    CHECK(b.variance_floored);
    CHECK(b.mean[1] == 50.0);

    KalmanPriors even{50.0, 64.0, 64.0};
    const auto h = kalman_update(KalmanBelief::from_priors(even), 2, 30.0);
    CHECK(h.mean[1] == doctest::Approx(40.0));
    CHECK(h.variance[1] == doctest::Approx(32.0));
    CHECK_FALSE(h.variance_floored);
}

TEST_CASE("sequential updates equal the conjugate batch posterior") {
    const KalmanPriors priors;
    auto belief = KalmanBelief::from_priors(priors);
    const std::vector<double> rewards{34, 41, 57, 37};
    double previous_variance = priors.prior_variance;
    for (double r : rewards) {
        belief = kalman_update(belief, 1, r);
        CHECK(belief.variance[0] <= previous_variance);
        previous_variance = belief.variance[0];
    }
    const double precision = 1.0 / priors.prior_variance + rewards.size() / priors.noise_variance;
    const double v = 1.0 / precision;
    const double m = v * (priors.prior_mean / priors.prior_variance + (34 + 41 + 57 + 37) / priors.noise_variance);
    CHECK(std::abs(belief.variance[0] - v) < 1e-12);
    CHECK(std::abs(belief.mean[0] - m) < 1e-12);
}

TEST_CASE("hybrid regressors from a hand-stepped filter") {
    HorizonState s;
    s.observations = {{1, 40}, {1, 60}, {2, 50}, {2, 35}};
    s.horizon = 6;
    // Machine 1: k = 100/164 then 39.0244/103.0244.
    double m1 = 50, v1 = 100, m2 = 50, v2 = 100;
    auto step = [](double& m, double& v, double r) {
        const double k = v / (v + 64.0);
        m += k * (r - m);
        v *= 1.0 - k;
    };
    step(m1, v1, 40);
    step(m1, v1, 60);
    step(m2, v2, 50);
    step(m2, v2, 35);
    CHECK(m1 == doctest::Approx(50.0));
    CHECK(v1 == doctest::Approx(1.0 / (0.01 + 2.0 / 64.0)));
    const auto r = hybrid_regressors(s);
    CHECK(r.value_difference == doctest::Approx(m1 - m2).epsilon(1e-12));
    CHECK(r.relative_uncertainty == doctest::Approx(0.0));
    CHECK(r.scaled_value == doctest::Approx((m1 - m2) / std::sqrt(v1 + v2)).epsilon(1e-12));

    s.observations = {{1, 40}, {2, 60}, {2, 50}, {2, 44}};
    const auto u = hybrid_regressors(s);
    CHECK(u.relative_uncertainty > 0.0);
}

TEST_CASE("hybrid regressors degenerate cases") {
    HorizonState empty;
    const auto z = hybrid_regressors(empty);
    CHECK(z.value_difference == 0.0);
    CHECK(z.relative_uncertainty == 0.0);
    CHECK(z.scaled_value == 0.0);

    HorizonState equal;
    equal.observations = {{1, 20}, {2, 20}, {1, 70}, {2, 70}};
    CHECK(hybrid_regressors(equal).relative_uncertainty == 0.0);
}

TEST_CASE("regressors ignore observation interleaving") {
    HorizonState a, b;
    a.observations = {{1, 40}, {2, 61}, {1, 52}, {2, 47}, {1, 33}};
    b.observations = {{2, 61}, {2, 47}, {1, 40}, {1, 52}, {1, 33}};
    const auto ra = hybrid_regressors(a), rb = hybrid_regressors(b);
    CHECK(ra.value_difference == doctest::Approx(rb.value_difference).epsilon(1e-12));
    CHECK(ra.relative_uncertainty == doctest::Approx(rb.relative_uncertainty).epsilon(1e-12));
    CHECK(ra.scaled_value == doctest::Approx(rb.scaled_value).epsilon(1e-12));
}

TEST_CASE("null hybrid coefficients score at chance") {
    std::vector<ChoiceTrial> trials;
    for (int i = 0; i < 20; ++i)
        trials.push_back(horizon_trial("h" + std::to_string(i), {{1, 30.0 + i}, {1, 40}, {2, 50}, {2, 60.0 - i}}, 6,
                                       1 + i % 2));
    const auto design = hybrid_design(trials);
    CHECK(design.rows() == 20);
    CHECK(design.cols() == 3);
    const auto counts = choice_counts(trials);
    CHECK(bernoulli_nll(Eigen::VectorXd::Zero(20), counts) == doctest::Approx(20 * kLn2).epsilon(1e-14));
    HybridOptions opts;
    opts.horizon_specific = true;
    CHECK(hybrid_design(trials, opts).cols() == 6);
}

TEST_CASE("hybrid coefficients are recovered within three standard errors") {
    HorizonTaskSpec spec;
    spec.games = 6000;
    spec.seed = 5;
    auto trials = simulate_horizon_task(spec, [](const HorizonState& s) {
        const auto r = hybrid_regressors(s);
        return sigmoid(0.5 * r.value_difference + 0.3 * r.relative_uncertainty + 0.2 * r.scaled_value);
    });
    trials.resize(20000);
    const auto fit = fit_hybrid_coefficients(trials);
    const double truth[3] = {0.5, 0.3, 0.2};
    for (int k = 0; k < 3; ++k) {
        CAPTURE(k);
        CHECK(std::abs(fit.coefficients(k) - truth[k]) < 3.0 * fit.standard_errors(k));
    }
}

TEST_CASE("a value-driven agent loads on the value difference") {
    HorizonTaskSpec spec;
    spec.games = 4000;
    spec.seed = 6;
    auto trials = simulate_horizon_task(spec, [](const HorizonState& s) {
        return sigmoid(1.0 * hybrid_regressors(s).value_difference);
    });
    const auto fit = fit_hybrid_coefficients(trials);
    CHECK(fit.coefficients(0) > 0.5);
    CHECK(std::abs(fit.coefficients(1)) < 3.0 * fit.standard_errors(1));
    CHECK(std::abs(fit.coefficients(2)) < 3.0 * fit.standard_errors(2));
}

TEST_CASE("error model") {
    CHECK(apply_error_model(1.0, 0.2) == doctest::Approx(0.9));
    CHECK(apply_error_model(0.3, 0.0) == 0.3);
    CHECK(apply_error_model(0.0, 1.0) == 0.5);

    // A deterministic rule that is right 80% of the time: the likelihood peaks at eps = 0.4.
    const std::size_t n = 2000;
    std::vector<ChoiceTrial> trials = coin_trials(n, 7);
    std::vector<double> base(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool right = i % 5 != 0;
        base[i] = (trials[i].human_choice == 1) == right ? 1.0 : 0.0;
    }
    const auto plan = make_fold_plan(trial_ids(trials), 10, {0.8, 0.1, 0.1}, 8);
    const auto grid = default_error_rate_grid();
    const auto r = fit_error_model(base, trials, plan, grid);
    CHECK(r.error_rate == doctest::Approx(0.4).epsilon(0.15));
    CHECK(std::isfinite(r.report.aggregate_test_nll));
}

TEST_CASE("non-finite objectives raise optimizer errors") {
    const Objective bad = [](const Eigen::VectorXd&, Eigen::VectorXd& g) {
        g.setZero();
        return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS(minimize_lbfgs(bad, Eigen::VectorXd::Zero(2)), OptimizerError);

    const Objective cliff = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g = Eigen::VectorXd::Constant(1, -1.0);
        return x(0) > 0.0 ? std::numeric_limits<double>::infinity() : -x(0);
    };
    CHECK_THROWS_AS(minimize_lbfgs(cliff, Eigen::VectorXd::Constant(1, -1e-300)), OptimizerError);
}
