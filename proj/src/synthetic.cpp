#include "centaur/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "centaur/error.hpp"
#include "centaur/random.hpp"

namespace centaur {

namespace {

GambleOption random_gamble(Rng& rng) {
    const double p = static_cast<double>(1 + rng.below(19)) / 20.0;
    const double a = static_cast<double>(rng.below(151)) - 50.0;
    const double b = static_cast<double>(rng.below(151)) - 50.0;
    GambleOption g;
    g.outcomes = {{a, p}, {b, 1.0 - p}};
    return g;
}

ChoiceTrial with_choice(ChoiceTrial t, int choice) {
    t.human_choice = choice;
    t.repeat_count = 1;
    t.choice_count_1 = choice == 1 ? 1 : 0;
    return t;
}

} // namespace

DescriptionProblem random_description_problem(std::uint64_t seed) {
    Rng rng(seed);
    DescriptionProblem d;
    d.option1 = random_gamble(rng);
    d.option2 = random_gamble(rng);
    return d;
}

std::vector<ChoiceTrial> labelled_trials(std::span<const std::string> ids, std::span<const double> probabilities,
                                         std::uint64_t seed, std::span<const std::string> participants) {
    if (ids.size() != probabilities.size()) throw ShapeError("one probability per trial id required");
    if (!participants.empty() && participants.size() != ids.size())
        throw ShapeError("one participant per trial id required");
    Rng rng(seed);
    std::vector<ChoiceTrial> trials;
    trials.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ChoiceTrial t;
        t.trial_id = ids[i];
        if (!participants.empty()) t.participant_id = participants[i];
        t.paradigm = Paradigm::Description;
        DescriptionProblem d;
        d.option1 = random_gamble(rng);
        d.option2 = random_gamble(rng);
        t.payload = std::move(d);
        trials.push_back(with_choice(std::move(t), rng.uniform() < probabilities[i] ? 1 : 2));
    }
    return trials;
}

std::vector<ChoiceTrial> simulate_horizon_task(const HorizonTaskSpec& spec, const HorizonAgent& agent) {
    if (spec.mean_differences.empty()) throw ConfigError("mean difference list is empty");
    Rng rng(spec.seed);
    std::vector<ChoiceTrial> trials;
    auto draw = [&](double mean) {
        return std::clamp(std::round(rng.normal(mean, spec.reward_sd)), 1.0, 99.0);
    };
    for (std::size_t g = 0; g < spec.games; ++g) {
        const double base = rng.bernoulli(0.5) ? 40.0 : 60.0;
        const double diff = spec.mean_differences[rng.below(spec.mean_differences.size())] *
                            (rng.bernoulli(0.5) ? 1.0 : -1.0);
        const std::array<double, 2> means{base, base + diff};
        const int horizon = rng.uniform() < spec.long_horizon_share ? 6 : 1;

        std::vector<int> forced;
        if (rng.uniform() < spec.equal_info_share) {
            forced = {1, 1, 2, 2};
        } else {
            const int rare = rng.bernoulli(0.5) ? 1 : 2;
            forced = {rare, 3 - rare, 3 - rare, 3 - rare};
        }
        rng.shuffle(std::span<int>(forced));

        HorizonState state;
        state.generating_means = means;
        for (int m : forced) state.observations.push_back({m, draw(means[static_cast<std::size_t>(m - 1)])});

        for (int t = 0; t < horizon; ++t) {
            state.horizon = horizon - t;
            state.trial_index = t;
            const double p = agent(state);
            const int choice = rng.uniform() < p ? 1 : 2;
            if (t == 0 || !spec.first_free_choice_only) {
                ChoiceTrial trial;
                trial.trial_id = "g" + std::to_string(g) + "_t" + std::to_string(t);
                trial.paradigm = Paradigm::Horizon;
                trial.payload = state;
                trials.push_back(with_choice(std::move(trial), choice));
            }
            state.observations.push_back({choice, draw(means[static_cast<std::size_t>(choice - 1)])});
        }
    }
    return trials;
}

std::vector<ChoiceTrial> simulate_es_task(const EsTaskSpec& spec, const EsAgent& agent) {
    if (spec.e_grid.empty()) throw ConfigError("E win-probability grid is empty");
    if (spec.history_length == 0) throw ConfigError("E-option histories must be non-empty");
    std::vector<double> s_grid = spec.s_grid;
    if (s_grid.empty())
        for (int k = 0; k <= 20; ++k) s_grid.push_back(k / 20.0);

    Rng rng(spec.seed);
    std::vector<ChoiceTrial> trials;
    trials.reserve(spec.trials);
    for (std::size_t i = 0; i < spec.trials; ++i) {
        ExperientialSymbolicTrial e;
        e.e_win_probability = spec.e_grid[rng.below(spec.e_grid.size())];
        e.s_win_probability = s_grid[rng.below(s_grid.size())];
        for (std::size_t k = 0; k < spec.history_length; ++k)
            e.e_option_history.push_back(rng.uniform() < e.e_win_probability ? 1 : -1);
        e.s_option.outcomes = {{-1.0, 1.0 - e.s_win_probability}, {1.0, e.s_win_probability}};
        const double p = agent(e);
        ChoiceTrial t;
        t.trial_id = "es" + std::to_string(i);
        t.paradigm = Paradigm::ExperientialSymbolic;
        t.payload = std::move(e);
        trials.push_back(with_choice(std::move(t), rng.uniform() < p ? 1 : 2));
    }
    return trials;
}

} // namespace centaur
