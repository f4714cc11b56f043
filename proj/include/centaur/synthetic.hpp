#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "centaur/task_model.hpp"

namespace centaur {

// Random two-outcome gambles (integer values, probabilities on a 5% grid).
DescriptionProblem random_description_problem(std::uint64_t seed);

// Trials with the given ids and labels sampled from p(choice = 1). Payloads
// are random description problems; participant ids are optional.
std::vector<ChoiceTrial> labelled_trials(std::span<const std::string> ids, std::span<const double> probabilities,
                                         std::uint64_t seed,
                                         std::span<const std::string> participants = {});

// Horizon-task generator. Each game draws a base mean (40 or 60), a signed
// mean difference, a forced-observation pattern ((2,2) or (1,3)/(3,1)) and a
// game horizon, then plays its free choices with the agent. Rewards are
// rounded N(mean, reward_sd) draws clamped to [1, 99].
struct HorizonTaskSpec {
    std::size_t games = 1000;
    std::uint64_t seed = 0;
    double equal_info_share = 0.5;
    double long_horizon_share = 0.5;
    double reward_sd = 8.0;
    bool first_free_choice_only = false;
    std::vector<double> mean_differences{4, 8, 12, 20, 30};
};

// Returns p(choose machine 1) for a decision point.
using HorizonAgent = std::function<double(const HorizonState&)>;

std::vector<ChoiceTrial> simulate_horizon_task(const HorizonTaskSpec& spec, const HorizonAgent& agent);

// Experiential-symbolic generator: E win probabilities on e_grid, S win
// probabilities on s_grid, histories of `history_length` +/-1 draws.
struct EsTaskSpec {
    std::size_t trials = 1000;
    std::uint64_t seed = 0;
    std::vector<double> e_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::vector<double> s_grid;  // empty: 0, 0.05, ..., 1
    std::size_t history_length = 10;
};

// Returns p(choose the E option, machine 1).
using EsAgent = std::function<double(const ExperientialSymbolicTrial&)>;

std::vector<ChoiceTrial> simulate_es_task(const EsTaskSpec& spec, const EsAgent& agent);

} // namespace centaur
