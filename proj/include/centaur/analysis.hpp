#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "centaur/baselines.hpp"
#include "centaur/task_model.hpp"

namespace centaur {

enum class SimulationMode { Sample, MedianThreshold };

struct SimulationSpec {
    SimulationMode mode = SimulationMode::Sample;
    std::uint64_t seed = 0;
};

double median(std::span<const double> values);

// Sample: choice 1 with probability p (seeded). MedianThreshold: choice 1 iff
// p exceeds the median of p; values equal to the median go to option 1 when
// p >= 0.5. Returns choices in {1, 2}.
std::vector<int> simulate_choices(std::span<const double> probabilities, const SimulationSpec& spec);

// Median threshold computed within each group (e.g. fold), results pooled.
// Sample mode ignores the groups.
std::vector<int> simulate_choices_grouped(std::span<const double> probabilities, std::span<const std::size_t> groups,
                                          const SimulationSpec& spec);

std::vector<int> human_choices(std::span<const ChoiceTrial> trials);

struct RegretSummary {
    std::vector<double> per_trial;
    double mean = 0.0;
    double standard_error = 0.0;
    // Horizon trials without generating means use Kalman posterior means.
    std::size_t approximate_count = 0;
};

// Highest attainable expected reward minus that of the chosen option.
RegretSummary compute_regret(std::span<const ChoiceTrial> trials, std::span<const int> choices,
                             const KalmanPriors& priors = {});

// Expected rewards of (option 1, option 2) for a trial, and whether they are
// approximate (posterior means standing in for generating means).
std::array<double, 2> expected_rewards(const ChoiceTrial& trial, const KalmanPriors& priors, bool* approximate = nullptr);

struct ChoiceCurveFit {
    InfoCondition condition = InfoCondition::EqualInfo;
    // intercept, reward difference, horizon indicator (6 -> 1), interaction
    std::array<double, 4> coefficients{};
    std::array<double, 4> standard_errors{};
    std::size_t trial_count = 0;
    bool converged = false;
    bool separated = false;
    bool degenerate = false;
};

// Logistic fit on first-free-choice trials of one condition.
//   EqualInfo:   p(choose machine 2) on mean2 - mean1.
//   UnequalInfo: p(choose the more informative machine) on
//                mean_informative - mean_other.
ChoiceCurveFit fit_choice_curve(std::span<const ChoiceTrial> trials, std::span<const int> choices,
                                InfoCondition condition, double coefficient_cap = 50.0);

struct RateCell {
    std::size_t count = 0;
    double rate = 0.0;
    double standard_error = 0.0;
    bool empty = true;
};

struct InformativeChoiceRates {
    RateCell horizon1;
    RateCell horizon6;
    double difference = 0.0;  // rate(6) - rate(1)
    double difference_standard_error = 0.0;
};

// Rate of choosing the more informative machine on unequal-information
// first free choices, split by game horizon.
InformativeChoiceRates informative_choice_rate(std::span<const ChoiceTrial> trials, std::span<const int> choices);

struct IndifferencePoint {
    double e_win_probability = 0.0;
    std::optional<double> s_star;  // S-option win probability at choice parity
    double intercept = 0.0;
    double slope = 0.0;            // coefficient on p_S
    double slope_at_parity = 0.0;  // d p(choose E) / d p_S at s_star
    std::size_t trial_count = 0;
    bool censored = false;        // no crossing inside [0, 1] or zero slope
    bool unidentifiable = false;  // a single p_S value in the group
    bool separated = false;
};

// Per E-option win probability: p(choose E) = sigmoid(a + b p_S), s* = -a / b.
std::vector<IndifferencePoint> indifference_points(std::span<const ChoiceTrial> trials, std::span<const int> choices,
                                                   double coefficient_cap = 50.0);

} // namespace centaur
