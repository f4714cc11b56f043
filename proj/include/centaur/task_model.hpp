#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace centaur {

enum class Paradigm { Description, Horizon, ExperientialSymbolic };

std::string to_string(Paradigm paradigm);
Paradigm parse_paradigm(const std::string& name);

struct Outcome {
    double value = 0.0;
    double probability = 0.0;

    bool operator==(const Outcome&) const = default;
};

// A described gamble: outcome values with their probabilities.
struct GambleOption {
    std::vector<Outcome> outcomes;

    double expected_value() const;
    bool operator==(const GambleOption&) const = default;
};

// choices13k-style decision between two described gambles.
struct DescriptionProblem {
    GambleOption option1;
    GambleOption option2;

    bool operator==(const DescriptionProblem&) const = default;
};

struct Observation {
    int machine = 1;  // 1 or 2
    double reward = 0.0;

    bool operator==(const Observation&) const = default;
};

inline constexpr std::size_t kForcedObservations = 4;

// Horizon-task decision point. The first four observations are forced;
// any further ones are outcomes of earlier free choices in the same game.
struct HorizonState {
    std::vector<Observation> observations;
    int horizon = 1;      // free choices remaining, including this one
    int trial_index = 0;  // 0 for the first free choice
    // Latent arm means when the dataset records them (used for regret).
    std::optional<std::array<double, 2>> generating_means;

    int game_horizon() const { return horizon + trial_index; }
    bool operator==(const HorizonState&) const = default;
};

// Hold-out task: Machine 1 is the experiential (E) option, Machine 2 the
// symbolic (S) option.
struct ExperientialSymbolicTrial {
    std::vector<int> e_option_history;  // rewards in {-1, +1}
    GambleOption s_option;
    double e_win_probability = 0.0;
    double s_win_probability = 0.0;

    bool operator==(const ExperientialSymbolicTrial&) const = default;
};

using TrialPayload = std::variant<DescriptionProblem, HorizonState, ExperientialSymbolicTrial>;

struct ChoiceTrial {
    std::string trial_id;
    std::optional<std::string> participant_id;
    Paradigm paradigm = Paradigm::Description;
    TrialPayload payload;
    int human_choice = 1;    // 1 or 2
    int repeat_count = 1;    // number of human choices aggregated here
    int choice_count_1 = 0;  // how many of them chose option 1

    bool operator==(const ChoiceTrial&) const = default;
};

// Single-choice trial helper: repeat 1, count derived from the choice.
ChoiceTrial make_single_choice_trial(std::string trial_id, std::optional<std::string> participant,
                                     TrialPayload payload, int choice);

Paradigm payload_paradigm(const TrialPayload& payload);

struct Violation {
    std::string trial_id;
    std::string message;
};

struct ValidationReport {
    std::size_t trial_count = 0;
    std::map<Paradigm, std::size_t> paradigm_counts;
    std::vector<std::string> participants;  // sorted, unique
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
};

ValidationReport validate_dataset(std::span<const ChoiceTrial> trials);

struct FoldFractions {
    double train = 0.90;
    double validation = 0.09;
    double test = 0.01;
};

// Indices refer to positions in FoldPlan::trial_ids.
struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

struct FoldPlan {
    std::uint64_t seed = 0;
    FoldFractions fractions;
    std::vector<std::string> trial_ids;
    std::vector<Fold> folds;

    std::size_t fold_count() const { return folds.size(); }
};

// Shuffles ids with the seeded PRNG, then slices contiguous blocks: fold f
// takes the f-th test block and the validation block that follows it
// (cyclically); everything else trains.
FoldPlan make_fold_plan(std::span<const std::string> trial_ids, std::size_t fold_count,
                        FoldFractions fractions, std::uint64_t seed);

// K disjoint blocks of a seeded shuffle (used by the hold-out protocol).
std::vector<std::vector<std::size_t>> make_partition(std::size_t item_count, std::size_t block_count,
                                                     std::uint64_t seed);

enum class InfoCondition { EqualInfo, UnequalInfo };

std::string to_string(InfoCondition condition);

struct HorizonTag {
    std::size_t index = 0;  // position in the input list
    InfoCondition condition = InfoCondition::EqualInfo;
    int horizon = 1;  // game horizon (1 or 6)
    bool first_free_choice = true;
    double reward_difference = 0.0;  // forced mean of machine 1 minus machine 2
    std::optional<int> more_informative_option;  // unequal-information only
};

std::vector<HorizonTag> tag_horizon_conditions(std::span<const ChoiceTrial> trials);

std::vector<std::string> trial_ids(std::span<const ChoiceTrial> trials);

} // namespace centaur
