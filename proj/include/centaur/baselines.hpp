#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "centaur/readout.hpp"
#include "centaur/report.hpp"
#include "centaur/task_model.hpp"

namespace centaur {

// Chance-level model: (sum of repeat counts) * ln 2.
double random_baseline_nll(std::span<const ChoiceTrial> trials);

struct OptionLogprobs {
    double logp_1 = 0.0;
    double logp_2 = 0.0;
};

using LogprobTable = std::unordered_map<std::string, OptionLogprobs>;

// JSON lines of {trial_id, logp_1, logp_2}.
LogprobTable read_logprobs(const std::filesystem::path& path);

struct LogprobBaselineResult {
    double inverse_temperature = 1.0;  // most frequently selected across folds
    FitReport report;
};

// p(choice = 1) = sigmoid(tau * (logp_1 - logp_2)); tau picked per fold on the
// validation set (ties to the smaller value) and scored on the test set.
LogprobBaselineResult fit_logprob_baseline(const LogprobTable& logprobs, std::span<const ChoiceTrial> trials,
                                           const FoldPlan& plan,
                                           std::span<const double> temperature_grid);

struct KalmanPriors {
    double prior_mean = 50.0;
    double prior_variance = 100.0;
    double noise_variance = 64.0;
};

inline constexpr double kVarianceFloor = 1e-12;

// Independent Gaussian beliefs about the two arms' mean rewards.
struct KalmanBelief {
    std::array<double, 2> mean{};
    std::array<double, 2> variance{};
    double noise_variance = 0.0;
    bool variance_floored = false;

    static KalmanBelief from_priors(const KalmanPriors& priors);
};

// k = v / (v + noise); mean += k (reward - mean); v = (1 - k) v, floored at 1e-12.
KalmanBelief kalman_update(const KalmanBelief& belief, int machine, double reward);

struct HybridRegressors {
    double value_difference = 0.0;      // V  = mean1 - mean2
    double relative_uncertainty = 0.0;  // RU = sqrt(v1) - sqrt(v2)
    double scaled_value = 0.0;          // V / sqrt(v1 + v2)
};

HybridRegressors hybrid_regressors(const HorizonState& state, const KalmanPriors& priors = {});

struct HybridOptions {
    KalmanPriors priors;
    // Adds horizon-6 interaction copies of the three regressors.
    bool horizon_specific = false;
    LbfgsOptions lbfgs;
    unsigned threads = 0;
};

// Rows: [V, RU, V/TU] (+ [V, RU, V/TU] * 1{game horizon = 6} when horizon_specific).
Eigen::MatrixXd hybrid_design(std::span<const ChoiceTrial> trials, const HybridOptions& options = {});

// p(choice = 1) = sigmoid(b1 V + b2 RU + b3 V/TU), no intercept, unregularized,
// fit per fold on the training set.
FitReport fit_hybrid(std::span<const ChoiceTrial> trials, const FoldPlan& plan, const HybridOptions& options = {});

// Whole-data fit with standard errors (parameter recovery, reporting).
GlmFit fit_hybrid_coefficients(std::span<const ChoiceTrial> trials, const HybridOptions& options = {});

// Wraps a deterministic baseline with a random-choice error model:
// p' = (1 - eps) p + eps / 2.
double apply_error_model(double probability, double error_rate);

std::vector<double> default_error_rate_grid();

struct ErrorModelResult {
    double error_rate = 0.0;  // most frequently selected across folds
    FitReport report;
};

// eps chosen per fold on validation, scored on test. base_probabilities align
// with trials.
ErrorModelResult fit_error_model(std::span<const double> base_probabilities, std::span<const ChoiceTrial> trials,
                                 const FoldPlan& plan, std::span<const double> error_rate_grid);

} // namespace centaur
