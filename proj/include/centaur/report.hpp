#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace centaur {

struct FoldRecord {
    std::size_t fold = 0;
    double alpha = 0.0;
    double inverse_temperature = 1.0;
    double train_nll = 0.0;
    double validation_nll = 0.0;
    double test_nll = 0.0;
    std::vector<double> validation_nll_by_alpha;  // aligned with the alpha grid
    std::size_t test_size = 0;
    int iterations = 0;
    bool converged = true;
};

struct TrialPrediction {
    std::string trial_id;
    std::size_t fold = 0;
    double probability = 0.5;  // p(choose option 1)
};

// Cross-validated evaluation of one model. aggregate_test_nll is the sum of
// the per-fold test NLLs.
struct FitReport {
    std::string model;
    std::vector<double> alpha_grid;
    std::vector<double> temperature_grid;
    std::vector<FoldRecord> folds;
    double aggregate_test_nll = 0.0;
    std::map<std::string, double> participant_test_nll;
    std::vector<TrialPrediction> predictions;
    double choice_count = 0.0;  // total Bernoulli terms scored on test sets
    bool all_converged = true;
};

nlohmann::json report_to_json(const FitReport& report);
FitReport report_from_json(const nlohmann::json& j);

} // namespace centaur
