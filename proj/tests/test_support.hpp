#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "centaur/task_model.hpp"

namespace centaur::testing {

inline std::vector<std::string> ids(std::size_t n, const std::string& prefix = "t") {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

inline ChoiceTrial horizon_trial(std::string id, std::vector<Observation> obs, int horizon, int choice = 1,
                                 int trial_index = 0) {
    HorizonState s;
    s.observations = std::move(obs);
    s.horizon = horizon;
    s.trial_index = trial_index;
    return make_single_choice_trial(std::move(id), std::nullopt, s, choice);
}

inline GambleOption gamble(std::initializer_list<Outcome> outcomes) {
    GambleOption g;
    g.outcomes = outcomes;
    return g;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("centaur_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace centaur::testing
