#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "centaur/task_model.hpp"

namespace centaur {

void to_json(nlohmann::json& j, const GambleOption& g);
void from_json(const nlohmann::json& j, GambleOption& g);
void to_json(nlohmann::json& j, const ChoiceTrial& t);
void from_json(const nlohmann::json& j, ChoiceTrial& t);

nlohmann::json payload_to_json(const TrialPayload& payload);
TrialPayload payload_from_json(Paradigm paradigm, const nlohmann::json& j);

// One JSON object per line. Blank lines are skipped; malformed lines raise
// DataError naming the line number.
std::vector<ChoiceTrial> read_trials(const std::filesystem::path& path);
void write_trials(const std::filesystem::path& path, const std::vector<ChoiceTrial>& trials);

// Maps columns of an external delimited file onto canonical trial fields.
//
// Canonical scalar fields: trial_id, participant_id, paradigm, human_choice,
// repeat_count, choice_count_1, choice_rate_1, horizon, trial_index,
// generating_mean_1, generating_mean_2, e_win_probability, s_win_probability.
// List fields hold ';'-separated values in one cell: option1_values,
// option1_probabilities, option2_values, option2_probabilities,
// s_option_values, s_option_probabilities, e_option_history, and
// observations ("machine:reward;machine:reward;...").
struct ColumnMapping {
    char delimiter = ',';
    std::map<std::string, std::string> columns;   // column name -> canonical field
    std::map<std::string, std::string> defaults;  // canonical field -> constant value
};

ColumnMapping column_mapping_from_json(const nlohmann::json& j);
ColumnMapping read_column_mapping(const std::filesystem::path& path);

std::vector<ChoiceTrial> read_delimited(const std::filesystem::path& path, const ColumnMapping& mapping);

// Splits one delimited line, honouring double-quoted fields.
std::vector<std::string> split_delimited(const std::string& line, char delimiter);

} // namespace centaur
