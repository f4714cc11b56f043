#include "centaur/trial_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "centaur/error.hpp"

namespace centaur {

using nlohmann::json;

void to_json(json& j, const GambleOption& g) {
    json outcomes = json::array();
    for (const auto& o : g.outcomes) outcomes.push_back({{"value", o.value}, {"probability", o.probability}});
    j = json{{"outcomes", outcomes}};
}

void from_json(const json& j, GambleOption& g) {
    g.outcomes.clear();
    for (const auto& o : j.at("outcomes"))
        g.outcomes.push_back({o.at("value").get<double>(), o.at("probability").get<double>()});
}

json payload_to_json(const TrialPayload& payload) {
    if (const auto* d = std::get_if<DescriptionProblem>(&payload)) {
        return json{{"option1", d->option1}, {"option2", d->option2}};
    }
    if (const auto* h = std::get_if<HorizonState>(&payload)) {
        json obs = json::array();
        for (const auto& o : h->observations) obs.push_back({{"machine", o.machine}, {"reward", o.reward}});
        json j{{"observations", obs}, {"horizon", h->horizon}, {"trial_index", h->trial_index}};
        if (h->generating_means) j["generating_means"] = {(*h->generating_means)[0], (*h->generating_means)[1]};
        return j;
    }
    const auto& e = std::get<ExperientialSymbolicTrial>(payload);
    return json{{"e_option_history", e.e_option_history},
                {"s_option", e.s_option},
                {"e_win_probability", e.e_win_probability},
                {"s_win_probability", e.s_win_probability}};
}

TrialPayload payload_from_json(Paradigm paradigm, const json& j) {
    switch (paradigm) {
    case Paradigm::Description:
        return DescriptionProblem{j.at("option1").get<GambleOption>(), j.at("option2").get<GambleOption>()};
    case Paradigm::Horizon: {
        HorizonState s;
        for (const auto& o : j.at("observations"))
            s.observations.push_back({o.at("machine").get<int>(), o.at("reward").get<double>()});
        s.horizon = j.at("horizon").get<int>();
        s.trial_index = j.value("trial_index", 0);
        if (j.contains("generating_means") && !j["generating_means"].is_null()) {
            const auto& m = j["generating_means"];
            s.generating_means = std::array<double, 2>{m.at(0).get<double>(), m.at(1).get<double>()};
        }
        return s;
    }
    case Paradigm::ExperientialSymbolic: {
        ExperientialSymbolicTrial e;
        e.e_option_history = j.at("e_option_history").get<std::vector<int>>();
        e.s_option = j.at("s_option").get<GambleOption>();
        e.e_win_probability = j.at("e_win_probability").get<double>();
        e.s_win_probability = j.at("s_win_probability").get<double>();
        return e;
    }
    }
    throw DataError("unknown paradigm");
}

void to_json(json& j, const ChoiceTrial& t) {
    j = json{{"trial_id", t.trial_id},
             {"participant_id", t.participant_id ? json(*t.participant_id) : json(nullptr)},
             {"paradigm", to_string(t.paradigm)},
             {"payload", payload_to_json(t.payload)},
             {"human_choice", t.human_choice},
             {"repeat_count", t.repeat_count},
             {"choice_count_1", t.choice_count_1}};
}

void from_json(const json& j, ChoiceTrial& t) {
    t.trial_id = j.at("trial_id").is_string() ? j["trial_id"].get<std::string>() : j["trial_id"].dump();
    t.participant_id.reset();
    if (j.contains("participant_id") && !j["participant_id"].is_null()) {
        const auto& p = j["participant_id"];
        t.participant_id = p.is_string() ? p.get<std::string>() : p.dump();
    }
    t.paradigm = parse_paradigm(j.at("paradigm").get<std::string>());
    t.payload = payload_from_json(t.paradigm, j.at("payload"));
    t.human_choice = j.at("human_choice").get<int>();
    t.repeat_count = j.value("repeat_count", 1);
    t.choice_count_1 = j.contains("choice_count_1") ? j["choice_count_1"].get<int>()
                                                    : (t.human_choice == 1 ? t.repeat_count : 0);
}

std::vector<ChoiceTrial> read_trials(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open trial file " + path.string());
    std::vector<ChoiceTrial> trials;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            trials.push_back(json::parse(line).get<ChoiceTrial>());
        } catch (const json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return trials;
}

void write_trials(const std::filesystem::path& path, const std::vector<ChoiceTrial>& trials) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write trial file " + path.string());
    for (const auto& t : trials) out << json(t).dump() << '\n';
}

ColumnMapping column_mapping_from_json(const json& j) {
    ColumnMapping m;
    const auto delim = j.value("delimiter", std::string(","));
    if (delim.size() != 1) throw ConfigError("delimiter must be a single character");
    m.delimiter = delim == "\\t" ? '\t' : delim[0];
    const json& columns = j.contains("columns") ? j["columns"] : j;
    for (const auto& [column, field] : columns.items()) {
        if (column == "delimiter" || column == "defaults") continue;
        m.columns[column] = field.get<std::string>();
    }
    if (j.contains("defaults"))
        for (const auto& [field, value] : j["defaults"].items())
            m.defaults[field] = value.is_string() ? value.get<std::string>() : value.dump();
    return m;
}

ColumnMapping read_column_mapping(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open column mapping " + path.string());
    try {
        return column_mapping_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw ConfigError("column mapping " + path.string() + ": " + e.what());
    }
}

std::vector<std::string> split_delimited(const std::string& line, char delimiter) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter) {
            fields.push_back(std::move(current));
            current.clear();
        } else if (c != '\r') {
            current += c;
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

namespace {

double to_double(const std::string& s, const std::string& field) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("field '" + field + "': cannot parse number '" + s + "'");
    }
}

int to_int(const std::string& s, const std::string& field) {
    const double v = to_double(s, field);
    if (v != std::floor(v)) throw DataError("field '" + field + "': expected integer, got '" + s + "'");
    return static_cast<int>(v);
}

std::vector<double> to_list(const std::string& s, const std::string& field) {
    std::vector<double> values;
    for (const auto& part : split_delimited(s, ';'))
        if (!part.empty()) values.push_back(to_double(part, field));
    return values;
}

GambleOption to_gamble(const std::map<std::string, std::string>& row, const std::string& prefix) {
    const auto values = to_list(row.at(prefix + "_values"), prefix + "_values");
    const auto probs = to_list(row.at(prefix + "_probabilities"), prefix + "_probabilities");
    if (values.size() != probs.size()) throw DataError(prefix + ": value/probability list lengths differ");
    GambleOption g;
    for (std::size_t i = 0; i < values.size(); ++i) g.outcomes.push_back({values[i], probs[i]});
    return g;
}

ChoiceTrial row_to_trial(const std::map<std::string, std::string>& row) {
    auto get = [&](const std::string& field) -> const std::string& {
        auto it = row.find(field);
        if (it == row.end()) throw DataError("missing canonical field '" + field + "'");
        return it->second;
    };
    auto has = [&](const std::string& field) { return row.count(field) && !row.at(field).empty(); };

    ChoiceTrial t;
    t.trial_id = get("trial_id");
    if (has("participant_id")) t.participant_id = get("participant_id");
    t.paradigm = parse_paradigm(get("paradigm"));
    switch (t.paradigm) {
    case Paradigm::Description:
        t.payload = DescriptionProblem{to_gamble(row, "option1"), to_gamble(row, "option2")};
        break;
    case Paradigm::Horizon: {
        HorizonState s;
        for (const auto& part : split_delimited(get("observations"), ';')) {
            if (part.empty()) continue;
            const auto colon = part.find(':');
            if (colon == std::string::npos) throw DataError("observation '" + part + "' is not machine:reward");
            s.observations.push_back({to_int(part.substr(0, colon), "observations"),
                                      to_double(part.substr(colon + 1), "observations")});
        }
        s.horizon = to_int(get("horizon"), "horizon");
        s.trial_index = has("trial_index") ? to_int(get("trial_index"), "trial_index") : 0;
        if (has("generating_mean_1") && has("generating_mean_2"))
            s.generating_means = std::array<double, 2>{to_double(get("generating_mean_1"), "generating_mean_1"),
                                                       to_double(get("generating_mean_2"), "generating_mean_2")};
        t.payload = std::move(s);
        break;
    }
    case Paradigm::ExperientialSymbolic: {
        ExperientialSymbolicTrial e;
        for (double r : to_list(get("e_option_history"), "e_option_history")) e.e_option_history.push_back(static_cast<int>(r));
        e.s_option = to_gamble(row, "s_option");
        e.e_win_probability = to_double(get("e_win_probability"), "e_win_probability");
        e.s_win_probability = to_double(get("s_win_probability"), "s_win_probability");
        t.payload = std::move(e);
        break;
    }
    }
    t.human_choice = to_int(get("human_choice"), "human_choice");
    t.repeat_count = has("repeat_count") ? to_int(get("repeat_count"), "repeat_count") : 1;
    if (has("choice_count_1")) {
        t.choice_count_1 = to_int(get("choice_count_1"), "choice_count_1");
    } else if (has("choice_rate_1")) {
        t.choice_count_1 = static_cast<int>(std::llround(to_double(get("choice_rate_1"), "choice_rate_1") * t.repeat_count));
    } else {
        t.choice_count_1 = t.human_choice == 1 ? t.repeat_count : 0;
    }
    return t;
}

} // namespace

std::vector<ChoiceTrial> read_delimited(const std::filesystem::path& path, const ColumnMapping& mapping) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open delimited file " + path.string());
    std::string line;
    if (!std::getline(in, line)) return {};
    const auto header = split_delimited(line, mapping.delimiter);
    for (const auto& [column, field] : mapping.columns) {
        if (std::find(header.begin(), header.end(), column) == header.end())
            throw ConfigError("column '" + column + "' (mapped to '" + field + "') not found in " + path.string());
    }

    std::vector<ChoiceTrial> trials;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_delimited(line, mapping.delimiter);
        if (cells.size() != header.size())
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
        std::map<std::string, std::string> row = mapping.defaults;
        for (std::size_t c = 0; c < header.size(); ++c) {
            auto it = mapping.columns.find(header[c]);
            if (it != mapping.columns.end()) row[it->second] = cells[c];
        }
        try {
            trials.push_back(row_to_trial(row));
        } catch (const DataError& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return trials;
}

} // namespace centaur
