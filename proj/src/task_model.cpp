#include "centaur/task_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "centaur/error.hpp"
#include "centaur/random.hpp"

namespace centaur {

std::string to_string(Paradigm paradigm) {
    switch (paradigm) {
    case Paradigm::Description: return "Description";
    case Paradigm::Horizon: return "Horizon";
    case Paradigm::ExperientialSymbolic: return "ExperientialSymbolic";
    }
    return "Unknown";
}

Paradigm parse_paradigm(const std::string& name) {
    if (name == "Description") return Paradigm::Description;
    if (name == "Horizon") return Paradigm::Horizon;
    if (name == "ExperientialSymbolic") return Paradigm::ExperientialSymbolic;
    throw DataError("unknown paradigm '" + name + "'");
}

std::string to_string(InfoCondition condition) {
    return condition == InfoCondition::EqualInfo ? "EqualInfo" : "UnequalInfo";
}

double GambleOption::expected_value() const {
    double ev = 0.0;
    for (const auto& o : outcomes) ev += o.value * o.probability;
    return ev;
}

Paradigm payload_paradigm(const TrialPayload& payload) {
    switch (payload.index()) {
    case 0: return Paradigm::Description;
    case 1: return Paradigm::Horizon;
    default: return Paradigm::ExperientialSymbolic;
    }
}

ChoiceTrial make_single_choice_trial(std::string trial_id, std::optional<std::string> participant,
                                     TrialPayload payload, int choice) {
    ChoiceTrial t;
    t.trial_id = std::move(trial_id);
    t.participant_id = std::move(participant);
    t.paradigm = payload_paradigm(payload);
    t.payload = std::move(payload);
    t.human_choice = choice;
    t.repeat_count = 1;
    t.choice_count_1 = choice == 1 ? 1 : 0;
    return t;
}

namespace {

void check_gamble(const GambleOption& g, const std::string& label, std::vector<std::string>& out) {
    if (g.outcomes.empty()) {
        out.push_back(label + ": no outcomes");
        return;
    }
    double total = 0.0;
    for (const auto& o : g.outcomes) {
        if (!std::isfinite(o.value)) out.push_back(label + ": non-finite outcome value");
        if (!(o.probability >= 0.0 && o.probability <= 1.0))
            out.push_back(label + ": probability outside [0,1]");
        total += o.probability;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        std::ostringstream msg;
        msg << label << ": probabilities sum to " << total;
        out.push_back(msg.str());
    }
}

std::array<int, 2> forced_counts(const HorizonState& s) {
    std::array<int, 2> counts{0, 0};
    for (std::size_t i = 0; i < kForcedObservations && i < s.observations.size(); ++i) {
        const int m = s.observations[i].machine;
        if (m == 1 || m == 2) ++counts[m - 1];
    }
    return counts;
}

void check_horizon(const HorizonState& s, std::vector<std::string>& out) {
    if (s.trial_index < 0) out.push_back("horizon: negative trial_index");
    if (s.horizon < 1) out.push_back("horizon: remaining horizon below 1");
    const auto game = s.game_horizon();
    if (game != 1 && game != 6) out.push_back("horizon: game horizon must be 1 or 6");
    if (s.observations.size() != kForcedObservations + static_cast<std::size_t>(std::max(s.trial_index, 0)))
        out.push_back("horizon: observation count must equal 4 forced + trial_index");
    for (const auto& o : s.observations) {
        if (o.machine != 1 && o.machine != 2) {
            out.push_back("horizon: machine must be 1 or 2");
            break;
        }
        if (!std::isfinite(o.reward)) {
            out.push_back("horizon: non-finite reward");
            break;
        }
    }
    if (s.observations.size() >= kForcedObservations) {
        const auto c = forced_counts(s);
        const bool ok = (c[0] == 2 && c[1] == 2) || (c[0] == 1 && c[1] == 3) || (c[0] == 3 && c[1] == 1);
        if (!ok) out.push_back("horizon: forced counts must be (2,2), (1,3) or (3,1)");
    }
}

void check_experiential(const ExperientialSymbolicTrial& t, std::vector<std::string>& out) {
    if (t.e_option_history.empty()) out.push_back("experiential-symbolic: empty E-option history");
    for (int r : t.e_option_history) {
        if (r != 1 && r != -1) {
            out.push_back("experiential-symbolic: history rewards must be -1 or +1");
            break;
        }
    }
    check_gamble(t.s_option, "s_option", out);
    for (double p : {t.e_win_probability, t.s_win_probability})
        if (!(p >= 0.0 && p <= 1.0)) out.push_back("experiential-symbolic: win probability outside [0,1]");
}

} // namespace

ValidationReport validate_dataset(std::span<const ChoiceTrial> trials) {
    ValidationReport report;
    report.trial_count = trials.size();
    std::set<std::string> participants;
    std::unordered_set<std::string> seen;

    for (const auto& t : trials) {
        std::vector<std::string> problems;
        ++report.paradigm_counts[t.paradigm];
        if (t.participant_id) participants.insert(*t.participant_id);
        if (!seen.insert(t.trial_id).second) problems.push_back("duplicate trial_id");
        if (t.trial_id.empty()) problems.push_back("empty trial_id");
        if (payload_paradigm(t.payload) != t.paradigm) problems.push_back("payload does not match paradigm");
        if (t.human_choice != 1 && t.human_choice != 2) problems.push_back("human_choice must be 1 or 2");
        if (t.repeat_count < 1) problems.push_back("repeat_count must be >= 1");
        if (t.choice_count_1 < 0 || t.choice_count_1 > t.repeat_count)
            problems.push_back("choice_count_1 must lie in [0, repeat_count]");

        if (const auto* d = std::get_if<DescriptionProblem>(&t.payload)) {
            check_gamble(d->option1, "option1", problems);
            check_gamble(d->option2, "option2", problems);
        } else if (const auto* h = std::get_if<HorizonState>(&t.payload)) {
            check_horizon(*h, problems);
        } else if (const auto* e = std::get_if<ExperientialSymbolicTrial>(&t.payload)) {
            check_experiential(*e, problems);
        }
        for (auto& p : problems) report.violations.push_back({t.trial_id, std::move(p)});
    }
    report.participants.assign(participants.begin(), participants.end());
    return report;
}

FoldPlan make_fold_plan(std::span<const std::string> trial_ids, std::size_t fold_count,
                        FoldFractions fractions, std::uint64_t seed) {
    const double sum = fractions.train + fractions.validation + fractions.test;
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("fold fractions must sum to 1 (got " + std::to_string(sum) + ")");
    if (fractions.train < 0 || fractions.validation < 0 || fractions.test < 0)
        throw ConfigError("fold fractions must be non-negative");
    if (fold_count == 0) throw ConfigError("fold_count must be positive");
    if (static_cast<double>(fold_count) * fractions.test > 1.0 + 1e-9)
        throw ConfigError("fold_count x test fraction exceeds 1");

    FoldPlan plan;
    plan.seed = seed;
    plan.fractions = fractions;
    plan.trial_ids.assign(trial_ids.begin(), trial_ids.end());

    const std::size_t n = trial_ids.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));

    const double dn = static_cast<double>(n);
    const auto n_val = static_cast<std::size_t>(std::llround(dn * fractions.validation));
    auto boundary = [&](std::size_t f) {
        const auto b = static_cast<std::size_t>(std::llround(static_cast<double>(f) * dn * fractions.test));
        return std::min(b, n);
    };

    plan.folds.resize(fold_count);
    for (std::size_t f = 0; f < fold_count; ++f) {
        const std::size_t begin = boundary(f);
        const std::size_t end = boundary(f + 1);
        const std::size_t n_test = end - begin;
        const std::size_t val_size = std::min(n_val, n - n_test);
        Fold& fold = plan.folds[f];
        std::vector<char> used(n, 0);
        for (std::size_t i = begin; i < end; ++i) {
            fold.test.push_back(order[i]);
            used[i] = 1;
        }
        for (std::size_t k = 0; k < val_size; ++k) {
            const std::size_t pos = (end + k) % n;
            fold.validation.push_back(order[pos]);
            used[pos] = 1;
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!used[i]) fold.train.push_back(order[i]);
    }
    return plan;
}

std::vector<std::vector<std::size_t>> make_partition(std::size_t item_count, std::size_t block_count,
                                                     std::uint64_t seed) {
    if (block_count == 0) throw ConfigError("block count must be positive");
    std::vector<std::size_t> order(item_count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::vector<std::size_t>> blocks(block_count);
    for (std::size_t b = 0; b < block_count; ++b) {
        const std::size_t begin = b * item_count / block_count;
        const std::size_t end = (b + 1) * item_count / block_count;
        blocks[b].assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return blocks;
}

std::vector<HorizonTag> tag_horizon_conditions(std::span<const ChoiceTrial> trials) {
    std::vector<HorizonTag> tags;
    tags.reserve(trials.size());
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto* state = std::get_if<HorizonState>(&trials[i].payload);
        if (trials[i].paradigm != Paradigm::Horizon || state == nullptr)
            throw ParadigmError("trial '" + trials[i].trial_id + "' is not a horizon trial");
        if (state->observations.size() < kForcedObservations)
            throw DataError("trial '" + trials[i].trial_id + "' has fewer than 4 forced observations");

        std::array<double, 2> sums{0.0, 0.0};
        const auto counts = forced_counts(*state);
        for (std::size_t k = 0; k < kForcedObservations; ++k) {
            const auto& o = state->observations[k];
            if (o.machine == 1 || o.machine == 2) sums[o.machine - 1] += o.reward;
        }
        if (counts[0] == 0 || counts[1] == 0)
            throw DataError("trial '" + trials[i].trial_id + "' has a machine without forced observations");

        HorizonTag tag;
        tag.index = i;
        tag.horizon = state->game_horizon();
        tag.first_free_choice = state->trial_index == 0;
        tag.reward_difference = sums[0] / counts[0] - sums[1] / counts[1];
        if (counts[0] == counts[1]) {
            tag.condition = InfoCondition::EqualInfo;
        } else {
            tag.condition = InfoCondition::UnequalInfo;
            tag.more_informative_option = counts[0] < counts[1] ? 1 : 2;
        }
        tags.push_back(tag);
    }
    return tags;
}

std::vector<std::string> trial_ids(std::span<const ChoiceTrial> trials) {
    std::vector<std::string> ids;
    ids.reserve(trials.size());
    for (const auto& t : trials) ids.push_back(t.trial_id);
    return ids;
}

} // namespace centaur
