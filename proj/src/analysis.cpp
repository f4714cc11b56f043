#include "centaur/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "centaur/error.hpp"
#include "centaur/random.hpp"
#include "centaur/readout.hpp"

namespace centaur {

double median(std::span<const double> values) {
    if (values.empty()) throw ConfigError("median of an empty set");
    std::vector<double> v(values.begin(), values.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

namespace {

void check_probabilities(std::span<const double> p) {
    if (p.empty()) throw ConfigError("empty prediction set");
    for (double v : p)
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("predictions must lie in [0, 1]");
}

int threshold_choice(double p, double m) {
    if (p > m) return 1;
    if (p < m) return 2;
    return p >= 0.5 ? 1 : 2;
}

} // namespace

std::vector<int> simulate_choices(std::span<const double> probabilities, const SimulationSpec& spec) {
    check_probabilities(probabilities);
    std::vector<int> choices(probabilities.size());
    if (spec.mode == SimulationMode::Sample) {
        Rng rng(spec.seed);
        for (std::size_t i = 0; i < probabilities.size(); ++i) choices[i] = rng.uniform() < probabilities[i] ? 1 : 2;
    } else {
        const double m = median(probabilities);
        for (std::size_t i = 0; i < probabilities.size(); ++i) choices[i] = threshold_choice(probabilities[i], m);
    }
    return choices;
}

std::vector<int> simulate_choices_grouped(std::span<const double> probabilities, std::span<const std::size_t> groups,
                                          const SimulationSpec& spec) {
    if (spec.mode == SimulationMode::Sample) return simulate_choices(probabilities, spec);
    check_probabilities(probabilities);
    if (groups.size() != probabilities.size()) throw ShapeError("one group per prediction required");
    std::map<std::size_t, std::vector<double>> by_group;
    for (std::size_t i = 0; i < groups.size(); ++i) by_group[groups[i]].push_back(probabilities[i]);
    std::map<std::size_t, double> medians;
    for (const auto& [g, values] : by_group) medians[g] = median(values);
    std::vector<int> choices(probabilities.size());
    for (std::size_t i = 0; i < probabilities.size(); ++i)
        choices[i] = threshold_choice(probabilities[i], medians[groups[i]]);
    return choices;
}

std::vector<int> human_choices(std::span<const ChoiceTrial> trials) {
    std::vector<int> out;
    out.reserve(trials.size());
    for (const auto& t : trials) out.push_back(t.human_choice);
    return out;
}

std::array<double, 2> expected_rewards(const ChoiceTrial& trial, const KalmanPriors& priors, bool* approximate) {
    if (approximate) *approximate = false;
    if (const auto* d = std::get_if<DescriptionProblem>(&trial.payload)) {
        if (d->option1.outcomes.empty() || d->option2.outcomes.empty())
            throw DataError("trial '" + trial.trial_id + "' lacks gamble outcomes");
        return {d->option1.expected_value(), d->option2.expected_value()};
    }
    if (const auto* h = std::get_if<HorizonState>(&trial.payload)) {
        if (h->generating_means) return *h->generating_means;
        if (h->observations.empty()) throw DataError("trial '" + trial.trial_id + "' has no payoff information");
        if (approximate) *approximate = true;
        auto belief = KalmanBelief::from_priors(priors);
        for (const auto& o : h->observations) belief = kalman_update(belief, o.machine, o.reward);
        return belief.mean;
    }
    const auto& e = std::get<ExperientialSymbolicTrial>(trial.payload);
    if (e.s_option.outcomes.empty()) throw DataError("trial '" + trial.trial_id + "' lacks S-option outcomes");
    // E-option pays +1 with its win probability and -1 otherwise.
    return {2.0 * e.e_win_probability - 1.0, e.s_option.expected_value()};
}

RegretSummary compute_regret(std::span<const ChoiceTrial> trials, std::span<const int> choices,
                             const KalmanPriors& priors) {
    if (choices.size() != trials.size()) throw ShapeError("one choice per trial required");
    RegretSummary s;
    s.per_trial.reserve(trials.size());
    for (std::size_t i = 0; i < trials.size(); ++i) {
        if (choices[i] != 1 && choices[i] != 2) throw DataError("choices must be 1 or 2");
        bool approx = false;
        const auto ev = expected_rewards(trials[i], priors, &approx);
        if (approx) ++s.approximate_count;
        s.per_trial.push_back(std::max(ev[0], ev[1]) - ev[static_cast<std::size_t>(choices[i] - 1)]);
    }
    const double n = static_cast<double>(s.per_trial.size());
    if (n > 0) {
        for (double r : s.per_trial) s.mean += r;
        s.mean /= n;
    }
    if (n > 1) {
        double ss = 0.0;
        for (double r : s.per_trial) ss += (r - s.mean) * (r - s.mean);
        s.standard_error = std::sqrt(ss / (n - 1.0) / n);
    }
    return s;
}

ChoiceCurveFit fit_choice_curve(std::span<const ChoiceTrial> trials, std::span<const int> choices,
                                InfoCondition condition, double coefficient_cap) {
    if (choices.size() != trials.size()) throw ShapeError("one choice per trial required");
    const auto tags = tag_horizon_conditions(trials);

    std::vector<std::array<double, 4>> rows;
    std::vector<double> outcome;
    for (const auto& tag : tags) {
        if (!tag.first_free_choice || tag.condition != condition) continue;
        const int choice = choices[tag.index];
        double delta, y;
        if (condition == InfoCondition::EqualInfo) {
            delta = -tag.reward_difference;
            y = choice == 2 ? 1.0 : 0.0;
        } else {
            const int informative = *tag.more_informative_option;
            delta = informative == 1 ? tag.reward_difference : -tag.reward_difference;
            y = choice == informative ? 1.0 : 0.0;
        }
        const double h = tag.horizon == 6 ? 1.0 : 0.0;
        rows.push_back({1.0, delta, h, delta * h});
        outcome.push_back(y);
    }

    ChoiceCurveFit fit;
    fit.condition = condition;
    fit.trial_count = rows.size();
    fit.standard_errors.fill(std::nan(""));
    if (rows.empty()) {
        fit.degenerate = true;
        return fit;
    }
    Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), 4);
    ChoiceCounts counts;
    counts.successes.resize(design.rows());
    counts.totals = Eigen::VectorXd::Ones(design.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int c = 0; c < 4; ++c) design(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
        counts.successes(static_cast<Eigen::Index>(i)) = outcome[i];
    }
    const GlmFit glm = fit_glm(design, counts, coefficient_cap);
    for (int c = 0; c < 4; ++c) {
        fit.coefficients[static_cast<std::size_t>(c)] = glm.coefficients(c);
        fit.standard_errors[static_cast<std::size_t>(c)] = glm.standard_errors(c);
    }
    fit.converged = glm.converged;
    fit.separated = glm.separated;
    fit.degenerate = glm.degenerate;
    return fit;
}

InformativeChoiceRates informative_choice_rate(std::span<const ChoiceTrial> trials, std::span<const int> choices) {
    if (choices.size() != trials.size()) throw ShapeError("one choice per trial required");
    const auto tags = tag_horizon_conditions(trials);
    std::array<std::size_t, 2> n{0, 0}, hits{0, 0};
    for (const auto& tag : tags) {
        if (!tag.first_free_choice || tag.condition != InfoCondition::UnequalInfo) continue;
        const std::size_t cell = tag.horizon == 6 ? 1 : 0;
        ++n[cell];
        if (choices[tag.index] == *tag.more_informative_option) ++hits[cell];
    }
    auto cell = [&](std::size_t k) {
        RateCell c;
        c.count = n[k];
        c.empty = n[k] == 0;
        if (!c.empty) {
            c.rate = static_cast<double>(hits[k]) / static_cast<double>(n[k]);
            c.standard_error = std::sqrt(c.rate * (1.0 - c.rate) / static_cast<double>(n[k]));
        }
        return c;
    };
    InformativeChoiceRates r;
    r.horizon1 = cell(0);
    r.horizon6 = cell(1);
    r.difference = r.horizon6.rate - r.horizon1.rate;
    r.difference_standard_error = std::hypot(r.horizon1.standard_error, r.horizon6.standard_error);
    return r;
}

std::vector<IndifferencePoint> indifference_points(std::span<const ChoiceTrial> trials, std::span<const int> choices,
                                                   double coefficient_cap) {
    if (choices.size() != trials.size()) throw ShapeError("one choice per trial required");
    // Group by E win probability, keyed on a 1e-9 grid to absorb float noise.
    std::map<long long, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto* e = std::get_if<ExperientialSymbolicTrial>(&trials[i].payload);
        if (e == nullptr) throw ParadigmError("trial '" + trials[i].trial_id + "' is not experiential-symbolic");
        groups[std::llround(e->e_win_probability * 1e9)].push_back(i);
    }

    std::vector<IndifferencePoint> points;
    for (const auto& [key, members] : groups) {
        IndifferencePoint pt;
        pt.e_win_probability = static_cast<double>(key) / 1e9;
        pt.trial_count = members.size();

        Eigen::MatrixXd design(static_cast<Eigen::Index>(members.size()), 2);
        ChoiceCounts counts;
        counts.successes.resize(design.rows());
        counts.totals = Eigen::VectorXd::Ones(design.rows());
        double lo = 2.0, hi = -1.0;
        for (std::size_t k = 0; k < members.size(); ++k) {
            const auto& e = std::get<ExperientialSymbolicTrial>(trials[members[k]].payload);
            const auto row = static_cast<Eigen::Index>(k);
            design(row, 0) = 1.0;
            design(row, 1) = e.s_win_probability;
            counts.successes(row) = choices[members[k]] == 1 ? 1.0 : 0.0;
            lo = std::min(lo, e.s_win_probability);
            hi = std::max(hi, e.s_win_probability);
        }
        if (hi - lo < 1e-12) {
            pt.unidentifiable = true;
            pt.censored = true;
            points.push_back(pt);
            continue;
        }
        const GlmFit glm = fit_glm(design, counts, coefficient_cap);
        pt.intercept = glm.coefficients(0);
        pt.slope = glm.coefficients(1);
        pt.separated = glm.separated;
        if (std::abs(pt.slope) < 1e-6) {
            pt.censored = true;
        } else {
            const double s = -pt.intercept / pt.slope;
            if (s >= 0.0 && s <= 1.0) {
                pt.s_star = s;
                pt.slope_at_parity = pt.slope / 4.0;
            } else {
                pt.censored = true;
            }
        }
        points.push_back(pt);
    }
    return points;
}

} // namespace centaur
