#include "centaur/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>

#include <json.hpp>

#include "centaur/error.hpp"

namespace centaur {

double random_baseline_nll(std::span<const ChoiceTrial> trials) {
    long long choices = 0;
    for (const auto& t : trials) choices += t.repeat_count;
    return static_cast<double>(choices) * std::numbers::ln2;
}

LogprobTable read_logprobs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open log-prob file " + path.string());
    LogprobTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto id = j.at("trial_id").is_string() ? j["trial_id"].get<std::string>() : j["trial_id"].dump();
            table[id] = {j.at("logp_1").get<double>(), j.at("logp_2").get<double>()};
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return table;
}

namespace {

void check_plan_matches(const FoldPlan& plan, std::span<const ChoiceTrial> trials) {
    if (plan.trial_ids.size() != trials.size()) throw ConfigError("fold plan size does not match the trial list");
    for (std::size_t i = 0; i < trials.size(); ++i)
        if (plan.trial_ids[i] != trials[i].trial_id)
            throw ConfigError("fold plan trial order does not match the trial list at position " + std::to_string(i));
}

// Per-fold selection of one scalar from a grid, scoring sum NLL of logit(i, value).
template <typename ProbFn>
FitReport select_scalar_per_fold(std::span<const ChoiceTrial> trials, const FoldPlan& plan,
                                 std::span<const double> grid, const std::string& model, ProbFn&& probability,
                                 std::vector<double>& chosen) {
    check_plan_matches(plan, trials);
    if (grid.empty()) throw ConfigError("selection grid is empty");
    const ChoiceCounts counts = choice_counts(trials);
    auto nll_of = [&](std::size_t i, double value) {
        const double p = std::clamp(probability(i, value), 1e-300, 1.0 - 1e-16);
        const double s = counts.successes(static_cast<Eigen::Index>(i));
        const double n = counts.totals(static_cast<Eigen::Index>(i));
        return -(s * std::log(p) + (n - s) * std::log1p(-p));
    };

    FitReport report;
    report.model = model;
    for (std::size_t f = 0; f < plan.fold_count(); ++f) {
        const Fold& fold = plan.folds[f];
        std::size_t best = 0;
        std::vector<double> val(grid.size(), 0.0);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            for (auto i : fold.validation) val[k] += nll_of(i, grid[k]);
            if (val[k] < val[best] || (val[k] == val[best] && grid[k] < grid[best])) best = k;
        }
        FoldRecord rec;
        rec.fold = f;
        rec.validation_nll = val[best];
        rec.validation_nll_by_alpha = val;
        for (auto i : fold.train) rec.train_nll += nll_of(i, grid[best]);
        for (auto i : fold.test) {
            rec.test_nll += nll_of(i, grid[best]);
            const double p = probability(i, grid[best]);
            report.predictions.push_back({trials[i].trial_id, f, p});
            if (trials[i].participant_id) report.participant_test_nll[*trials[i].participant_id] += nll_of(i, grid[best]);
            report.choice_count += counts.totals(static_cast<Eigen::Index>(i));
        }
        rec.test_size = fold.test.size();
        chosen.push_back(grid[best]);
        report.aggregate_test_nll += rec.test_nll;
        report.folds.push_back(std::move(rec));
    }
    return report;
}

double modal_value(const std::vector<double>& values) {
    std::map<double, int> freq;
    for (double v : values) ++freq[v];
    double best = 0.0;
    int best_count = -1;
    for (const auto& [v, c] : freq) {  // ascending, so ties keep the smaller value
        if (c > best_count) {
            best = v;
            best_count = c;
        }
    }
    return best;
}

} // namespace

LogprobBaselineResult fit_logprob_baseline(const LogprobTable& logprobs, std::span<const ChoiceTrial> trials,
                                           const FoldPlan& plan, std::span<const double> temperature_grid) {
    std::vector<double> diff(trials.size());
    std::string missing;
    std::size_t missing_count = 0;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        auto it = logprobs.find(trials[i].trial_id);
        if (it == logprobs.end()) {
            ++missing_count;
            missing += " " + trials[i].trial_id;
            continue;
        }
        diff[i] = it->second.logp_1 - it->second.logp_2;
    }
    if (missing_count) throw DataError("missing log-prob records for " + std::to_string(missing_count) + " trial(s):" + missing);
    for (double t : temperature_grid)
        if (!(t > 0.0)) throw ConfigError("inverse temperatures must be positive");

    std::vector<double> chosen;
    LogprobBaselineResult result;
    result.report = select_scalar_per_fold(trials, plan, temperature_grid, "logprob",
                                           [&](std::size_t i, double tau) { return sigmoid(tau * diff[i]); }, chosen);
    result.report.temperature_grid.assign(temperature_grid.begin(), temperature_grid.end());
    for (std::size_t f = 0; f < chosen.size(); ++f) result.report.folds[f].inverse_temperature = chosen[f];
    result.inverse_temperature = modal_value(chosen);
    return result;
}

KalmanBelief KalmanBelief::from_priors(const KalmanPriors& priors) {
    KalmanBelief b;
    b.mean = {priors.prior_mean, priors.prior_mean};
    b.variance = {priors.prior_variance, priors.prior_variance};
    b.noise_variance = priors.noise_variance;
    return b;
}

KalmanBelief kalman_update(const KalmanBelief& belief, int machine, double reward) {
    if (machine != 1 && machine != 2) throw DataError("machine must be 1 or 2");
    KalmanBelief next = belief;
    const auto m = static_cast<std::size_t>(machine - 1);
    const double v = belief.variance[m];
    const double gain = v / (v + belief.noise_variance);
    next.mean[m] = belief.mean[m] + gain * (reward - belief.mean[m]);
    next.variance[m] = (1.0 - gain) * v;
    if (next.variance[m] < kVarianceFloor) {
        next.variance[m] = kVarianceFloor;
        next.variance_floored = true;
    }
    return next;
}

HybridRegressors hybrid_regressors(const HorizonState& state, const KalmanPriors& priors) {
    auto belief = KalmanBelief::from_priors(priors);
    for (const auto& o : state.observations) belief = kalman_update(belief, o.machine, o.reward);
    HybridRegressors r;
    r.value_difference = belief.mean[0] - belief.mean[1];
    r.relative_uncertainty = std::sqrt(belief.variance[0]) - std::sqrt(belief.variance[1]);
    r.scaled_value = r.value_difference / std::sqrt(belief.variance[0] + belief.variance[1]);
    return r;
}

Eigen::MatrixXd hybrid_design(std::span<const ChoiceTrial> trials, const HybridOptions& options) {
    const Eigen::Index cols = options.horizon_specific ? 6 : 3;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(trials.size()), cols);
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto* state = std::get_if<HorizonState>(&trials[i].payload);
        if (state == nullptr) throw ParadigmError("hybrid model needs horizon trials ('" + trials[i].trial_id + "')");
        const auto r = hybrid_regressors(*state, options.priors);
        const auto row = static_cast<Eigen::Index>(i);
        x(row, 0) = r.value_difference;
        x(row, 1) = r.relative_uncertainty;
        x(row, 2) = r.scaled_value;
        if (options.horizon_specific) {
            const double long_horizon = state->game_horizon() == 6 ? 1.0 : 0.0;
            x(row, 3) = long_horizon * r.value_difference;
            x(row, 4) = long_horizon * r.relative_uncertainty;
            x(row, 5) = long_horizon * r.scaled_value;
        }
    }
    return x;
}

FitReport fit_hybrid(std::span<const ChoiceTrial> trials, const FoldPlan& plan, const HybridOptions& options) {
    const Eigen::MatrixXd x = hybrid_design(trials, options);
    CvOptions cv;
    cv.alpha_grid = {0.0};
    cv.scaler = ScalerMode::None;
    cv.fit.fit_intercept = false;
    cv.fit.lbfgs = options.lbfgs;
    cv.threads = options.threads;
    cv.model_name = "hybrid";
    return nested_cv_fit(x, trials, plan, cv);
}

GlmFit fit_hybrid_coefficients(std::span<const ChoiceTrial> trials, const HybridOptions& options) {
    return fit_glm(hybrid_design(trials, options), choice_counts(trials), std::numeric_limits<double>::infinity(),
                   options.lbfgs);
}

double apply_error_model(double probability, double error_rate) {
    return (1.0 - error_rate) * probability + 0.5 * error_rate;
}

std::vector<double> default_error_rate_grid() {
    std::vector<double> grid;
    for (int k = 0; k <= 100; ++k) grid.push_back(k / 100.0);
    return grid;
}

ErrorModelResult fit_error_model(std::span<const double> base_probabilities, std::span<const ChoiceTrial> trials,
                                 const FoldPlan& plan, std::span<const double> error_rate_grid) {
    if (base_probabilities.size() != trials.size()) throw ShapeError("one base probability per trial required");
    for (double e : error_rate_grid)
        if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("error rates must lie in [0, 1]");
    std::vector<double> chosen;
    ErrorModelResult result;
    result.report = select_scalar_per_fold(
        trials, plan, error_rate_grid, "error-model",
        [&](std::size_t i, double eps) { return apply_error_model(base_probabilities[i], eps); }, chosen);
    result.error_rate = modal_value(chosen);
    return result;
}

} // namespace centaur
