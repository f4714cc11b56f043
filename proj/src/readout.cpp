#include "centaur/readout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "centaur/error.hpp"
#include "centaur/parallel.hpp"

namespace centaur {

std::vector<double> default_alpha_grid() { return {0.0, 0.0001, 0.0003, 0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0}; }

std::vector<double> default_temperature_grid() {
    std::vector<double> grid;
    for (int k = 1; k <= 20; ++k) grid.push_back(k / 20.0);
    return grid;
}

std::string to_string(PenaltyScale scale) { return scale == PenaltyScale::PerChoice ? "per_choice" : "absolute"; }

PenaltyScale parse_penalty_scale(const std::string& name) {
    if (name == "per_choice") return PenaltyScale::PerChoice;
    if (name == "absolute") return PenaltyScale::Absolute;
    throw ConfigError("unknown penalty scale '" + name + "' (expected per_choice or absolute)");
}

std::string to_string(ScalerMode mode) {
    switch (mode) {
    case ScalerMode::PerFold: return "per_fold";
    case ScalerMode::Global: return "global";
    case ScalerMode::None: return "none";
    }
    return "unknown";
}

ScalerMode parse_scaler_mode(const std::string& name) {
    if (name == "per_fold") return ScalerMode::PerFold;
    if (name == "global") return ScalerMode::Global;
    if (name == "none") return ScalerMode::None;
    throw ConfigError("unknown scaler mode '" + name + "' (expected per_fold, global or none)");
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

} // namespace

double bernoulli_nll_term(double logit, double successes, double totals) {
    return totals * softplus(logit) - successes * logit;
}

double bernoulli_nll(const Eigen::VectorXd& logits, const ChoiceCounts& counts) {
    if (logits.size() != counts.size()) throw ShapeError("logit count does not match targets");
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i)
        total += bernoulli_nll_term(logits(i), counts.successes(i), counts.totals(i));
    return total;
}

ChoiceCounts ChoiceCounts::subset(std::span<const std::size_t> rows) const {
    ChoiceCounts out;
    out.successes.resize(static_cast<Eigen::Index>(rows.size()));
    out.totals.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        out.successes(static_cast<Eigen::Index>(k)) = successes(static_cast<Eigen::Index>(rows[k]));
        out.totals(static_cast<Eigen::Index>(k)) = totals(static_cast<Eigen::Index>(rows[k]));
    }
    return out;
}

ChoiceCounts choice_counts(std::span<const ChoiceTrial> trials) {
    ChoiceCounts c;
    c.successes.resize(static_cast<Eigen::Index>(trials.size()));
    c.totals.resize(static_cast<Eigen::Index>(trials.size()));
    for (std::size_t i = 0; i < trials.size(); ++i) {
        c.successes(static_cast<Eigen::Index>(i)) = trials[i].choice_count_1;
        c.totals(static_cast<Eigen::Index>(i)) = trials[i].repeat_count;
    }
    return c;
}

LogisticObjective::LogisticObjective(const Eigen::MatrixXd& x, const ChoiceCounts& counts, std::vector<int> groups,
                                     int group_count, ObjectiveSpec spec)
    : x_(x), counts_(counts), groups_(std::move(groups)), group_count_(group_count), spec_(spec) {
    if (x_.rows() != counts_.size()) throw ShapeError("design rows do not match target count");
    if (group_count_ > 0 && static_cast<Eigen::Index>(groups_.size()) != x_.rows())
        throw ShapeError("group index length does not match design rows");
}

LogisticObjective::LogisticObjective(const Eigen::MatrixXd& x, const ChoiceCounts& counts, ObjectiveSpec spec)
    : LogisticObjective(x, counts, {}, 0, spec) {}

Eigen::Index LogisticObjective::parameter_count() const {
    return x_.cols() * (1 + group_count_) + (spec_.fit_intercept ? 1 : 0);
}

double LogisticObjective::penalty_weight() const {
    return spec_.penalty_scale == PenaltyScale::PerChoice ? spec_.alpha * counts_.total() : spec_.alpha;
}

Eigen::VectorXd LogisticObjective::logits(const Eigen::VectorXd& theta) const {
    if (theta.size() != parameter_count()) throw ShapeError("parameter vector has the wrong length");
    const Eigen::Index d = x_.cols();
    Eigen::VectorXd z = x_ * theta.head(d);
    if (spec_.fit_intercept) z.array() += theta(d);
    if (group_count_ > 0) {
        const Eigen::Index offset = d + (spec_.fit_intercept ? 1 : 0);
        for (Eigen::Index i = 0; i < x_.rows(); ++i) {
            const int g = groups_[static_cast<std::size_t>(i)];
            if (g >= 0) z(i) += x_.row(i).dot(theta.segment(offset + g * d, d));
        }
    }
    return z * spec_.inverse_temperature;
}

double LogisticObjective::data_nll(const Eigen::VectorXd& theta) const { return bernoulli_nll(logits(theta), counts_); }

double LogisticObjective::operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
    const Eigen::Index d = x_.cols();
    const double tau = spec_.inverse_temperature;
    const Eigen::VectorXd z = logits(theta);

    double value = 0.0;
    Eigen::VectorXd r(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        value += bernoulli_nll_term(z(i), counts_.successes(i), counts_.totals(i));
        r(i) = tau * (counts_.totals(i) * sigmoid(z(i)) - counts_.successes(i));
    }

    grad.resize(parameter_count());
    grad.head(d).noalias() = x_.transpose() * r;
    Eigen::Index offset = d;
    if (spec_.fit_intercept) grad(offset++) = r.sum();
    if (group_count_ > 0) {
        grad.tail(d * group_count_).setZero();
        for (Eigen::Index i = 0; i < x_.rows(); ++i) {
            const int g = groups_[static_cast<std::size_t>(i)];
            if (g >= 0) grad.segment(offset + g * d, d) += r(i) * x_.row(i).transpose();
        }
    }

    const double lambda = penalty_weight();
    if (lambda > 0.0) {
        const auto w = theta.head(d);
        value += 0.5 * lambda * w.squaredNorm();
        grad.head(d) += lambda * w;
        if (group_count_ > 0) {
            const double lb = lambda * spec_.random_effect_penalty_multiplier;
            const auto b = theta.tail(d * group_count_);
            value += 0.5 * lb * b.squaredNorm();
            grad.tail(d * group_count_) += lb * b;
        }
    }
    return value;
}

double ReadoutModel::logit(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                           const std::optional<std::string>& participant) const {
    double z = x.dot(weights) + intercept;
    if (participant) {
        auto it = random_effects.find(*participant);
        if (it != random_effects.end()) z += x.dot(it->second);
    }
    return inverse_temperature * z;
}

ObjectiveValue nll_and_grad(const ReadoutModel& model, const Eigen::MatrixXd& x, std::span<const ChoiceTrial> trials,
                            const NllOptions& options) {
    if (x.rows() != static_cast<Eigen::Index>(trials.size())) throw ShapeError("row count does not match trial count");
    if (x.cols() != model.weights.size()) throw ShapeError("embedding dim does not match model weights");
    const Eigen::Index d = x.cols();

    std::map<std::string, int> group_of;
    for (const auto& [pid, b] : model.random_effects) {
        if (b.size() != d) throw ShapeError("random-effect vector for '" + pid + "' has the wrong length");
        const int next = static_cast<int>(group_of.size());
        group_of.emplace(pid, next);
    }
    std::vector<int> groups(trials.size(), -1);
    if (!group_of.empty()) {
        for (std::size_t i = 0; i < trials.size(); ++i) {
            if (!trials[i].participant_id) continue;
            auto it = group_of.find(*trials[i].participant_id);
            if (it != group_of.end()) groups[i] = it->second;
        }
    }

    const ChoiceCounts counts = choice_counts(trials);
    ObjectiveSpec spec;
    spec.alpha = model.alpha;
    spec.inverse_temperature = model.inverse_temperature;
    spec.fit_intercept = true;
    spec.penalty_scale = options.penalty_scale;
    spec.random_effect_penalty_multiplier = options.random_effect_penalty_multiplier;
    const int group_count = static_cast<int>(group_of.size());
    LogisticObjective objective(x, counts, std::move(groups), group_count, spec);

    Eigen::VectorXd theta(objective.parameter_count());
    theta.head(d) = model.weights;
    theta(d) = model.intercept;
    Eigen::Index offset = d + 1;
    for (const auto& [pid, b] : model.random_effects) {
        theta.segment(offset, d) = b;
        offset += d;
    }
    ObjectiveValue out;
    out.value = objective(theta, out.gradient);
    return out;
}

LogisticFit fit_logistic(const Eigen::MatrixXd& x, std::span<const ChoiceTrial> trials, double alpha,
                         const std::optional<ReadoutModel>& init, const FitOptions& options) {
    if (alpha < 0.0) throw ConfigError("alpha must be non-negative");
    if (x.rows() != static_cast<Eigen::Index>(trials.size())) throw ShapeError("row count does not match trial count");
    const ChoiceCounts counts = choice_counts(trials);
    ObjectiveSpec spec;
    spec.alpha = alpha;
    spec.fit_intercept = options.fit_intercept;
    spec.penalty_scale = options.penalty_scale;
    LogisticObjective objective(x, counts, spec);

    const Eigen::Index d = x.cols();
    Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(objective.parameter_count());
    if (init) {
        if (init->weights.size() != d) throw ShapeError("initial weights have the wrong length");
        theta0.head(d) = init->weights;
        if (options.fit_intercept) theta0(d) = init->intercept;
    }
    const auto r = minimize_lbfgs(std::cref(objective), theta0, options.lbfgs);

    LogisticFit fit;
    fit.model.weights = r.x.head(d);
    fit.model.intercept = options.fit_intercept ? r.x(d) : 0.0;
    fit.model.alpha = alpha;
    fit.iterations = r.iterations;
    fit.converged = r.converged;
    fit.hit_iteration_cap = r.hit_iteration_cap;
    fit.trace = r.trace;
    return fit;
}

GlmFit fit_glm(const Eigen::MatrixXd& design, const ChoiceCounts& counts, double coefficient_cap,
               const LbfgsOptions& lbfgs) {
    ObjectiveSpec spec;
    spec.fit_intercept = false;
    LogisticObjective objective(design, counts, spec);

    GlmFit fit;
    const Eigen::Index p = design.cols();
    fit.degenerate = design.rows() == 0 || Eigen::FullPivLU<Eigen::MatrixXd>(design).rank() < p;

    const auto r = minimize_lbfgs(std::cref(objective), Eigen::VectorXd::Zero(p), lbfgs);
    fit.coefficients = r.x;
    fit.iterations = r.iterations;
    fit.converged = r.converged;
    if (fit.coefficients.lpNorm<Eigen::Infinity>() > coefficient_cap) {
        fit.separated = true;
        fit.coefficients = fit.coefficients.cwiseMax(-coefficient_cap).cwiseMin(coefficient_cap);
    }
    fit.nll = objective.data_nll(fit.coefficients);

    fit.standard_errors = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    if (!fit.degenerate && !fit.separated) {
        const Eigen::VectorXd z = design * fit.coefficients;
        Eigen::VectorXd w(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double q = sigmoid(z(i));
            w(i) = counts.totals(i) * q * (1.0 - q);
        }
        const Eigen::MatrixXd info = design.transpose() * w.asDiagonal() * design;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
        if (lu.isInvertible()) fit.standard_errors = lu.inverse().diagonal().cwiseSqrt();
    }
    return fit;
}

namespace {

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(rows[k]));
    return out;
}

std::vector<int> select_groups(const std::vector<int>& groups, std::span<const std::size_t> rows) {
    if (groups.empty()) return {};
    std::vector<int> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(groups[r]);
    return out;
}

void check_plan(const FoldPlan& plan, std::span<const ChoiceTrial> trials) {
    if (plan.trial_ids.size() != trials.size()) throw ConfigError("fold plan size does not match the trial list");
    for (std::size_t i = 0; i < trials.size(); ++i)
        if (plan.trial_ids[i] != trials[i].trial_id)
            throw ConfigError("fold plan trial order does not match the trial list at position " + std::to_string(i));
}

// Grid indices ordered by decreasing alpha (the warm-start path).
std::vector<std::size_t> descending_order(const std::vector<double>& grid) {
    std::vector<std::size_t> order(grid.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return grid[a] > grid[b]; });
    return order;
}

// Index of the minimum; exact ties go to the smaller grid value.
std::size_t argmin_prefer_small(const std::vector<double>& values, const std::vector<double>& grid) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < values.size(); ++k) {
        if (values[k] < values[best] || (values[k] == values[best] && grid[k] < grid[best])) best = k;
    }
    return best;
}

struct FoldOutcome {
    FoldRecord record;
    std::vector<TrialPrediction> predictions;
    std::vector<std::pair<std::string, double>> participant_nll;
};

FitReport cross_validate(const Eigen::MatrixXd& x, std::span<const ChoiceTrial> trials, const FoldPlan& plan,
                         const CvOptions& options, bool random_effects) {
    check_plan(plan, trials);
    if (options.alpha_grid.empty()) throw ConfigError("alpha grid is empty");
    for (double a : options.alpha_grid)
        if (!(a >= 0.0)) throw ConfigError("alpha values must be non-negative");
    if (x.rows() != static_cast<Eigen::Index>(trials.size())) throw ShapeError("row count does not match trial count");

    const ChoiceCounts counts = choice_counts(trials);

    std::vector<int> groups;
    int group_count = 0;
    if (random_effects) {
        std::set<std::string> ids;
        for (const auto& t : trials) {
            if (!t.participant_id) throw DataError("trial '" + t.trial_id + "' has no participant_id");
            ids.insert(*t.participant_id);
        }
        std::map<std::string, int> index;
        for (const auto& id : ids) index.emplace(id, static_cast<int>(index.size()));
        for (const auto& t : trials) groups.push_back(index.at(*t.participant_id));
        group_count = static_cast<int>(index.size());
    }

    std::optional<FeatureScaler> global_scaler;
    if (options.scaler == ScalerMode::Global) global_scaler = fit_scaler(x);

    const auto path = descending_order(options.alpha_grid);
    const std::size_t grid_size = options.alpha_grid.size();
    std::vector<FoldOutcome> outcomes(plan.fold_count());

    parallel_for(plan.fold_count(), options.threads, [&](std::size_t f) {
        const Fold& fold = plan.folds[f];
        if (fold.train.empty()) throw ConfigError("fold " + std::to_string(f) + " has an empty training set");

        Eigen::MatrixXd xs;
        switch (options.scaler) {
        case ScalerMode::PerFold: xs = fit_scaler(x, fold.train).transform(x); break;
        case ScalerMode::Global: xs = global_scaler->transform(x); break;
        case ScalerMode::None: xs = x; break;
        }
        const Eigen::MatrixXd x_train = select_rows(xs, fold.train);
        const Eigen::MatrixXd x_val = select_rows(xs, fold.validation);
        const Eigen::MatrixXd x_test = select_rows(xs, fold.test);
        const ChoiceCounts c_train = counts.subset(fold.train);
        const ChoiceCounts c_val = counts.subset(fold.validation);
        const ChoiceCounts c_test = counts.subset(fold.test);
        const auto g_train = select_groups(groups, fold.train);
        const auto g_val = select_groups(groups, fold.validation);
        const auto g_test = select_groups(groups, fold.test);

        ObjectiveSpec spec;
        spec.fit_intercept = options.fit.fit_intercept;
        spec.penalty_scale = options.fit.penalty_scale;
        spec.random_effect_penalty_multiplier = options.fit.random_effect_penalty_multiplier;

        FoldOutcome& out = outcomes[f];
        out.record.fold = f;
        out.record.validation_nll_by_alpha.assign(grid_size, 0.0);
        std::vector<Eigen::VectorXd> thetas(grid_size);
        std::vector<bool> converged(grid_size, false);

        Eigen::VectorXd theta;
        for (std::size_t k : path) {
            spec.alpha = options.alpha_grid[k];
            LogisticObjective train_objective(x_train, c_train, g_train, group_count, spec);
            if (theta.size() != train_objective.parameter_count())
                theta = Eigen::VectorXd::Zero(train_objective.parameter_count());
            const auto r = minimize_lbfgs(std::cref(train_objective), theta, options.fit.lbfgs);
            theta = r.x;
            thetas[k] = r.x;
            converged[k] = r.converged;
            out.record.iterations += r.iterations;
            LogisticObjective val_objective(x_val, c_val, g_val, group_count, spec);
            out.record.validation_nll_by_alpha[k] = fold.validation.empty() ? 0.0 : val_objective.data_nll(r.x);
        }

        const std::size_t best = argmin_prefer_small(out.record.validation_nll_by_alpha, options.alpha_grid);
        spec.alpha = options.alpha_grid[best];
        const Eigen::VectorXd& chosen = thetas[best];
        out.record.alpha = spec.alpha;
        out.record.converged = converged[best];
        out.record.validation_nll = out.record.validation_nll_by_alpha[best];
        out.record.train_nll = LogisticObjective(x_train, c_train, g_train, group_count, spec).data_nll(chosen);

        LogisticObjective test_objective(x_test, c_test, g_test, group_count, spec);
        const Eigen::VectorXd z = test_objective.logits(chosen);
        out.record.test_size = fold.test.size();
        for (std::size_t k = 0; k < fold.test.size(); ++k) {
            const auto ki = static_cast<Eigen::Index>(k);
            const double term = bernoulli_nll_term(z(ki), c_test.successes(ki), c_test.totals(ki));
            out.record.test_nll += term;
            const ChoiceTrial& trial = trials[fold.test[k]];
            out.predictions.push_back({trial.trial_id, f, sigmoid(z(ki))});
            if (trial.participant_id) out.participant_nll.emplace_back(*trial.participant_id, term);
        }
    });

    FitReport report;
    report.model = options.model_name;
    report.alpha_grid = options.alpha_grid;
    for (auto& o : outcomes) {
        report.aggregate_test_nll += o.record.test_nll;
        report.all_converged = report.all_converged && o.record.converged;
        for (const auto& [pid, nll] : o.participant_nll) report.participant_test_nll[pid] += nll;
        for (auto& p : o.predictions) report.predictions.push_back(std::move(p));
        report.folds.push_back(std::move(o.record));
    }
    for (const auto& fold : plan.folds)
        for (auto i : fold.test) report.choice_count += counts.totals(static_cast<Eigen::Index>(i));
    return report;
}

} // namespace

FitReport nested_cv_fit(const Eigen::MatrixXd& x, std::span<const ChoiceTrial> trials, const FoldPlan& plan,
                        const CvOptions& options) {
    return cross_validate(x, trials, plan, options, false);
}

FitReport nested_cv_fit(const EmbeddingStore& store, std::span<const ChoiceTrial> trials, const FoldPlan& plan,
                        const CvOptions& options) {
    const auto ids = trial_ids(trials);
    return cross_validate(store.matrix(ids), trials, plan, options, false);
}

FitReport fit_random_effects(const Eigen::MatrixXd& x, std::span<const ChoiceTrial> trials, const FoldPlan& plan,
                             const CvOptions& options) {
    return cross_validate(x, trials, plan, options, true);
}

FitReport fit_random_effects(const EmbeddingStore& store, std::span<const ChoiceTrial> trials, const FoldPlan& plan,
                             const CvOptions& options) {
    const auto ids = trial_ids(trials);
    return cross_validate(store.matrix(ids), trials, plan, options, true);
}

FitReport transfer_fit(std::span<const TaskData> train_tasks, const TaskData& holdout, const TransferOptions& options) {
    if (train_tasks.empty()) throw ConfigError("transfer needs at least one training task");
    if (options.alpha_grid.empty() || options.temperature_grid.empty()) throw ConfigError("empty alpha or temperature grid");
    for (double t : options.temperature_grid)
        if (!(t > 0.0)) throw ConfigError("inverse temperatures must be positive");
    if (holdout.store == nullptr) throw ConfigError("hold-out task has no embedding store");
    if (options.holdout_folds < 2) throw ConfigError("hold-out protocol needs at least two folds");
    if (holdout.trials.size() < options.holdout_folds) throw ConfigError("fewer hold-out trials than folds");

    // Concatenate training tasks.
    Eigen::Index rows = 0;
    const std::uint32_t dim = holdout.store->dim();
    for (const auto& task : train_tasks) {
        if (task.store == nullptr) throw ConfigError("training task has no embedding store");
        if (task.store->dim() != dim) throw ShapeError("training and hold-out embedding dims differ");
        rows += static_cast<Eigen::Index>(task.trials.size());
    }
    Eigen::MatrixXd x_train(rows, dim);
    std::vector<ChoiceTrial> train_trials;
    Eigen::Index at = 0;
    for (const auto& task : train_tasks) {
        const auto ids = trial_ids(task.trials);
        const Eigen::MatrixXd block = task.store->matrix(ids);
        x_train.middleRows(at, block.rows()) = block;
        at += block.rows();
        train_trials.insert(train_trials.end(), task.trials.begin(), task.trials.end());
    }
    const FeatureScaler scaler = fit_scaler(x_train);
    scaler.transform_in_place(x_train);
    const ChoiceCounts c_train = choice_counts(train_trials);

    const auto hold_ids = trial_ids(holdout.trials);
    const Eigen::MatrixXd x_hold = scaler.transform(holdout.store->matrix(hold_ids));
    const ChoiceCounts c_hold = choice_counts(holdout.trials);

    // One readout per alpha on the training tasks, shared by all hold-out folds.
    const std::size_t na = options.alpha_grid.size();
    std::vector<Eigen::VectorXd> thetas(na);
    std::vector<bool> converged(na, false);
    std::vector<int> iterations(na, 0);
    std::vector<double> train_nll(na, 0.0);
    ObjectiveSpec spec;
    spec.fit_intercept = options.fit.fit_intercept;
    spec.penalty_scale = options.fit.penalty_scale;
    Eigen::VectorXd theta;
    for (std::size_t k : descending_order(options.alpha_grid)) {
        spec.alpha = options.alpha_grid[k];
        LogisticObjective objective(x_train, c_train, spec);
        if (theta.size() != objective.parameter_count()) theta = Eigen::VectorXd::Zero(objective.parameter_count());
        const auto r = minimize_lbfgs(std::cref(objective), theta, options.fit.lbfgs);
        theta = r.x;
        thetas[k] = r.x;
        converged[k] = r.converged;
        iterations[k] = r.iterations;
        train_nll[k] = objective.data_nll(r.x);
    }

    // Untempered hold-out logits per alpha.
    std::vector<Eigen::VectorXd> hold_logits(na);
    spec.inverse_temperature = 1.0;
    for (std::size_t k = 0; k < na; ++k) {
        spec.alpha = options.alpha_grid[k];
        hold_logits[k] = LogisticObjective(x_hold, c_hold, spec).logits(thetas[k]);
    }

    const auto blocks = make_partition(holdout.trials.size(), options.holdout_folds, options.seed);
    const std::size_t nt = options.temperature_grid.size();

    FitReport report;
    report.model = "transfer";
    report.alpha_grid = options.alpha_grid;
    report.temperature_grid = options.temperature_grid;

    for (std::size_t f = 0; f < blocks.size(); ++f) {
        std::vector<char> in_test(holdout.trials.size(), 0);
        for (auto i : blocks[f]) in_test[i] = 1;

        FoldRecord rec;
        rec.fold = f;
        rec.validation_nll_by_alpha.assign(na, std::numeric_limits<double>::infinity());
        double best_val = std::numeric_limits<double>::infinity();
        std::size_t best_a = 0, best_t = 0;
        for (std::size_t a = 0; a < na; ++a) {
            for (std::size_t t = 0; t < nt; ++t) {
                const double tau = options.temperature_grid[t];
                double val = 0.0;
                for (std::size_t i = 0; i < holdout.trials.size(); ++i) {
                    if (in_test[i]) continue;
                    const auto ii = static_cast<Eigen::Index>(i);
                    val += bernoulli_nll_term(tau * hold_logits[a](ii), c_hold.successes(ii), c_hold.totals(ii));
                }
                rec.validation_nll_by_alpha[a] = std::min(rec.validation_nll_by_alpha[a], val);
                const double ga = options.alpha_grid[a], gb = options.alpha_grid[best_a];
                const bool better = val < best_val ||
                                    (val == best_val && (ga < gb || (ga == gb && tau < options.temperature_grid[best_t])));
                if (better) {
                    best_val = val;
                    best_a = a;
                    best_t = t;
                }
            }
        }
        const double tau = options.temperature_grid[best_t];
        rec.alpha = options.alpha_grid[best_a];
        rec.inverse_temperature = tau;
        rec.validation_nll = best_val;
        rec.train_nll = train_nll[best_a];
        rec.iterations = iterations[best_a];
        rec.converged = converged[best_a];
        rec.test_size = blocks[f].size();
        for (auto i : blocks[f]) {
            const auto ii = static_cast<Eigen::Index>(i);
            const double z = tau * hold_logits[best_a](ii);
            const double term = bernoulli_nll_term(z, c_hold.successes(ii), c_hold.totals(ii));
            rec.test_nll += term;
            report.predictions.push_back({holdout.trials[i].trial_id, f, sigmoid(z)});
            if (holdout.trials[i].participant_id) report.participant_test_nll[*holdout.trials[i].participant_id] += term;
            report.choice_count += c_hold.totals(ii);
        }
        report.aggregate_test_nll += rec.test_nll;
        report.all_converged = report.all_converged && rec.converged;
        report.folds.push_back(std::move(rec));
    }
    return report;
}

} // namespace centaur
