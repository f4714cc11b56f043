#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "centaur/embedding_store.hpp"
#include "centaur/lbfgs.hpp"
#include "centaur/report.hpp"
#include "centaur/task_model.hpp"

namespace centaur {

std::vector<double> default_alpha_grid();
std::vector<double> default_temperature_grid();

// How the L2 term is scaled against the summed data term.
//   PerChoice: (alpha/2) * n * |theta|^2, n = total choices in the fitted set,
//              i.e. n times (mean cross-entropy + (alpha/2)|theta|^2).
//   Absolute:  (alpha/2) * |theta|^2.
enum class PenaltyScale { PerChoice, Absolute };

std::string to_string(PenaltyScale scale);
PenaltyScale parse_penalty_scale(const std::string& name);

// Bernoulli targets: successes = choices of option 1 out of totals.
struct ChoiceCounts {
    Eigen::VectorXd successes;
    Eigen::VectorXd totals;

    Eigen::Index size() const { return totals.size(); }
    double total() const { return totals.sum(); }
    ChoiceCounts subset(std::span<const std::size_t> rows) const;
};

ChoiceCounts choice_counts(std::span<const ChoiceTrial> trials);

struct ObjectiveSpec {
    double alpha = 0.0;
    double inverse_temperature = 1.0;
    bool fit_intercept = true;
    PenaltyScale penalty_scale = PenaltyScale::PerChoice;
    // Random-effect penalty is alpha times this multiplier.
    double random_effect_penalty_multiplier = 1.0;
};

// Repeat-weighted logistic negative log-likelihood plus L2 penalty over a
// packed parameter vector [w (d) | c (if intercept) | b_0 ... b_{G-1} (d each)].
// Row i uses logit tau * (x_i . (w + b_{g(i)}) + c); g(i) < 0 means no effect.
class LogisticObjective {
public:
    LogisticObjective(const Eigen::MatrixXd& x, const ChoiceCounts& counts, std::vector<int> groups,
                      int group_count, ObjectiveSpec spec);
    LogisticObjective(const Eigen::MatrixXd& x, const ChoiceCounts& counts, ObjectiveSpec spec);

    Eigen::Index parameter_count() const;
    Eigen::Index dim() const { return x_.cols(); }
    int group_count() const { return group_count_; }
    const ObjectiveSpec& spec() const { return spec_; }

    double operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const;
    double penalty_weight() const;  // multiplier in front of |w|^2 / 2
    Eigen::VectorXd logits(const Eigen::VectorXd& theta) const;
    double data_nll(const Eigen::VectorXd& theta) const;

private:
    const Eigen::MatrixXd& x_;
    const ChoiceCounts& counts_;
    std::vector<int> groups_;
    int group_count_;
    ObjectiveSpec spec_;
};

// Sum over rows of successes*log p + failures*log(1-p), negated, for
// p = sigmoid(logit). Numerically stable for large |logit|.
double bernoulli_nll(const Eigen::VectorXd& logits, const ChoiceCounts& counts);
double bernoulli_nll_term(double logit, double successes, double totals);
double sigmoid(double z);

struct ReadoutModel {
    Eigen::VectorXd weights;
    double intercept = 0.0;
    double alpha = 0.0;
    std::map<std::string, Eigen::VectorXd> random_effects;
    double inverse_temperature = 1.0;

    // Participants without a random effect score with b = 0.
    double logit(const Eigen::Ref<const Eigen::RowVectorXd>& x, const std::optional<std::string>& participant) const;
};

struct ObjectiveValue {
    double value = 0.0;
    Eigen::VectorXd gradient;  // packed as [w | c | b for each model participant, in key order]
};

struct NllOptions {
    PenaltyScale penalty_scale = PenaltyScale::PerChoice;
    double random_effect_penalty_multiplier = 1.0;
};

// Objective and exact gradient of a model on a data set. Rows of x align with trials.
ObjectiveValue nll_and_grad(const ReadoutModel& model, const Eigen::MatrixXd& x, std::span<const ChoiceTrial> trials,
                            const NllOptions& options = {});

struct FitOptions {
    PenaltyScale penalty_scale = PenaltyScale::PerChoice;
    double random_effect_penalty_multiplier = 1.0;
    bool fit_intercept = true;
    LbfgsOptions lbfgs;
};

struct LogisticFit {
    ReadoutModel model;
    int iterations = 0;
    bool converged = false;
    bool hit_iteration_cap = false;
    std::vector<double> trace;
};

// Fixed-effects readout. `init` (optional) supplies the starting point.
LogisticFit fit_logistic(const Eigen::MatrixXd& x, std::span<const ChoiceTrial> trials, double alpha,
                         const std::optional<ReadoutModel>& init = std::nullopt, const FitOptions& options = {});

// Unregularized logistic regression on an explicit design matrix (include
// an intercept column yourself). Coefficients beyond `coefficient_cap` in
// absolute value mark separation and are clamped to the cap.
struct GlmFit {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd standard_errors;  // NaN when the information matrix is singular
    double nll = 0.0;
    int iterations = 0;
    bool converged = false;
    bool separated = false;
    bool degenerate = false;  // rank-deficient design
};

GlmFit fit_glm(const Eigen::MatrixXd& design, const ChoiceCounts& counts, double coefficient_cap = 50.0,
               const LbfgsOptions& lbfgs = {});

enum class ScalerMode { PerFold, Global, None };

std::string to_string(ScalerMode mode);
ScalerMode parse_scaler_mode(const std::string& name);

struct CvOptions {
    std::vector<double> alpha_grid = default_alpha_grid();
    ScalerMode scaler = ScalerMode::PerFold;
    FitOptions fit;
    unsigned threads = 0;  // 0 = hardware concurrency
    std::string model_name = "centaur";
};

// Nested cross-validation over a fold plan whose trial ids match `trials`
// position by position. Per fold: scaler on train, one fit per alpha
// (descending, warm-started), alpha picked by validation NLL with ties to
// the smaller alpha, chosen model scored on test.
FitReport nested_cv_fit(const Eigen::MatrixXd& x, std::span<const ChoiceTrial> trials, const FoldPlan& plan,
                        const CvOptions& options = {});
FitReport nested_cv_fit(const EmbeddingStore& store, std::span<const ChoiceTrial> trials, const FoldPlan& plan,
                        const CvOptions& options = {});

// Same protocol with a per-participant deviation vector added to the weights.
// Every trial needs a participant id (DataError otherwise).
FitReport fit_random_effects(const Eigen::MatrixXd& x, std::span<const ChoiceTrial> trials, const FoldPlan& plan,
                             const CvOptions& options = {});
FitReport fit_random_effects(const EmbeddingStore& store, std::span<const ChoiceTrial> trials, const FoldPlan& plan,
                             const CvOptions& options = {});

struct TaskData {
    const EmbeddingStore* store = nullptr;
    std::span<const ChoiceTrial> trials;
};

struct TransferOptions {
    std::size_t holdout_folds = 8;
    std::uint64_t seed = 0;
    std::vector<double> alpha_grid = default_alpha_grid();
    std::vector<double> temperature_grid = default_temperature_grid();
    FitOptions fit;
    unsigned threads = 0;
};

// Fits the readout on the concatenated training tasks (one model per alpha),
// splits the hold-out task into folds, and for each fold picks (alpha, tau)
// on the remaining folds before scoring p = sigmoid(tau * (x.w + c)).
FitReport transfer_fit(std::span<const TaskData> train_tasks, const TaskData& holdout,
                       const TransferOptions& options = {});

} // namespace centaur
