#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace centaur {

// Returns f(x) and writes the gradient into `grad` (already sized).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsOptions {
    int history = 10;
    double armijo_c = 1e-4;
    double gradient_tolerance = 1e-6;  // on the infinity norm
    int max_iterations = 500;
    int max_backtracks = 60;
    // Also stop once `stall_steps` consecutive accepted steps each lower f by
    // at most relative_decrease * max(1, |f|): the objective has reached its
    // floating-point resolution even if the gradient norm has not.
    double relative_decrease = 1e-14;
    int stall_steps = 5;
    bool record_trace = false;
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    double gradient_norm = 0.0;  // infinity norm at x
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;          // gradient tolerance or stall rule met
    bool stalled = false;            // stopped by the stall rule
    bool hit_iteration_cap = false;
    bool line_search_failed = false;
    std::vector<double> trace;  // objective after each accepted step (incl. start)
};

// Limited-memory BFGS with a backtracking (halving) Armijo line search.
// Throws OptimizerError if the objective is non-finite at the start point or
// stays non-finite along a whole backtracking sequence.
LbfgsResult minimize_lbfgs(const Objective& objective, Eigen::VectorXd x0, const LbfgsOptions& options = {});

} // namespace centaur
