#include "centaur/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "centaur/error.hpp"

namespace centaur {

namespace {

struct Pair {
    Eigen::VectorXd s;
    Eigen::VectorXd y;
    double rho;
};

// Two-loop recursion: returns -H g.
Eigen::VectorXd direction(const std::deque<Pair>& memory, const Eigen::VectorXd& g) {
    Eigen::VectorXd q = g;
    std::vector<double> a(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
        a[k] = memory[k].rho * memory[k].s.dot(q);
        q -= a[k] * memory[k].y;
    }
    if (!memory.empty()) {
        const auto& last = memory.back();
        q *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
        const double b = memory[k].rho * memory[k].y.dot(q);
        q += (a[k] - b) * memory[k].s;
    }
    return -q;
}

} // namespace

LbfgsResult minimize_lbfgs(const Objective& objective, Eigen::VectorXd x0, const LbfgsOptions& options) {
    LbfgsResult result;
    Eigen::VectorXd x = std::move(x0);
    Eigen::VectorXd g(x.size());
    double f = objective(x, g);
    result.evaluations = 1;
    if (!std::isfinite(f) || !g.allFinite()) {
        std::ostringstream msg;
        msg << "objective is not finite at the initial point (f = " << f << ")";
        throw OptimizerError(msg.str());
    }
    if (options.record_trace) result.trace.push_back(f);

    std::deque<Pair> memory;
    Eigen::VectorXd x_new(x.size());
    Eigen::VectorXd g_new(x.size());

    int iter = 0;
    int flat_steps = 0;
    while (true) {
        result.gradient_norm = g.size() ? g.lpNorm<Eigen::Infinity>() : 0.0;
        if (result.gradient_norm <= options.gradient_tolerance) {
            result.converged = true;
            break;
        }
        if (iter >= options.max_iterations) {
            result.hit_iteration_cap = true;
            break;
        }

        Eigen::VectorXd d = direction(memory, g);
        double slope = g.dot(d);
        if (!(slope < 0.0)) {
            memory.clear();
            d = -g;
            slope = -g.squaredNorm();
        }
        // Without curvature information, start with a unit-length step.
        double step = memory.empty() ? std::min(1.0, 1.0 / d.norm()) : 1.0;

        bool accepted = false;
        bool saw_finite = false;
        double f_new = f;
        for (int bt = 0; bt < options.max_backtracks; ++bt) {
            x_new = x + step * d;
            f_new = objective(x_new, g_new);
            ++result.evaluations;
            const bool finite = std::isfinite(f_new) && g_new.allFinite();
            saw_finite = saw_finite || finite;
            if (finite && f_new <= f + options.armijo_c * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!saw_finite) {
                std::ostringstream msg;
                msg << "objective non-finite along the whole line search at iteration " << iter
                    << " (f = " << f << ", |g|inf = " << result.gradient_norm << ")";
                throw OptimizerError(msg.str());
            }
            if (!memory.empty()) {
                memory.clear();  // retry once from steepest descent
                continue;
            }
            result.line_search_failed = true;
            break;
        }

        Eigen::VectorXd s = x_new - x;
        Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm() && sy > 0.0) {
            memory.push_back({std::move(s), std::move(y), 1.0 / sy});
            if (static_cast<int>(memory.size()) > options.history) memory.pop_front();
        }
        const bool flat = f - f_new <= options.relative_decrease * std::max(1.0, std::abs(f));
        flat_steps = flat ? flat_steps + 1 : 0;
        x.swap(x_new);
        g.swap(g_new);
        f = f_new;
        ++iter;
        if (options.record_trace) result.trace.push_back(f);
        if (flat_steps >= options.stall_steps) {
            result.gradient_norm = g.lpNorm<Eigen::Infinity>();
            result.converged = result.stalled = true;
            break;
        }
    }

    result.x = std::move(x);
    result.value = f;
    result.iterations = iter;
    return result;
}

} // namespace centaur
